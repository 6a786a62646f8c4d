import sys
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"
sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return FIXTURES / "corpus"


@pytest.fixture(scope="session")
def scanproj_dir() -> Path:
    return FIXTURES / "scanproj"


@pytest.fixture(scope="session")
def threeproj_dir() -> Path:
    return FIXTURES / "threeproj"


@pytest.fixture(scope="session")
def corpus_files(corpus_dir) -> list[Path]:
    files = sorted(corpus_dir.glob("*.php"))
    assert len(files) >= 60
    return files
