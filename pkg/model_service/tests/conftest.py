import json
from pathlib import Path

import pytest

from model_service.model import ModelConfig, init_base

GOOD_SHAPES = [
    "<?php\n$var0 = 'safe-{i}';\necho $var0; /* taint: $var0 */\n",
    "<?php\n$var0 = htmlspecialchars($_GET['k{i}']);\necho $var0; /* taint: $var0 */\n",
]
BAD_SHAPES = [
    "<?php\n$var0 = $_GET['k{i}'];\necho $var0; /* taint: $var0 */\n",
    "<?php\n$var0 = $_POST['p{i}'];\necho '<b>' . $var0; /* taint: $var0 */\n",
]


def make_toy_dataset(path: Path, n: int, offset: int = 0) -> None:
    """n labeled samples in the pipeline's JSONL schema, half good half bad."""
    records = []
    for i in range(n):
        bad = i % 2 == 1
        shapes = BAD_SHAPES if bad else GOOD_SHAPES
        code = shapes[i % len(shapes)].format(i=offset + i)
        records.append({
            "id": f"toy{offset + i}",
            "cwe": "CWE-79",
            "code": code,
            "label": "bad" if bad else "good",
            "project": f"proj{i % 4}",
            "file": f"f{i}.php",
            "line": 3,
            "taint_var": "var0",
            "synthetic": False,
        })
    path.write_text("".join(json.dumps(r) + "\n" for r in records),
                    encoding="utf-8")


@pytest.fixture(scope="session")
def toy_data(tmp_path_factory):
    root = tmp_path_factory.mktemp("toy")
    train = root / "train.jsonl"
    val = root / "val.jsonl"
    make_toy_dataset(train, 64)
    make_toy_dataset(val, 16, offset=100)
    return train, val


@pytest.fixture(scope="session")
def base_checkpoint(tmp_path_factory):
    out = tmp_path_factory.mktemp("ckpt") / "base"
    init_base(out, ModelConfig(), seed=7)
    return out
