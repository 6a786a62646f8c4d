"""The classify wire protocol shared by clients, mocks, and model servers.

POST {base_url}/v1/classify
  request:  {"cwe": "CWE-79", "codes": ["<?php ...", ...]}
  response: {"predictions": [{"label": "bad", "score": 0.93}, ...]}
            status 200; predictions align one-to-one with codes
  errors:   4xx with {"error": "<reason>"} for malformed requests

``run_conformance`` drives any endpoint through the protocol's contract and
is reused by the model-service tests, so a server that passes here
interoperates with the client bit-exactly.
"""

from __future__ import annotations

import json

CLASSIFY_PATH = "/v1/classify"
VALID_LABELS = ("good", "bad")
VALID_CWES = ("CWE-79", "CWE-89")


class ProtocolViolation(Exception):
    pass


def parse_request(body: bytes | str) -> tuple[str, list[str]]:
    """Validate a classify request body; returns (cwe, codes)."""
    try:
        obj = json.loads(body)
    except (json.JSONDecodeError, TypeError) as e:
        raise ProtocolViolation(f"invalid JSON: {e}") from e
    if not isinstance(obj, dict):
        raise ProtocolViolation("request body must be a JSON object")
    if "cwe" not in obj or "codes" not in obj:
        raise ProtocolViolation("request requires 'cwe' and 'codes'")
    cwe = obj["cwe"]
    codes = obj["codes"]
    if cwe not in VALID_CWES:
        raise ProtocolViolation(f"cwe must be one of {list(VALID_CWES)}")
    if not isinstance(codes, list) or not all(isinstance(c, str) for c in codes):
        raise ProtocolViolation("codes must be a list of strings")
    return cwe, codes


def make_request(cwe: str, codes: list[str]) -> dict:
    return {"cwe": cwe, "codes": codes}


def make_response(predictions: list[tuple[str, float]]) -> dict:
    return {"predictions": [{"label": label, "score": score}
                            for label, score in predictions]}


def make_error(message: str) -> dict:
    return {"error": message}


def parse_response(body: bytes | str, expected: int) -> list[tuple[str, float]]:
    """Validate a classify response; returns [(label, score), ...]."""
    try:
        obj = json.loads(body)
    except (json.JSONDecodeError, TypeError) as e:
        raise ProtocolViolation(f"invalid JSON: {e}") from e
    if not isinstance(obj, dict) or "predictions" not in obj:
        raise ProtocolViolation("response requires 'predictions'")
    preds = obj["predictions"]
    if not isinstance(preds, list) or len(preds) != expected:
        got = len(preds) if isinstance(preds, list) else type(preds).__name__
        raise ProtocolViolation(f"expected {expected} predictions, got {got}")
    out = []
    for i, p in enumerate(preds):
        if not isinstance(p, dict) or "label" not in p or "score" not in p:
            raise ProtocolViolation(f"prediction {i} requires 'label' and 'score'")
        label = p["label"]
        score = p["score"]
        if label not in VALID_LABELS:
            raise ProtocolViolation(f"prediction {i} label {label!r} not in "
                                    f"{list(VALID_LABELS)}")
        if not isinstance(score, (int, float)) or not (0.0 <= float(score) <= 1.0):
            raise ProtocolViolation(f"prediction {i} score {score!r} outside [0, 1]")
        out.append((label, float(score)))
    return out


def run_conformance(post) -> list[str]:
    """Exercise a classify endpoint through the protocol contract.

    ``post(body: bytes) -> (status: int, body: str)`` sends a raw POST to the
    classify path. Returns the list of passed check names; raises
    AssertionError with the failed check on violation.
    """
    passed = []

    def send(obj) -> tuple[int, str]:
        raw = obj if isinstance(obj, bytes) else json.dumps(obj).encode("utf-8")
        return post(raw)

    status, body = send(make_request("CWE-79", ["<?php\necho $a . $b;\n"]))
    assert status == 200, f"single code: expected 200, got {status}"
    parse_response(body, 1)
    passed.append("single-code request")

    codes = ["<?php\necho $x;\n", "<?php\n$q = 'SELECT 1';\n", "<?php\necho 'hi';\n"]
    status, body = send(make_request("CWE-89", codes))
    assert status == 200, f"batch: expected 200, got {status}"
    parse_response(body, 3)
    passed.append("aligned batch of 3")

    status, body = send(make_request("CWE-79", []))
    assert status == 200, f"empty codes: expected 200, got {status}"
    parse_response(body, 0)
    passed.append("empty codes list")

    status, body = send({"cwe": "CWE-79"})
    assert 400 <= status < 500, f"missing codes: expected 4xx, got {status}"
    err = json.loads(body)
    assert isinstance(err, dict) and "error" in err, "missing codes: no error key"
    passed.append("missing codes -> 4xx")

    status, body = send({"cwe": "CWE-79", "codes": "not-a-list"})
    assert 400 <= status < 500, f"bad codes type: expected 4xx, got {status}"
    assert "error" in json.loads(body), "bad codes type: no error key"
    passed.append("non-list codes -> 4xx")

    status, body = send({"cwe": "CWE-1000", "codes": []})
    assert 400 <= status < 500, f"bad cwe: expected 4xx, got {status}"
    assert "error" in json.loads(body), "bad cwe: no error key"
    passed.append("unknown cwe -> 4xx")

    status, body = send(b"{not json")
    assert 400 <= status < 500, f"bad json: expected 4xx, got {status}"
    assert "error" in json.loads(body), "bad json: no error key"
    passed.append("malformed JSON -> 4xx")

    return passed
