"""Classify-protocol inference server.

POST /v1/classify with {"cwe": "CWE-79", "codes": [...]} returns
{"predictions": [{"label": ..., "score": ...}]} where score is the softmax
probability of the vulnerable class. Malformed requests get 4xx with
{"error": reason}; request parsing is manual so every error path emits the
protocol's error shape.
"""

from __future__ import annotations

import json
from pathlib import Path

import torch
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .model import ByteTokenizer, CodeClassifier, load_checkpoint

CLASSIFY_PATH = "/v1/classify"
VALID_CWES = ("CWE-79", "CWE-89")
CLASS_LABELS = ("good", "bad")


def _validate(body: bytes) -> tuple[str, list[str]] | JSONResponse:
    try:
        obj = json.loads(body)
    except json.JSONDecodeError as e:
        return JSONResponse(status_code=400,
                            content={"error": f"invalid JSON: {e.msg}"})
    if not isinstance(obj, dict):
        return JSONResponse(status_code=400,
                            content={"error": "request body must be an object"})
    if "cwe" not in obj or "codes" not in obj:
        return JSONResponse(status_code=400,
                            content={"error": "request requires 'cwe' and 'codes'"})
    if obj["cwe"] not in VALID_CWES:
        return JSONResponse(status_code=400,
                            content={"error": f"cwe must be one of {list(VALID_CWES)}"})
    codes = obj["codes"]
    if not isinstance(codes, list) or not all(isinstance(c, str) for c in codes):
        return JSONResponse(status_code=400,
                            content={"error": "codes must be a list of strings"})
    return obj["cwe"], codes


def create_app(checkpoint_dir: Path, batch_size: int = 32) -> FastAPI:
    model = load_checkpoint(Path(checkpoint_dir))
    tokenizer = ByteTokenizer(model.cfg.max_len)
    app = FastAPI(title="snippet classify service")

    @app.post(CLASSIFY_PATH)
    async def classify(request: Request):
        outcome = _validate(await request.body())
        if isinstance(outcome, JSONResponse):
            return outcome
        _, codes = outcome
        predictions = []
        with torch.no_grad():
            for start in range(0, len(codes), batch_size):
                chunk = codes[start:start + batch_size]
                ids, mask = tokenizer.batch(chunk)
                probs = torch.softmax(model(ids, mask), dim=-1)
                for row in probs:
                    label = CLASS_LABELS[int(row.argmax())]
                    predictions.append({"label": label,
                                        "score": float(row[1])})
        return {"predictions": predictions}

    return app


def serve(checkpoint_dir: Path, port: int, host: str = "127.0.0.1") -> None:
    import uvicorn

    uvicorn.run(create_app(checkpoint_dir), host=host, port=port,
                log_level="warning")
