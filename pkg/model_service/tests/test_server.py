import json
import threading
import time

import pytest
import torch
import uvicorn
from fastapi.testclient import TestClient

from model_service.model import ByteTokenizer, load_checkpoint
from model_service.server import CLASSIFY_PATH, create_app
from model_service.train import TrainConfig, train

# the primary pipeline's protocol conformance suite; the server must
# interoperate with that client bit-exactly
from vulnsnip import protocol


@pytest.fixture(scope="module")
def checkpoint(toy_data, base_checkpoint, tmp_path_factory):
    # longer run than the 2-epoch training contract so the served model has
    # actually separated the toy patterns
    train_path, val_path = toy_data
    out = tmp_path_factory.mktemp("served") / "ft"
    cfg = TrainConfig(base_dir=str(base_checkpoint), out_dir=str(out),
                      epochs=8, seed=5, learning_rate=2e-3)
    train(train_path, val_path, cfg)
    return out


@pytest.fixture(scope="module")
def client(checkpoint):
    return TestClient(create_app(checkpoint))


class TestProtocol:
    def test_passes_primary_conformance_suite(self, client):
        def post(raw: bytes):
            resp = client.post(CLASSIFY_PATH, content=raw,
                               headers={"Content-Type": "application/json"})
            return resp.status_code, resp.text

        passed = protocol.run_conformance(post)
        assert len(passed) >= 7

    def test_single_round_trip(self, client):
        resp = client.post(CLASSIFY_PATH, json={
            "cwe": "CWE-79", "codes": ["<?php\necho $_GET['x'];\n"]})
        assert resp.status_code == 200
        preds = resp.json()["predictions"]
        assert len(preds) == 1
        assert preds[0]["label"] in ("good", "bad")
        assert 0.0 <= preds[0]["score"] <= 1.0

    def test_batch_order_aligned(self, client, toy_data):
        train_path, _ = toy_data
        codes = [json.loads(l)["code"]
                 for l in train_path.read_text().splitlines()[:3]]
        resp = client.post(CLASSIFY_PATH, json={"cwe": "CWE-79", "codes": codes})
        assert resp.status_code == 200
        assert len(resp.json()["predictions"]) == 3
        # alignment: resending one code yields the same prediction
        single = client.post(CLASSIFY_PATH,
                             json={"cwe": "CWE-79", "codes": [codes[1]]})
        assert single.json()["predictions"][0] == resp.json()["predictions"][1]

    def test_missing_codes_is_4xx_with_error(self, client):
        resp = client.post(CLASSIFY_PATH, json={"cwe": "CWE-79"})
        assert 400 <= resp.status_code < 500
        assert "error" in resp.json()


class TestScores:
    def test_score_is_probability_of_bad(self, client, checkpoint):
        model = load_checkpoint(checkpoint)
        tok = ByteTokenizer(model.cfg.max_len)
        code = "<?php\n$var0 = $_GET['a'];\necho $var0;\n"
        ids, mask = tok.batch([code])
        with torch.no_grad():
            probs = torch.softmax(model(ids, mask), dim=-1)
        resp = client.post(CLASSIFY_PATH, json={"cwe": "CWE-79", "codes": [code]})
        pred = resp.json()["predictions"][0]
        assert pred["score"] == pytest.approx(float(probs[0, 1]), abs=1e-6)
        assert abs(float(probs[0].sum()) - 1.0) < 1e-6

    def test_label_matches_argmax(self, client):
        codes = ["<?php\n$var0 = $_GET['z'];\necho $var0;\n",
                 "<?php\n$var0 = 'safe';\necho $var0;\n"]
        resp = client.post(CLASSIFY_PATH, json={"cwe": "CWE-79", "codes": codes})
        for pred in resp.json()["predictions"]:
            if pred["label"] == "bad":
                assert pred["score"] >= 0.5
            else:
                assert pred["score"] <= 0.5

    def test_learned_separation_on_training_patterns(self, client):
        bad_code = "<?php\n$var0 = $_GET['k9'];\necho $var0; /* taint: $var0 */\n"
        good_code = "<?php\n$var0 = 'safe-9';\necho $var0; /* taint: $var0 */\n"
        resp = client.post(CLASSIFY_PATH, json={
            "cwe": "CWE-79", "codes": [bad_code, good_code]})
        bad_pred, good_pred = resp.json()["predictions"]
        assert bad_pred["score"] > good_pred["score"]


class TestWireIntegration:
    def test_primary_remote_client_against_live_server(self, checkpoint):
        """The pipeline's own remote classifier talking to this service over
        an actual socket."""
        from vulnsnip.classify import EndpointConfig, classify_remote
        from vulnsnip.dataset import Sample

        config = uvicorn.Config(create_app(checkpoint), host="127.0.0.1",
                                port=0, log_level="warning")
        server = uvicorn.Server(config)
        thread = threading.Thread(target=server.run, daemon=True)
        thread.start()
        try:
            deadline = time.monotonic() + 10
            while not server.started:
                assert time.monotonic() < deadline, "server did not start"
                time.sleep(0.02)
            port = server.servers[0].sockets[0].getsockname()[1]
            samples = [
                Sample(id=f"w{i}", cwe="CWE-79",
                       code=f"<?php\n$var0 = $_GET['w{i}'];\necho $var0;\n",
                       project="P", file="f.php", line=2, taint_var="var0",
                       synthetic=False)
                for i in range(5)
            ]
            cfg = EndpointConfig(base_url=f"http://127.0.0.1:{port}",
                                 batch_size=2, retries=1, backoff=0.0)
            preds = classify_remote(samples, cfg)
            assert [p.sample_id for p in preds] == [s.id for s in samples]
            assert all(p.source == "remote" for p in preds)
            assert all(0.0 <= p.score <= 1.0 for p in preds)
        finally:
            server.should_exit = True
            thread.join(timeout=10)
