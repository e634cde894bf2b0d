"""Session service: HTTP setup, WebSocket edit loop, mesh payloads."""

import base64

import numpy as np
import pytest
from fastapi.testclient import TestClient

from voxdetail.service import (BRUSH_SIZES, DetailizeService, ModelHandle,
                               build_app, fnv1a64, grid_digest)
from voxdetail.trainer import Pipeline, PipelineConfig

TINY = dict(backbone_channels=6, up_channels=(5, 4, 3),
            disc_channels=(6, 6, 6, 6, 6), receptive_field=18)


def digest_oracle(arr):
    # independent FNV-1a: dims as three u32 LE, then one byte per voxel
    data = np.asarray(arr.shape, dtype="<u4").tobytes() + \
        np.asarray(arr, np.uint8).tobytes()
    h = 0xCBF29CE484222325
    for b in data:
        h = ((h ^ b) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return f"{h:016x}"


@pytest.fixture(scope="module")
def client():
    cfg = PipelineConfig(k=4, views=("+x", "+y"), seed=11, **TINY)
    pipe = Pipeline(cfg, n_styles=2)
    service = DetailizeService(
        {"synth": ModelHandle(pipe, ("stone", "brick"))}, max_workers=1)
    with TestClient(build_app(service)) as c:
        yield c
    service.close()


def new_session(client, **extra):
    r = client.post("/sessions", json={"model": "synth", **extra})
    assert r.status_code == 200
    return r.json()


def test_fnv1a_known_vectors():
    # published FNV-1a 64-bit test vectors
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
    assert fnv1a64(b"foobar") == 0x85944171F73967E8


def test_create_session_fields(client):
    got = new_session(client)
    assert got["dims"] == [4, 4, 4]
    assert got["styles"] == 2
    assert got["style"] == 0
    assert got["digest"] == digest_oracle(np.zeros((4, 4, 4), np.uint8))
    assert isinstance(got["session"], str) and got["session"]


def test_unknown_model_404(client):
    assert client.post("/sessions", json={"model": "nope"}).status_code == 404
    assert client.get("/models/nope/styles").status_code == 404
    assert client.post("/sessions", json={}).status_code == 400


def test_models_and_styles(client):
    assert client.get("/models").json() == {"models": ["synth"]}
    got = client.get("/models/synth/styles").json()
    assert got == {"styles": [{"index": 0, "name": "stone"},
                              {"index": 1, "name": "brick"}]}


def test_set_style(client):
    sid = new_session(client)["session"]
    r = client.post(f"/sessions/{sid}/style", json={"style": 1})
    assert r.status_code == 200 and r.json() == {"ok": True, "style": 1}
    assert client.post(f"/sessions/{sid}/style",
                       json={"style": 2}).status_code == 400
    assert client.post(f"/sessions/{sid}/style",
                       json={"style": "x"}).status_code == 400
    assert client.post("/sessions/missing/style",
                       json={"style": 0}).status_code == 404


def test_box_template(client):
    got = new_session(client, template="box")
    expect = np.zeros((4, 4, 4), np.uint8)
    expect[1:3, 1:3, 1:3] = 1
    assert got["digest"] == digest_oracle(expect)
    r = client.post("/sessions", json={"model": "synth", "template": "pyramid"})
    assert r.status_code == 400


def test_explicit_voxels(client):
    arr = np.zeros((4, 4, 4), np.uint8)
    arr[0, 1, 2] = 1
    arr[3, 3, 3] = 1
    b64 = base64.b64encode(arr.tobytes()).decode()
    got = new_session(client, voxels=b64, dims=[4, 4, 4])
    assert got["digest"] == digest_oracle(arr)

    bad = dict(model="synth", voxels=b64)
    assert client.post("/sessions", json=bad).status_code == 400  # no dims
    bad = dict(model="synth", voxels=b64, dims=[8, 8, 8])
    assert client.post("/sessions", json=bad).status_code == 400
    short = base64.b64encode(b"\x00" * 10).decode()
    bad = dict(model="synth", voxels=short, dims=[4, 4, 4])
    assert client.post("/sessions", json=bad).status_code == 400
    two = base64.b64encode(b"\x02" * 64).decode()
    bad = dict(model="synth", voxels=two, dims=[4, 4, 4])
    assert client.post("/sessions", json=bad).status_code == 400


def test_edit_ack_and_involution(client):
    sess = new_session(client)
    empty_digest = sess["digest"]
    with client.websocket_connect(f"/sessions/{sess['session']}/ws") as ws:
        ws.send_json({"type": "edit", "op": "add", "center": [0, 0, 0],
                      "brush": 1})
        got = ws.receive_json()
        one = np.zeros((4, 4, 4), np.uint8)
        one[0, 0, 0] = 1
        assert got == {"type": "ack", "digest": digest_oracle(one)}
        ws.send_json({"type": "edit", "op": "remove", "center": [0, 0, 0],
                      "brush": 1})
        assert ws.receive_json()["digest"] == empty_digest


def test_brush_clipping(client):
    sess = new_session(client)
    with client.websocket_connect(f"/sessions/{sess['session']}/ws") as ws:
        # edge-5 cube at the corner keeps only the 3x3x3 in-bounds part
        ws.send_json({"type": "edit", "op": "add", "center": [0, 0, 0],
                      "brush": 5})
        expect = np.zeros((4, 4, 4), np.uint8)
        expect[0:3, 0:3, 0:3] = 1
        assert ws.receive_json()["digest"] == digest_oracle(expect)
        ws.send_json({"type": "edit", "op": "add", "center": [3, 3, 3],
                      "brush": 7})
        assert ws.receive_json()["digest"] == digest_oracle(
            np.ones((4, 4, 4), np.uint8))


def test_edit_validation(client):
    sess = new_session(client)
    with client.websocket_connect(f"/sessions/{sess['session']}/ws") as ws:
        cases = [
            {"op": "add", "center": [4, 0, 0], "brush": 1},
            {"op": "add", "center": [0, -1, 0], "brush": 1},
            {"op": "toggle", "center": [0, 0, 0], "brush": 1},
            {"op": "add", "center": [0, 0, 0], "brush": 2},
            {"op": "add", "center": [0, 0], "brush": 1},
            {"op": "add", "center": [0.5, 0, 0], "brush": 1},
            {"op": "add", "center": "nope", "brush": 1},
        ]
        for case in cases:
            ws.send_json({"type": "edit", **case})
            assert ws.receive_json()["type"] == "error"
        # failed edits left the grid untouched
        ws.send_json({"type": "edit", "op": "remove", "center": [0, 0, 0],
                      "brush": 1})
        assert ws.receive_json()["digest"] == sess["digest"]


def test_unknown_message_types(client):
    sess = new_session(client)
    with client.websocket_connect(f"/sessions/{sess['session']}/ws") as ws:
        ws.send_json({"type": "paint"})
        assert ws.receive_json()["type"] == "error"
        ws.send_text("not json at all")
        assert ws.receive_json()["type"] == "error"
        ws.send_json({"type": "edit", "op": "add", "center": [1, 1, 1],
                      "brush": 1})
        assert ws.receive_json()["type"] == "ack"


def test_ws_unknown_session_rejected(client):
    with pytest.raises(Exception):
        with client.websocket_connect("/sessions/missing/ws"):
            pass


def decode_payload(msg):
    v = np.frombuffer(base64.b64decode(msg["vertices"]), "<f4").reshape(-1, 3)
    c = np.frombuffer(base64.b64decode(msg["colors"]), np.uint8).reshape(-1, 3)
    t = np.frombuffer(base64.b64decode(msg["triangles"]), "<u4").reshape(-1, 3)
    return v, c, t


def test_generate_mesh_payload(client):
    sess = new_session(client, template="box")
    with client.websocket_connect(f"/sessions/{sess['session']}/ws") as ws:
        ws.send_json({"type": "generate"})
        msg = ws.receive_json()
        assert msg["type"] == "mesh"
        assert msg["digest"] == sess["digest"]
        assert msg["style"] == 0
        v, c, t = decode_payload(msg)
        assert v.shape[0] == msg["vertex_count"]
        assert t.shape[0] == msg["triangle_count"]
        assert c.shape[0] == v.shape[0]
        assert v.shape[0] > 0 and t.shape[0] > 0
        if t.size:
            assert t.max() < v.shape[0]
        assert np.isfinite(v).all()


def test_generate_cached_and_invalidated(client):
    sess = new_session(client, template="box")
    with client.websocket_connect(f"/sessions/{sess['session']}/ws") as ws:
        ws.send_json({"type": "generate"})
        first = ws.receive_json()
        ws.send_json({"type": "generate"})
        assert ws.receive_json() == first
        ws.send_json({"type": "edit", "op": "remove", "center": [1, 1, 1],
                      "brush": 1})
        edited = ws.receive_json()["digest"]
        ws.send_json({"type": "generate"})
        again = ws.receive_json()
        assert again["digest"] == edited
        assert again != first


def test_generate_recompute_deterministic(client):
    # two fresh sessions, same edits: payloads must match bit for bit,
    # proving determinism rather than cache reuse
    payloads = []
    for _ in range(2):
        sess = new_session(client)
        with client.websocket_connect(f"/sessions/{sess['session']}/ws") as ws:
            ws.send_json({"type": "edit", "op": "add", "center": [2, 2, 2],
                          "brush": 3})
            ws.receive_json()
            ws.send_json({"type": "generate"})
            payloads.append(ws.receive_json())
    assert payloads[0] == payloads[1]


def test_style_changes_payload(client):
    sess = new_session(client, template="box")
    sid = sess["session"]
    with client.websocket_connect(f"/sessions/{sid}/ws") as ws:
        ws.send_json({"type": "generate"})
        first = ws.receive_json()
        client.post(f"/sessions/{sid}/style", json={"style": 1})
        ws.send_json({"type": "generate"})
        second = ws.receive_json()
        assert second["style"] == 1
        assert second["digest"] == first["digest"]
        assert second["colors"] != first["colors"]


def test_session_isolation(client):
    a = new_session(client)
    b = new_session(client)
    with client.websocket_connect(f"/sessions/{a['session']}/ws") as wa:
        wa.send_json({"type": "edit", "op": "add", "center": [1, 2, 3],
                      "brush": 3})
        wa.receive_json()
    with client.websocket_connect(f"/sessions/{b['session']}/ws") as wb:
        # removing from an empty grid is a no-op digest probe
        wb.send_json({"type": "edit", "op": "remove", "center": [0, 0, 0],
                      "brush": 1})
        assert wb.receive_json()["digest"] == b["digest"]


def test_digest_sequence_replays(client):
    rng = np.random.default_rng(5)
    log = []
    for _ in range(12):
        log.append({"type": "edit",
                    "op": "add" if rng.random() < 0.6 else "remove",
                    "center": [int(v) for v in rng.integers(0, 4, 3)],
                    "brush": int(rng.choice(BRUSH_SIZES))})
    seqs = []
    for _ in range(2):
        sess = new_session(client)
        digests = []
        with client.websocket_connect(f"/sessions/{sess['session']}/ws") as ws:
            for msg in log:
                ws.send_json(msg)
                digests.append(ws.receive_json()["digest"])
        seqs.append(digests)
    assert seqs[0] == seqs[1]


def test_grid_refetch_matches_edits(client):
    sess = new_session(client)
    with client.websocket_connect(f"/sessions/{sess['session']}/ws") as ws:
        ws.send_json({"type": "edit", "op": "add", "center": [1, 1, 1],
                      "brush": 3})
        ack = ws.receive_json()
    r = client.get(f"/sessions/{sess['session']}/grid")
    assert r.status_code == 200
    got = r.json()
    want = np.zeros((4, 4, 4), np.uint8)
    want[0:3, 0:3, 0:3] = 1
    assert got["dims"] == [4, 4, 4]
    assert got["digest"] == ack["digest"]
    raw = np.frombuffer(base64.b64decode(got["voxels"]), np.uint8)
    assert np.array_equal(raw.reshape(4, 4, 4), want)
    assert client.get("/sessions/nope/grid").status_code == 404
