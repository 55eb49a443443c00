"""HTTP service invariants, exercised through an in-process test client.

The contract under test: sessions are deterministic functions of (model,
seed, turn history) — twin sessions agree byte-for-byte, snapshots are
idempotent reads in canonical JSON, a censored turn changes nothing at all,
and every stored transcript replays to the session's exact state.  Analysis
runs as jobs whose errors carry the same stable codes as the synchronous
endpoints.
"""

import json
import time

import pytest

fastapi = pytest.importorskip("fastapi")
from fastapi.testclient import TestClient

from tokenlab import (Alphabet, MeaningClassifier, classify, make_modk,
                      make_sentence, random_tabular, serialize_model,
                      model_hash)
from tokenlab.service import ServiceState, create_app, verify_session_replay

AB = Alphabet(("PAD", "EOS", "a", "b"), eos_id=1, pad_id=0)
MODEL = random_tabular(AB, C=4, seed=42)
MODEL_TEXT = serialize_model(MODEL)

GAME = {"toxic": [["a", "EOS"], ["a", "a", "EOS"]], "scenario": "exact",
        "defender": True, "depth": 3, "lambda": 1.0,
        "interventions": [["b"], ["b", "b"]],
        "absorption_horizon": 6, "absorption_samples": 128}


@pytest.fixture()
def state():
    return ServiceState()


@pytest.fixture()
def client(state):
    return TestClient(create_app(state))


@pytest.fixture()
def mid(client):
    return client.post("/models", json={"text": MODEL_TEXT}).json()["model"]


def wait_job(client, jid, timeout=30.0):
    t0 = time.time()
    while time.time() - t0 < timeout:
        j = client.get(f"/jobs/{jid}").json()
        if j["status"] in ("done", "error"):
            return j
        time.sleep(0.02)
    raise TimeoutError(jid)


# ---------------------------------------------------------------------------
# models


def test_health(client):
    r = client.get("/health")
    assert r.status_code == 200 and r.json()["status"] == "ok"


def test_model_registration(client):
    r = client.post("/models", json={"text": MODEL_TEXT})
    assert r.status_code == 200
    body = r.json()
    digest = model_hash(MODEL)
    assert body["model"] == digest[:12] and body["hash"] == digest
    assert body["kind"] == "TabularModel" and body["window"] == 4
    assert body["symbols"] == list(AB.symbols)
    assert body["eos"] == "EOS" and body["pad"] == "PAD"
    # registration is content-addressed, hence idempotent
    again = client.post("/models", json={"text": MODEL_TEXT}).json()
    assert again["model"] == body["model"]
    # round-trip and listing
    r = client.get(f"/models/{body['model']}")
    assert r.status_code == 200 and r.json()["text"] == MODEL_TEXT
    assert any(m["model"] == body["model"] for m in client.get("/models").json()["models"])


def test_model_errors(client):
    r = client.get("/models/nope")
    assert r.status_code == 404 and r.json()["error"]["code"] == "not_found"
    r = client.post("/models", json={"text": "not a model"})
    assert r.status_code == 400 and r.json()["error"]["code"] == "validation"


# ---------------------------------------------------------------------------
# sessions


def test_twin_sessions_agree(client, mid):
    mk = lambda: client.post("/sessions", json={"model": mid, "temperature": 1.0,
                                                "seed": 7}).json()
    s1, s2 = mk(), mk()
    assert s1["session"] != s2["session"]
    for turn in (["a", "b"], ["b"], ["a", "a", "b"]):
        r1 = client.post(f"/sessions/{s1['session']}/turn", json={"tokens": turn})
        r2 = client.post(f"/sessions/{s2['session']}/turn", json={"tokens": turn})
        assert r1.status_code == 200 and r1.json() == r2.json()
    t1 = client.get(f"/sessions/{s1['session']}/snapshot")
    t2 = client.get(f"/sessions/{s2['session']}/snapshot")
    assert t1.text == t2.text


def test_fresh_snapshot_frozen(client, mid):
    sid = client.post("/sessions", json={"model": mid, "temperature": 1.0,
                                         "seed": 7}).json()["session"]
    snap = json.loads(client.get(f"/sessions/{sid}/snapshot").text)
    assert snap == {"schema": "1", "turn": 0, "t": 0,
                    "model": model_hash(MODEL),
                    "window": ["PAD", "PAD", "PAD", "PAD"],
                    "completion": ["a", "b", "PAD", "EOS"],
                    "meaning": "a", "toxic_score": None,
                    "absorption": None, "intervention": []}


def test_turn_response_shape(client, mid):
    sid = client.post("/sessions", json={"model": mid, "temperature": 1.0,
                                         "seed": 7}).json()["session"]
    r = client.post(f"/sessions/{sid}/turn", json={"tokens": ["a", "b"]})
    body = r.json()
    assert body["schema"] == "1" and body["steps"] == 2
    assert len(body["reply"]) == 1 and body["reply"][0] in AB.symbols
    snap = body["snapshot"]
    # one compressed step per token: t advances by the turn length
    assert snap["turn"] == 1 and snap["t"] == 2
    assert snap["window"] == ["PAD", "a", "b", "b"]
    # the snapshot in the turn response is the snapshot endpoint's content
    again = json.loads(client.get(f"/sessions/{sid}/snapshot").text)
    assert again == snap


def test_snapshot_idempotent_and_canonical(client, mid):
    sid = client.post("/sessions", json={"model": mid, "temperature": 1.0,
                                         "seed": 7}).json()["session"]
    client.post(f"/sessions/{sid}/turn", json={"tokens": ["a"]})
    a = client.get(f"/sessions/{sid}/snapshot")
    b = client.get(f"/sessions/{sid}/snapshot")
    assert a.text == b.text and a.text.endswith("\n")
    snap = json.loads(a.text)
    canonical = json.dumps(snap, sort_keys=True, separators=(",", ":")) + "\n"
    assert a.text == canonical


def test_seed_isolation(client, mid):
    def run(seed):
        sid = client.post("/sessions", json={"model": mid, "temperature": 1.0,
                                             "seed": seed}).json()["session"]
        replies = []
        for _ in range(3):
            r = client.post(f"/sessions/{sid}/turn", json={"tokens": ["a"]})
            replies.append(r.json()["reply"])
        return replies
    assert run(7) == run(7) == [["a"], ["a"], ["b"]]
    assert run(8) == [["EOS"], ["a"], ["EOS"]]


def test_meaning_matches_classifier(client, mid, state):
    sid = client.post("/sessions", json={"model": mid, "temperature": 1.0,
                                         "seed": 3}).json()["session"]
    client.post(f"/sessions/{sid}/turn", json={"tokens": ["b", "a"]})
    snap = json.loads(client.get(f"/sessions/{sid}/snapshot").text)
    if snap["completion"] is not None:
        sent = make_sentence(AB.encode(snap["completion"]), AB)
        want = classify(MeaningClassifier(model=state.sessions[sid].model), sent)
        assert snap["meaning"] == want.symbol
    else:
        assert snap["meaning"] is None


def test_session_listing_and_delete(client, mid):
    sids = [client.post("/sessions", json={"model": mid, "seed": i}).json()["session"]
            for i in range(3)]
    listed = {row["id"] for row in client.get("/sessions").json()["sessions"]}
    assert set(sids) <= listed and len(listed) == 3
    info = client.get(f"/sessions/{sids[1]}").json()
    assert info["id"] == sids[1] and info["seed"] == 1 and info["turn"] == 0
    assert info["window_size"] == 4 and info["game"] is None
    r = client.delete(f"/sessions/{sids[0]}")
    assert r.status_code == 200
    assert client.get(f"/sessions/{sids[0]}/snapshot").status_code == 404
    assert len(client.get("/sessions").json()["sessions"]) == 2


def test_validation_errors(client, mid):
    r = client.post("/sessions", json={"model": "bogus"})
    assert r.status_code == 404 and r.json()["error"]["code"] == "not_found"
    sid = client.post("/sessions", json={"model": mid, "seed": 0}).json()["session"]
    r = client.post(f"/sessions/{sid}/turn", json={"tokens": ["zzz"]})
    assert r.status_code == 400 and r.json()["error"]["code"] == "validation"
    r = client.post(f"/sessions/{sid}/turn", json={"tokens": []})
    assert r.status_code == 400 and r.json()["error"]["code"] == "validation"
    r = client.post(f"/sessions/nope/turn", json={"tokens": ["a"]})
    assert r.status_code == 404


def test_transcript_replays(client, mid, state):
    sid = client.post("/sessions", json={"model": mid, "temperature": 1.0,
                                         "seed": 7}).json()["session"]
    for turn in (["a", "b"], ["b"]):
        client.post(f"/sessions/{sid}/turn", json={"tokens": turn})
    r = client.get(f"/sessions/{sid}/transcript")
    assert r.status_code == 200 and r.text.startswith("# transcript v1")
    assert verify_session_replay(state.sessions[sid])


# ---------------------------------------------------------------------------
# game sessions


def game_payload(mid, seed=11):
    return {"model": mid, "temperature": 1.0, "seed": seed, "game": GAME}


def test_censored_turn_rolls_back(client, mid):
    sid = client.post("/sessions", json=game_payload(mid)).json()["session"]
    before = client.get(f"/sessions/{sid}/snapshot").text
    # at the all-pad start the exact censor denies "a" (its successor
    # completes into the toxic list) and admits "b"
    r = client.post(f"/sessions/{sid}/turn", json={"tokens": ["a"]})
    assert r.status_code == 403
    err = r.json()["error"]
    assert err["code"] == "censored"
    assert err["token"] == "a" and err["position"] == 0 and err["score"] == 1.0
    after = client.get(f"/sessions/{sid}/snapshot").text
    assert before == after
    # the denied turn consumed nothing: the allowed token proceeds as if
    # the 403 never happened
    r = client.post(f"/sessions/{sid}/turn", json={"tokens": ["b"]})
    assert r.status_code == 200
    assert r.json()["snapshot"]["turn"] == 1


def test_censor_checks_every_position(client, mid):
    sid = client.post("/sessions", json=game_payload(mid)).json()["session"]
    before = client.get(f"/sessions/{sid}/snapshot").text
    r = client.post(f"/sessions/{sid}/turn", json={"tokens": ["b", "a"]})
    if r.status_code == 403:
        assert r.json()["error"]["position"] in (0, 1)
        assert client.get(f"/sessions/{sid}/snapshot").text == before


def test_game_snapshot_fields_and_absorption_seed(client, mid):
    seed = 11
    sid = client.post("/sessions", json=game_payload(mid, seed)).json()["session"]
    snap = json.loads(client.get(f"/sessions/{sid}/snapshot").text)
    assert snap["toxic_score"] is not None
    assert set(snap["absorption"]) == {"estimate", "low", "high", "n",
                                       "horizon", "seed"}
    assert snap["absorption"]["n"] == 128 and snap["absorption"]["horizon"] == 6
    # the per-turn estimate is seeded by (session seed, turn), so reads
    # stay idempotent while successive turns draw fresh samples
    assert snap["absorption"]["seed"] == seed * 1_000_003
    client.post(f"/sessions/{sid}/turn", json={"tokens": ["b"]})
    snap = json.loads(client.get(f"/sessions/{sid}/snapshot").text)
    assert snap["absorption"]["seed"] == seed * 1_000_003 + 1


def test_game_determinism(client, mid):
    def play():
        sid = client.post("/sessions", json=game_payload(mid)).json()["session"]
        for _ in range(4):
            for tok in ("b", "a"):
                r = client.post(f"/sessions/{sid}/turn", json={"tokens": [tok]})
                if r.status_code == 200:
                    break
            else:
                raise AssertionError("both tokens censored")
        return sid, client.get(f"/sessions/{sid}/snapshot").text
    (_, a), (_, b) = play(), play()
    assert a == b


def test_game_replay_with_defender_lines(client, mid, state):
    sid = client.post("/sessions", json=game_payload(mid)).json()["session"]
    played = 0
    for _ in range(4):
        for tok in ("b", "a"):
            if client.post(f"/sessions/{sid}/turn",
                           json={"tokens": [tok]}).status_code == 200:
                played += 1
                break
    assert played == 4
    # defender interventions are stored as sys lines; the transcript must
    # still replay to the live window exactly
    assert verify_session_replay(state.sessions[sid])


def test_bad_game_spec(client, mid):
    payload = game_payload(mid)
    payload["game"] = dict(GAME, toxic=[["a", "a"]])   # no EOS
    r = client.post("/sessions", json=payload)
    assert r.status_code == 400 and r.json()["error"]["code"] == "validation"


# ---------------------------------------------------------------------------
# analysis jobs


def test_reach_job(client, mid):
    r = client.post("/analysis/reach", json={"model": mid, "origin": ["a"],
                                             "horizon": 3, "theta": 0.0,
                                             "method": "exact"})
    assert r.status_code == 200
    j = wait_job(client, r.json()["job"])
    assert j["status"] == "done" and j["error"] is None
    res = j["result"]
    total = res["reported_mass"] + res["pruned_mass"] + res["continuation_mass"]
    assert total == pytest.approx(1.0, abs=1e-9)
    probs = [e["probability"] for e in res["entries"]]
    assert probs == sorted(probs, reverse=True)
    assert all(e["sentence"][0] == "a" and e["sentence"][-1] == "EOS"
               for e in res["entries"])


def test_certify_job(client, client_modk=None):
    ab5 = Alphabet(("PAD", "EOS", "aa", "bb", "cc"), eos_id=1, pad_id=0)
    text = serialize_model(make_modk(ab5, C=6, ell=4, weights=(1, 1, 1, 1, 1, 2)))
    mk = client.post("/models", json={"text": text}).json()["model"]
    j = wait_job(client, client.post("/analysis/certify",
                                     json={"model": mk, "ell": 4}).json()["job"])
    assert j["status"] == "done"
    assert j["result"]["thm1"]["verdict"] and j["result"]["thm2"]["verdict"]
    assert j["result"]["controllable"] is True

    r = client.post("/analysis/synthesize", json={
        "model": mk, "start": ["EOS", "aa", "bb", "cc", "PAD", "EOS"],
        "target": ["aa", "aa", "aa", "aa"]})
    j = wait_job(client, r.json()["job"])
    assert j["status"] == "done"
    assert j["result"]["trajectory"][-1][-4:] == ["aa", "aa", "aa", "aa"]
    assert len(j["result"]["inputs"]) == j["result"]["horizon"]


def test_game_job_frozen(client, mid):
    r = client.post("/analysis/game", json={
        "model": mid, "toxic": [["a", "EOS"], ["a", "a", "EOS"]],
        "scenario": "leaky", "epsilon": 0.2, "seed": 3, "horizon": 6,
        "starts": [["PAD", "PAD", "PAD", "PAD"], ["b", "b", "b", "b"]]})
    j = wait_job(client, r.json()["job"])
    assert j["status"] == "done"
    assert j["result"] == {"scenario": "leaky", "epsilon": 0.2,
                           "threshold": 0.8, "horizon": 6,
                           "tau": [{"start": ["PAD", "PAD", "PAD", "PAD"], "tau": 1.0},
                                   {"start": ["b", "b", "b", "b"], "tau": 2.0}]}


def test_job_error_carries_stable_code(client, mid):
    # start shorter than the window: rejected inside the job, not at POST
    r = client.post("/analysis/synthesize", json={"model": mid, "start": ["a"],
                                                  "target": ["a", "a"]})
    assert r.status_code == 200
    j = wait_job(client, r.json()["job"])
    assert j["status"] == "error" and j["result"] is None
    assert j["error"]["code"] == "validation"


def test_analysis_eager_existence_checks(client):
    r = client.post("/analysis/reach", json={"model": "bogus", "origin": ["a"]})
    assert r.status_code == 404 and r.json()["error"]["code"] == "not_found"
    r = client.post("/analysis/nope", json={})
    assert r.status_code == 404
    r = client.get("/jobs/nope")
    assert r.status_code == 404 and r.json()["error"]["code"] == "not_found"
