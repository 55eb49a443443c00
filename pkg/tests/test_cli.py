"""Command-line driver, exercised through main() with files on disk.

The heaviest check is the console turn-log replay: a scripted game session
played over the HTTP test client writes the log format the browser console
exports, and the replay command must reproduce the recorded final snapshot
byte for byte — then detect a single flipped token in the final turn.
"""

import json

import pytest

from tokenlab import (Alphabet, Corpus, deserialize_model, load_model,
                      make_modk, make_sentence, random_tabular, save_alphabet,
                      save_corpus, save_game_spec, save_labeled, save_model,
                      serialize_model, toxic_spec)
from tokenlab.cli import main

AB = Alphabet(("PAD", "EOS", "a", "b"), eos_id=1, pad_id=0)


@pytest.fixture(scope="module")
def files(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    p = lambda name: str(d / name)
    save_alphabet(AB, p("ab.alphabet"))

    sents = ([make_sentence(AB.encode(["a", "b", "EOS"]), AB)] * 10
             + [make_sentence(AB.encode(["b", "a", "EOS"]), AB)] * 8
             + [make_sentence(AB.encode(["a", "b", "a", "EOS"]), AB)] * 7
             + [make_sentence(AB.encode(["b", "a", "b", "EOS"]), AB)] * 5)
    save_corpus(Corpus(tuple(sents), AB, name="toy"), p("toy.corpus"))

    save_model(random_tabular(AB, C=4, seed=42), p("tab.model"))
    ab5 = Alphabet(("PAD", "EOS", "x", "y", "z"), eos_id=1, pad_id=0)
    save_model(make_modk(ab5, C=6, ell=4, weights=(1, 1, 1, 1, 1, 2)),
               p("modk.model"))

    spec = toxic_spec(AB, [AB.encode(["a", "EOS"]), AB.encode(["a", "a", "EOS"])],
                      scenario="exact")
    save_game_spec(spec, p("exact.game"))

    labeled = [(make_sentence(AB.encode(["a", "b", "EOS"]), AB), {"EVEN": 3, "ODD": 1}),
               (make_sentence(AB.encode(["b", "a", "b", "EOS"]), AB), "ODD")]
    save_labeled(labeled, AB, p("votes.labeled"))
    return p


def test_train_ngram(files, tmp_path):
    out = str(tmp_path / "toy.model")
    rc = main(["train", "--alphabet", files("ab.alphabet"),
               "--corpus", files("toy.corpus"), "--kind", "ngram",
               "--n", "3", "--window", "4", "--out", out])
    assert rc == 0
    model = load_model(out)
    assert type(model).__name__ == "NGramModel" and model.C == 4


def test_train_meaning_head(files, tmp_path):
    base = str(tmp_path / "base.model")
    assert main(["train", "--alphabet", files("ab.alphabet"),
                 "--corpus", files("toy.corpus"), "--kind", "ngram",
                 "--n", "3", "--window", "4", "--out", base]) == 0
    out = str(tmp_path / "head.model")
    rc = main(["train", "--alphabet", files("ab.alphabet"),
               "--corpus", files("toy.corpus"), "--kind", "meaning-head",
               "--model", base, "--labeled", files("votes.labeled"),
               "--labels", "EVEN,ODD", "--out", out])
    assert rc == 0
    head = load_model(out)
    assert type(head).__name__ == "MeaningHead"
    assert head.alphabet.symbols[-2:] == ("EVEN", "ODD")
    # missing ingredients is an argument error, not a crash
    assert main(["train", "--alphabet", files("ab.alphabet"),
                 "--corpus", files("toy.corpus"),
                 "--kind", "meaning-head", "--out", out]) == 2


def test_sigma(files, tmp_path, capsys):
    out = str(tmp_path / "sigma.txt")
    rc = main(["sigma", "--alphabet", files("ab.alphabet"),
               "--corpus", files("toy.corpus"), "--max-len", "4",
               "--out", out])
    assert rc == 0
    lines = [l for l in open(out).read().splitlines() if l and not l.startswith("#")]
    assert lines == ["a a EOS", "a a b EOS", "a b EOS", "a b a EOS",
                     "a b b EOS", "b a EOS", "b a a EOS", "b a b EOS",
                     "b b EOS", "b b a EOS"]
    capsys.readouterr()
    # membership checks drive the exit code
    assert main(["sigma", "--alphabet", files("ab.alphabet"),
                 "--corpus", files("toy.corpus"), "--max-len", "4",
                 "--check", "a b EOS"]) == 0
    assert "member" in capsys.readouterr().out
    assert main(["sigma", "--alphabet", files("ab.alphabet"),
                 "--corpus", files("toy.corpus"), "--max-len", "4",
                 "--check", "b b b EOS"]) == 1
    assert "not a member" in capsys.readouterr().out


def test_rollout_and_replay(files, tmp_path, capsys):
    assert main(["rollout", "--model", files("tab.model"),
                 "--temperature", "1.0", "--steps", "32", "--seed", "9"]) == 0
    assert "halted=" in capsys.readouterr().out
    tr = str(tmp_path / "roll.transcript")
    assert main(["rollout", "--model", files("tab.model"), "--seed", "9",
                 "--transcript", tr]) == 0
    assert open(tr).read().startswith("# transcript v1")
    capsys.readouterr()
    assert main(["replay", "--model", files("tab.model"),
                 "--transcript", tr]) == 0
    assert "replay ok" in capsys.readouterr().out


def test_reach(files, tmp_path, capsys):
    out = str(tmp_path / "reach.txt")
    rc = main(["reach", "--model", files("tab.model"), "--origin", "a",
               "--horizon", "3", "--method", "exact", "--theta", "0.0",
               "--out", out])
    assert rc == 0
    text = open(out).read()
    assert text.splitlines()[0] == "# reach-report v1"
    capsys.readouterr()
    assert main(["reach", "--model", files("tab.model"), "--origin", "a",
                 "--horizon", "3", "--method", "mc", "--samples", "2000",
                 "--seed", "4"]) == 0
    assert "reported=" in capsys.readouterr().out


def test_certify(files, capsys):
    assert main(["certify", "--model", files("modk.model"), "--ell", "4"]) == 0
    out = capsys.readouterr().out
    assert out.count("pass") == 2
    # a random tabular model flunks the surjectivity premise
    assert main(["certify", "--model", files("tab.model"), "--ell", "2"]) == 1
    assert "FAIL" in capsys.readouterr().out


def test_synthesize(files, capsys):
    rc = main(["synthesize", "--model", files("modk.model"),
               "--start", "x y z PAD EOS x", "--target", "y y y y"])
    assert rc == 0
    out = capsys.readouterr().out
    assert out.startswith("inputs: ") and "horizon=4" in out
    # odd-length targets have no pivot chain
    rc = main(["synthesize", "--model", files("modk.model"),
               "--start", "x y z PAD EOS x", "--target", "y y y"])
    assert rc == 1
    assert "synthesis failed" in capsys.readouterr().err


def test_game(files, capsys):
    assert main(["game", "--model", files("tab.model"), "--spec",
                 files("exact.game"), "--horizon", "6"]) == 0
    assert "scenario=exact" in capsys.readouterr().out
    assert main(["game", "--model", files("tab.model"), "--spec",
                 files("exact.game"), "--horizon", "6",
                 "--start", "PAD PAD PAD PAD"]) == 0
    assert "tau*" in capsys.readouterr().out
    assert main(["game", "--model", files("tab.model"), "--spec",
                 files("exact.game"), "--horizon", "6", "--compare",
                 "--epsilon", "0.2", "--seed", "5"]) == 0
    assert "ordering holds" in capsys.readouterr().out


def test_entropy(files, capsys):
    assert main(["entropy", "--alphabet", files("ab.alphabet"),
                 "--labeled", files("votes.labeled")]) == 0
    out = capsys.readouterr().out
    assert "examples=2" in out and "mean=" in out


def test_accept_single_criterion(capsys):
    assert main(["accept", "--criterion", "1"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("AC1 PASS")


# ---------------------------------------------------------------------------
# console turn-log replay


@pytest.fixture(scope="module")
def console_log():
    fastapi = pytest.importorskip("fastapi")
    from fastapi.testclient import TestClient
    from tokenlab.service import ServiceState, create_app

    model_text = serialize_model(random_tabular(AB, C=4, seed=42))
    client = TestClient(create_app(ServiceState()))
    mid = client.post("/models", json={"text": model_text}).json()["model"]
    create = {"model": mid, "temperature": 1.0, "seed": 21,
              "game": {"toxic": [["a", "EOS"]], "scenario": "exact",
                       "defender": True, "interventions": [["b"]],
                       "absorption_horizon": 5, "absorption_samples": 64}}
    sid = client.post("/sessions", json=create).json()["session"]
    turns = []
    for _ in range(10):
        for tok in ("b", "a"):
            if client.post(f"/sessions/{sid}/turn",
                           json={"tokens": [tok]}).status_code == 200:
                turns.append([tok])
                break
        else:
            raise AssertionError("both tokens censored")
    final = client.get(f"/sessions/{sid}/snapshot").text
    return {"schema": "1", "model_text": model_text, "create": create,
            "turns": turns, "final_snapshot": final}


def test_console_log_replays_bitwise(console_log, tmp_path, capsys):
    path = tmp_path / "console.log.json"
    path.write_text(json.dumps(console_log))
    assert main(["replay", "--log", str(path)]) == 0
    assert "MATCH after 10 turns" in capsys.readouterr().out


def test_console_log_tamper_detected(console_log, tmp_path, capsys):
    tampered = dict(console_log)
    tampered["turns"] = list(console_log["turns"])
    last = tampered["turns"][-1]
    tampered["turns"][-1] = ["a"] if last == ["b"] else ["b"]
    path = tmp_path / "tampered.log.json"
    path.write_text(json.dumps(tampered))
    assert main(["replay", "--log", str(path)]) == 1
    assert "MISMATCH" in capsys.readouterr().out
