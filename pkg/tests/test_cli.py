import json
import subprocess
import sys

import pytest

from veriml.cli import main

SMALL = {
    "task": {"kind": "linreg", "cfg": {"batch_size": 4, "max_epochs": 1, "frac_bits": 16}, "dims": {"d": 3},
             "interval": 4},
    "data": {"synth": {"kind": "regression", "n": 40, "d": 3, "seed": 2}},
}


@pytest.fixture
def taskfile(tmp_path):
    p = tmp_path / "task.json"
    p.write_text(json.dumps(SMALL))
    return p


def run(*argv):
    return main([str(a) for a in argv])


def test_full_pipeline_accepts_and_settles(tmp_path, taskfile, capsys):
    out = tmp_path / "run"
    assert run("run", "--task", taskfile, "--out", out, "--challenges", 3) == 0
    tr = json.loads((out / "transcript.json").read_text())
    assert tr["verdict"]["accept"] and tr["events"].index("commit") < tr["events"].index("challenge")
    led = json.loads((out / "ledger.json").read_text())
    assert led["accounts"]["server"] == 10 and led["accounts"]["client"] == 90
    assert (out / "model.delivered.json").read_bytes() == (out / "model.json").read_bytes()
    assert len(list((out / "proofs").glob("proof_*.bin"))) == 3


def test_stepwise_and_confidence(tmp_path, taskfile):
    out = tmp_path / "r"
    assert run("train", "--task", taskfile, "--out", out) == 0
    assert run("challenge", "--out", out, "--confidence", "0.95", "--t-frac", "0.7") == 0
    ch = json.loads((out / "challenge.json").read_text())
    # N = 10 with 3 forged: C(7,6)/C(10,6) = 1/30 <= 0.05 < C(7,5)/C(10,5) = 1/12
    assert len(ch["indices"]) == 6
    assert run("prove", "--out", out) == 0
    assert run("verify", "--out", out) == 0


def test_tamper_rejected_and_no_payment(tmp_path, taskfile):
    out = tmp_path / "t"
    assert run("train", "--task", taskfile, "--out", out) == 0
    assert run("challenge", "--out", out, "--challenges", 5) == 0
    assert run("prove", "--out", out, "--tamper", "forge-identifiers:1") == 0
    assert run("verify", "--out", out) == 2
    assert json.loads((out / "transcript.json").read_text())["verdict"]["reason"] == "commitment-mismatch"
    assert run("exchange", "--out", out) == 2
    assert not (out / "ledger.json").exists()


def test_wrong_preimage_then_refund(tmp_path, taskfile):
    out = tmp_path / "w"
    assert run("run", "--task", taskfile, "--out", out, "--challenges", 2, "--wrong-preimage", "--timeout", 3) == 2
    led = json.loads((out / "ledger.json").read_text())
    assert led["txs"][0]["state"] == "open" and led["accounts"]["client"] == 90
    assert run("tick", "--out", out, "--n", 3) == 0
    led = json.loads((out / "ledger.json").read_text())
    assert led["txs"][0]["state"] == "refunded" and led["accounts"]["client"] == 100


def test_parallel_proving_is_deterministic(tmp_path, taskfile):
    outs = []
    for jobs in (1, 2):
        out = tmp_path / f"j{jobs}"
        assert run("run", "--task", taskfile, "--out", out, "--challenges", 3, "--jobs", jobs) == 0
        outs.append(out)
    for name in ("commitment.txt", "transcript.json", "responses.json", "ledger.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes(), name


def test_bad_inputs_exit_3(tmp_path, taskfile):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("train", "--task", bad, "--out", tmp_path / "b") == 3
    assert run("verify", "--out", tmp_path / "missing") == 3
    assert run("train", "--out", tmp_path / "c") == 3
    assert run("bench", "--experiment", "nope") == 3
    out = tmp_path / "x"
    assert run("train", "--task", taskfile, "--out", out) == 0
    assert run("challenge", "--out", out, "--challenges", 2) == 0
    assert run("prove", "--out", out, "--tamper", "teleport:0.5") == 3


def test_bench_writes_csv(tmp_path):
    p = tmp_path / "s.csv"
    assert run("bench", "--experiment", "economic-sanity", "--csv", p) == 0
    assert p.read_text().splitlines()[0] == "gas,gas_price_gwei,ether,usd"


def test_console_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "veriml.cli", "bench", "--experiment", "sampling-curve"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and r.stdout.startswith("N,t_frac,confidence")
