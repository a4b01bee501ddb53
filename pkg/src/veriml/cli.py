"""Command-line workflow: train, challenge, prove, verify, exchange, tick, bench.

Every command reads and writes files under ``--out`` (default ``./run``):

    task.json        resolved task (digest echoed by every command)
    model.json       final model
    commitment.txt   header line + one identifier per line
    checkpoints/     states at iteration 0 and every i = 1 mod m
    events.json      message order (commit, challenge, respond, verdict)
    challenge.json   challenged indices and the Freivald seed
    responses.json   identifier claims per challenge, proofs under proofs/
    transcript.json  responses plus the verdict
    ledger.json      simulated ledger

Exit status: 0 success / Accept, 2 Reject (or a failed exchange), 3 bad input.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

from .backend import Proof
from .commitment import Commitment
from .dataio import load_csv, synth
from .models.io import model_from_json, save_model
from .payment import (
    OPEN,
    EscrowError,
    Ledger,
    decrypt_delivery,
    encrypt_delivery,
    lock,
    post_escrow,
    redeem,
    refund,
)
from .protocol.client import Transcript, challenge, client_verify
from .protocol.sampling import Challenge, required_challenges
from .protocol.server import CheckpointStore, ProofResponse, Server, model_digest, server_train
from .protocol.task import ConfigError, TaskSpec

EXIT_OK, EXIT_REJECT, EXIT_BAD = 0, 2, 3


class InputError(Exception):
    pass


# -- task files ------------------------------------------------------------------

def load_dataset(data: dict, l: int):
    if "synth" in data:
        s = dict(data["synth"])
        kind = s.pop("kind")
        return synth(kind, int(s.pop("n")), int(s.pop("d")), int(s.pop("seed", 0)), l, **s)
    if "csv" in data:
        return load_csv(data["csv"], int(data.get("label_col", -1)), l, data.get("label_kind", "real"))
    raise ConfigError("data section needs 'synth' or 'csv'")


def read_task(path, args=None) -> tuple[TaskSpec, object, dict]:
    """(spec, dataset, raw task-file object) with command-line overrides applied."""
    obj = json.loads(Path(path).read_text())
    if not isinstance(obj, dict):
        raise ConfigError("task file must hold a JSON object")
    task = obj.get("task", obj)
    data = obj.get("data")
    if data is None:
        raise ConfigError("task file has no data section")
    spec = TaskSpec.from_json(task)
    if args is not None:
        cfg_kw = {}
        if getattr(args, "frac_bits", None) is not None:
            cfg_kw["frac_bits"] = args.frac_bits
        if cfg_kw:
            spec = spec.with_(cfg=spec.cfg.with_(**cfg_kw))
        if getattr(args, "interval", None) is not None:
            spec = spec.with_(interval=args.interval)
        if getattr(args, "field", None):
            spec = spec.with_(field=args.field)
    ds = load_dataset(data, spec.cfg.frac_bits)
    if not spec.dataset_digest:
        spec = spec.with_(dataset_digest=ds.digest)
    # pin the field so later commands agree even if VERIML_FIELD changes
    spec = spec.with_(field=spec.field_cfg.name)
    return spec, ds, {"task": spec.to_json(), "data": data}


def _task(args):
    out = Path(args.out)
    path = args.task if getattr(args, "task", None) and args.cmd != "train" else out / "task.json"
    if args.cmd == "train":
        if not args.task:
            raise InputError("train needs --task")
        return read_task(args.task, args)
    if not Path(path).exists():
        raise InputError(f"{path} not found; run train first")
    return read_task(path, args)


def _events(out: Path) -> list[str]:
    p = out / "events.json"
    return json.loads(p.read_text()) if p.exists() else []


def _write_events(out: Path, events: list[str]) -> None:
    (out / "events.json").write_text(json.dumps(events))


def _need(path: Path) -> Path:
    if not path.exists():
        raise InputError(f"missing artifact {path}")
    return path


# -- commands --------------------------------------------------------------------

def cmd_train(args) -> int:
    spec, ds, raw = _task(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    res = server_train(spec, ds)
    (out / "task.json").write_text(json.dumps(raw, indent=1, sort_keys=True))
    save_model(res.final, out / "model.json")
    (out / "commitment.txt").write_text(res.commitment.dumps())
    res.store.save(out / "checkpoints")
    _write_events(out, ["commit"])
    print(f"task {spec.digest()}")
    print(f"N={res.commitment.N} checkpoints={len(res.store.states)} interval={spec.interval}")
    return EXIT_OK


def cmd_challenge(args) -> int:
    spec, _, _ = _task(args)
    out = Path(args.out)
    com = Commitment.loads(_need(out / "commitment.txt").read_text())
    if com.task_id != spec.digest():
        raise InputError("commitment belongs to a different task")
    if args.challenges is not None:
        c = args.challenges
    else:
        c = required_challenges(com.N, Fraction(args.t_frac), Fraction(args.confidence))
    tr = Transcript(com, events=_events(out))
    ch = challenge(tr, c, args.seed)
    (out / "challenge.json").write_text(json.dumps(ch.to_json()))
    _write_events(out, tr.events)
    print(f"task {spec.digest()}")
    print(f"c={ch.count} of N={com.N}")
    return EXIT_OK


def _parse_tamper(text: str) -> tuple[str, Fraction]:
    from .tamper import MODES

    mode, _, frac = text.partition(":")
    if mode not in MODES:
        raise InputError(f"unknown tamper mode {mode!r}; choose from {', '.join(MODES)}")
    f = Fraction(frac or "0.3")
    if not 0 < f <= 1:
        raise InputError("tamper fraction must lie in (0, 1]")
    return mode, f


_PROVER = None


def _make_prover(out: str, tamper: str | None, seed: int, backend: str):
    out = Path(out)
    spec, ds, _ = read_task(out / "task.json")
    if tamper:
        from .protocol.task import prepare_data, steps_per_epoch
        from .tamper import TamperingServer, forged_set

        mode, frac = _parse_tamper(tamper)
        alg = spec.algorithm()
        if spec.kind == "tree":
            N = alg.n_nodes
        else:
            N = spec.cfg.max_epochs * steps_per_epoch(prepare_data(spec, ds).train.n, spec.cfg.batch_size)
        return TamperingServer(spec, ds, mode, forged_set(N, 1 - frac, seed), seed, backend)
    com = Commitment.loads((out / "commitment.txt").read_text())
    store = CheckpointStore.load(out / "checkpoints")
    return Server.from_checkpoints(spec, ds, com, store, backend)


def _init_worker(out, tamper, seed, backend):
    global _PROVER
    _PROVER = _make_prover(out, tamper, seed, backend)


def _answer(i: int, freivald_seed: int, prover=None):
    srv = prover or _PROVER
    r = srv.respond(i)
    proof = srv.prove(i, freivald_seed)
    return r, proof.to_bytes(srv.spec.p)


def cmd_prove(args) -> int:
    spec, _, _ = _task(args)
    out = Path(args.out)
    ch = Challenge.from_json(json.loads(_need(out / "challenge.json").read_text()))
    _need(out / "commitment.txt")
    if args.jobs > 1 and ch.count > 1:
        with ProcessPoolExecutor(args.jobs, initializer=_init_worker,
                                 initargs=(str(out), args.tamper, args.seed, args.backend)) as ex:
            answers = list(ex.map(_answer, ch.indices, [ch.freivald_seed] * ch.count))
        if args.tamper:
            com = _make_prover(str(out), args.tamper, args.seed, args.backend).commitment
    else:
        srv = _make_prover(str(out), args.tamper, args.seed, args.backend)
        answers = [_answer(i, ch.freivald_seed, srv) for i in ch.indices]
        com = srv.commitment
    if args.tamper:
        # a cheating server commits to its own identifiers before any challenge exists
        (out / "commitment.txt").write_text(com.dumps())
    pdir = out / "proofs"
    pdir.mkdir(exist_ok=True)
    rows = []
    for r, blob in answers:
        name = f"proof_{r.i:08d}.bin"
        (pdir / name).write_bytes(blob)
        rows.append({"i": r.i, "id_prev": r.id_prev.hex(), "id_cur": r.id_cur.hex(), "P_prev": str(r.P_prev),
                     "authentic": r.authentic, "proof": f"proofs/{name}"})
    (out / "responses.json").write_text(json.dumps(rows, indent=1))
    ev = _events(out)
    _write_events(out, ev + ["respond"])
    print(f"task {spec.digest()}")
    print(f"proved {len(rows)} iterations")
    return EXIT_OK


def _responses(out: Path, p: int) -> list[ProofResponse]:
    rows = json.loads(_need(out / "responses.json").read_text())
    res = []
    for r in rows:
        proof = Proof.from_bytes(_need(out / r["proof"]).read_bytes(), p) if r.get("proof") else None
        res.append(ProofResponse(int(r["i"]), bytes.fromhex(r["id_prev"]), bytes.fromhex(r["id_cur"]),
                                 int(r["P_prev"]), bool(r["authentic"]), proof))
    return res


def cmd_verify(args) -> int:
    spec, ds, _ = _task(args)
    out = Path(args.out)
    com = Commitment.loads(_need(out / "commitment.txt").read_text())
    ch = Challenge.from_json(json.loads(_need(out / "challenge.json").read_text()))
    tr = Transcript(com, ch, _responses(out, spec.p), events=_events(out))
    v = client_verify(tr, spec, ds, None, args.backend)
    refs = {r.i: f"proofs/proof_{r.i:08d}.bin" for r in tr.responses}
    (out / "transcript.json").write_text(tr.dumps(refs))
    _write_events(out, tr.events)
    print(f"task {spec.digest()}")
    if v:
        print(f"Accept ({ch.count} challenges)")
        return EXIT_OK
    print(f"Reject at iteration {v.index}: {v.reason} ({v.detail})")
    return EXIT_REJECT


def _ledger(path: Path, balance: int) -> Ledger:
    if path.exists():
        return Ledger.loads(path.read_text())
    return Ledger({"client": balance, "server": 0})


def cmd_exchange(args) -> int:
    spec, _, _ = _task(args)
    out = Path(args.out)
    tpath = out / "transcript.json"
    verdict = json.loads(tpath.read_text()).get("verdict") if tpath.exists() else None
    if not verdict or not verdict.get("accept"):
        print("refusing to pay: no Accept verdict on record")
        return EXIT_REJECT
    com = Commitment.loads(_need(out / "commitment.txt").read_text())
    lpath = Path(args.ledger) if args.ledger else out / "ledger.json"
    led = _ledger(lpath, args.balance)
    # server: deterministic key from the seed and the task
    key = hashlib.sha256(b"delivery-key" + args.seed.to_bytes(8, "little") + spec.digest().encode()).digest()
    plain = _need(out / "model.json").read_bytes()
    ct = encrypt_delivery(key, plain)
    (out / "model.enc").write_bytes(ct)
    h = lock(key)
    # client: escrow the fee against h
    try:
        tx = post_escrow(led, "client", h, args.fee, led.clock + args.timeout)
    except EscrowError as e:
        print(f"escrow failed: {e}")
        return EXIT_REJECT
    presented = hashlib.sha256(key).digest() if args.wrong_preimage else key
    ok = redeem(led, tx, presented)
    lpath.write_text(led.dumps())
    print(f"task {spec.digest()}")
    print(f"escrow {tx.txid} lock {h.hex()} fee {args.fee} timeout {tx.timeout}")
    if not ok:
        print("redeem rejected: wrong preimage; escrow stays open until the timeout refund")
        return EXIT_REJECT
    opened = decrypt_delivery(led.txs[tx.txid].preimage, ct)
    model = model_from_json(json.loads(opened))
    if model_digest(model) != com.params_digest:
        print("decrypted model does not match the committed parameter digest")
        return EXIT_REJECT
    (out / "model.delivered.json").write_bytes(opened)
    print(f"settled: server balance {led.balance('server')}, client balance {led.balance('client')}")
    return EXIT_OK


def cmd_tick(args) -> int:
    lpath = Path(args.ledger) if args.ledger else Path(args.out) / "ledger.json"
    led = Ledger.loads(_need(lpath).read_text())
    led.tick(args.n)
    refunded = []
    for t in led.txs:
        if t.state == OPEN and led.clock >= t.timeout:
            refund(led, t)
            refunded.append(t.txid)
    lpath.write_text(led.dumps())
    print(f"clock {led.clock}; refunded {refunded}")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .experiments import EXPERIMENTS, write_csv

    if args.experiment not in EXPERIMENTS:
        raise InputError(f"unknown experiment {args.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    write_csv(EXPERIMENTS[args.experiment](seed=args.seed), args.csv)
    return EXIT_OK


def cmd_run(args) -> int:
    """train, challenge, prove, verify and exchange in one go."""
    for cmd in (cmd_train, cmd_challenge, cmd_prove, cmd_verify, cmd_exchange):
        args.cmd = cmd.__name__[4:]
        code = cmd(args)
        if code:
            return code
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="veriml", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="cmd", required=True)

    def common(p):
        p.add_argument("--task", help="task JSON (train; later commands default to OUT/task.json)")
        p.add_argument("--out", default="run", help="artifact directory")
        p.add_argument("--interval", type=int, help="checkpoint interval m")
        p.add_argument("--frac-bits", type=int, help="fixed-point fraction bits l")
        p.add_argument("--field", help="prime field name (bn254-r, m61, m31 or p<decimal>)")
        p.add_argument("--backend", default="transparent")
        p.add_argument("--seed", type=int, default=0)
        return p

    common(sub.add_parser("train", help="train and commit"))
    p = common(sub.add_parser("challenge", help="sample challenged iterations"))
    p.add_argument("--challenges", type=int)
    p.add_argument("--confidence", default="0.99")
    p.add_argument("--t-frac", default="0.7", help="genuine fraction the sample must expose")
    p = common(sub.add_parser("prove", help="answer the challenge"))
    p.add_argument("--tamper", help="fault injection MODE:FRACTION, e.g. forge-identifiers:0.3")
    p.add_argument("--jobs", type=int, default=1)
    common(sub.add_parser("verify", help="check the responses"))
    for name in ("exchange", "run"):
        p = common(sub.add_parser(name, help="pay for the model" if name == "exchange" else "full pipeline"))
        p.add_argument("--ledger")
        p.add_argument("--fee", type=int, default=10)
        p.add_argument("--timeout", type=int, default=5)
        p.add_argument("--balance", type=int, default=100)
        p.add_argument("--wrong-preimage", action="store_true")
        if name == "run":
            p.add_argument("--challenges", type=int)
            p.add_argument("--confidence", default="0.99")
            p.add_argument("--t-frac", default="0.7")
            p.add_argument("--tamper")
            p.add_argument("--jobs", type=int, default=1)
    p = sub.add_parser("tick", help="advance the ledger clock and refund expired escrows")
    p.add_argument("--out", default="run")
    p.add_argument("--ledger")
    p.add_argument("--n", type=int, default=1)
    p = sub.add_parser("bench", help="reproduce an experiment as CSV")
    p.add_argument("--experiment", required=True)
    p.add_argument("--csv", help="output file (default stdout)")
    p.add_argument("--seed", type=int, default=0)
    return ap


COMMANDS = {"train": cmd_train, "challenge": cmd_challenge, "prove": cmd_prove, "verify": cmd_verify,
            "exchange": cmd_exchange, "tick": cmd_tick, "bench": cmd_bench, "run": cmd_run}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.cmd](args)
    except (InputError, ConfigError, ValueError, KeyError, OSError) as e:
        # json.JSONDecodeError is a ValueError
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD


if __name__ == "__main__":
    sys.exit(main())
