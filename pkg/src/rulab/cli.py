"""Command-line front end.

Every command prints one document to stdout.  In json mode it carries
``"schema"`` and ``"command"``; csv and pretty modes render the same fields.
Exit codes: 0 success, 2 validation, 3 solver failure, 4 invariant failure.
"""
from __future__ import annotations

import argparse
import csv
import io as _io
import json
import sys
from pathlib import Path

import numpy as np

from . import bounds, dynamics, search, stab, theories, verify
from . import measures as M
from .io import SCHEMA, dumps, read_json, read_matrix, to_plain
from .optim.magic import _projectors
from .optim.sdp import LmiBlock, SdpProblem, SolverError, dump_sdpa
from .qlinalg import RulabError, ValidationError, as_density, as_pure, to_density

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_INVARIANT = 0, 2, 3, 4

THEOREM_NAMES = {"thm1": bounds.THM1, "cor3": bounds.COR3, "thm2": bounds.THM2}
THEORY_MEASURE = {"energy": "energy", "incoherent": "coherence", "local": "entanglement"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_VALIDATION)


def _parties(text: str):
    try:
        out = []
        for chunk in text.split(","):
            a, b = chunk.lower().split("x")
            out.append((int(a), int(b)))
        return out
    except ValueError:
        raise argparse.ArgumentTypeError(f"parties must look like 2x2 or 2x2,2x2, got {text!r}") from None


def _build_measure(kind: str, dim: int, args, theory=None) -> M.Measure:
    h = None
    if getattr(args, "hamiltonian", None):
        h = read_matrix(args.hamiltonian)
    elif isinstance(theory, theories.EnergyConserving):
        h = theory.h_s
    parties = getattr(args, "parties", None)
    return M.measure_for(kind, dim, hamiltonian=h, temperature=getattr(args, "temperature", 1.0),
                         parties=parties)


def _read_state(path):
    s = read_matrix(path)
    return as_pure(s) if s.ndim == 1 else as_density(s)


def _need_seed(args, why: str):
    if args.seed is None:
        raise ValidationError(f"--seed is required: {why} is stochastic")


# --- commands ----------------------------------------------------------------

def cmd_measure(args) -> dict:
    state = _read_state(args.state)
    dim = state.shape[0]
    m = _build_measure(args.kind, dim, args)
    if m.pure_only and state.ndim == 2:
        state = to_density(state)
    return {"kind": m.kind, "dim": dim, "measure": m.to_json(), "value": M.evaluate(m, state)}


def cmd_power(args) -> dict:
    u = read_matrix(args.U)
    if u.ndim != 2:
        raise ValidationError("--U must hold a square matrix")
    d = u.shape[0]
    kind = args.measure
    if kind is None:
        if args.theory is None:
            raise ValidationError("give --theory or --measure")
        if args.theory == "clifford":
            kind = "extent" if d & (d - 1) == 0 else "mana"
        else:
            kind = THEORY_MEASURE[args.theory]
    m = _build_measure(kind, d, args)
    pure = bool(args.pure or m.pure_only)
    if not isinstance(m, M.EnergyExpectation):
        _need_seed(args, f"the {m.kind} power search")
    res = dynamics.power(m, u, pure_only=pure, restarts=args.restarts, seed=args.seed or 0)
    return {"measure": m.to_json(), "pure": pure, "G": res.value_G, "L": res.value_L,
            "method": res.method, "certified": res.certified, "argmax_state": res.argmax_state,
            "argmin_state": res.argmin_state}


def cmd_certify(args) -> dict:
    _need_seed(args, "the worst-case gate-error search")
    impl = dynamics.ImplementationTuple.from_json(read_json(args.impl))
    u = read_matrix(args.target)
    m = _build_measure(args.measure, impl.d_s, args, impl.theory)
    rep = bounds.certify(impl, u, m, THEOREM_NAMES[args.theorem], restarts=args.restarts,
                         power_restarts=args.power_restarts, seed=args.seed)
    return {"report": rep.to_json(), "_report": rep}


def cmd_sweep(args) -> dict:
    doc = read_json(args.scenario)
    if args.seed is not None and isinstance(doc, dict):
        doc = dict(doc, seed=args.seed)
    s = search.SearchScenario.from_json(doc)
    res = search.run_sweep(s, power_restarts=args.power_restarts)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = {"json": out / "sweep.json", "jsonl": out / "sweep.jsonl", "csv": out / "sweep.csv",
             "gnuplot": out / "sweep.dat"}
    files["json"].write_text(dumps(res.to_json()), encoding="utf-8")
    files["jsonl"].write_text(res.to_jsonl(), encoding="utf-8")
    files["csv"].write_text(res.to_csv(), encoding="utf-8")
    files["gnuplot"].write_text(res.to_gnuplot(), encoding="utf-8")
    cells = [{"d_E": c.d_e, "delta_bures": c.delta_bures, "delta_diamond": c.delta_diamond,
              "delta_floor": c.delta_floor, "satisfied": all(r.satisfied for r in c.reports)}
             for c in res.cells]
    return {"lhs": res.lhs, "cells": cells, "files": {k: str(v) for k, v in files.items()}}


def cmd_verify(args) -> dict:
    _need_seed(args, "the invariant suite")
    suites = verify.run_suites(args.suite, args.seed, trials=args.trials)
    return {"seed": args.seed, "passed": all(s.passed for s in suites), "suites": [s.to_json() for s in suites]}


def cmd_export_stab(args) -> dict:
    if not 1 <= args.n <= 3:
        raise ValidationError(f"--n must be 1, 2 or 3 qubits, got {args.n}")
    st = stab.enumerate_stabilizer_states(args.n)
    doc = json.loads(st.to_json())
    if args.sdpa:
        if not args.state:
            raise ValidationError("--sdpa writes the D_max program of a state; give --state too")
        rho = to_density(_read_state(args.state))
        if rho.shape[0] != 2 ** args.n:
            raise ValidationError(f"state dimension {rho.shape[0]} does not match {args.n} qubits")
        proj = _projectors(st)
        prob = SdpProblem(c=np.ones(len(proj)), blocks=[LmiBlock(-rho, -proj)], G=-np.eye(len(proj)),
                          h=np.zeros(len(proj)))
        dump_sdpa(prob, args.sdpa)
        doc["sdpa"] = str(args.sdpa)
    return doc


COMMANDS = {"measure": cmd_measure, "power": cmd_power, "certify": cmd_certify, "sweep": cmd_sweep,
            "verify": cmd_verify, "export-stab": cmd_export_stab}


# --- rendering -----------------------------------------------------------------

def _flatten(doc, prefix=""):
    if isinstance(doc, dict):
        if set(doc) == {"dim", "entries"}:
            yield prefix, json.dumps(doc["entries"])
            return
        for k in sorted(doc):
            yield from _flatten(doc[k], f"{prefix}.{k}" if prefix else str(k))
    elif isinstance(doc, list) and any(isinstance(x, (dict, list)) for x in doc):
        for i, x in enumerate(doc):
            yield from _flatten(x, f"{prefix}[{i}]")
    else:
        yield prefix, doc


def render(command: str, doc: dict, fmt: str) -> str:
    rep = doc.pop("_report", None)
    body = {"schema": SCHEMA, "command": command, **doc}
    if fmt == "json":
        return dumps(body)
    if fmt == "csv" and rep is not None:
        return bounds.reports_to_csv([rep])
    plain = to_plain(body)
    rows = list(_flatten(plain))
    if fmt == "csv":
        buf = _io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["field", "value"])
        for k, v in rows:
            w.writerow([k, json.dumps(v) if isinstance(v, (list, bool)) or v is None else v])
        return buf.getvalue()
    width = max(len(k) for k, _ in rows)
    return "".join(f"{k.ljust(width)}  {json.dumps(v, ensure_ascii=False) if not isinstance(v, str) else v}\n"
                   for k, v in rows)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "csv", "pretty"), default="json",
                        help="output format (default: json)")
    common.add_argument("--seed", type=int, default=None,
                        help="RNG seed; required by every stochastic command")

    ham = argparse.ArgumentParser(add_help=False)
    ham.add_argument("--hamiltonian", help="matrix file; default: the theory's H_S, else diag(0, 1, ..., d-1)")
    ham.add_argument("--temperature", type=float, default=1.0, help="athermality temperature (default: 1)")
    ham.add_argument("--parties", type=_parties, help="entanglement cut(s), e.g. 2x2 (default: square split)")

    p = _Parser(prog="rulab", description="Resource measures, powers and implementation bounds.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    q = sub.add_parser("measure", parents=[common, ham], help="evaluate a resource measure on a state")
    q.add_argument("--kind", required=True, help="energy, wy, athermality, coherence, entanglement, mana, extent, dmax")
    q.add_argument("--state", required=True, help="matrix file holding a density matrix or a pure vector")

    q = sub.add_parser("power", parents=[common, ham], help="resource generating and losing power of a unitary")
    q.add_argument("--theory", choices=("energy", "incoherent", "clifford", "local"))
    q.add_argument("--measure", help="measure kind; overrides the theory's default measure")
    q.add_argument("--U", required=True, help="matrix file of the unitary")
    q.add_argument("--pure", action="store_true", help="restrict to pure inputs")
    q.add_argument("--restarts", type=int, default=8, help="search restarts (default: 8)")

    q = sub.add_parser("certify", parents=[common, ham], help="evaluate one bound on an implementation")
    q.add_argument("--theorem", required=True, type=str.lower, choices=tuple(THEOREM_NAMES))
    q.add_argument("--impl", required=True, help="implementation JSON {theory, d_S, d_E, V_SE, rho_E}")
    q.add_argument("--target", required=True, help="matrix file of the target unitary")
    q.add_argument("--measure", required=True, help="measure kind on the system")
    q.add_argument("--restarts", type=int, default=32, help="gate-error search restarts (default: 32)")
    q.add_argument("--power-restarts", type=int, default=8, help="power search restarts (default: 8)")

    q = sub.add_parser("sweep", parents=[common], help="search implementations over ancilla dimensions")
    q.add_argument("--scenario", required=True, help="scenario JSON (must contain a seed)")
    q.add_argument("--out", required=True, help="directory for sweep.json/.jsonl/.csv/.dat")
    q.add_argument("--power-restarts", type=int, default=8, help="power search restarts (default: 8)")

    q = sub.add_parser("verify", parents=[common], help="run the randomised invariant suites")
    q.add_argument("--suite", action="append", default=None,
                   help=f"'all' or one of {', '.join(verify.SUITES)}; repeatable (default: all)")
    q.add_argument("--trials", type=int, default=10, help="instances per invariant (default: 10)")

    q = sub.add_parser("export-stab", parents=[common], help="list the n-qubit stabilizer states")
    q.add_argument("--n", type=int, required=True, help="number of qubits (1-3)")
    q.add_argument("--sdpa", help="also write the D_max program of --state in SDPA sparse format")
    q.add_argument("--state", help="state file for --sdpa")
    return p


def main(argv=None) -> int:
    if hasattr(sys.stdout, "reconfigure"):
        sys.stdout.reconfigure(encoding="utf-8")
    args = build_parser().parse_args(argv)
    if args.command == "verify" and not args.suite:
        args.suite = ["all"]
    try:
        search.worker_count()
        doc = COMMANDS[args.command](args)
        code = EXIT_OK
        if args.command == "verify" and not doc["passed"]:
            code = EXIT_INVARIANT
        if args.command == "certify" and doc["report"]["status"] in ("violated", "violation candidate: escalate"):
            code = EXIT_INVARIANT
        sys.stdout.write(render(args.command, doc, args.format))
        return code
    except SolverError as exc:
        print(f"rulab {args.command}: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ValidationError, RulabError, ValueError) as exc:
        print(f"rulab {args.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
