"""Command-line entry point: ``tomograd <experiment> [flags]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .experiments import EXPERIMENTS, METHODS, default_spec, run_experiment

log = logging.getLogger("tomograd")

# flag dest -> spec field (top level) or "state.<field>"
_FIELD = {
    "seed": "seed",
    "out_dir": "out_dir",
    "trials": "trials",
    "workers": "workers",
    "max_iters": "max_iters",
    "batch_size": "batch_size",
    "eta0": "eta0",
    "alpha": "alpha",
    "lam": "lambda_l1",
    "rank": "rank",
    "record_every": "record_every",
    "fidelity_target": "fidelity_target",
    "methods": "methods",
    "qubit_list": "qubits",
    "target_ranks": "target_ranks",
    "ansatz_ranks": "ansatz_ranks",
    "sizes": "sizes",
    "noise": "noise",
    "levels": "levels",
    "batch_sizes": "batch_sizes",
    "step_sizes": "step_sizes",
    "husimi_extent": "husimi_extent",
    "husimi_steps": "husimi_steps",
    "wigner_extent": "wigner_extent",
    "wigner_steps": "wigner_steps",
    "data": "data_path",
    "truth": "truth_path",
    "state_type": "state.type",
    "qubits": "state.qubits",
    "state_rank": "state.rank",
    "xi": "state.xi",
    "phase": "state.phase",
    "dim": "state.dim",
}


def _ints(text):
    return [int(v) for v in text.split(",") if v]


def _floats(text):
    return [float(v) for v in text.split(",") if v]


def _methods(text):
    out = [v for v in text.split(",") if v]
    bad = [m for m in out if m not in METHODS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown methods {bad}; choose from {','.join(METHODS)}")
    return out


def _add_common(p):
    g = p.add_argument_group("run")
    g.add_argument("--config", help="JSON or YAML file with spec fields; flags override it")
    g.add_argument("--seed", type=int)
    g.add_argument("--out-dir")
    g.add_argument("--trials", type=int)
    g.add_argument("--workers", type=int, help="parallel trial processes (default 1)")
    g.add_argument("--max-iters", type=int)
    g.add_argument("--batch-size", type=int)
    g.add_argument("--eta0", type=float, help="initial step size (default depends on method)")
    g.add_argument("--alpha", type=float, help="step-size decay per iteration")
    g.add_argument("--lambda", dest="lam", type=float, help="L1 regularization weight")
    g.add_argument("--rank", type=int, help="ansatz rank (default: full)")
    g.add_argument("--record-every", type=int)
    g.add_argument("--fidelity-target", type=float)
    g.add_argument("--methods", type=_methods, help=f"comma list from {','.join(METHODS)}")
    g.add_argument(
        "--override",
        action="append",
        metavar="METHOD.FIELD=VALUE",
        help="per-method run setting, e.g. pn.eta0=0.3 (repeatable)",
    )
    g.add_argument("-v", "--verbose", action="store_true")

    s = p.add_argument_group("state")
    s.add_argument("--state", dest="state_type", choices=["random", "pure", "ghz", "hadamard", "cat", "coherent"])
    s.add_argument("--qubits", type=int)
    s.add_argument("--state-rank", type=int, help="rank of a random target state")
    s.add_argument("--xi", type=float, help="|xi| of a cat/coherent state")
    s.add_argument("--phase", type=float, help="phase of xi (default: random per trial)")
    s.add_argument("--dim", type=int, help="Fock-space truncation")
    s.add_argument("--husimi-extent", type=float)
    s.add_argument("--husimi-steps", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="tomograd", description="Gradient-descent quantum state tomography benchmarks.")
    sub = parser.add_subparsers(dest="experiment", required=True)
    helps = {
        "reconstruct": "reconstruct one state (simulated or from --data)",
        "bench-time": "time to a fidelity target vs number of qubits",
        "bench-rank": "time and per-iteration cost vs target and ansatz rank",
        "bench-data": "fidelity vs reduced data-set size",
        "bench-noise": "fidelity vs depolarizing or Gaussian noise",
        "cv-cat": "cat-state reconstruction from Husimi data, with Wigner grids",
        "sweep-hyper": "batch-size and step-size grid",
    }
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=helps[name])
        _add_common(p)
        if name == "reconstruct":
            p.add_argument("--data", help="DataSet CSV (index,value) instead of simulated data")
            p.add_argument("--truth", help="density-matrix file for fidelity tracking")
        if name == "bench-time":
            p.add_argument("--qubit-list", type=_ints, help="comma list of qubit counts")
        if name == "bench-rank":
            p.add_argument("--target-ranks", type=_ints)
            p.add_argument("--ansatz-ranks", type=_ints)
        if name == "bench-data":
            p.add_argument("--sizes", type=_ints)
        if name == "bench-noise":
            p.add_argument("--noise", choices=["depolarizing", "gaussian"])
            p.add_argument("--levels", type=_floats, help="eps (depolarizing) or sigma^2 (gaussian) values")
        if name == "cv-cat":
            p.add_argument("--wigner-extent", type=float)
            p.add_argument("--wigner-steps", type=int)
        if name == "sweep-hyper":
            p.add_argument("--batch-sizes", type=_ints)
            p.add_argument("--step-sizes", type=_floats)
    return parser


def load_config(path) -> dict:
    text = Path(path).read_text()
    if str(path).endswith((".yaml", ".yml")):
        import yaml

        data = yaml.safe_load(text)
    else:
        data = json.loads(text)
    if not isinstance(data, dict):
        raise ValueError(f"config {path} must hold a mapping")
    return data


def _parse_override(text):
    try:
        key, value = text.split("=", 1)
        method, name = key.split(".", 1)
    except ValueError:
        raise ValueError(f"override {text!r} is not METHOD.FIELD=VALUE") from None
    try:
        value = json.loads(value)
    except json.JSONDecodeError:
        pass
    return method, name, value


def spec_from_args(args):
    overrides = load_config(args.config) if args.config else {}
    overrides.pop("experiment", None)
    state = dict(overrides.pop("state", {}) or {})
    for dest, field in _FIELD.items():
        value = getattr(args, dest, None)
        if value is None:
            continue
        if field.startswith("state."):
            state[field[6:]] = value
        else:
            overrides[field] = value
    per_method = overrides.setdefault("overrides", {})
    for text in args.override or []:
        method, name, value = _parse_override(text)
        per_method.setdefault(method, {})[name] = value
    return default_spec(args.experiment, state=state, **overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        spec = spec_from_args(args)
    except (ValueError, TypeError, OSError) as exc:
        print(f"tomograd: {exc}", file=sys.stderr)
        return 2
    records = run_experiment(spec)
    errors = [r for r in records if r.status != "ok"]
    for r in records:
        fid = "" if r.fidelity is None else f"{r.fidelity:.6f}"
        log.info("%s %s trial=%d fidelity=%s iters=%d %s", r.method, r.state, r.trial, fid, r.iterations, r.status)
    print(f"{len(records)} trials, {len(errors)} errors -> {spec.out_dir}")
    for r in errors:
        print(f"  {r.method} trial {r.trial}: {r.status}", file=sys.stderr)
    return 1 if errors else 0


if __name__ == "__main__":
    sys.exit(main())
