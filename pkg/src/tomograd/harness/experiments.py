"""Benchmark experiments: trial generation, execution on a worker pool, CSV output."""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from .. import qstates
from ..baseline import imle, linear_inversion
from ..io import write_density
from ..measurement import DataSet, depolarize, gaussian_noise, husimi_set, measure, pauli_set, subsample
from ..metrics import uj_fidelity, wigner
from ..optimize import ReconstructionResult, RunConfig, reconstruct

log = logging.getLogger(__name__)

EXPERIMENTS = ("reconstruct", "bench-time", "bench-rank", "bench-data", "bench-noise", "cv-cat", "sweep-hyper")
GD_METHODS = ("cd", "cd-tri", "sm", "pn")
METHODS = GD_METHODS + ("linear-inversion", "imle")
WALL_CLOCK_COLUMNS = ("wall_s", "recon_s", "ms_per_iter")


@dataclass
class StateSpec:
    type: str = "random"  # random | pure | ghz | hadamard | cat | coherent
    qubits: int = 2
    rank: int | None = None  # for type=random; None means full rank
    xi: float = 2.0  # |xi| for cat/coherent
    phase: float | None = None  # None: drawn uniformly from [0, 2pi) per trial
    dim: int = 32  # Fock truncation for cat/coherent

    @property
    def continuous(self):
        return self.type in ("cat", "coherent")


@dataclass
class ExperimentSpec:
    experiment: str = "reconstruct"
    state: StateSpec = field(default_factory=StateSpec)
    methods: list = field(default_factory=lambda: ["cd"])
    trials: int = 10
    seed: int = 0
    out_dir: str = "results"
    workers: int = 1
    # RunConfig fields
    max_iters: int = 800
    batch_size: int = 256
    eta0: float | None = None
    alpha: float = 0.999
    lambda_l1: float = 0.0
    rank: int | None = None
    record_every: int = 10
    fidelity_target: float | None = None
    # per-method RunConfig overrides, e.g. {"pn": {"eta0": 0.3}}
    overrides: dict = field(default_factory=dict)
    # sweep axes
    qubits: list = field(default_factory=lambda: [1, 2, 3, 4])
    target_ranks: list = field(default_factory=lambda: [1])
    ansatz_ranks: list = field(default_factory=lambda: [1, 4, 16])
    sizes: list = field(default_factory=lambda: [100, 200, 400, 600, 800, 1024])
    noise: str = "depolarizing"  # depolarizing | gaussian
    levels: list = field(default_factory=lambda: [0.0, 0.1, 0.3, 0.5])
    batch_sizes: list = field(default_factory=lambda: [50, 150, 256, 500])
    step_sizes: list = field(default_factory=lambda: [0.05, 0.5, 1.0, 2.0])
    # continuous-variable settings
    husimi_extent: float = 4.0
    husimi_steps: int = 32
    wigner_extent: float = 4.0
    wigner_steps: int = 64
    # external data for `reconstruct`
    data_path: str | None = None
    truth_path: str | None = None

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.methods:
            raise ValueError("method list is empty")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValueError(f"unknown methods {bad}; expected a subset of {METHODS}")
        if self.noise not in ("depolarizing", "gaussian"):
            raise ValueError(f"unknown noise model {self.noise!r}")
        run_fields = {f.name for f in fields(RunConfig)} - {"kind", "seed"}
        for method, over in self.overrides.items():
            if method not in METHODS:
                raise ValueError(f"override for unknown method {method!r}")
            bad = set(over) - run_fields
            if bad:
                raise ValueError(f"override for {method} has unknown fields {sorted(bad)}")
        return self

    def run_config(self, method: str | None = None) -> RunConfig:
        cfg = RunConfig(
            max_iters=self.max_iters,
            batch_size=self.batch_size,
            eta0=self.eta0,
            alpha=self.alpha,
            lambda_l1=self.lambda_l1,
            rank=self.rank,
            record_every=self.record_every,
            fidelity_target=self.fidelity_target,
        )
        return replace(cfg, **self.overrides.get(method, {}))

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        state = d.pop("state", {}) or {}
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown experiment fields: {sorted(unknown)}")
        return cls(state=StateSpec(**state), **d)


@dataclass
class BenchRecord:
    experiment: str
    method: str
    state: str
    qubits: int
    dim: int
    target_rank: int | None
    ansatz_rank: int | None
    trial: int
    seed: int
    fidelity: float | None
    iterations: int
    wall_s: float
    recon_s: float
    ms_per_iter: float | None
    data_size: int
    noise: str
    noise_level: float
    batch_size: int | None
    eta0: float | None
    output_rank: int | None = None
    status: str = "ok"


@dataclass
class Task:
    experiment: str
    method: str
    state: StateSpec
    trial: int
    seed: int
    cfg: RunConfig
    data_size: int | None = None
    noise: str = "none"
    noise_level: float = 0.0
    husimi: tuple = (4.0, 32)
    keep_rho: bool = False
    keep_trace: bool = False
    data_path: str | None = None
    truth_path: str | None = None


def trial_seed(seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([seed, trial]).generate_state(1)[0])


@lru_cache(maxsize=8)
def _observables(kind: str, a, b=None, c=None):
    if kind == "pauli":
        return pauli_set(a)
    return husimi_set(a, b, c)


def make_truth(state: StateSpec, seed: int):
    """Target density matrix and, for pure targets, its state vector."""
    s = state
    if s.continuous:
        phase = s.phase if s.phase is not None else np.random.default_rng(seed).uniform(0, 2 * np.pi)
        xi = s.xi * np.exp(1j * phase)
        psi = qstates.cat_state(xi, s.dim) if s.type == "cat" else qstates.coherent_state(xi, s.dim)
        return qstates.projector(psi), psi
    d = 2**s.qubits
    if s.type == "random":
        return qstates.random_density(d, s.rank or d, seed), None
    if s.type == "pure":
        psi = qstates.random_pure_state(d, seed)
    elif s.type == "ghz":
        psi = qstates.ghz_state(s.qubits)
    elif s.type == "hadamard":
        psi = qstates.hadamard_state(s.qubits)
    else:
        raise ValueError(f"unknown state type {s.type!r}")
    return qstates.projector(psi), psi


def state_label(state: StateSpec) -> str:
    if state.continuous:
        return f"{state.type}(|xi|={state.xi:g},dim={state.dim})"
    if state.type == "random":
        return f"random(rank={state.rank or 'full'})"
    return state.type


def _observables_for(task: Task):
    s = task.state
    if s.continuous:
        extent, steps = task.husimi
        return _observables("husimi", float(extent), int(steps), int(s.dim))
    return _observables("pauli", int(s.qubits))


def _task_data(task: Task, obs, truth):
    if task.data_path:
        return DataSet.from_csv(task.data_path).check_against(obs)
    if task.noise == "depolarizing":
        data = measure(depolarize(truth, task.noise_level), obs)
    else:
        data = measure(truth, obs)
        if task.noise == "gaussian":
            sigma = math.sqrt(task.noise_level)
            data = gaussian_noise(data, sigma, int(np.random.SeedSequence([task.seed, 1]).generate_state(1)[0]))
    if task.data_size is not None and task.data_size < len(data):
        data = subsample(data, task.data_size, task.seed, keep_identity=obs.kind == "pauli")
    return data


def run_task(task: Task):
    """Execute one trial. Returns ``(record, extras)``; never raises."""
    s = task.state
    dim = s.dim if s.continuous else 2**s.qubits
    cfg = task.cfg
    rec = BenchRecord(
        experiment=task.experiment,
        method=task.method,
        state=state_label(s),
        qubits=0 if s.continuous else s.qubits,
        dim=dim,
        target_rank=1 if s.type != "random" else (s.rank or dim),
        ansatz_rank=None,
        trial=task.trial,
        seed=task.seed,
        fidelity=None,
        iterations=0,
        wall_s=0.0,
        recon_s=0.0,
        ms_per_iter=None,
        data_size=0,
        noise=task.noise,
        noise_level=task.noise_level,
        batch_size=None,
        eta0=None,
    )
    extras = {}
    try:
        obs = _observables_for(task)
        if task.data_path:
            truth = None
            if task.truth_path:
                from ..io import read_density

                truth = read_density(task.truth_path)
        else:
            truth, _ = make_truth(s, task.seed)
        data = _task_data(task, obs, truth)
        rec.data_size = len(data)
        if truth is None:
            rec.target_rank = None
        start = time.monotonic()
        if task.method in GD_METHODS:
            res = reconstruct(data, obs, replace(cfg, kind=task.method, seed=task.seed), truth=truth)
            rec.wall_s = time.monotonic() - start
            rho = res.rho
            rc = res.config
            rec.ansatz_rank, rec.batch_size, rec.eta0 = rc.rank, rc.batch_size, rc.eta0
            rec.iterations = res.iterations_run
            rec.recon_s = res.recon_time_trace[-1]
            rec.fidelity = res.final_fidelity
            if task.keep_trace:
                extras["result"] = res
        elif task.method == "imle":
            res = _run_imle(data, obs, cfg, truth)
            rec.wall_s = time.monotonic() - start
            rho = res.rho
            rec.iterations = res.iterations_run
            rec.recon_s = res.recon_time_trace[-1]
            rec.fidelity = res.final_fidelity
            if task.keep_trace:
                extras["result"] = res
        else:
            raw = linear_inversion(data, obs)
            rec.recon_s = rec.wall_s = time.monotonic() - start
            rec.ansatz_rank = dim
            if truth is not None:
                rec.fidelity = uj_fidelity(raw, truth, check=False)
            rec.wall_s = time.monotonic() - start
            rho = raw
            extras["min_eig"] = float(np.linalg.eigvalsh(raw)[0])
        if rec.iterations:
            rec.ms_per_iter = 1e3 * rec.recon_s / rec.iterations
        if task.method != "linear-inversion":
            qstates.check_density(rho)
        rec.output_rank = qstates.numerical_rank(rho)
        if task.keep_rho:
            extras["rho"] = rho
            extras["truth"] = truth
            extras["data"] = data
    except Exception as exc:  # a failed trial is recorded, the run continues
        log.exception("trial %s/%s/%d failed", task.experiment, task.method, task.trial)
        rec.status = f"error: {type(exc).__name__}: {exc}"
    return rec, extras


def _run_imle(data, obs, cfg: RunConfig, truth) -> ReconstructionResult:
    """iMLE with the same trace bookkeeping as the gradient-descent runs."""
    result = ReconstructionResult(rho=None, ansatz=None, config=cfg)
    start = time.monotonic()
    clock = {"spent": 0.0, "mark": start, "rho": None}

    def record(t, rho):
        clock["spent"] += time.monotonic() - clock["mark"]
        clock["rho"] = rho
        result.iters.append(t)
        result.loss_trace.append(float(np.sum((obs.expectations(rho, data.indices) - data.values) ** 2)))
        if truth is not None:
            result.fidelity_trace.append(uj_fidelity(rho, truth))
        result.recon_time_trace.append(clock["spent"])
        result.time_trace.append(time.monotonic() - start)
        clock["mark"] = time.monotonic()
        hit = truth is not None and cfg.fidelity_target is not None and result.fidelity_trace[-1] >= cfg.fidelity_target
        if hit:
            result.converged, result.stop_reason = True, "fidelity_target"
        return hit

    rho, iters = imle(data, obs, max_iters=cfg.max_iters, callback=record, record_every=cfg.record_every)
    result.rho = rho
    result.iterations_run = iters
    return result


# Per-experiment defaults applied before a config file and CLI flags.
EXPERIMENT_DEFAULTS = {
    "reconstruct": {},
    "bench-time": {
        "state": {"type": "random"},
        "methods": ["cd", "sm", "pn"],
        "qubits": [1, 2, 3, 4],
        "fidelity_target": 0.99,
        "max_iters": 5000,
    },
    "bench-rank": {
        "state": {"type": "random", "qubits": 4},
        "methods": ["cd", "sm", "pn"],
        "target_ranks": [1, 4, 16],
        "ansatz_ranks": [1, 4, 16],
        "fidelity_target": 0.99,
        "max_iters": 5000,
        # spread-out PN rows converge slowly at ranks > 1 with the default step
        "overrides": {"pn": {"eta0": 0.3, "alpha": 0.9995}},
    },
    "bench-data": {
        "state": {"type": "ghz", "qubits": 5},
        "methods": ["cd", "sm"],
        "rank": 1,
        "trials": 15,
        "sizes": [100, 150, 200, 250, 300, 400, 600, 800],
    },
    "bench-noise": {
        "state": {"type": "pure", "qubits": 4},
        "methods": ["cd", "linear-inversion"],
        "rank": 1,
        "levels": [0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
    },
    "cv-cat": {
        "state": {"type": "cat", "xi": 2.0, "dim": 32},
        "methods": ["cd", "sm", "pn", "imle"],
        "rank": 1,
        "max_iters": 5000,
        "batch_size": 1024,
        "record_every": 100,
        "trials": 1,
        # the relative phase between the two coherent components is a flat
        # direction of the loss; fast decay freezes the optimizer before it is fixed
        "overrides": {
            "cd": {"eta0": 0.1, "alpha": 1.0},
            "sm": {"eta0": 0.1, "alpha": 0.9995},
            "pn": {"eta0": 0.03, "alpha": 1.0},
        },
    },
    "sweep-hyper": {
        "state": {"type": "random", "qubits": 3},
        "methods": ["cd"],
        "trials": 5,
    },
}


def default_spec(experiment: str, **overrides) -> ExperimentSpec:
    """Spec for ``experiment`` with its defaults, then ``overrides`` (nested ``state`` merged)."""
    if experiment not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {experiment!r}")
    base = json.loads(json.dumps(EXPERIMENT_DEFAULTS[experiment]))
    state = base.pop("state", {})
    state.update(overrides.pop("state", {}) or {})
    # built-in per-method settings yield to fields the caller set globally
    per_method = {
        m: {k: v for k, v in d.items() if k not in overrides}
        for m, d in base.pop("overrides", {}).items()
    }
    for m, d in (overrides.pop("overrides", {}) or {}).items():
        per_method.setdefault(m, {}).update(d)
    base.update(overrides)
    base["overrides"] = {m: d for m, d in per_method.items() if d}
    base["experiment"] = experiment
    return ExperimentSpec.from_dict({**base, "state": state}).validate()


def build_tasks(spec: ExperimentSpec) -> list:
    """Expand a spec into independent trial tasks, in output order."""
    spec.validate()
    s = spec.state
    husimi = (spec.husimi_extent, spec.husimi_steps)
    tasks = []

    def add(method, state, trial, cfg=None, **kw):
        cfg = cfg or spec.run_config(method)
        tasks.append(
            Task(
                experiment=spec.experiment,
                method=method,
                state=state,
                trial=trial,
                seed=trial_seed(spec.seed, trial),
                cfg=cfg,
                husimi=husimi,
                **kw,
            )
        )

    exp = spec.experiment
    for method in spec.methods:
        cfg = spec.run_config(method)
        if exp == "reconstruct":
            for k in range(spec.trials):
                add(
                    method, s, k, keep_rho=True, keep_trace=True,
                    data_path=spec.data_path, truth_path=spec.truth_path,
                )
        elif exp == "bench-time":
            for n in spec.qubits:
                for k in range(spec.trials):
                    add(method, replace(s, qubits=int(n)), k)
        elif exp == "bench-rank":
            for tr in spec.target_ranks:
                for ar in spec.ansatz_ranks:
                    for k in range(spec.trials):
                        add(method, replace(s, rank=int(tr)), k, cfg=replace(cfg, rank=int(ar)))
        elif exp == "bench-data":
            for m in spec.sizes:
                for k in range(spec.trials):
                    add(method, s, k, data_size=int(m))
        elif exp == "bench-noise":
            for lvl in spec.levels:
                for k in range(spec.trials):
                    add(method, s, k, noise=spec.noise, noise_level=float(lvl))
        elif exp == "cv-cat":
            for k in range(spec.trials):
                add(method, s, k, keep_rho=True, keep_trace=True)
        elif exp == "sweep-hyper":
            for bs in spec.batch_sizes:
                for eta in spec.step_sizes:
                    for k in range(spec.trials):
                        add(method, s, k, cfg=replace(cfg, batch_size=int(bs), eta0=float(eta)))
    return tasks


def execute(tasks, workers: int = 1) -> list:
    """Run tasks, returning ``(record, extras)`` pairs in task order."""
    if workers <= 1 or len(tasks) <= 1:
        return [run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_task, tasks))


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_records(path, records):
    cols = [f.name for f in fields(BenchRecord)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in records:
            w.writerow([_fmt(getattr(r, c)) for c in cols])


SWEEP_KEYS = ("experiment", "method", "state", "qubits", "dim", "target_rank", "ansatz_rank",
              "data_size", "noise", "noise_level", "batch_size", "eta0")
STAT_KEYS = ("fidelity", "iterations", "wall_s", "recon_s", "ms_per_iter")


def summarize(records) -> list:
    """Mean/std of the measured columns per sweep point (successful trials only)."""
    groups = {}
    for r in records:
        key = tuple(getattr(r, k) for k in SWEEP_KEYS)
        groups.setdefault(key, []).append(r)
    rows = []
    for key, recs in groups.items():
        ok = [r for r in recs if r.status == "ok"]
        row = dict(zip(SWEEP_KEYS, key))
        row["trials"] = len(recs)
        row["errors"] = len(recs) - len(ok)
        for k in STAT_KEYS:
            vals = np.array([getattr(r, k) for r in ok if getattr(r, k) is not None], dtype=float)
            row[f"{k}_mean"] = float(vals.mean()) if vals.size else None
            row[f"{k}_std"] = float(vals.std()) if vals.size else None
        rows.append(row)
    return rows


def write_summary(path, rows):
    if not rows:
        return
    cols = list(rows[0])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in cols])


def _wigner_of(rho, spec: ExperimentSpec):
    return wigner(rho, spec.wigner_extent, spec.wigner_steps)


def run_experiment(spec: ExperimentSpec):
    """Run every trial of ``spec`` and write CSV artifacts under ``spec.out_dir``.

    Files: ``<experiment>_<method>.csv`` (one row per trial),
    ``<experiment>_summary.csv``, ``manifest.json``, and for ``reconstruct``
    and ``cv-cat`` per-trial traces, density matrices and (cv-cat) Wigner grids.
    Returns the list of BenchRecords in output order.
    """
    spec.validate()
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = build_tasks(spec)
    results = execute(tasks, spec.workers)
    records = [rec for rec, _ in results]

    files = []
    for method in spec.methods:
        path = out / f"{spec.experiment}_{method}.csv"
        write_records(path, [r for r in records if r.method == method])
        files.append(path.name)
    summary = out / f"{spec.experiment}_summary.csv"
    write_summary(summary, summarize(records))
    files.append(summary.name)

    truth_written = set()
    for task, (rec, extras) in zip(tasks, results):
        if rec.status != "ok":
            continue
        tag = f"{task.method}_trial{task.trial}"
        if "result" in extras:
            (out / "traces").mkdir(exist_ok=True)
            extras["result"].to_csv(out / "traces" / f"{tag}.csv")
            files.append(f"traces/{tag}.csv")
        rho = extras.get("rho")
        if rho is None:
            continue
        if qstates.is_density(rho):  # raw linear-inversion output is not written
            (out / "rho").mkdir(exist_ok=True)
            write_density(rho, out / "rho" / f"{tag}.txt")
            files.append(f"rho/{tag}.txt")
        if spec.experiment == "cv-cat":
            (out / "wigner").mkdir(exist_ok=True)
            if qstates.is_density(rho):
                _wigner_of(rho, spec).to_csv(out / "wigner" / f"{tag}.csv")
                files.append(f"wigner/{tag}.csv")
            truth = extras.get("truth")
            if truth is not None and task.trial not in truth_written:
                _wigner_of(truth, spec).to_csv(out / "wigner" / f"truth_trial{task.trial}.csv")
                files.append(f"wigner/truth_trial{task.trial}.csv")
                truth_written.add(task.trial)

    errors = sum(r.status != "ok" for r in records)
    manifest = {
        "spec": asdict(spec),
        "records": len(records),
        "errors": errors,
        "files": files,
        "timing_columns": list(WALL_CLOCK_COLUMNS),
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return records
