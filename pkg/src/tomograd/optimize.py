"""Adam with decaying step size, Stiefel descent, mini-batching and the reconstruction loop."""
from __future__ import annotations

import csv
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import ansatz as az
from .errors import DegenerateAnsatzError, InvalidArgumentError, ZeroGradient
from .measurement import DataSet, ObservableSet
from .metrics import uj_fidelity
from .objective import grad_cd, grad_pn, grad_sm, loss

DEFAULT_ETA0 = {"cd": 1.0, "cd-tri": 1.0, "sm": 0.1, "pn": 1e-2}


def _real(x):
    """Real view of a parameter array; complex entries become (re, im) pairs."""
    x = np.asarray(x)
    return x.view(np.float64) if np.iscomplexobj(x) else x.astype(np.float64, copy=False)


@dataclass
class AdamState:
    m1: list
    m2: list
    eta: float
    alpha: float = 0.999
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0

    @classmethod
    def zeros_like(cls, params, eta, **kw):
        m1 = [np.zeros(_real(np.ascontiguousarray(p)).shape) for p in params]
        return cls(m1=m1, m2=[np.zeros_like(m) for m in m1], eta=eta, **kw)


def adam_step(state: AdamState, params, grads):
    """One Adam update with step-size decay ``eta_t = alpha * eta_{t-1}``.

    Complex parameters are updated coordinate-wise on their real and
    imaginary parts. Returns the new state and new parameter arrays; inputs
    are not modified.
    """
    if not (len(params) == len(grads) == len(state.m1)):
        raise InvalidArgumentError("params, grads and moment buffers differ in length")
    t = state.t + 1
    eta = state.alpha * state.eta
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    new_m1, new_m2, new_params = [], [], []
    for p, g, m, v in zip(params, grads, state.m1, state.m2):
        p = np.ascontiguousarray(p)
        g = np.ascontiguousarray(g, dtype=p.dtype)
        if p.shape != g.shape or _real(p).shape != m.shape:
            raise InvalidArgumentError(f"shape mismatch: param {p.shape}, grad {g.shape}")
        gr = _real(g)
        m = state.beta1 * m + (1.0 - state.beta1) * gr
        v = state.beta2 * v + (1.0 - state.beta2) * gr * gr
        step = eta * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
        q = _real(p) - step
        new_params.append(q.view(p.dtype).reshape(p.shape) if np.iscomplexobj(p) else q)
        new_m1.append(m)
        new_m2.append(v)
    return replace(state, m1=new_m1, m2=new_m2, eta=eta, t=t), new_params


def minibatches(n_total: int, batch_size: int, seed, n_iters: int):
    """Yield ``n_iters`` independent uniform batches (positions into the data set)."""
    if n_total < 1 or batch_size < 1 or batch_size > n_total:
        raise InvalidArgumentError(f"need 1 <= batch_size <= n_total, got {batch_size}, {n_total}")
    rng = np.random.default_rng(seed)
    full = np.arange(n_total)
    for _ in range(n_iters):
        if batch_size == n_total:
            yield full
        else:
            yield np.sort(rng.choice(n_total, size=batch_size, replace=False))


@dataclass
class RunConfig:
    kind: str = "cd"
    rank: int | None = None  # None: full rank
    max_iters: int = 800
    batch_size: int = 256
    eta0: float | None = None  # None: per-parameterization default
    alpha: float = 0.999
    lambda_l1: float = 0.0
    seed: int = 0
    record_every: int = 10
    fidelity_target: float | None = None
    early_stop: bool = False
    renormalize_every: int = 100

    def resolved(self, dim: int, n_data: int) -> "RunConfig":
        if self.kind not in az.KINDS:
            raise InvalidArgumentError(f"unknown parameterization {self.kind!r}")
        if self.max_iters < 1 or self.record_every < 1:
            raise InvalidArgumentError("max_iters and record_every must be >= 1")
        rank = dim if (self.rank is None or self.kind == "cd-tri") else self.rank
        eta0 = DEFAULT_ETA0[self.kind] if self.eta0 is None else self.eta0
        return replace(self, rank=rank, eta0=eta0, batch_size=min(self.batch_size, n_data))


@dataclass
class ReconstructionResult:
    rho: np.ndarray
    ansatz: object
    iters: list = field(default_factory=list)
    loss_trace: list = field(default_factory=list)
    fidelity_trace: list = field(default_factory=list)
    time_trace: list = field(default_factory=list)
    recon_time_trace: list = field(default_factory=list)
    iterations_run: int = 0
    converged: bool = False
    stop_reason: str = "max_iters"
    config: RunConfig | None = None

    @property
    def final_fidelity(self):
        return self.fidelity_trace[-1] if self.fidelity_trace else None

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "cum_time_s", "loss", "fidelity"])
            fids = self.fidelity_trace or [None] * len(self.iters)
            for it, tm, ls, fd in zip(self.iters, self.time_trace, self.loss_trace, fids):
                w.writerow([it, repr(tm), repr(ls), "" if fd is None else repr(fd)])

    def config_dict(self):
        return asdict(self.config) if self.config else {}


class _Stepper:
    """Holds the parameterization and its optimizer state for one run."""

    def __init__(self, cfg: RunConfig, dim: int):
        self.kind = cfg.kind
        self.cfg = cfg
        # own stream so the start point never coincides with a state drawn from the same seed
        self.ansatz = az.init_ansatz(cfg.kind, dim, cfg.rank, np.random.SeedSequence([cfg.seed, 0xA7]))
        self.t = 0
        if self.kind in ("cd", "cd-tri"):
            params = [self.ansatz.T]
        elif self.kind == "pn":
            params = [self.ansatz.C, self.ansatz.Q]
        else:
            params = None
        if params is not None:
            self.adam = AdamState.zeros_like(params, cfg.eta0, alpha=cfg.alpha)

    def density(self):
        return self.ansatz.density()

    def step(self, data, obs, batch):
        """Advance one iteration; returns False if the gradient vanished."""
        cfg = self.cfg
        self.t += 1
        a = self.ansatz
        if self.kind in ("cd", "cd-tri"):
            G = grad_cd(a, data, obs, batch, cfg.lambda_l1)
            if not np.any(G):
                return False
            self.adam, (T,) = adam_step(self.adam, [a.T], [G])
            if a.triangular:
                T = np.where(az.lower_mask(a.dim), T, 0)
            self.ansatz = az.CholeskyAnsatz(T, a.triangular)
            if np.vdot(T, T).real <= 1e-30:
                raise DegenerateAnsatzError(f"Cholesky factor collapsed at iteration {self.t}")
        elif self.kind == "pn":
            dC, dQ = grad_pn(a, data, obs, batch, cfg.lambda_l1)
            if not (np.any(dC) or np.any(dQ)):
                return False
            self.adam, (C, Q) = adam_step(self.adam, [a.C, a.Q], [dC, dQ])
            try:
                self.ansatz = az.pn_project(C, Q)
            except DegenerateAnsatzError as exc:
                raise DegenerateAnsatzError(f"{exc} at iteration {self.t}") from exc
        else:
            G = grad_sm(a, data, obs, batch, cfg.lambda_l1)
            eta = cfg.eta0 * cfg.alpha**self.t
            try:
                a = az.sm_retract_step(a, G, eta)
            except ZeroGradient:
                return False
            if cfg.renormalize_every and self.t % cfg.renormalize_every == 0:
                a = az.sm_renormalize(a)
            self.ansatz = a
        return True


def reconstruct(
    data: DataSet,
    obs: ObservableSet,
    cfg: RunConfig,
    truth: np.ndarray | None = None,
    callback=None,
) -> ReconstructionResult:
    """Fit a density matrix to ``data`` by mini-batch gradient descent.

    Cholesky and projective-normalization parameterizations use Adam; the
    Stiefel parameterization uses plain descent with the Cayley retraction.
    Full-data loss (and fidelity against ``truth`` when given) is recorded at
    iteration 0 and every ``record_every`` iterations; ``callback(t, rho)``
    is invoked at the same points.
    """
    data.check_against(obs)
    cfg = cfg.resolved(obs.dim, len(data))
    stepper = _Stepper(cfg, obs.dim)
    result = ReconstructionResult(rho=None, ansatz=None, config=cfg)
    batch_seed = np.random.SeedSequence([cfg.seed, 0x5EED])
    batches = minibatches(len(data), cfg.batch_size, batch_seed, cfg.max_iters)

    start = time.monotonic()
    recon_time = 0.0
    last_es_loss = None

    def record(t):
        rho = stepper.density()
        result.iters.append(t)
        result.loss_trace.append(loss(rho, data, obs, None, cfg.lambda_l1))
        if truth is not None:
            result.fidelity_trace.append(uj_fidelity(rho, truth))
        result.recon_time_trace.append(recon_time)
        result.time_trace.append(time.monotonic() - start)
        if callback is not None:
            callback(t, rho)

    record(0)
    t = 0
    for t, batch in enumerate(batches, start=1):
        t0 = time.monotonic()
        moved = stepper.step(data, obs, batch)
        recon_time += time.monotonic() - t0
        if not moved:
            result.converged, result.stop_reason = True, "zero_gradient"
            record(t)
            break
        if t % cfg.record_every == 0 or t == cfg.max_iters:
            record(t)
            if cfg.fidelity_target is not None and result.fidelity_trace:
                if result.fidelity_trace[-1] >= cfg.fidelity_target:
                    result.converged, result.stop_reason = True, "fidelity_target"
                    break
        if cfg.early_stop and t % 50 == 0:
            cur = loss(stepper.density(), data, obs, None, cfg.lambda_l1)
            if last_es_loss is not None and abs(last_es_loss - cur) < 1e-10:
                result.converged, result.stop_reason = True, "loss_plateau"
                if result.iters[-1] != t:
                    record(t)
                break
            last_es_loss = cur

    result.iterations_run = t
    result.rho = stepper.density()
    result.ansatz = stepper.ansatz
    return result
