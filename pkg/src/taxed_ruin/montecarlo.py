"""Path simulation of the taxed surplus and first-passage estimators.

Compound Poisson models (``sigma = 0``) are simulated exactly, one claim at a
time: between claims ``X`` rises linearly, the running maximum ``S`` moves
only while ``X`` sits on it, and the tax paid over such a ladder stretch is
``int gamma(u) du`` over the levels crossed. Gaussian models use an Euler grid
in which the running maximum is sampled from the Brownian-bridge maximum of
each step and ruin between grid points is decided by a bridge hit test.

All paths of a run are advanced together as numpy arrays. Random draws are
keyed by (seed, path id, draw index) so results do not depend on chunking or
thread count.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from .errors import DomainError
from .levy import LevyModel, phi
from .rng import CounterRNG
from .tax import TaxRule

log = logging.getLogger(__name__)

PATH_CSV_COLUMNS = ("path_id", "tau_plus", "tau_minus", "kappa", "sup_at_ruin",
                    "undershoot", "deficit", "discounted_tax", "creep", "censored")

# draw slots per step
_EXACT_SLOTS = 4
_EULER_SLOTS = 16
_EULER_MAX_CLAIMS = 3


@dataclass(frozen=True)
class SimConfig:
    n_paths: int = 100_000
    rng_seed: int = 0
    euler_step: float = 0.01
    time_horizon: float = 100.0
    q: float = 0.0
    a: float | None = None
    creep_tol: float = 1e-9
    substeps: int = 1
    chunk_size: int = 1 << 17
    threads: int = 1
    # undiscounted estimands (q = 0) are censored at the horizon; callers must opt in
    acknowledge_horizon: bool = False

    def __post_init__(self):
        if self.n_paths < 1:
            raise DomainError("n_paths must be >= 1")
        if not (self.euler_step > 0 and self.time_horizon > 0):
            raise DomainError("euler_step and time_horizon must be > 0")
        if self.q < 0:
            raise DomainError("q must be >= 0")
        if self.substeps < 1:
            raise DomainError("substeps must be >= 1")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass(frozen=True)
class PathRecord:
    path_id: int
    tau_plus: float
    tau_minus: float
    kappa: float
    sup_at_ruin: float
    undershoot: float
    deficit: float
    discounted_tax: float
    creep: bool
    censored: bool
    sup_gap: float
    x_at_upper: float
    s_final: float
    tax_final: float

    @property
    def hit_upper(self) -> bool:
        return math.isfinite(self.tau_plus)

    @property
    def ruined(self) -> bool:
        return math.isfinite(self.tau_minus)


@dataclass
class PathBatch:
    """Column arrays of :class:`PathRecord` fields, ordered by path id."""

    path_id: np.ndarray
    tau_plus: np.ndarray
    tau_minus: np.ndarray
    kappa: np.ndarray
    sup_at_ruin: np.ndarray
    undershoot: np.ndarray
    deficit: np.ndarray
    discounted_tax: np.ndarray
    creep: np.ndarray
    censored: np.ndarray
    sup_gap: np.ndarray
    x_at_upper: np.ndarray
    s_final: np.ndarray
    tax_final: np.ndarray

    def __len__(self):
        return len(self.path_id)

    @property
    def ruined(self):
        return np.isfinite(self.tau_minus)

    @property
    def hit_upper(self):
        return np.isfinite(self.tau_plus)

    def record(self, i: int) -> PathRecord:
        vals = {f.name: getattr(self, f.name)[i].item() for f in fields(self)}
        return PathRecord(**vals)

    @classmethod
    def concat(cls, parts: list["PathBatch"]) -> "PathBatch":
        return cls(**{f.name: np.concatenate([getattr(p, f.name) for p in parts])
                      for f in fields(cls)})

    def to_csv(self, path) -> None:
        cols = [self.path_id, self.tau_plus, self.tau_minus, self.kappa, self.sup_at_ruin,
                self.undershoot, self.deficit, self.discounted_tax, self.creep, self.censored]
        with open(path, "w", newline="") as fh:
            fh.write(",".join(PATH_CSV_COLUMNS) + "\n")
            for row in zip(*cols):
                pid, *reals, creep, cens = row
                fh.write(",".join([str(int(pid))] + [_fmt(v) for v in reals]
                                  + [str(int(creep)), str(int(cens))]) + "\n")


def _fmt(v: float) -> str:
    return f"{v:.16e}" if math.isfinite(v) else ("inf" if v > 0 else ("-inf" if v < 0 else "nan"))


@dataclass(frozen=True)
class Estimate:
    mean: float
    std_error: float
    n: int
    bias_bound: float = 0.0

    @classmethod
    def from_samples(cls, samples: np.ndarray, bias_bound: float = 0.0) -> "Estimate":
        n = len(samples)
        # np.sum is pairwise; the fixed path order makes the result reproducible
        mean = float(np.sum(samples) / n)
        var = float(np.sum((samples - mean) ** 2) / (n - 1)) if n > 1 else 0.0
        return cls(mean, math.sqrt(var / n), n, float(bias_bound))


# -- tax bookkeeping ----------------------------------------------------------

def _discounted_ladder_tax(rule: TaxRule, q: float, c: float, t1, s1, s2):
    """``int exp(-q u) gamma(S_u) dS_u`` while ``S`` rises linearly from ``s1`` to ``s2`` at rate ``c``."""
    out = np.zeros_like(s1)
    br = rule.breakpoints
    hi_br = np.append(br[1:], np.inf)
    for lo_k, hi_k, g in zip(br, hi_br, rule.rates):
        if g == 0.0:
            continue
        lo = np.maximum(s1, lo_k)
        hi = np.minimum(s2, hi_k)
        m = hi > lo
        if not np.any(m):
            continue
        if q == 0.0:
            out = out + np.where(m, g * (hi - lo), 0.0)
        else:
            u_lo = t1 + (lo - s1) / c
            du = (hi - lo) / c
            part = g * c * np.exp(-q * u_lo) * (-np.expm1(-q * du)) / q
            out = out + np.where(m, part, 0.0)
    return out


def _claim_sizes(model: LevyModel, u_comp, u_size):
    cum = np.cumsum(model.weights)
    cum[-1] = 1.0
    comp = np.searchsorted(cum, u_comp, side="right")
    comp = np.minimum(comp, len(cum) - 1)
    return -np.log(u_size) / model.rates[comp]


def _empty_batch(path_ids, x):
    n = len(path_ids)
    inf = np.full(n, np.inf)
    nan = np.full(n, np.nan)
    return PathBatch(
        path_id=np.asarray(path_ids, dtype=np.int64), tau_plus=inf.copy(), tau_minus=inf.copy(),
        kappa=nan.copy(), sup_at_ruin=nan.copy(), undershoot=nan.copy(), deficit=nan.copy(),
        discounted_tax=np.zeros(n), creep=np.zeros(n, dtype=bool), censored=np.zeros(n, dtype=bool),
        sup_gap=np.zeros(n), x_at_upper=nan.copy(), s_final=np.full(n, x), tax_final=np.zeros(n))


# -- exact event-driven simulation (sigma = 0) --------------------------------

def _simulate_exact(model: LevyModel, rule: TaxRule, cfg: SimConfig, path_ids) -> PathBatch:
    x = rule.x
    c = model.drift
    lam = model.jump_rate
    rng = CounterRNG(cfg.rng_seed)
    keys_all = rng.path_keys(path_ids)
    out = _empty_batch(path_ids, x)
    n = len(path_ids)
    b_up = rule.gamma_bar_inv(cfg.a) if cfg.a is not None else np.inf

    idx = np.arange(n)
    t = np.zeros(n)
    X = np.full(n, x)
    S = np.full(n, x)
    T = np.zeros(n)
    SU = np.full(n, x)
    D = np.zeros(n)
    kap = np.zeros(n)
    gap = np.zeros(n)
    step = 0
    while idx.size:
        keys = keys_all[idx]
        base = step * _EXACT_SLOTS
        w = rng.exponential(keys, base) / lam
        t_claim = t + w
        d = (S - X) / c
        ladder = d < w
        l_start = t + np.where(ladder, d, w)

        # stopping before the claim: upper barrier, then horizon
        t_stop = np.minimum(t_claim, cfg.time_horizon)
        s_reach = np.where(ladder, S + c * np.maximum(t_stop - l_start, 0.0), S)
        up = ladder & (s_reach > b_up)
        t_up = l_start + (b_up - S) / c
        s_end = np.where(up, b_up, s_reach)
        tax_inc = rule.cumulative_tax(s_end) - rule.cumulative_tax(S)
        D_new = D + _discounted_ladder_tax(rule, cfg.q, c, l_start, S, s_end)
        T_new = T + tax_inc
        cens = ~up & (t_claim > cfg.time_horizon)

        # upper passage
        if np.any(up):
            j = idx[up]
            out.tau_plus[j] = t_up[up]
            out.x_at_upper[j] = S[up] + c * (t_up[up] - l_start[up])
        # censoring at the horizon
        fin = up | cens
        if np.any(fin):
            j = idx[fin]
            out.censored[j] = cens[fin]
            out.discounted_tax[j] = D_new[fin]
            out.s_final[j] = s_end[fin]
            out.tax_final[j] = T_new[fin]
            out.sup_gap[j] = gap[fin]

        go = ~fin
        # claim
        x_pre = np.where(ladder, s_end, X + c * w)
        u_pre = x_pre - T_new
        su_new = np.maximum(SU, u_pre)
        gap_new = np.maximum(gap, np.abs(su_new - (s_end - T_new)))
        kap_new = np.where(ladder, t_claim, kap)
        y = _claim_sizes(model, rng.uniform(keys, base + 1), rng.uniform(keys, base + 2))
        x_post = x_pre - y
        u_post = x_post - T_new
        ruin = go & (u_post < 0)
        if np.any(ruin):
            j = idx[ruin]
            out.tau_minus[j] = t_claim[ruin]
            out.kappa[j] = kap_new[ruin]
            out.sup_at_ruin[j] = su_new[ruin]
            out.undershoot[j] = u_pre[ruin]
            out.deficit[j] = -u_post[ruin]
            out.discounted_tax[j] = D_new[ruin]
            out.s_final[j] = s_end[ruin]
            out.tax_final[j] = T_new[ruin]
            out.sup_gap[j] = gap_new[ruin]

        keep = go & ~ruin
        idx = idx[keep]
        t, X, S, T = t_claim[keep], x_post[keep], s_end[keep], T_new[keep]
        SU, D, kap, gap = su_new[keep], D_new[keep], kap_new[keep], gap_new[keep]
        step += 1
    return out


# -- Euler scheme (sigma > 0) -------------------------------------------------

def _poisson_small(u, mean):
    """Inverse-cdf Poisson count capped at ``_EULER_MAX_CLAIMS``."""
    p = np.exp(-mean)
    cdf = p
    k = np.zeros(u.shape, dtype=np.int64)
    for i in range(1, _EULER_MAX_CLAIMS + 1):
        k = k + (u > cdf)
        p = p * mean / i
        cdf = cdf + p
    return k


def _simulate_euler(model: LevyModel, rule: TaxRule, cfg: SimConfig, path_ids) -> PathBatch:
    x = rule.x
    mu, sig = model.drift, model.sigma
    m = cfg.substeps
    h = cfg.euler_step
    hf = h / m
    rng = CounterRNG(cfg.rng_seed)
    keys_all = rng.path_keys(path_ids)
    out = _empty_batch(path_ids, x)
    n = len(path_ids)
    b_up = rule.gamma_bar_inv(cfg.a) if cfg.a is not None else np.inf
    n_steps = int(math.ceil(cfg.time_horizon / h - 1e-12))

    idx = np.arange(n)
    X = np.full(n, x)
    S = np.full(n, x)
    T = np.zeros(n)
    SU = np.full(n, x)
    D = np.zeros(n)
    kap = np.zeros(n)
    gap = np.zeros(n)
    for k in range(n_steps):
        if not idx.size:
            break
        keys = keys_all[idx]
        t0 = k * h
        t1 = t0 + h
        run = np.zeros(idx.size)
        mx = np.zeros(idx.size)
        jump = np.zeros(idx.size)
        for i in range(m):
            base = (k * m + i) * _EULER_SLOTS
            dx = mu * hf + sig * math.sqrt(hf) * rng.normal(keys, base // 2)
            v = rng.uniform(keys, base + 2)
            bridge_max = 0.5 * (dx + np.sqrt(dx * dx - 2.0 * sig * sig * hf * np.log(v)))
            mx = np.maximum(mx, run + bridge_max)
            run = run + dx
            if model.has_jumps:
                cnt = _poisson_small(rng.uniform(keys, base + 3), model.jump_rate * hf)
                for c_i in range(_EULER_MAX_CLAIMS):
                    sz = _claim_sizes(model, rng.uniform(keys, base + 4 + 2 * c_i),
                                      rng.uniform(keys, base + 5 + 2 * c_i))
                    jump = jump + np.where(cnt > c_i, sz, 0.0)

        s_new = np.maximum(S, X + mx)
        up = s_new > b_up
        s_new = np.where(up, b_up, s_new)
        tax_inc = rule.cumulative_tax(s_new) - rule.cumulative_tax(S)
        T_new = T + tax_inc
        D_new = D + math.exp(-cfg.q * (t0 + 0.5 * h)) * tax_inc
        kap_new = np.where(s_new > S, t1, kap)
        su_new = np.maximum(SU, s_new - T_new)
        u0 = X - T
        u_pre = X + run - T_new
        gap_new = np.maximum(gap, np.abs(su_new - np.maximum(SU, np.maximum(u_pre, u0))))

        if np.any(up):
            j = idx[up]
            out.tau_plus[j] = t1
            out.x_at_upper[j] = b_up
            out.discounted_tax[j] = D_new[up]
            out.s_final[j] = s_new[up]
            out.tax_final[j] = T_new[up]
            out.sup_gap[j] = gap_new[up]

        # ruin by the continuous part: endpoint below zero or a bridge dip
        u_cross = rng.uniform(keys, (k * m) * _EULER_SLOTS + 15)
        with np.errstate(over="ignore", invalid="ignore"):
            p_dip = np.exp(-2.0 * np.maximum(u0, 0.0) * np.maximum(u_pre, 0.0) / (sig * sig * h))
        creep = ~up & ((u_pre <= cfg.creep_tol) | (u_cross < p_dip))
        u_post = u_pre - jump
        jruin = ~up & ~creep & (u_post < 0)
        ruin = creep | jruin
        if np.any(ruin):
            j = idx[ruin]
            out.tau_minus[j] = t1
            out.kappa[j] = kap_new[ruin]
            out.sup_at_ruin[j] = su_new[ruin]
            out.creep[j] = creep[ruin]
            out.undershoot[j] = np.where(creep[ruin], 0.0, u_pre[ruin])
            out.deficit[j] = np.where(creep[ruin], 0.0, -u_post[ruin])
            out.discounted_tax[j] = D_new[ruin]
            out.s_final[j] = s_new[ruin]
            out.tax_final[j] = T_new[ruin]
            out.sup_gap[j] = gap_new[ruin]

        keep = ~(up | ruin)
        idx = idx[keep]
        X = (X + run - jump)[keep]
        S, T, SU, D = s_new[keep], T_new[keep], su_new[keep], D_new[keep]
        kap, gap = kap_new[keep], gap_new[keep]

    if idx.size:
        out.censored[idx] = True
        out.discounted_tax[idx] = D
        out.s_final[idx] = S
        out.tax_final[idx] = T
        out.sup_gap[idx] = gap
    return out


# -- drivers ------------------------------------------------------------------

def _check_rate(rate: float, cfg: SimConfig, what: str):
    if rate < 0:
        raise DomainError(f"{what} must be >= 0")
    if rate == 0 and not cfg.acknowledge_horizon:
        raise DomainError(f"{what} = 0 gives a horizon-censored estimate; "
                          "set acknowledge_horizon to accept it")


def _validate(model: LevyModel, rule: TaxRule, x: float, cfg: SimConfig):
    if not x > 0:
        raise DomainError("x must be > 0")
    if abs(rule.x - x) > 1e-12 * max(1.0, x):
        raise DomainError("tax rule base level differs from x")
    if cfg.a is not None and not cfg.a > x:
        raise DomainError("upper barrier a must exceed x")
    if model.sigma > 0 and cfg.a is not None:
        gap = cfg.a - x
        if cfg.euler_step * (abs(model.drift) + model.sigma) > 0.5 * gap:
            log.warning("Euler step %.3g is coarse relative to the barrier gap %.3g", cfg.euler_step, gap)


def simulate(model: LevyModel, rule: TaxRule, x: float, config: SimConfig,
             path_ids=None) -> PathBatch:
    """Simulate ``config.n_paths`` paths (or the given ids) from ``U_0 = x``."""
    _validate(model, rule, x, config)
    if path_ids is None:
        path_ids = np.arange(config.n_paths, dtype=np.uint64)
    path_ids = np.asarray(path_ids, dtype=np.uint64)
    kernel = _simulate_exact if model.sigma == 0 else _simulate_euler
    chunks = [path_ids[i:i + config.chunk_size]
              for i in range(0, len(path_ids), config.chunk_size)]
    if config.threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(config.threads) as pool:
            parts = list(pool.map(lambda ch: kernel(model, rule, config, ch), chunks))
    else:
        parts = [kernel(model, rule, config, ch) for ch in chunks]
    return PathBatch.concat(parts)


def simulate_path(model: LevyModel, rule: TaxRule, x: float, config: SimConfig,
                  path_id: int = 0) -> PathRecord:
    """One path; identical to row ``path_id`` of a full :func:`simulate` run."""
    return simulate(model, rule, x, config, [path_id]).record(0)


def exit_samples(batch: PathBatch, q: float) -> np.ndarray:
    hit = batch.hit_upper & ~batch.ruined
    return np.where(hit, np.exp(-q * np.where(hit, batch.tau_plus, 0.0)), 0.0)


def estimate_exit(model: LevyModel, rule: TaxRule, q: float, x: float, a: float,
                  config: SimConfig) -> Estimate:
    """``E_x[exp(-q tau_a^+); tau_a^+ < tau_0^-]``; censored paths count 0."""
    _check_rate(q, config, "q")
    batch = simulate(model, rule, x, replace(config, a=a))
    return Estimate.from_samples(exit_samples(batch, q), math.exp(-q * config.time_horizon))


def npv_bias_bound(model: LevyModel, rule: TaxRule, q: float, t_max: float) -> float:
    """Bound on the discounted tax after the horizon: ``S`` at an independent
    exponential(q) time is exponential(Phi(q)), so ``E int_T^inf e^{-qu} dS_u <= e^{-qT} / Phi(q)``."""
    return rule.max_rate * math.exp(-q * t_max) / phi(model, q)


def estimate_npv(model: LevyModel, rule: TaxRule, q: float, x: float,
                 config: SimConfig, batch: PathBatch | None = None) -> Estimate:
    if q <= 0:
        raise DomainError("tax NPV estimation needs q > 0")
    if batch is None:
        batch = simulate(model, rule, x, replace(config, q=q, a=None))
    return Estimate.from_samples(batch.discounted_tax, npv_bias_bound(model, rule, q, config.time_horizon))


@dataclass(frozen=True)
class Region:
    """Box in (sup at ruin, surplus before ruin, deficit); ``creep`` selects creeping ruin instead."""

    theta: tuple[float, float] = (-np.inf, np.inf)
    y: tuple[float, float] = (-np.inf, np.inf)
    z: tuple[float, float] = (-np.inf, np.inf)
    creep: bool | None = None

    def contains(self, batch: PathBatch) -> np.ndarray:
        ruined = batch.ruined
        with np.errstate(invalid="ignore"):
            m = ruined & (batch.sup_at_ruin > self.theta[0]) & (batch.sup_at_ruin < self.theta[1])
            if self.creep is True:
                return m & batch.creep
            m = m & (batch.undershoot > self.y[0]) & (batch.undershoot < self.y[1])
            m = m & (batch.deficit > self.z[0]) & (batch.deficit < self.z[1])
        if self.creep is False:
            m = m & ~batch.creep
        return m


FULL = Region()


def gs_samples(batch: PathBatch, alpha: float, beta: float, region: Region) -> np.ndarray:
    m = region.contains(batch)
    kap = np.where(m, batch.kappa, 0.0)
    tau = np.where(m, batch.tau_minus, 0.0)
    return np.where(m, np.exp(-alpha * kap - beta * (tau - kap)), 0.0)


def estimate_gs_mass(model: LevyModel, rule: TaxRule, alpha: float, beta: float, x: float,
                     region: Region, config: SimConfig,
                     batch: PathBatch | None = None) -> Estimate:
    """``E_x[exp(-alpha kappa - beta (tau_0^- - kappa)); (S^U, U_-, -U) in region]``."""
    _check_rate(min(alpha, beta), config, "min(alpha, beta)")
    if batch is None:
        batch = simulate(model, rule, x, replace(config, a=None))
    return Estimate.from_samples(gs_samples(batch, alpha, beta, region),
                                 math.exp(-min(alpha, beta) * config.time_horizon))
