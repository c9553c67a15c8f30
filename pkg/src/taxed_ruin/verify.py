"""Analytic-versus-oracle checks behind ``taxed-ruin verify``.

Every check compares a computed ``value`` with a ``reference`` and passes when
``|value - reference| <= tolerance``. Monte Carlo checks use three standard
errors plus the reported censoring bias bound as tolerance.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .identities import (constant_gamma_oracles, excursion_creep_term, excursion_overshoot_mass,
                         gerber_shiu_creep_mass, gerber_shiu_mass, tax_npv, two_sided_exit)
from .levy import LevyModel, laplace_exponent, phi
from .montecarlo import (FULL, Estimate, Region, SimConfig, exit_samples, gs_samples,
                         npv_bias_bound, simulate)
from .quadrature import adaptive_panels, graded_edges
from .scale import ScaleEngine, scale_tilted_eval
from .tax import TaxRule

REPORT_COLUMNS = ("check", "anchor", "value", "reference", "tolerance", "status")

# full-scale Monte Carlo settings for the shipped scenario set
DEFAULT_VERIFY_SIM = SimConfig(n_paths=1_000_000, rng_seed=7, time_horizon=150.0)

EngineFactory = Callable[[LevyModel, float], ScaleEngine]


@dataclass(frozen=True)
class CheckResult:
    check: str
    anchor: str
    value: float
    reference: float
    tolerance: float

    @property
    def passed(self) -> bool:
        d = abs(self.value - self.reference)
        return bool(np.isfinite(d) and d <= self.tolerance)

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"


def _f(v: float) -> str:
    return f"{v:.16e}"


def format_report(results: list[CheckResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in results:
        w.writerow([r.check, r.anchor, _f(r.value), _f(r.reference), _f(r.tolerance), r.status])
    return buf.getvalue()


# -- benchmark models ---------------------------------------------------------

def cl_benchmark() -> LevyModel:
    return LevyModel.cramer_lundberg(1.5, 1.0, [(1.0, 1.0)])


def bd_benchmark() -> LevyModel:
    return LevyModel.brownian(0.0, math.sqrt(2.0))


def pcl_benchmark() -> LevyModel:
    return LevyModel.perturbed_cl(1.5, 0.5, 1.0, [(0.6, 1.0), (0.4, 3.0)])


def headline_rule(x: float = 2.0) -> TaxRule:
    return TaxRule(x, ((0.0, 0.2), (3.0, 0.5)))


# Euler benchmark: the discount rate is large enough that the O(h) bias of
# step-end passage times dominates Monte Carlo noise at desk-scale path counts.
EULER_MODEL = dict(drift=0.5, sigma=1.0)
EULER_QUERY = dict(x=1.0, a=3.0, q=0.5)
EULER_PIECES = ((0.0, 0.2), (2.0, 0.4))
EULER_STEP = 0.2


def _name(model: LevyModel) -> str:
    return {"CramerLundberg": "CL", "BrownianDrift": "BD"}.get(model.variant, "PCL")


# -- analytic checks ----------------------------------------------------------

def numeric_transform(engine: ScaleEngine, lam: float) -> float:
    """``int_0^inf exp(-lam x) W(x) dx`` by quadrature of the scaled scale function."""
    lead = engine.scaled_value(np.array([1.0]), 0)[1]
    rate = lam - lead
    if rate <= 0:
        raise ValueError("lambda must exceed the growth rate of W")
    upper = 80.0 / rate

    def f(x):
        s, _ = engine.scaled_value(x, 0)
        return np.exp(-rate * x) * s

    vals, _, _ = adaptive_panels(f, graded_edges(0.0, upper, h_max=0.5, ratio=1.0), 1e-13)
    return float(np.sum(vals))


def check_laplace_round_trip(factory: EngineFactory = ScaleEngine) -> list[CheckResult]:
    out = []
    for model in (cl_benchmark(), bd_benchmark()):
        for q in (0.0, 0.1, 1.0):
            eng = factory(model, q)
            big_phi = phi(model, q)
            for lam in (big_phi + 0.5, big_phi + 2.0):
                ref = 1.0 / (laplace_exponent(model, lam) - q)
                out.append(CheckResult(f"laplace_round_trip[{_name(model)},q={q:g},lam={lam:.6g}]",
                                       "scale-function Laplace transform",
                                       numeric_transform(eng, lam), ref, 1e-6 * abs(ref)))
    return out


def check_tilting(factory: EngineFactory = ScaleEngine) -> list[CheckResult]:
    xs = np.arange(1, 21) * 0.5
    out = []
    for model in (cl_benchmark(), bd_benchmark()):
        for q in (0.1, 1.0):
            eng = factory(model, q)
            big_phi = phi(model, q)
            lhs = eng.value(xs)
            rhs = np.exp(big_phi * xs) * scale_tilted_eval(model, big_phi, 0.0, xs)
            err = float(np.max(np.abs(lhs - rhs) / np.abs(rhs)))
            out.append(CheckResult(f"tilting_identity[{_name(model)},q={q:g}]",
                                   "W^(q) = exp(Phi x) W_Phi", err, 0.0, 1e-8))
    return out


def check_exit_degenerations(factory: EngineFactory = ScaleEngine, q: float = 0.05) -> list[CheckResult]:
    out = []
    for model in (cl_benchmark(), bd_benchmark()):
        eng = factory(model, q)
        for gamma in (0.0, 0.2, 0.5, 0.8):
            worst = 0.0
            for x in (1.0, 2.0, 3.0):
                rule = TaxRule.constant(x, gamma)
                for a in (x + 0.5, x + 2.0, x + 5.0):
                    got = two_sided_exit(model, rule, q, x, a)
                    ref = (eng.value(x) / eng.value(a)) ** (1.0 / (1.0 - gamma))
                    worst = max(worst, abs(got - ref) / ref)
            out.append(CheckResult(f"exit_constant_rate[{_name(model)},gamma={gamma:g}]",
                                   "exit identity, constant-rate power law", worst, 0.0, 1e-8))
    return out


def check_npv_degenerations() -> list[CheckResult]:
    model = cl_benchmark()
    zero = tax_npv(model, TaxRule.no_tax(2.0), 0.1, 2.0)
    const = tax_npv(model, TaxRule.constant(2.0, 0.3), 0.1, 2.0)
    oracle = constant_gamma_oracles(model, 0.3, 2.0, q=0.1)["npv"]
    return [CheckResult("npv_zero_rate", "tax NPV, zero rate", zero, 0.0, 0.0),
            CheckResult("npv_constant_rate", "tax NPV, constant-rate integral", const, oracle, 1e-7)]


def check_excursion_mass() -> list[CheckResult]:
    out = []
    for model in (cl_benchmark(), pcl_benchmark()):
        eng = ScaleEngine(model, 0.0)
        for a in (1.0, 2.0, 5.0):
            lhs = excursion_overshoot_mass(model, 0.0, a) + excursion_creep_term(model, 0.0, a)
            ref = eng.log_derivative(a)
            out.append(CheckResult(f"excursion_mass[{_name(model)},a={a:g}]",
                                   "excursion overshoot + creep = n(sup > a)", lhs, ref, 1e-6 * ref))
    return out


# -- Monte Carlo checks -------------------------------------------------------

def _mc(name: str, anchor: str, analytic: float, est: Estimate, with_bias: bool = False) -> CheckResult:
    tol = 3.0 * est.std_error + (est.bias_bound if with_bias else 0.0)
    return CheckResult(name, anchor, est.mean, analytic, tol)


def check_exit_mc(sim: SimConfig) -> list[CheckResult]:
    model, rule = cl_benchmark(), headline_rule()
    q, x, a = 0.05, 2.0, 5.0
    batch = simulate(model, rule, x, replace(sim, a=a))
    # only paths still inside (0, a) at the horizon are missing, each worth < exp(-q T)
    unresolved = float(np.mean(batch.censored))
    est = Estimate.from_samples(exit_samples(batch, q), math.exp(-q * sim.time_horizon) * unresolved)
    return [_mc("exit_vs_mc", "exit identity, piecewise rate", two_sided_exit(model, rule, q, x, a), est),
            CheckResult("exit_censoring", "exit identity, horizon bias <= 0.1 SE",
                        est.bias_bound, 0.0, 0.1 * est.std_error)]


def check_ruin_mc(sim: SimConfig) -> list[CheckResult]:
    """NPV, rectangle and total Gerber-Shiu masses from one shared simulation."""
    model, rule = cl_benchmark(), headline_rule()
    q, x = 0.1, 2.0
    batch = simulate(model, rule, x, replace(sim, q=q, a=None))
    out = []
    npv = Estimate.from_samples(batch.discounted_tax, npv_bias_bound(model, rule, q, sim.time_horizon))
    out.append(_mc("npv_vs_mc", "tax NPV, piecewise rate", tax_npv(model, rule, q, x), npv))
    out.append(CheckResult("npv_censoring", "tax NPV, horizon bias exp(-q T) <= 0.1 SE",
                           math.exp(-q * sim.time_horizon), 0.0, 0.1 * npv.std_error))
    cens = math.exp(-q * sim.time_horizon)
    rect = Region((2.0, 4.0), (0.0, 1.0), (0.0, 2.0))
    est = Estimate.from_samples(gs_samples(batch, q, q, rect), cens)
    ana = gerber_shiu_mass(model, rule, q, q, x, theta=(2.0, 4.0), y=(0.0, 1.0), z=(0.0, 2.0))
    out.append(_mc("gs_rectangle_vs_mc", "Gerber-Shiu density, box mass", ana, est))
    est = Estimate.from_samples(gs_samples(batch, q, q, FULL), cens)
    creep = gerber_shiu_creep_mass(model, rule, q, q, x)
    total = gerber_shiu_mass(model, rule, q, q, x) + creep
    out.append(_mc("gs_total_vs_mc", "Gerber-Shiu density + creep = ruin transform", total, est,
                   with_bias=True))
    mc_creep = float(np.sum(gs_samples(batch, q, q, Region(creep=True))))
    out.append(CheckResult("gs_creep_zero", "no creeping without a Gaussian part",
                           abs(creep) + mc_creep, 0.0, 0.0))
    return out


def check_sup_identity(sim: SimConfig, n_paths: int = 10_000) -> list[CheckResult]:
    model, rule = cl_benchmark(), headline_rule()
    a = 5.0
    batch = simulate(model, rule, 2.0, replace(sim, n_paths=n_paths, a=a))
    gap = float(np.max(batch.sup_gap))
    # and against the closed-form retention map of the rule
    ruined = batch.ruined
    if ruined.any():
        closed = rule.gamma_bar(batch.s_final[ruined])
        gap = max(gap, float(np.max(np.abs(batch.sup_at_ruin[ruined] - closed))))
    hit = batch.hit_upper
    up = float(np.max(np.abs(batch.x_at_upper[hit] - rule.gamma_bar_inv(a)))) if hit.any() else 0.0
    return [CheckResult("sup_identity", "running max of U = S - int gamma(S) dS", gap, 0.0, 1e-12),
            CheckResult("upper_passage_level", "X at upper passage = gamma_bar_inv(a)", up, 0.0, 1e-12)]


def euler_discrepancies(sim: SimConfig, step: float = EULER_STEP) -> tuple[float, float, float]:
    """``(reference, coarse estimate, fine estimate)`` at steps ``step`` and ``step/2``.

    Both runs share their Brownian increments: the coarse run draws two fine
    increments per step.
    """
    model = LevyModel.brownian(**EULER_MODEL)
    x, a, q = EULER_QUERY["x"], EULER_QUERY["a"], EULER_QUERY["q"]
    rule = TaxRule(x, EULER_PIECES)
    ref = two_sided_exit(model, rule, q, x, a)
    coarse = simulate(model, rule, x, replace(sim, a=a, euler_step=step, substeps=2))
    fine = simulate(model, rule, x, replace(sim, a=a, euler_step=step / 2, substeps=1))
    return ref, float(np.mean(exit_samples(coarse, q))), float(np.mean(exit_samples(fine, q)))


def check_euler(sim: SimConfig) -> list[CheckResult]:
    ref, coarse, fine = euler_discrepancies(sim)
    ratio = abs(fine - ref) / abs(coarse - ref) if coarse != ref else math.inf
    return [CheckResult("euler_convergence", "exit identity, Euler error ratio at h/2 vs h",
                        ratio, 0.0, 0.65)]


def check_determinism(sim: SimConfig, n_paths: int = 20_000) -> list[CheckResult]:
    model, rule = cl_benchmark(), headline_rule()
    base = replace(sim, n_paths=n_paths, q=0.1, a=None)
    one = simulate(model, rule, 2.0, replace(base, threads=1, chunk_size=n_paths))
    many = simulate(model, rule, 2.0, replace(base, threads=max(2, sim.threads), chunk_size=n_paths // 7))
    diff = 0.0
    for name in ("tau_minus", "kappa", "sup_at_ruin", "undershoot", "deficit", "discounted_tax"):
        u, v = getattr(one, name), getattr(many, name)
        same = (u == v) | (np.isnan(u) & np.isnan(v))
        diff = max(diff, float(np.sum(~same)))
    return [CheckResult("seed_determinism", "identical paths across chunking and threads", diff, 0.0, 0.0)]


SCENARIOS = {
    "default": ("laplace", "tilting", "exit", "npv", "excursion", "exit_mc", "ruin_mc",
                "sup_identity", "euler", "determinism"),
    "analytic": ("laplace", "tilting", "exit", "npv", "excursion"),
    "laplace": ("laplace",),
}


def run_checks(scenarios: str = "default", sim: SimConfig | None = None,
               factory: EngineFactory = ScaleEngine) -> list[CheckResult]:
    """Run a named scenario set. ``factory`` builds the scale engines under test."""
    if scenarios not in SCENARIOS:
        raise KeyError(scenarios)
    sim = sim or DEFAULT_VERIFY_SIM
    table = {
        "laplace": lambda: check_laplace_round_trip(factory),
        "tilting": lambda: check_tilting(factory),
        "exit": lambda: check_exit_degenerations(factory),
        "npv": check_npv_degenerations,
        "excursion": check_excursion_mass,
        "exit_mc": lambda: check_exit_mc(sim),
        "ruin_mc": lambda: check_ruin_mc(sim),
        "sup_identity": lambda: check_sup_identity(sim),
        "euler": lambda: check_euler(sim),
        "determinism": lambda: check_determinism(sim),
    }
    out: list[CheckResult] = []
    for key in SCENARIOS[scenarios]:
        out.extend(table[key]())
    return out
