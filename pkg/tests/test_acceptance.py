"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run on its own with ``pytest -s tests/test_acceptance.py`` or
``python3 tests/test_acceptance.py``. Monte Carlo criteria use 10^6 exact
paths with a fixed seed; the slow shared simulation is built once per module.
"""
import time
from dataclasses import replace

import pytest

from taxed_ruin import cli
from taxed_ruin.verify import (DEFAULT_VERIFY_SIM, check_euler, check_excursion_mass,
                               check_exit_degenerations, check_exit_mc, check_laplace_round_trip,
                               check_npv_degenerations, check_ruin_mc, check_sup_identity, check_tilting)

SIM = DEFAULT_VERIFY_SIM  # 10^6 paths, seed 7, horizon 150

pytestmark = pytest.mark.slow


def _report(emit, number, title, results, elapsed, limit):
    ok = all(r.passed for r in results) and elapsed <= limit
    worst = max(results, key=lambda r: abs(r.value - r.reference) / r.tolerance if r.tolerance else
                (0.0 if r.value == r.reference else float("inf")))
    line = (f"{'PASS' if ok else 'FAIL'} criterion {number}: {title} "
            f"[{len(results)} checks, worst {worst.check}: |{worst.value:.6g} - {worst.reference:.6g}| "
            f"vs tol {worst.tolerance:.3g}; {elapsed:.2f}s / {limit:g}s]")
    emit(line)
    for r in results:
        if not r.passed:
            emit(f"criterion {number}:     FAIL {r.check}: value {r.value!r}, "
                 f"reference {r.reference!r}, tol {r.tolerance!r}")
    return ok


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


@pytest.fixture(scope="module")
def shared_ruin_run():
    # criteria 5-7 read one simulation of the discounted ruin quantities
    return _timed(lambda: check_ruin_mc(SIM))


def _pick(results, *names):
    return [r for r in results if r.check in names]


def test_criterion_01_laplace_round_trip(acceptance_line):
    res, dt = _timed(check_laplace_round_trip)
    assert _report(acceptance_line, 1, "scale function Laplace round trip, rel 1e-6", res, dt, 1.0)


def test_criterion_02_tilting(acceptance_line):
    res, dt = _timed(check_tilting)
    assert _report(acceptance_line, 2, "exponential tilting of W, rel 1e-8", res, dt, 1.0)


def test_criterion_03_exit_degenerations(acceptance_line):
    res, dt = _timed(check_exit_degenerations)
    assert _report(acceptance_line, 3, "exit identity: zero and constant rates, rel 1e-8", res, dt, 5.0)


def test_criterion_04_exit_vs_monte_carlo(acceptance_line):
    res, dt = _timed(lambda: check_exit_mc(SIM))
    assert _report(acceptance_line, 4, "exit identity vs 10^6 exact paths, 3 SE", res, dt, 120.0)


def test_criterion_05_npv(shared_ruin_run, acceptance_line):
    (mc, dt_mc) = shared_ruin_run
    res, dt = _timed(check_npv_degenerations)
    res = res + _pick(mc, "npv_vs_mc", "npv_censoring")
    assert _report(acceptance_line, 5, "tax NPV: zero rate, constant oracle 1e-7, MC 3 SE", res,
                   dt + dt_mc, 180.0)


def test_criterion_06_rectangle_mass(shared_ruin_run, acceptance_line):
    (mc, dt_mc) = shared_ruin_run
    res = _pick(mc, "gs_rectangle_vs_mc")
    assert _report(acceptance_line, 6, "Gerber-Shiu box mass vs MC, 3 SE", res, dt_mc, 300.0)


def test_criterion_07_total_mass(shared_ruin_run, acceptance_line):
    (mc, dt_mc) = shared_ruin_run
    res = _pick(mc, "gs_total_vs_mc", "gs_creep_zero")
    assert _report(acceptance_line, 7, "Gerber-Shiu total mass + creep vs MC, 3 SE + censoring", res,
                   dt_mc, 300.0)


def test_criterion_08_excursion_mass(acceptance_line):
    res, dt = _timed(check_excursion_mass)
    assert _report(acceptance_line, 8, "excursion overshoot + creep = W'/W at q=0, rel 1e-6", res, dt, 10.0)


def test_criterion_09_path_invariants(acceptance_line):
    res, dt = _timed(lambda: check_sup_identity(SIM, n_paths=10_000))
    assert _report(acceptance_line, 9, "running max and upper passage level on 10^4 paths, 1e-12", res, dt, 10.0)


def test_criterion_10_euler_convergence(acceptance_line):
    res, dt = _timed(lambda: check_euler(SIM))
    assert _report(acceptance_line, 10, "Euler error at h/2 at most 0.65 of error at h", res, dt, 180.0)


def test_criterion_11_determinism(tmp_path, acceptance_line):
    # full verify runs, reduced path count so the pair stays quick
    cfg = tmp_path / "verify.json"
    cfg.write_text('{"sim": {"n_paths": 50000, "rng_seed": 7, "time_horizon": 150.0}}')
    t0 = time.perf_counter()
    reports = []
    for d in ("first", "second"):
        cli.main(["verify", "--config", str(cfg), "--out", str(tmp_path / d)])
        reports.append((tmp_path / d / "verify.csv").read_bytes())
    dt = time.perf_counter() - t0
    same = reports[0] == reports[1]
    acceptance_line(f"{'PASS' if same else 'FAIL'} criterion 11: repeated verify runs give byte-identical reports "
                    f"[{len(reports[0])} bytes; {dt:.2f}s]")
    assert same


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-s", "-q"]))
