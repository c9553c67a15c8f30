"""``taxed-ruin`` command-line tool.

Subcommands::

    taxed-ruin eval     --config run.json    analytic functionals over a parameter grid
    taxed-ruin simulate --config run.json    Monte Carlo estimates (optional path dump)
    taxed-ruin verify   [--config run.json]  analytic-vs-oracle report
    taxed-ruin scale    --config run.json    raw W^(q) table

Exit status: 0 ok, 1 configuration or domain error, 2 accuracy error,
3 a verification check failed.
"""
from __future__ import annotations

import argparse
import itertools
import json
import logging
import os
import sys
from dataclasses import replace

import numpy as np

from .config import RunConfig
from .errors import AccuracyError, ConfigError, TaxedRuinError
from .identities import (constant_gamma_oracles, gerber_shiu_creep,
                         gerber_shiu_creep_mass, gerber_shiu_density, gerber_shiu_mass,
                         ruin_transform, tax_npv, two_sided_exit)
from .montecarlo import (FULL, Estimate, Region, exit_samples, gs_samples, npv_bias_bound,
                         simulate)
from .scale import ScaleEngine
from .verify import DEFAULT_VERIFY_SIM, format_report, run_checks

log = logging.getLogger("taxed_ruin")

EXIT_OK, EXIT_CONFIG, EXIT_ACCURACY, EXIT_FAIL = 0, 1, 2, 3

DESCRIPTIONS = {
    "exit": "E_x[exp(-q tau_a^+); tau_a^+ < tau_0^-]",
    "npv": "E_x[int_0^tau_0^- exp(-q u) gamma(S_u) dS_u]",
    "gs_density": "joint density of (sup of U at ruin, U before ruin, deficit) "
                  "weighted by exp(-alpha kappa - beta (tau_0^- - kappa))",
    "gs_creep": "density in theta of ruin by creeping, same weighting",
    "gs_mass": "Gerber-Shiu measure of the configured box (or of creeping ruin)",
    "ruin": "E_x[exp(-q tau_0^-); tau_0^- < inf]",
}


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if np.isfinite(v):
        return f"{v:.16e}"
    return "nan" if np.isnan(v) else ("inf" if v > 0 else "-inf")


def _table(header: list[str], columns: list[str], rows: list[list]) -> str:
    lines = [f"# {h}" for h in header]
    lines.append(",".join(columns))
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _header(cfg: RunConfig, command: str) -> list[str]:
    out = [f"taxed-ruin {command}"]
    if cfg.model is not None:
        out.append("model: " + json.dumps(cfg.model.to_dict(), sort_keys=True))
    if cfg.tax is not None:
        out.append("tax: " + json.dumps(cfg.tax.to_dict(), sort_keys=True))
    out.append(f"x: {_fmt(cfg.x)}" if cfg.tax is not None or cfg.query.x is not None else "x: n/a")
    return out


# -- eval ---------------------------------------------------------------------

def _grids(cfg: RunConfig, names):
    return [cfg.query.grid(n) for n in names]


def cmd_eval(cfg: RunConfig) -> str:
    cfg.require_query()
    if cfg.query.functional == "scale":
        return cmd_scale(cfg)
    q, model, rule, x = cfg.query, cfg.model, cfg.tax, cfg.x
    tol = cfg.output.tolerance
    const = rule.constant_rate_above_base()
    fn = q.functional
    names = {"exit": ["q", "a"], "npv": ["q"], "ruin": ["q"], "gs_density": ["alpha", "beta", "theta", "y", "z"],
             "gs_creep": ["alpha", "beta", "theta"], "gs_mass": ["alpha", "beta"]}[fn]
    rows = []
    with_oracle = const is not None and fn in ("exit", "npv", "gs_density", "gs_creep")
    for point in itertools.product(*_grids(cfg, names)):
        p = dict(zip(names, point))
        if fn == "exit":
            val = two_sided_exit(model, rule, p["q"], x, p["a"], tol)
        elif fn == "npv":
            val = tax_npv(model, rule, p["q"], x, tol)
        elif fn == "ruin":
            val = ruin_transform(model, rule, p["q"], x, tol)
        elif fn == "gs_density":
            if p["y"] >= p["theta"]:
                val = 0.0
            else:
                val = gerber_shiu_density(model, rule, p["alpha"], p["beta"], x, p["theta"], p["y"], p["z"])
        elif fn == "gs_creep":
            val = gerber_shiu_creep(model, rule, p["alpha"], p["beta"], x, p["theta"])
        else:
            val = _gs_mass(cfg, p["alpha"], p["beta"], tol)
        row = list(point) + [val]
        if with_oracle:
            row.append(_oracle(cfg, const, p))
        rows.append(row)
    columns = names + ["value"] + (["constant_gamma_oracle"] if with_oracle else [])
    header = _header(cfg, "eval") + [f"functional: {fn}", f"value: {DESCRIPTIONS[fn]}",
                                     f"tolerance: {_fmt(tol)}"]
    if fn == "gs_density":
        header.append("value is the absolutely continuous part (0 < y < theta); 0 where y >= theta")
    if fn == "gs_mass":
        header.append("box: " + json.dumps(_box(cfg)))
    if with_oracle:
        header.append("constant_gamma_oracle: closed form for a constant rate, independent of the general quadrature")
    return _table(header, columns, rows)


def _oracle(cfg: RunConfig, gamma: float, p: dict) -> float:
    fn = cfg.query.functional
    if fn == "exit":
        return constant_gamma_oracles(cfg.model, gamma, cfg.x, q=p["q"], a=p["a"])["exit"]
    if fn == "npv":
        return constant_gamma_oracles(cfg.model, gamma, cfg.x, q=p["q"])["npv"]
    if fn == "gs_density":
        if p["y"] >= p["theta"]:
            return 0.0
        return constant_gamma_oracles(cfg.model, gamma, cfg.x, alpha=p["alpha"], beta=p["beta"],
                                      theta=p["theta"], y=p["y"], z=p["z"])["gs_density"]
    return constant_gamma_oracles(cfg.model, gamma, cfg.x, alpha=p["alpha"], beta=p["beta"],
                                  theta=p["theta"])["gs_creep"]


def _pair(v):
    if v is None:
        return (None, None)
    if not (isinstance(v, list) and len(v) == 2):
        raise ConfigError("query box ranges must be [lo, hi] pairs (null for unbounded)")
    return tuple(None if b is None else float(b) for b in v)


def _box(cfg: RunConfig) -> dict:
    q = cfg.query
    return {"theta": _pair(q.theta_range), "y": _pair(q.y_range), "z": _pair(q.z_range),
            "creep": bool(q.creep)}


def _gs_mass(cfg, alpha, beta, tol):
    b = _box(cfg)
    if b["creep"]:
        return gerber_shiu_creep_mass(cfg.model, cfg.tax, alpha, beta, cfg.x, b["theta"], tol)
    y = (b["y"][0] or 0.0, b["y"][1])
    z = (b["z"][0] or 0.0, b["z"][1])
    return gerber_shiu_mass(cfg.model, cfg.tax, alpha, beta, cfg.x, b["theta"], y, z, tol)


# -- simulate -----------------------------------------------------------------

def _region(cfg: RunConfig) -> Region:
    b = _box(cfg)

    def rng(p):
        return (-np.inf if p[0] is None else p[0], np.inf if p[1] is None else p[1])

    if b["creep"]:
        return Region(theta=rng(b["theta"]), creep=True)
    return Region(rng(b["theta"]), rng(b["y"]), rng(b["z"]))


def cmd_simulate(cfg: RunConfig, paths_file: str | None = None) -> str:
    cfg.require_query()
    q, model, rule, x, sim = cfg.query, cfg.model, cfg.tax, cfg.x, cfg.sim
    fn = q.functional
    rows = []
    dumped = None
    if fn == "exit":
        names = ["q", "a"]
        for a in q.grid("a"):
            batch = simulate(model, rule, x, replace(sim, a=float(a)))
            if dumped is None:
                dumped = batch
            for qq in q.grid("q"):
                if qq == 0 and not sim.acknowledge_horizon:
                    raise ConfigError("query.q: q = 0 needs sim.acknowledge_horizon")
                est = Estimate.from_samples(exit_samples(batch, qq), float(np.exp(-qq * sim.time_horizon)))
                rows.append([qq, a, est])
        rows = sorted(rows, key=lambda r: (r[0], r[1]))
    elif fn == "npv":
        names = ["q"]
        for qq in q.grid("q"):
            if qq <= 0:
                raise ConfigError("query.q: tax NPV estimation needs q > 0")
            batch = simulate(model, rule, x, replace(sim, q=float(qq), a=None))
            if dumped is None:
                dumped = batch
            rows.append([qq, Estimate.from_samples(batch.discounted_tax,
                                                   npv_bias_bound(model, rule, qq, sim.time_horizon))])
    elif fn in ("gs_mass", "ruin"):
        batch = simulate(model, rule, x, replace(sim, a=None))
        dumped = batch
        if fn == "ruin":
            names, pairs, region = ["q"], [(v, v) for v in q.grid("q")], FULL
        else:
            names, region = ["alpha", "beta"], _region(cfg)
            pairs = list(itertools.product(q.grid("alpha"), q.grid("beta")))
        for al, be in pairs:
            if min(al, be) == 0 and not sim.acknowledge_horizon:
                raise ConfigError("query: zero discount rates need sim.acknowledge_horizon")
            est = Estimate.from_samples(gs_samples(batch, al, be, region),
                                        float(np.exp(-min(al, be) * sim.time_horizon)))
            rows.append(([al] if fn == "ruin" else [al, be]) + [est])
    else:
        raise ConfigError(f"query.functional: {fn!r} cannot be simulated")
    if paths_file is not None and dumped is not None:
        dumped.to_csv(paths_file)
    out_rows = [r[:-1] + [r[-1].mean, r[-1].std_error, r[-1].n, r[-1].bias_bound] for r in rows]
    header = _header(cfg, "simulate") + [
        f"functional: {fn}", f"mean: Monte Carlo estimate of {DESCRIPTIONS[fn]}",
        "std_error: standard error of the mean; bias_bound: bound on the horizon censoring bias",
        "sim: " + json.dumps(sim.to_dict(), sort_keys=True)]
    return _table(header, names + ["mean", "std_error", "n", "bias_bound"], out_rows)


# -- scale --------------------------------------------------------------------

def cmd_scale(cfg: RunConfig) -> str:
    if cfg.model is None:
        raise ConfigError("model: section is required")
    q = cfg.query
    if q.grid_x is None:
        raise ConfigError("query.grid_x: required for the scale table")
    xs = q.grid("grid_x")
    orders = [0, 1] + ([2] if cfg.model.sigma > 0 else [])
    rows = []
    for qq in q.grid("q"):
        eng = ScaleEngine(cfg.model, float(qq), q.scale_method)
        vals = [eng.value(xs, k) for k in orders]
        rows.extend([qq, xv] + [v[i] for v in vals] for i, xv in enumerate(xs))
    names = ["W", "dW", "d2W"][:len(orders)]
    header = _header(cfg, "scale") + [f"method: {q.scale_method}",
                                      "W: q-scale function; dW, d2W: its derivatives"]
    return _table(header, ["q", "x"] + names, rows)


# -- entry point --------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="taxed-ruin", description="Taxed Levy risk model toolkit")
    sub = p.add_subparsers(dest="command", required=True)
    for name, hlp in (("eval", "evaluate analytic functionals"), ("simulate", "Monte Carlo estimates"),
                      ("verify", "run the verification checks"), ("scale", "tabulate W^(q)")):
        s = sub.add_parser(name, help=hlp)
        s.add_argument("--config", required=name != "verify", help="JSON run configuration")
        s.add_argument("--out", help="output directory (default: stdout unless output.csv is set)")
        s.add_argument("--threads", type=int, help="worker threads for simulation")
        s.add_argument("--tolerance", type=float, help="override output.tolerance")
        s.add_argument("--seed", type=int, help="override sim.rng_seed")
        if name == "verify":
            s.add_argument("--scenarios", help="scenario set (default, analytic, laplace)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    sim, out = cfg.sim, cfg.output
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("--threads: must be >= 1")
        sim = replace(sim, threads=args.threads)
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed: must be a 64-bit unsigned integer")
        sim = replace(sim, rng_seed=args.seed)
    if args.tolerance is not None:
        if not args.tolerance > 0:
            raise ConfigError("--tolerance: must be > 0")
        out = replace(out, tolerance=args.tolerance)
    if getattr(args, "scenarios", None):
        out = replace(out, scenarios=args.scenarios)
    return replace(cfg, sim=sim, output=out)


def _target(args, name: str | None, default: str) -> str | None:
    if args.out is None and name is None:
        return None
    return os.path.join(args.out or ".", name or default)


def _emit(text: str, target: str | None) -> None:
    if target is None:
        sys.stdout.write(text)
        return
    os.makedirs(os.path.dirname(target) or ".", exist_ok=True)
    with open(target, "w", newline="") as fh:
        fh.write(text)
    log.info("wrote %s", target)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.config is not None:
            raw = RunConfig.load(args.config)
            with open(args.config) as fh:
                has_sim = "sim" in json.load(fh)
        else:
            raw, has_sim = RunConfig(), False
        cfg = _apply_overrides(raw, args)
        if args.command == "verify":
            sim = cfg.sim if has_sim else replace(
                DEFAULT_VERIFY_SIM, threads=cfg.sim.threads,
                rng_seed=DEFAULT_VERIFY_SIM.rng_seed if args.seed is None else args.seed)
            try:
                results = run_checks(cfg.output.scenarios, sim)
            except KeyError:
                raise ConfigError(f"output.scenarios: unknown scenario set {cfg.output.scenarios!r}") from None
            _emit(format_report(results), _target(args, cfg.output.report, "verify.csv"))
            failed = [r.check for r in results if not r.passed]
            for name in failed:
                log.error("FAIL %s", name)
            return EXIT_FAIL if failed else EXIT_OK
        if args.command == "eval":
            text = cmd_eval(cfg)
        elif args.command == "simulate":
            paths = None
            if cfg.output.paths is not None:
                paths = os.path.join(args.out or ".", cfg.output.paths)
                os.makedirs(os.path.dirname(paths) or ".", exist_ok=True)
            text = cmd_simulate(cfg, paths)
        else:
            text = cmd_scale(cfg)
        _emit(text, _target(args, cfg.output.csv, f"{args.command}.csv"))
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except AccuracyError as exc:
        print(f"accuracy error: {exc}", file=sys.stderr)
        return EXIT_ACCURACY
    except TaxedRuinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
