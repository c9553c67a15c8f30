"""Fluctuation identities for the taxed surplus ``U = X - int gamma(S) dS``.

All three identities share the exponent

    E_q(u) = int_x^u  W^(q)'(v) / (W^(q)(v) (1 - gamma(gamma_bar_inv(v)))) dv,

which is tabulated once per (model, rate, rule) by :class:`ExitExponent`.
"""
from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import AccuracyError, DivergenceError, DomainError
from .levy import LevyModel
from .quadrature import adaptive_panels, gauss_legendre, graded_edges
from .scale import ScaleEngine, scale_engine
from .tax import TaxRule

DEFAULT_TOL = 1e-9


class ExitExponent:
    """Cumulative table of ``E_q`` on ``[x, u_max]``.

    Panels are graded towards ``x`` and split at every level where the
    retained rate ``1 - gamma(gamma_bar_inv(v))`` jumps; evaluation at an
    arbitrary ``u`` adds a 20-point Gauss-Legendre partial panel to the
    tabulated cumulative sum.
    """

    def __init__(self, engine: ScaleEngine, rule: TaxRule, u_max: float, tol: float = 1e-12):
        self.engine = engine
        self.rule = rule
        self.x = rule.x
        self.u_max = float(u_max)
        edges = graded_edges(self.x, self.u_max, h_max=0.5,
                             mandatory=rule.level_breakpoints(self.x, self.u_max))
        vals, self.edges, self.error = adaptive_panels(self._integrand, edges, tol)
        self.cum = np.concatenate([[0.0], np.cumsum(vals)])

    def _integrand(self, v):
        return self.engine.log_derivative(v) / self.rule.retained_rate(v)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(u < self.x) or np.any(u > self.u_max):
            raise DomainError(f"exponent requested outside [{self.x}, {self.u_max}]")
        idx = np.clip(np.searchsorted(self.edges, u, side="right") - 1, 0, len(self.edges) - 2)
        left = self.edges[idx]
        out = self.cum[idx] + gauss_legendre(self._integrand, left, u, 20)
        return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=128)
def _exponent_cached(model: LevyModel, q: float, rule: TaxRule, u_cap: float) -> ExitExponent:
    return ExitExponent(scale_engine(model, q), rule, u_cap)


def exit_exponent(model: LevyModel, q: float, rule: TaxRule, u_max: float) -> ExitExponent:
    """Shared read-only exponent table covering at least ``[x, u_max]``."""
    span = max(u_max - rule.x, 1.0)
    u_cap = rule.x + 2.0 ** math.ceil(math.log2(span))
    return _exponent_cached(model, float(q), rule, u_cap)


def _check_base(rule: TaxRule, x: float):
    if not x > 0:
        raise DomainError("initial surplus x must be > 0")
    if abs(rule.x - x) > 1e-12 * max(1.0, abs(x)):
        raise DomainError(f"tax rule base level {rule.x} differs from x = {x}")


# -- two-sided exit -----------------------------------------------------------

def two_sided_exit(model: LevyModel, rule: TaxRule, q: float, x: float, a,
                   tol: float = DEFAULT_TOL):
    """``E_x[exp(-q tau_a^+); tau_a^+ < tau_0^-]`` for the taxed surplus."""
    _check_base(rule, x)
    if q < 0:
        raise DomainError("q must be >= 0")
    a_arr = np.asarray(a, dtype=float)
    if np.any(a_arr <= x):
        raise DomainError("upper barrier a must exceed x")
    table = exit_exponent(model, q, rule, float(np.max(a_arr)))
    if table.error > tol:
        raise AccuracyError("exit exponent quadrature", table.error)
    out = np.exp(-table(a_arr))
    return float(out) if out.ndim == 0 else out


# -- net present value of tax -------------------------------------------------

def npv_horizon(model: LevyModel, rule: TaxRule, q: float, tol: float) -> float:
    """Truncation point ``T`` for the tax NPV integral.

    ``W'/W >= Phi(q)`` everywhere, so the integrand beyond ``T`` is at most
    ``gamma_max * exp(-Phi(q) (t - x))``.
    """
    x = rule.x
    big_phi = scale_engine(model, q).phi
    if big_phi > 0:
        gmax = max(rule.max_rate, 1e-300)
        return x + max(0.0, math.log(gmax / (big_phi * tol))) / big_phi
    if rule.tail_rate == 0.0:
        # integrand vanishes beyond the start of the untaxed last piece
        return max(x, rule.pieces[-1][0])
    raise DivergenceError(
        "tax NPV with Phi(q) = 0 and a positive tail rate is not provably finite")


def tax_npv(model: LevyModel, rule: TaxRule, q: float, x: float, tol: float = DEFAULT_TOL) -> float:
    """``E_x[int_0^{tau_0^-} exp(-q u) gamma(S_u) dS_u]``."""
    _check_base(rule, x)
    if q < 0:
        raise DomainError("q must be >= 0")
    horizon = npv_horizon(model, rule, q, tol)
    if horizon <= x or rule.max_rate == 0.0:
        return 0.0
    table = exit_exponent(model, q, rule, rule.gamma_bar(horizon))

    def integrand(t):
        return np.exp(-table(rule.gamma_bar(t))) * rule.gamma(t)

    edges = graded_edges(x, horizon, h_max=1.0, mandatory=rule.supremum_breakpoints(x, horizon))
    vals, _, err = adaptive_panels(integrand, edges, tol)
    err += table.error
    if err > 10 * tol:
        raise AccuracyError("tax NPV quadrature", err)
    return float(np.sum(vals))


# -- excursion densities ------------------------------------------------------

def _bracket_scaled(engine: ScaleEngine, level, y, ell=None):
    """``exp(-Phi (level - y)) * {W'(level-y) - (W'(level)/W(level)) W(level-y)}``."""
    d = level - y
    s0, _ = engine.scaled_value(d, 0)
    s1, _ = engine.scaled_value(d, 1)
    if ell is None:
        ell = engine.log_derivative(level)
    return s1 - ell * s0


def excursion_overshoot_density(model: LevyModel, q: float, a: float, y, z):
    """Density in ``(y, z)`` of ``n(exp(-q rho_a); a - eps(rho_a-) in dy, eps(rho_a) - a in dz)``.

    Only the absolutely continuous part on ``0 < y < a``; see
    :func:`excursion_overshoot_atom` for bounded-variation models.
    """
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any(y <= 0) or np.any(y >= a):
        raise DomainError("overshoot density requires 0 < y < a")
    if np.any(z <= 0):
        raise DomainError("overshoot density requires z > 0")
    eng = scale_engine(model, q)
    out = (_bracket_scaled(eng, a, y) * np.exp(eng.phi * (a - y))
           * model.jump_measure().density(y + z))
    return float(out) if out.ndim == 0 else out


def excursion_overshoot_atom(model: LevyModel, q: float, a: float, z):
    """Density in ``z`` of the excursions whose first jump already passes ``a`` (``y = a``).

    Read as a measure, ``W'(a - y) dy`` carries an atom ``W(0) delta_a(dy)``
    when ``W(0) > 0``, i.e. without a Gaussian part. The atom is independent of ``q``.
    """
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise DomainError("z must be > 0")
    w0 = 1.0 / model.drift if model.sigma == 0 else 0.0
    out = w0 * model.jump_measure().density(a + z)
    return float(out) if out.ndim == 0 else out


def excursion_creep_term(model: LevyModel, q: float, a):
    """``n(exp(-q rho_a); eps(rho_a) = a)``; zero without a Gaussian part."""
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0):
        raise DomainError("creep term requires a > 0")
    if model.sigma == 0:
        out = np.zeros_like(a)
    else:
        eng = scale_engine(model, q)
        s0, lead = eng.scaled_value(a, 0)
        s1, _ = eng.scaled_value(a, 1)
        s2, _ = eng.scaled_value(a, 2)
        out = 0.5 * model.sigma**2 * (s1 * s1 / s0 - s2) * np.exp(lead * a)
    return float(out) if out.ndim == 0 else out


def excursion_overshoot_mass(model: LevyModel, q: float, a: float, tol: float = 1e-12,
                             include_atom: bool = True) -> float:
    """``int_0^a int_0^inf`` of the overshoot measure (z-integral taken exactly)."""
    eng = scale_engine(model, q)
    nu = model.jump_measure()

    def f(y):
        return _bracket_scaled(eng, a, y) * np.exp(eng.phi * (a - y)) * nu.tail(y)

    vals, _, _ = adaptive_panels(f, np.linspace(0.0, a, int(math.ceil(a / 0.5)) + 1), tol)
    mass = float(np.sum(vals))
    if include_atom and model.sigma == 0:
        mass += float(nu.tail(a)) / model.drift
    return mass


# -- Gerber-Shiu --------------------------------------------------------------

def _check_gs(rule, x, alpha, beta):
    _check_base(rule, x)
    if alpha < 0 or beta < 0:
        raise DomainError("alpha and beta must be >= 0")


class _GSKernel:
    """Theta-only factors of the Gerber-Shiu density, evaluated once per theta."""

    def __init__(self, model, rule, alpha, beta, theta_max):
        self.model = model
        self.rule = rule
        self.table = exit_exponent(model, alpha, rule, theta_max)
        self.eng_b = scale_engine(model, beta)

    def theta_part(self, theta):
        """``(log prefactor, W_beta'(theta)/W_beta(theta))``."""
        log_pre = -self.table(theta) - np.log(self.rule.retained_rate(theta))
        return log_pre, self.eng_b.log_derivative(theta)

    def yz(self, theta, log_pre, ell, y):
        """Everything but ``nu(y + dz)``; theta-arrays broadcast against ``y``."""
        eng = self.eng_b
        return np.exp(log_pre + eng.phi * (theta - y)) * _bracket_scaled(eng, theta, y, ell)

    def atom(self, theta, log_pre):
        """Weight of ``U_{tau-} = theta`` (ruin straight from the maximum), times ``nu(theta + dz)``."""
        if self.model.sigma > 0:
            return np.zeros_like(theta)
        return np.exp(log_pre) / self.model.drift


def gerber_shiu_density(model: LevyModel, rule: TaxRule, alpha: float, beta: float,
                        x: float, theta, y, z):
    """Joint density of (sup of U at ruin, U just before ruin, deficit at ruin).

    Weighted by ``exp(-alpha kappa - beta (tau_0^- - kappa))`` where ``kappa``
    is the last time tax is paid before ruin. Absolutely continuous part on
    ``0 < y < theta``; :func:`gerber_shiu_atom` holds the ``y = theta`` part.
    """
    _check_gs(rule, x, alpha, beta)
    theta, y, z = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (theta, y, z)))
    if np.any(theta < x):
        raise DomainError("theta must be >= x")
    if np.any(y <= 0) or np.any(y >= theta):
        raise DomainError("y must lie in (0, theta)")
    if np.any(z <= 0):
        raise DomainError("z must be > 0")
    k = _GSKernel(model, rule, alpha, beta, float(np.max(theta)))
    log_pre, ell = k.theta_part(theta)
    out = k.yz(theta, log_pre, ell, y) * model.jump_measure().density(y + z)
    return float(out) if out.ndim == 0 else out


def gerber_shiu_atom(model: LevyModel, rule: TaxRule, alpha: float, beta: float,
                     x: float, theta, z):
    """Density in ``(theta, z)`` on the event ``U_{tau_0^- -} = S^U_{tau_0^-} = theta``.

    Non-zero only without a Gaussian part, where ``W_beta(0) = 1/drift`` makes
    the measure ``W_beta'(theta - y) dy`` charge ``y = theta``.
    """
    _check_gs(rule, x, alpha, beta)
    theta, z = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(z, dtype=float))
    if np.any(theta < x):
        raise DomainError("theta must be >= x")
    if np.any(z <= 0):
        raise DomainError("z must be > 0")
    k = _GSKernel(model, rule, alpha, beta, float(np.max(theta)))
    log_pre, _ = k.theta_part(theta)
    out = k.atom(theta, log_pre) * model.jump_measure().density(theta + z)
    return float(out) if out.ndim == 0 else out


def gerber_shiu_creep(model: LevyModel, rule: TaxRule, alpha: float, beta: float,
                      x: float, theta):
    """Density in ``theta`` of ruin by creeping, with the same weighting."""
    _check_gs(rule, x, alpha, beta)
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < x):
        raise DomainError("theta must be >= x")
    if model.sigma == 0:
        out = np.zeros_like(theta)
    else:
        tab = exit_exponent(model, alpha, rule, float(np.max(theta)))
        eng_b = scale_engine(model, beta)
        s0, lead = eng_b.scaled_value(theta, 0)
        s1, _ = eng_b.scaled_value(theta, 1)
        s2, _ = eng_b.scaled_value(theta, 2)
        out = (np.exp(-tab(theta) + lead * theta) / rule.retained_rate(theta)
               * 0.5 * model.sigma**2 * (s1 * s1 / s0 - s2))
    return float(out) if out.ndim == 0 else out


def _theta_upper(model, rule, alpha, x, tol):
    """Upper theta cut-off so the neglected Gerber-Shiu mass is below ``tol``.

    The inner (y, z) mass at level theta is at most ``n(sup eps > theta)``,
    which is decreasing, and the exponent grows at least at rate ``Phi(alpha)``.
    """
    big_phi = scale_engine(model, alpha).phi
    if big_phi <= 0:
        raise DomainError("an infinite theta range needs alpha with Phi(alpha) > 0")
    n_tail = scale_engine(model, 0.0).log_derivative(x)
    bound_const = n_tail / ((1.0 - rule.max_rate) * big_phi)
    crude = x + max(0.0, math.log(max(bound_const, 1e-300) / tol)) / big_phi + 1.0
    # tighten with the tabulated exponent: past the last tax level the exponent
    # grows at least at rate Phi / (1 - tail rate)
    table = exit_exponent(model, alpha, rule, crude)
    last = float(rule.gamma_bar(max(x, rule.breakpoints[-1])))
    grid = np.linspace(x, crude, 257)[1:]
    rate = np.where(grid >= last, big_phi / (1.0 - rule.tail_rate), big_phi)
    bound = n_tail / (1.0 - rule.max_rate) * np.exp(-table(grid)) / rate
    ok = np.nonzero(bound <= tol)[0]
    return float(grid[ok[0]]) if ok.size else crude


def gerber_shiu_mass(model: LevyModel, rule: TaxRule, alpha: float, beta: float, x: float,
                     theta=(None, None), y=(0.0, None), z=(0.0, None),
                     tol: float = 1e-10, include_atom: bool = True) -> float:
    """Gerber-Shiu measure of a (theta, y, z) box.

    ``None`` bounds mean unbounded (``theta >= x``, ``0 < y < theta``, ``z > 0``).
    The z-integral of ``nu(y + dz)`` is taken exactly through the tail of the
    jump measure; theta and y use adaptive Gauss-Legendre panels. With
    ``include_atom`` the ``y = theta`` part is added for boxes whose y-range
    contains theta.
    """
    _check_gs(rule, x, alpha, beta)
    if not model.has_jumps:
        return 0.0
    t_lo = x if theta[0] is None else max(x, theta[0])
    t_hi = _theta_upper(model, rule, alpha, x, tol) if theta[1] is None else theta[1]
    if t_hi <= t_lo:
        return 0.0
    y_lo = max(0.0, y[0] or 0.0)
    y_hi = np.inf if y[1] is None else y[1]
    z_lo = max(0.0, z[0] or 0.0)
    z_hi = np.inf if z[1] is None else z[1]
    nu = model.jump_measure()
    kern = _GSKernel(model, rule, alpha, beta, t_hi)

    def zmass(yy):
        return nu.tail(yy + z_lo) - (0.0 if np.isinf(z_hi) else nu.tail(yy + z_hi))

    def inner(th):
        log_pre, ell = kern.theta_part(th)
        hi = np.minimum(th, y_hi)
        lo = np.minimum(y_lo, hi)
        span = float(np.max(hi - lo))
        n_pan = max(1, int(math.ceil(span / 0.5)))
        k = np.arange(n_pan)
        a = lo[..., None] + (hi - lo)[..., None] * k / n_pan
        b = lo[..., None] + (hi - lo)[..., None] * (k + 1) / n_pan
        thb, lpb, elb = (v[..., None, None] for v in (th, log_pre, ell))

        def g(yy):
            return kern.yz(thb, lpb, elb, yy) * zmass(yy)

        out = np.sum(gauss_legendre(g, a, b, 20), axis=-1)
        if include_atom:
            inside = (y_lo <= th) & (th <= y_hi)
            out = out + np.where(inside, kern.atom(th, log_pre) * zmass(th), 0.0)
        return out

    mandatory = list(rule.level_breakpoints(t_lo, t_hi)) + [y_lo, y_hi]
    edges = graded_edges(t_lo, t_hi, h_max=0.5, mandatory=mandatory)
    vals, _, err = adaptive_panels(inner, edges, tol, batch=8)
    if err > 10 * tol:
        raise AccuracyError("Gerber-Shiu mass quadrature", err)
    return float(np.sum(vals))


def gerber_shiu_creep_mass(model: LevyModel, rule: TaxRule, alpha: float, beta: float,
                           x: float, theta=(None, None), tol: float = 1e-10) -> float:
    _check_gs(rule, x, alpha, beta)
    if model.sigma == 0:
        return 0.0
    t_lo = x if theta[0] is None else max(x, theta[0])
    t_hi = _theta_upper(model, rule, alpha, x, tol) if theta[1] is None else theta[1]
    if t_hi <= t_lo:
        return 0.0
    edges = graded_edges(t_lo, t_hi, h_max=0.5, mandatory=rule.level_breakpoints(t_lo, t_hi))
    vals, _, err = adaptive_panels(
        lambda th: gerber_shiu_creep(model, rule, alpha, beta, x, th), edges, tol)
    return float(np.sum(vals))


def ruin_transform(model: LevyModel, rule: TaxRule, q: float, x: float, tol: float = 1e-10) -> float:
    """``E_x[exp(-q tau_0^-); tau_0^- < inf]`` as total Gerber-Shiu plus creep mass."""
    return (gerber_shiu_mass(model, rule, q, q, x, tol=tol)
            + gerber_shiu_creep_mass(model, rule, q, q, x, tol=tol))


# -- constant-rate closed forms -----------------------------------------------

def constant_gamma_oracles(model: LevyModel, gamma: float, x: float, q: float = 0.0,
                           a: float | None = None, alpha: float | None = None,
                           beta: float | None = None, theta: float | None = None,
                           y: float | None = None, z: float | None = None) -> dict:
    """Closed forms for a constant tax rate, computed without the exponent table.

    Returns whichever of ``exit``, ``npv``, ``gs_density``, ``gs_creep`` the
    supplied arguments determine.
    """
    if not 0.0 <= gamma < 1.0:
        raise DomainError("constant tax rate must lie in [0, 1)")
    p = 1.0 / (1.0 - gamma)
    out = {}

    def ratio_pow(eng, lo, hi):
        # (W(lo) / W(hi)) ** p without overflow
        s_lo, lead = eng.scaled_value(lo, 0)
        s_hi, _ = eng.scaled_value(hi, 0)
        return np.exp(p * (np.log(s_lo) - np.log(s_hi) + lead * (lo - hi)))

    eng_q = ScaleEngine(model, q)
    if a is not None:
        if a <= x:
            raise DomainError("a must exceed x")
        out["exit"] = float(ratio_pow(eng_q, x, a))
    if q > 0 or eng_q.phi > 0:
        if gamma == 0.0:
            out["npv"] = 0.0
        else:
            val, _ = integrate.quad(lambda u: float(ratio_pow(eng_q, x, u)), x, np.inf,
                                    epsabs=1e-13, epsrel=1e-11, limit=500)
            out["npv"] = gamma * p * val
    if alpha is not None and beta is not None and theta is not None:
        eng_a = ScaleEngine(model, alpha)
        eng_b = ScaleEngine(model, beta)
        head = p * float(ratio_pow(eng_a, x, theta))
        if y is not None and z is not None:
            if not 0 < y < theta or z <= 0:
                raise DomainError("need 0 < y < theta and z > 0")
            w = eng_b.value
            br = w(theta - y, 1) - w(theta, 1) / w(theta, 0) * w(theta - y, 0)
            out["gs_density"] = head * br * float(model.jump_measure().density(y + z))
        if model.sigma > 0:
            w = eng_b.value
            out["gs_creep"] = head * 0.5 * model.sigma**2 * (
                w(theta, 1) ** 2 / w(theta, 0) - w(theta, 2))
        else:
            out["gs_creep"] = 0.0
    return out
