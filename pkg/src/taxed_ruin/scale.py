"""q-scale functions of spectrally negative Lévy processes.

``W^(q)`` is the function on ``[0, inf)``, zero on the negative half-line,
whose Laplace transform is ``1 / (psi(lam) - q)`` for ``lam > Phi(q)``.

Two evaluation routes are provided:

``closed_form``
    For the Brownian variant the hyperbolic formula. For hyperexponential
    claims ``1/(psi - q)`` is rational, so ``W^(q)(x) = sum_j exp(rho_j x) / psi'(rho_j)``
    over the roots ``rho_j`` of ``psi(lam) = q``.
``laplace_inversion``
    Numerical inversion of the exponentially damped transform
    ``1 / (psi(lam + Phi) - q)``; derivatives invert the transforms of the
    derivatives directly instead of differencing.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial import Polynomial

from .errors import DomainError, UnsupportedSmoothnessError
from .inversion import euler_inversion
from .levy import LevyModel, _psi, _psi_derivatives, phi, tilt

CLOSED_FORM = "closed_form"
LAPLACE_INVERSION = "laplace_inversion"


def _lundberg_roots(model: LevyModel, q: float, big_phi: float):
    """Roots of ``psi(lam) = q`` as (root, multiplicity) pairs, polished."""
    lam = Polynomial([0.0, 1.0])
    base = Polynomial([-model.jump_rate - q, model.drift, 0.5 * model.sigma**2])
    prod_all = Polynomial([1.0])
    for _, r in model.claims:
        prod_all = prod_all * (lam + r)
    num = base * prod_all
    for i, (w, r) in enumerate(model.claims):
        others = Polynomial([1.0])
        for j, (_, rj) in enumerate(model.claims):
            if j != i:
                others = others * (lam + rj)
        num = num + model.jump_rate * w * r * others
    raw = num.roots().astype(complex)

    def polish(z):
        for _ in range(60):
            d1 = _psi_derivatives(model, z)[0]
            if d1 == 0:
                break
            step = (_psi(model, z) - q) / d1
            z = z - step
            if abs(step) <= 1e-16 * max(1.0, abs(z)):
                break
        return z

    # cluster near-coincident roots (double root at 0 when q = 0 and psi'(0+) = 0)
    roots: list[tuple[complex, int]] = []
    used = np.zeros(len(raw), dtype=bool)
    for i, z in enumerate(raw):
        if used[i]:
            continue
        close = [j for j in range(len(raw)) if not used[j] and abs(raw[j] - z) <= 1e-6 * (1 + abs(z))]
        for j in close:
            used[j] = True
        if len(close) == 1:
            roots.append((polish(z), 1))
        elif len(close) == 2:
            roots.append((complex(np.mean(raw[close])), 2))
        else:
            raise DomainError("Lundberg equation has a root of multiplicity > 2")
    # the dominant real root is Phi(q); use the bisection value exactly
    k = int(np.argmin([abs(z - big_phi) for z, _ in roots]))
    z, mult = roots[k]
    roots[k] = (complex(big_phi) if mult == 1 else complex(round(z.real, 12)), mult)
    return roots


class ScaleEngine:
    """Evaluator for ``W^(q)`` and its first two derivatives.

    All evaluation methods accept scalars or arrays.
    """

    def __init__(self, model: LevyModel, q: float = 0.0, method: str = CLOSED_FORM,
                 terms: int = 40, target_rel_tol: float = 1e-10):
        if q < 0:
            raise DomainError("q must be >= 0")
        if method not in (CLOSED_FORM, LAPLACE_INVERSION):
            raise DomainError(f"unknown scale method {method!r}")
        self.model = model
        self.q = float(q)
        self.method = method
        self.inversion_params = {"terms": int(terms), "target_rel_tol": float(target_rel_tol)}
        self.phi = phi(model, self.q)
        self.w_at_zero = 1.0 / model.drift if model.sigma == 0 else 0.0
        if model.sigma > 0:
            self.dw_at_zero = 2.0 / model.sigma**2
        else:
            self.dw_at_zero = (model.jump_rate + self.q) / model.drift**2
        if method == CLOSED_FORM and model.has_jumps:
            roots = _lundberg_roots(model, self.q, self.phi)
            self._simple = np.array([z for z, m in roots if m == 1], dtype=complex)
            self._simple_res = np.array([1.0 / _psi_derivatives(model, z)[0] for z in self._simple])
            self._double = [(z, _psi_derivatives(model, z)) for z, m in roots if m == 2]
            self._lead = max(z.real for z, _ in roots)

    # -- scaled evaluations: exp(-lead * x) * W^(k)(x) for x > 0 ---------------
    def _scaled_brownian(self, x, order):
        m = self.model
        s2 = m.sigma**2
        k = -m.drift / s2
        delta = np.sqrt(m.drift**2 + 2.0 * self.q * s2) / s2
        # lead exponent is k + delta = Phi(q)
        if delta > 0:
            f = -np.expm1(-2.0 * delta * x) / (2.0 * delta)
        else:
            f = x
        fp = 0.5 * (1.0 + np.exp(-2.0 * delta * x))
        if order == 0:
            g = f
        elif order == 1:
            g = k * f + fp
        else:
            g = k * k * f + 2.0 * k * fp + delta**2 * f
        return (2.0 / s2) * g, k + delta

    def _scaled_rational(self, x, order):
        xs = x[..., None]
        ex = np.exp((self._simple - self._lead) * xs)
        out = np.sum(self._simple_res * self._simple**order * ex, axis=-1)
        for z, (d1, d2, d3) in self._double:
            a = 2.0 / d2
            b = -2.0 * d3 / (3.0 * d2**2)
            e = np.exp((z - self._lead) * x)
            poly = a * x + b
            if order == 0:
                out = out + e * poly
            elif order == 1:
                out = out + e * (z * poly + a)
            else:
                out = out + e * (z * z * poly + 2 * z * a)
        return np.real(out), self._lead

    def _scaled_inversion(self, x, order):
        m, q, ph = self.model, self.q, self.phi
        w0, dw0 = self.w_at_zero, self.dw_at_zero

        def transform(s):
            lam = s + ph
            base = 1.0 / (_psi(m, lam) - q)
            if order == 0:
                return base
            if order == 1:
                return lam * base - w0
            return lam * lam * base - lam * w0 - dw0

        vals = euler_inversion(transform, x.ravel(), terms=self.inversion_params["terms"],
                               rel_tol=self.inversion_params["target_rel_tol"])
        return vals.reshape(x.shape), ph

    def _scaled(self, x, order):
        if self.method == LAPLACE_INVERSION:
            return self._scaled_inversion(x, order)
        if not self.model.has_jumps:
            return self._scaled_brownian(x, order)
        return self._scaled_rational(x, order)

    def scaled_value(self, x, order: int = 0):
        """``(exp(-lead x) W^(k)(x), lead)`` for ``x > 0``; avoids overflow."""
        x = np.asarray(x, dtype=float)
        return self._scaled(x, order)

    def value(self, x, order: int = 0):
        if order not in (0, 1, 2):
            raise DomainError("order must be 0, 1 or 2")
        if order == 2 and self.model.sigma == 0:
            raise UnsupportedSmoothnessError(
                "second derivative of W requires a Gaussian component (sigma > 0)")
        x = np.asarray(x, dtype=float)
        if order > 0 and np.any(x < 0):
            raise DomainError("derivatives of W are only defined for x >= 0")
        pos = x > 0
        xp = np.where(pos, x, 1.0)
        scaled, lead = self._scaled(xp, order)
        out = scaled * np.exp(lead * xp)
        if order == 0:
            at0 = self.w_at_zero
        elif order == 1:
            at0 = self.dw_at_zero
        else:
            at0 = -4.0 * self.model.drift / self.model.sigma**4
        out = np.where(pos, out, np.where(x == 0, at0, 0.0))
        return float(out) if out.ndim == 0 else out

    def __call__(self, x):
        return self.value(x, 0)

    def derivative(self, x):
        return self.value(x, 1)

    def second_derivative(self, x):
        return self.value(x, 2)

    def log_derivative(self, x):
        """``W^(q)'(x) / W^(q)(x)`` for ``x > 0``."""
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0):
            raise DomainError("log_derivative requires x > 0")
        s0, _ = self._scaled(x, 0)
        s1, _ = self._scaled(x, 1)
        out = s1 / s0
        return float(out) if out.ndim == 0 else out

    def tilted(self, theta: float, q: float | None = None) -> "ScaleEngine":
        """Engine for the model under the measure tilted by ``theta``."""
        return ScaleEngine(tilt(self.model, theta), self.q if q is None else q, self.method,
                           self.inversion_params["terms"], self.inversion_params["target_rel_tol"])


@lru_cache(maxsize=256)
def scale_engine(model: LevyModel, q: float, method: str = CLOSED_FORM) -> ScaleEngine:
    """Shared immutable engine per (model, q, method)."""
    return ScaleEngine(model, q, method)


def scale_eval(engine: ScaleEngine, x, order: int = 0):
    return engine.value(x, order)


def scale_tilted_eval(model: LevyModel, theta: float, q: float, x, order: int = 0,
                      method: str = CLOSED_FORM):
    """``W_theta^(q)(x)``: scale function of the tilted model."""
    if order not in (0, 1):
        raise DomainError("tilted evaluation supports orders 0 and 1")
    return ScaleEngine(tilt(model, theta), q, method).value(x, order)


def log_derivative(engine: ScaleEngine, x):
    return engine.log_derivative(x)
