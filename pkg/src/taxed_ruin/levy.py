"""Spectrally negative Lévy processes with hyperexponential claims.

Three parametric variants are supported:

* ``CramerLundberg``       premium drift ``c > 0`` minus compound Poisson claims
* ``BrownianDrift``        linear drift plus Brownian motion, no jumps
* ``BrownianPerturbedCL``  both of the above

Claim sizes (the jumps of ``-X``) follow a finite mixture of exponentials,
which keeps the Laplace exponent rational and closed under exponential tilting.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError

CRAMER_LUNDBERG = "CramerLundberg"
BROWNIAN_DRIFT = "BrownianDrift"
BROWNIAN_PERTURBED_CL = "BrownianPerturbedCL"
VARIANTS = (CRAMER_LUNDBERG, BROWNIAN_DRIFT, BROWNIAN_PERTURBED_CL)


@dataclass(frozen=True)
class LevyModel:
    """Parametric spectrally negative Lévy process.

    Attributes
    ----------
    variant : str
        One of ``VARIANTS``.
    drift : float
        Linear coefficient of the Laplace exponent (premium rate for the
        compound Poisson variants).
    sigma : float
        Gaussian coefficient.
    jump_rate : float
        Poisson intensity of claims.
    claims : tuple of (weight, rate)
        Hyperexponential claim law, weights summing to one.
    """

    variant: str
    drift: float
    sigma: float = 0.0
    jump_rate: float = 0.0
    claims: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "drift", float(self.drift))
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "jump_rate", float(self.jump_rate))
        object.__setattr__(
            self, "claims", tuple((float(w), float(r)) for w, r in self.claims)
        )
        if self.variant not in VARIANTS:
            raise DomainError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.sigma < 0:
            raise DomainError("sigma must be >= 0")
        if self.jump_rate < 0:
            raise DomainError("jump_rate must be >= 0")
        for w, r in self.claims:
            if not (w > 0 and r > 0):
                raise DomainError("claim weights and rates must be positive")
        if self.claims and abs(sum(w for w, _ in self.claims) - 1.0) > 1e-12:
            raise DomainError("claim weights must sum to 1")

        if self.variant == BROWNIAN_DRIFT:
            if self.sigma <= 0:
                raise DomainError("BrownianDrift requires sigma > 0")
            if self.jump_rate != 0 or self.claims:
                raise DomainError("BrownianDrift has no jumps")
        else:
            if self.jump_rate <= 0 or not self.claims:
                raise DomainError(f"{self.variant} requires jump_rate > 0 and a claim law")
            if self.variant == CRAMER_LUNDBERG:
                if self.sigma != 0:
                    raise DomainError("CramerLundberg has sigma = 0")
                if self.drift <= 0:
                    # pure negative subordinator: monotone paths are excluded
                    raise DomainError("CramerLundberg requires drift > 0")
            elif self.sigma <= 0:
                raise DomainError("BrownianPerturbedCL requires sigma > 0")

    @classmethod
    def cramer_lundberg(cls, premium: float, jump_rate: float,
                        claims: Sequence[tuple[float, float]]) -> "LevyModel":
        return cls(CRAMER_LUNDBERG, premium, 0.0, jump_rate, tuple(claims))

    @classmethod
    def brownian(cls, drift: float, sigma: float) -> "LevyModel":
        return cls(BROWNIAN_DRIFT, drift, sigma)

    @classmethod
    def perturbed_cl(cls, premium: float, sigma: float, jump_rate: float,
                     claims: Sequence[tuple[float, float]]) -> "LevyModel":
        return cls(BROWNIAN_PERTURBED_CL, premium, sigma, jump_rate, tuple(claims))

    @property
    def has_jumps(self) -> bool:
        return self.jump_rate > 0

    @property
    def bounded_variation(self) -> bool:
        return self.sigma == 0

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.claims])

    @property
    def rates(self) -> np.ndarray:
        return np.array([r for _, r in self.claims])

    @property
    def mean_claim(self) -> float:
        return sum(w / r for w, r in self.claims)

    def jump_measure(self) -> "JumpMeasureView":
        return JumpMeasureView(self)

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "drift": self.drift,
            "sigma": self.sigma,
            "jump_rate": self.jump_rate,
            "claims": [[w, r] for w, r in self.claims],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LevyModel":
        return cls(
            d["variant"],
            d["drift"],
            d.get("sigma", 0.0),
            d.get("jump_rate", 0.0),
            tuple(tuple(c) for c in d.get("claims", ())),
        )


class JumpMeasureView:
    """Lévy measure of ``-X``: ``nu(dz) = jump_rate * sum_i w_i r_i exp(-r_i z) dz``."""

    def __init__(self, model: LevyModel):
        self.total_mass = model.jump_rate
        self._w = model.weights
        self._r = model.rates

    def density(self, z):
        z = np.asarray(z, dtype=float)
        if self.total_mass == 0:
            return np.zeros_like(z)
        zz = np.maximum(z, 0.0)[..., None]
        out = self.total_mass * np.sum(self._w * self._r * np.exp(-self._r * zz), axis=-1)
        return np.where(z > 0, out, 0.0)

    def tail(self, z):
        """``nu((z, inf))``; equals the total mass for ``z <= 0``."""
        z = np.asarray(z, dtype=float)
        if self.total_mass == 0:
            return np.zeros_like(z)
        zz = np.maximum(z, 0.0)[..., None]
        return self.total_mass * np.sum(self._w * np.exp(-self._r * zz), axis=-1)


def _psi(model: LevyModel, theta):
    # valid for complex theta off the poles -r_i
    out = model.drift * theta + 0.5 * model.sigma**2 * theta**2
    for w, r in model.claims:
        out = out - model.jump_rate * w * (1.0 - r / (r + theta))
    return out


def _psi_derivatives(model: LevyModel, theta):
    """First three derivatives of the Laplace exponent (complex-safe)."""
    d1 = model.drift + model.sigma**2 * theta
    d2 = model.sigma**2 + 0 * theta
    d3 = 0 * theta
    for w, r in model.claims:
        lw = model.jump_rate * w * r
        d1 = d1 - lw / (r + theta) ** 2
        d2 = d2 + 2 * lw / (r + theta) ** 3
        d3 = d3 - 6 * lw / (r + theta) ** 4
    return d1, d2, d3


def laplace_exponent(model: LevyModel, theta):
    """``psi(theta) = log E exp(theta X_1)`` for ``theta >= 0``."""
    th = np.asarray(theta, dtype=float)
    if np.any(th < 0):
        raise DomainError("laplace_exponent is only defined here for theta >= 0")
    out = _psi(model, th)
    return float(out) if np.ndim(out) == 0 else out


def laplace_exponent_derivative(model: LevyModel, theta):
    th = np.asarray(theta, dtype=float)
    if np.any(th < 0):
        raise DomainError("theta must be >= 0")
    out = _psi_derivatives(model, th)[0]
    return float(out) if np.ndim(out) == 0 else out


def net_profit_drift(model: LevyModel) -> float:
    """Right derivative of psi at zero, ``c - jump_rate * E[claim]``."""
    return model.drift - model.jump_rate * model.mean_claim


def net_profit_sign(model: LevyModel) -> int:
    d = net_profit_drift(model)
    # relative guard so c = lambda/mu reads as oscillating despite rounding
    scale = abs(model.drift) + model.jump_rate * model.mean_claim
    if abs(d) <= 1e-14 * scale:
        return 0
    return 1 if d > 0 else -1


def phi(model: LevyModel, q: float) -> float:
    """Largest root of ``psi(theta) = q``.

    Bracket from the right of the minimiser of psi, bisect until the bracket
    is narrow, then polish with Newton steps kept inside the bracket.
    """
    if q < 0:
        raise DomainError("q must be >= 0")
    lo = 0.0
    if q == 0:
        if net_profit_sign(model) >= 0:
            return 0.0
        # psi dips below zero: largest root sits right of the minimiser
        hi = 1.0
        while _psi_derivatives(model, hi)[0] <= 0:
            hi *= 2.0
        a, b = 0.0, hi
        for _ in range(200):
            m = 0.5 * (a + b)
            if _psi_derivatives(model, m)[0] > 0:
                b = m
            else:
                a = m
            if b - a <= 1e-15 * b:
                break
        lo = b

    hi = max(1.0, 2.0 * lo)
    while _psi(model, hi) <= q:
        hi *= 2.0
    f = lambda t: _psi(model, t) - q  # noqa: E731
    a, b = lo, hi
    for _ in range(400):
        m = 0.5 * (a + b)
        if f(m) > 0:
            b = m
        else:
            a = m
        if b - a <= 1e-6 * max(1.0, b):
            break
    t = b
    for _ in range(50):
        d1 = _psi_derivatives(model, t)[0]
        step = f(t) / d1
        t_new = t - step
        if not (a <= t_new <= b):
            t_new = 0.5 * (a + b)
        if f(t_new) > 0:
            b = t_new
        else:
            a = t_new
        if abs(t_new - t) <= 4e-16 * max(1.0, abs(t_new)):
            t = t_new
            break
        t = t_new
    return float(t)


def tilt(model: LevyModel, theta: float) -> LevyModel:
    """Model under the exponential change of measure with parameter ``theta``.

    ``psi_theta(lam) = psi(lam + theta) - psi(theta)``: claim rates shift by
    ``theta``, the jump intensity thins, and the drift gains ``sigma^2 theta``.
    """
    if theta < 0:
        raise DomainError("tilt parameter must be >= 0")
    if theta == 0:
        return model
    drift = model.drift + model.sigma**2 * theta
    if not model.has_jumps:
        return LevyModel(model.variant, drift, model.sigma)
    masses = [model.jump_rate * w * r / (r + theta) for w, r in model.claims]
    rate = sum(masses)
    claims = tuple((m / rate, r + theta) for m, (_, r) in zip(masses, model.claims))
    # renormalise the weights exactly so validation accepts them
    total = sum(w for w, _ in claims)
    claims = tuple((w / total, r) for w, r in claims)
    return LevyModel(model.variant, drift, model.sigma, rate, claims)
