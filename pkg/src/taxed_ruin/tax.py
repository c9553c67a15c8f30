"""Piecewise-constant tax rates on the running supremum.

A rule holds breakpoints ``s_0 = 0 < s_1 < ... < s_K`` and rates ``g_k`` so that
``gamma(s) = g_k`` on ``[s_k, s_{k+1})``. The retention map

    gamma_bar(s) = x + int_x^s (1 - gamma(y)) dy,      s >= x,

is piecewise linear and strictly increasing, so both it and its inverse are
evaluated exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class TaxRule:
    x: float
    pieces: tuple[tuple[float, float], ...] = ((0.0, 0.0),)

    def __post_init__(self):
        pieces = tuple((float(s), float(g)) for s, g in self.pieces)
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "pieces", pieces)
        if not self.x > 0:
            raise DomainError("tax base level x must be > 0")
        if not pieces:
            raise DomainError("tax rule needs at least one piece")
        if pieces[0][0] != 0.0:
            raise DomainError("first tax breakpoint must be 0")
        for (s0, _), (s1, _) in zip(pieces, pieces[1:]):
            if not s1 > s0:
                raise DomainError("tax breakpoints must be strictly increasing")
        for _, g in pieces:
            if not 0.0 <= g < 1.0:
                raise DomainError(f"tax rate {g} outside [0, 1)")

        self_breaks = np.array([s for s, _ in pieces])
        rates = np.array([g for _, g in pieces])
        # cumulative integral of gamma from 0 to each breakpoint
        cum = np.concatenate([[0.0], np.cumsum(np.diff(self_breaks) * rates[:-1])])
        object.__setattr__(self, "_breaks", self_breaks)
        object.__setattr__(self, "_rates", rates)
        object.__setattr__(self, "_cum_tax", cum)
        # anchor retention-map knots at x and at every breakpoint above it
        knots_s = np.concatenate([[self.x], self_breaks[self_breaks > self.x]])
        knots_y = np.array([self._gamma_bar_scalar(s) for s in knots_s])
        object.__setattr__(self, "_knots_s", knots_s)
        object.__setattr__(self, "_knots_y", knots_y)

    @classmethod
    def constant(cls, x: float, rate: float) -> "TaxRule":
        return cls(x, ((0.0, rate),))

    @classmethod
    def no_tax(cls, x: float) -> "TaxRule":
        return cls(x, ((0.0, 0.0),))

    def with_base(self, x: float) -> "TaxRule":
        return TaxRule(x, self.pieces)

    @property
    def breakpoints(self) -> np.ndarray:
        return self._breaks

    @property
    def rates(self) -> np.ndarray:
        return self._rates

    @property
    def max_rate(self) -> float:
        return float(self._rates[self._breaks_index(self.x):].max())

    @property
    def tail_rate(self) -> float:
        return float(self._rates[-1])

    def constant_rate_above_base(self) -> float | None:
        """The rate if gamma is constant on ``[x, inf)``, else ``None``."""
        active = self._rates[self._breaks_index(self.x):]
        return float(active[0]) if np.all(active == active[0]) else None

    def _breaks_index(self, s: float) -> int:
        return int(np.searchsorted(self._breaks, s, side="right") - 1)

    def gamma(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise DomainError("gamma is defined on [0, inf)")
        idx = np.searchsorted(self._breaks, s, side="right") - 1
        out = self._rates[idx]
        return float(out) if out.ndim == 0 else out

    def cumulative_tax(self, s):
        """``int_0^s gamma(u) du``."""
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise DomainError("cumulative_tax is defined on [0, inf)")
        idx = np.searchsorted(self._breaks, s, side="right") - 1
        out = self._cum_tax[idx] + self._rates[idx] * (s - self._breaks[idx])
        return float(out) if out.ndim == 0 else out

    def _gamma_bar_scalar(self, s: float) -> float:
        total = self.x
        lo = self.x
        for k, (sk, g) in enumerate(self.pieces):
            hi_k = self.pieces[k + 1][0] if k + 1 < len(self.pieces) else np.inf
            a, b = max(lo, sk), min(s, hi_k)
            if b > a:
                total += (1.0 - g) * (b - a)
        return total

    def gamma_bar(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < self.x):
            raise DomainError("gamma_bar is defined on [x, inf)")
        i = np.searchsorted(self._knots_s, s, side="right") - 1
        out = self._knots_y[i] + (1.0 - self.gamma(self._knots_s[i])) * (s - self._knots_s[i])
        return float(out) if out.ndim == 0 else out

    def gamma_bar_inv(self, y):
        y = np.asarray(y, dtype=float)
        if np.any(y < self.x):
            raise DomainError("gamma_bar_inv is defined on [x, inf)")
        i = np.searchsorted(self._knots_y, y, side="right") - 1
        out = self._knots_s[i] + (y - self._knots_y[i]) / (1.0 - self.gamma(self._knots_s[i]))
        return float(out) if out.ndim == 0 else out

    def gamma_bar_inv_derivative(self, y):
        """``d/dy gamma_bar_inv(y) = 1 / (1 - gamma(gamma_bar_inv(y)))``."""
        return 1.0 / (1.0 - self.gamma(self.gamma_bar_inv(y)))

    def retained_rate(self, y):
        """``1 - gamma(gamma_bar_inv(y))``: retained fraction at supremum level ``y`` of U."""
        return 1.0 - self.gamma(self.gamma_bar_inv(y))

    def level_breakpoints(self, lo: float, hi: float) -> np.ndarray:
        """Levels of the taxed supremum in ``(lo, hi)`` where the retained rate jumps."""
        ys = self._knots_y[1:]
        return ys[(ys > lo) & (ys < hi)]

    def supremum_breakpoints(self, lo: float, hi: float) -> np.ndarray:
        """Breakpoints of gamma itself strictly inside ``(lo, hi)``."""
        b = self._breaks
        return b[(b > lo) & (b < hi)]

    def to_dict(self) -> dict:
        return {"x": self.x, "pieces": [[s, g] for s, g in self.pieces]}

    @classmethod
    def from_dict(cls, d: dict) -> "TaxRule":
        return cls(d["x"], tuple(tuple(p) for p in d.get("pieces", [[0.0, 0.0]])))
