"""Smooth compactly supported profiles shared by the verification modules.

Everything is built from the reference bump B(z) = exp(1 - 1/(1 - z^2)) on
(-1, 1), which is C-infinity, equals 1 at z = 0 and vanishes with all
derivatives at the endpoints.  Derivatives are closed-form, no finite
differencing anywhere.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad


def bump_raw(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    m = np.abs(z) < 1.0
    zm = z[m]
    out[m] = np.exp(1.0 - 1.0 / (1.0 - zm * zm))
    return out


def bump_raw_deriv(z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    m = np.abs(z) < 1.0
    zm = z[m]
    w = 1.0 - zm * zm
    out[m] = np.exp(1.0 - 1.0 / w) * (-2.0 * zm / (w * w))
    return out


_BUMP_INTEGRAL: float | None = None


def bump_integral() -> float:
    """int_{-1}^{1} B(z) dz, cached."""
    global _BUMP_INTEGRAL
    if _BUMP_INTEGRAL is None:
        val, _ = quad(lambda z: float(bump_raw(np.asarray(z))), -1.0, 1.0, epsabs=1e-13)
        _BUMP_INTEGRAL = val
    return _BUMP_INTEGRAL


@dataclass(frozen=True)
class Weight:
    """Smooth compactly supported scalar test weight with its derivative."""

    value: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    sup: float
    support: tuple[float, float]


def bump_weight(center: float, halfwidth: float, height: float = 1.0) -> Weight:
    """height * B((x - center)/halfwidth); sup = height at the center."""
    if halfwidth <= 0:
        raise ValueError("halfwidth must be positive")

    def value(x):
        return height * bump_raw((np.asarray(x, dtype=float) - center) / halfwidth)

    def deriv(x):
        return height * bump_raw_deriv((np.asarray(x, dtype=float) - center) / halfwidth) / halfwidth

    return Weight(value, deriv, abs(height), (center - halfwidth, center + halfwidth))


@dataclass(frozen=True)
class SmoothDatum:
    """Smooth initial datum with closed-form derivative; zero outside support."""

    value: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    support: tuple[float, float]
    sup: float
    sup_deriv: float


def bump_datum(center: float, halfwidth: float, height: float) -> SmoothDatum:
    w = bump_weight(center, halfwidth, height)
    # max |B'| = sup over (-1,1); attained near |z| ~ 0.486, value ~ 1.1638
    grid = np.linspace(-1.0, 1.0, 20001)
    sup_d = abs(height) * float(np.max(np.abs(bump_raw_deriv(grid)))) / halfwidth
    return SmoothDatum(w.value, w.deriv, w.support, abs(height), sup_d)


def datum_from_callables(value, deriv, support, n_probe: int = 4001) -> SmoothDatum:
    grid = np.linspace(support[0], support[1], n_probe)
    return SmoothDatum(
        value, deriv, (float(support[0]), float(support[1])),
        float(np.max(np.abs(value(grid)))), float(np.max(np.abs(deriv(grid)))),
    )
