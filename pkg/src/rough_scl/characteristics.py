"""Local smooth solutions by characteristics, and the dissipative inequality.

From a smooth compactly supported datum phi anchored at time t0, the rough
conservation law has a classical solution as long as characteristics do not
cross: x(x0, t) = x0 + sum_i a_i(phi(x0)) (W^i(t) - W^i(t0)) with Jacobian

    J(x0, t) = 1 + sum_i a_i'(phi(x0)) phi'(x0) (W^i(t) - W^i(t0)).

The solution is transported along these lines; we keep J >= 1/2 on the whole
window so the map is well-conditioned to invert.  Against such local smooth
solutions the scheme's output must dissipate:

    D(t) = int int psi(k) (u(x,t) - k - Psi(x,t))_+ dx dk

is nonincreasing over the validity window for every nonnegative weight psi.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fluxes import FluxModel
from .paths import PiecewiseLinearPath
from .smooth import SmoothDatum, Weight
from .solver import Trajectory

J_FLOOR = 0.5
DISSIPATIVE_C = 4.0  # tol_D = C * (dx + snapshot spacing) * (1 + sup|u0|)


def characteristic_flow(
    datum: SmoothDatum,
    path: PiecewiseLinearPath,
    flux: FluxModel,
    t0: float,
    t: float,
    x0: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Forward characteristics from (x0, t0) to time t: positions and Jacobian."""
    x0 = np.asarray(x0, dtype=float)
    dw = path.increment(t0, t)
    phi = datum.value(x0)
    dphi = datum.deriv(x0)
    x = x0.astype(float, copy=True)
    jac = np.ones_like(x0, dtype=float)
    for wi, ch in zip(dw, flux.channels):
        x = x + wi * ch.a(phi)
        jac = jac + wi * ch.a_prime(phi) * dphi
    return x, jac


def _window_times(path: PiecewiseLinearPath, lo: float, hi: float) -> np.ndarray:
    inner = path.knots[(path.knots > lo) & (path.knots < hi)]
    return np.concatenate([[lo], inner, [hi]])


def window(
    datum: SmoothDatum,
    path: PiecewiseLinearPath,
    flux: FluxModel,
    t0: float,
    j_floor: float = J_FLOOR,
    h_max: float | None = None,
    n_probe: int = 1000,
) -> float:
    """Largest h <= h_max with J >= j_floor on the support for t in the window.

    The window (t0 - h, t0 + h) is always intersected with the path domain
    [0, T], so h_max defaults to the larger one-sided horizon max(t0, T - t0).
    J is affine in W, hence piecewise linear in t: its minimum over a window is
    attained at path knots or window endpoints, which makes the min-over-h map
    exact on a probe grid and monotone, so plain bisection on h is reliable.
    """
    horizon = path.horizon
    if not 0.0 <= t0 <= horizon:
        raise ValueError(f"anchor {t0} outside the path domain [0, {horizon}]")
    if h_max is None:
        h_max = max(t0, horizon - t0)
    if h_max <= 0:
        raise ValueError("h_max must be positive")
    x0 = np.linspace(datum.support[0], datum.support[1], n_probe)
    g = np.zeros((path.n_channels, x0.size))
    phi = datum.value(x0)
    dphi = datum.deriv(x0)
    for i, ch in enumerate(flux.channels):
        g[i] = ch.a_prime(phi) * dphi
    w0 = path.eval(t0)

    def min_j(h: float) -> float:
        times = _window_times(path, max(0.0, t0 - h), min(horizon, t0 + h))
        dw = path.eval(times) - w0[None, :]
        return float((1.0 + dw @ g).min())

    if min_j(h_max) >= j_floor:
        return float(h_max)
    lo, hi = 0.0, h_max
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if min_j(mid) >= j_floor:
            lo = mid
        else:
            hi = mid
    if lo <= 0.0:
        raise RuntimeError("window collapsed to zero; Jacobian floor unreachable")
    return lo


@dataclass(frozen=True)
class LocalSmoothSolution:
    """Classical solution on (t0 - h, t0 + h) intersected with the path domain."""

    datum: SmoothDatum
    path: PiecewiseLinearPath
    flux: FluxModel
    t0: float
    h: float

    @property
    def window(self) -> tuple[float, float]:
        return (max(0.0, self.t0 - self.h), min(self.path.horizon, self.t0 + self.h))

    def _require_inside(self, t: float) -> None:
        lo, hi = self.window
        slack = 1e-12 * max(1.0, self.path.horizon)
        if not lo - slack <= t <= hi + slack:
            raise ValueError(f"time {t} outside the validity window [{lo}, {hi}]")

    def transported_support(self, t: float) -> tuple[float, float]:
        """Image of the datum support: endpoints carry phi = 0, so they shift rigidly."""
        dw = self.path.increment(self.t0, t)
        shift0 = float(sum(wi * ch.a(0.0) for wi, ch in zip(dw, self.flux.channels)))
        return (self.datum.support[0] + shift0, self.datum.support[1] + shift0)

    def evaluate(self, x, t: float) -> np.ndarray:
        """Psi(x, t) = phi(x0(x, t)); zero outside the transported support.

        The forward map is strictly increasing (J >= j_floor > 0), so the
        inverse is found by bisection on the datum support and sharpened by a
        few Newton steps with the exact Jacobian.
        """
        self._require_inside(t)
        x = np.atleast_1d(np.asarray(x, dtype=float))
        s_lo, s_hi = self.datum.support
        t_lo, t_hi = self.transported_support(t)
        out = np.zeros_like(x)
        inside = (x > t_lo) & (x < t_hi)
        if not np.any(inside):
            return out
        xq = x[inside]
        lo = np.full(xq.shape, s_lo)
        hi = np.full(xq.shape, s_hi)
        for _ in range(50):
            mid = 0.5 * (lo + hi)
            fm, _ = characteristic_flow(self.datum, self.path, self.flux, self.t0, t, mid)
            take_hi = fm < xq
            lo = np.where(take_hi, mid, lo)
            hi = np.where(take_hi, hi, mid)
        x0 = 0.5 * (lo + hi)
        for _ in range(3):
            fx, jac = characteristic_flow(self.datum, self.path, self.flux, self.t0, t, x0)
            x0 = np.clip(x0 - (fx - xq) / jac, s_lo, s_hi)
        fx, _ = characteristic_flow(self.datum, self.path, self.flux, self.t0, t, x0)
        if float(np.max(np.abs(fx - xq))) > 1e-8 * max(1.0, s_hi - s_lo):
            raise RuntimeError("characteristic inversion failed inside the window")
        out[inside] = self.datum.value(x0)
        return out


def local_solution(
    datum: SmoothDatum,
    path: PiecewiseLinearPath,
    flux: FluxModel,
    t0: float,
    j_floor: float = J_FLOOR,
    h_max: float | None = None,
) -> LocalSmoothSolution:
    h = window(datum, path, flux, t0, j_floor=j_floor, h_max=h_max)
    return LocalSmoothSolution(datum, path, flux, t0, h)


def dissipative_check(
    traj: Trajectory,
    datum: SmoothDatum,
    weight: Weight,
    t0: float,
    flux: FluxModel,
    path: PiecewiseLinearPath,
    n_k: int = 200,
    tol_c: float = DISSIPATIVE_C,
) -> dict:
    """Monotonicity of D(t) against the local smooth solution anchored at t0.

    Checks D(t_{j+1}) <= D(t_j) + tol_D over the trajectory snapshots that fall
    in the validity window, with tol_D = tol_c * (dx + spacing) * (1 + sup|u0|).
    """
    sol = local_solution(datum, path, flux, t0)
    w_lo, w_hi = sol.window
    slack = 1e-12 * max(1.0, path.horizon)
    mask = (traj.times >= w_lo - slack) & (traj.times <= w_hi + slack)
    times = traj.times[mask]
    if times.size < 2:
        raise ValueError(
            f"only {times.size} snapshots inside the window [{w_lo}, {w_hi}]; refine the schedule"
        )
    k_lo, k_hi = weight.support
    dk = (k_hi - k_lo) / n_k
    k = k_lo + (np.arange(n_k) + 0.5) * dk
    psi_k = weight.value(k)
    grid = traj.grid
    states = [traj.states[i] for i in np.flatnonzero(mask)]
    d_vals = np.empty(times.size)
    for j, (tj, state) in enumerate(zip(times, states)):
        psi_bar = sol.evaluate(grid.centers, float(tj))
        diff = state.u[:, None] - k[None, :] - psi_bar[:, None]
        d_vals[j] = grid.dx * dk * float((np.maximum(diff, 0.0) @ psi_k).sum())
    spacing = float(np.max(np.diff(times)))
    u0_inf = float(np.max(np.abs(traj.states[0].u)))
    tol_d = tol_c * (grid.dx + spacing) * (1.0 + u0_inf)
    increments = np.diff(d_vals)
    max_violation = float(max(0.0, increments.max())) if increments.size else 0.0
    return {
        "t0": float(t0),
        "h": float(sol.h),
        "window": [float(w_lo), float(w_hi)],
        "times": times.tolist(),
        "D": d_vals.tolist(),
        "max_violation": max_violation,
        "tol_D": float(tol_d),
        "pass": bool(max_violation <= tol_d),
    }
