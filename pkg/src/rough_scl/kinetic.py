"""Kinetic reformulation diagnostics.

The scheme's update on a frozen segment is exactly the macroscopic shadow of a
kinetic transport-projection step for chi(u, xi) = 1_{0 <= xi < u} - 1_{u <= xi < 0}:
transport chi upwind with speed F'(xi), project back to equilibrium.  The defect
of the projection is the nonnegative measure m in

    d chi + F'(xi) chi_x dt = m_xi dt.

Everything here extracts m per solver step in closed form (the cumulative
integrals of chi and of the one-sided flux derivatives are exact, sub-cell, so
m >= 0 holds to roundoff and the conservation residual at the top of the xi
range telescopes to machine zero), then checks the a priori bounds, the
L1 identity, and the transported-kernel formulation of the solution concept.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .fluxes import FluxModel, SegmentFlux, segment_flux
from .paths import PiecewiseLinearPath
from .smooth import Weight, bump_integral, bump_raw, bump_raw_deriv
from .solver import Grid1D, CellState, Trajectory

TOL_M_FACTOR = 1e-8  # tol_m = factor * ||u0||_L2^2 / d_xi


@dataclass(frozen=True)
class XiGrid:
    lo: float
    hi: float
    n: int

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise ValueError("empty xi range")
        if self.n < 4:
            raise ValueError("xi grid too coarse")

    @property
    def d_xi(self) -> float:
        return (self.hi - self.lo) / self.n

    @property
    def centers(self) -> np.ndarray:
        return self.lo + (np.arange(self.n) + 0.5) * self.d_xi

    @property
    def edges(self) -> np.ndarray:
        return self.lo + np.arange(self.n + 1) * self.d_xi


def chi_values(u: np.ndarray, xi_centers: np.ndarray) -> np.ndarray:
    """Quantized chi at cell centers: +1 on 0 <= xi < u, -1 on u <= xi < 0."""
    u = np.asarray(u, dtype=float)[:, None]
    xi = np.asarray(xi_centers, dtype=float)[None, :]
    plus = (0.0 <= xi) & (xi < u)
    minus = (u <= xi) & (xi < 0.0)
    return plus.astype(np.int8) - minus.astype(np.int8)


class ChiField:
    """chi of a cell state on a xi grid; keeps the source values for exact integrals."""

    def __init__(self, grid: Grid1D, xi: XiGrid, u: np.ndarray, t: float) -> None:
        u = np.asarray(u, dtype=float)
        u_inf = float(np.max(np.abs(u))) if u.size else 0.0
        if xi.lo > -u_inf - xi.d_xi or xi.hi < u_inf + xi.d_xi:
            raise ValueError(
                f"xi range [{xi.lo}, {xi.hi}] does not cover data range +-{u_inf} plus one cell"
            )
        self.grid = grid
        self.xi = xi
        self.u = u
        self.t = float(t)
        self._values: np.ndarray | None = None

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            self._values = chi_values(self.u, self.xi.centers)
        return self._values

    def integral_dxi(self) -> np.ndarray:
        """d_xi * sum_i chi: recovers u up to one-cell quantization."""
        return self.xi.d_xi * self.values.sum(axis=1)


def chi_from_state(state: CellState, xi: XiGrid) -> ChiField:
    return ChiField(state.grid, xi, state.u, state.t)


def _chi_cumulative(u: np.ndarray, xi_centers: np.ndarray) -> np.ndarray:
    """X_u(xi) = int_{-inf}^{xi} chi(u, z) dz, exact, at the given xi points."""
    l = np.minimum(u, 0.0)[:, None]
    h = np.maximum(u, 0.0)[:, None]
    s = np.sign(u)[:, None]
    return s * (np.clip(xi_centers[None, :], l, h) - l)


def _one_sided_cumulative(
    fseg: SegmentFlux, u: np.ndarray, g_xi: np.ndarray, g_u: np.ndarray, xi_centers: np.ndarray
) -> np.ndarray:
    """int_{-inf}^{xi} (F')^{+/-}(z) chi(u_j, z) dz from the antiderivative G = P or N.

    g_xi = G at xi_centers, g_u = G at the cell values; G(0) = 0 by construction.
    """
    l = np.minimum(u, 0.0)[:, None]
    h = np.maximum(u, 0.0)[:, None]
    s = np.sign(u)[:, None]
    g_l = np.where(u >= 0.0, 0.0, g_u)[:, None]
    g_h = np.where(u >= 0.0, g_u, 0.0)[:, None]
    xi = xi_centers[None, :]
    mid = np.where(xi < l, g_l, np.where(xi > h, g_h, g_xi[None, :]))
    return s * (mid - g_l)


def _xi_tables(fseg: SegmentFlux, xi: XiGrid) -> tuple[np.ndarray, np.ndarray]:
    cache = getattr(fseg, "_kinetic_xi_tables", None)
    if cache is None:
        cache = {}
        fseg._kinetic_xi_tables = cache
    if xi not in cache:
        xc = xi.centers
        cache[xi] = (fseg.pos_integral(xc), fseg.neg_integral(xc))
    return cache[xi]


@dataclass
class DefectField:
    """Entropy defect rate m(x, xi) >= 0 for one time slab [t0, t0 + duration].

    `values` is the rate density (per unit x, xi and time); integrals over the
    slab therefore carry the factor `duration`.  `cons_residual` is the leftover
    of the cumulative at the top of the xi range (the conservation residual),
    reported rather than zeroed.
    """

    grid: Grid1D
    xi: XiGrid
    t0: float
    duration: float
    values: np.ndarray
    cons_residual: np.ndarray

    def total_mass(self) -> float:
        return float(self.duration * self.grid.dx * self.xi.d_xi * self.values.sum())

    def xi_line_mass(self) -> np.ndarray:
        """Per xi cell: duration * int m dx, shape (n_xi,)."""
        return self.duration * self.grid.dx * self.values.sum(axis=0)

    def zero_level_line(self) -> np.ndarray:
        """m(x, 0) rate, read off the stored field at the cell edge xi = 0."""
        xc = self.xi.centers
        i = int(np.searchsorted(xc, 0.0))
        if i == 0 or i == xc.size:
            raise ValueError("xi = 0 is not interior to the xi grid")
        if abs(xc[i] - 0.0) < 1e-9 * self.xi.d_xi:
            return self.values[:, i]
        return 0.5 * (self.values[:, i - 1] + self.values[:, i])

    def min_value(self) -> float:
        return float(self.values.min())

    def support_excess(self, u_inf: float) -> float:
        """Largest m outside |xi| <= u_inf + 2 d_xi (should be ~0)."""
        mask = np.abs(self.xi.centers) > u_inf + 2.0 * self.xi.d_xi
        return float(self.values[:, mask].max()) if np.any(mask) else 0.0


def defect_from_slab(
    chi0: ChiField,
    chi1: ChiField,
    flux: FluxModel,
    c,
    dt: float,
    fseg: SegmentFlux | None = None,
) -> DefectField:
    """Extract the defect rate of one solver step.

    The accumulation over zeta runs from xi_lo upward with the same upwind
    splitting as the solver step: cumulative of (chi1 - chi0)/dt plus the
    difference of the one-sided interface integrals, all exact in xi.
    """
    if chi0.grid != chi1.grid or chi0.xi != chi1.xi:
        raise ValueError("chi fields live on different grids")
    if dt <= 0:
        raise ValueError("slab duration must be positive")
    grid, xi = chi0.grid, chi0.xi
    if fseg is None:
        fseg = segment_flux(flux, c)
    p_xi, n_xi = _xi_tables(fseg, xi)
    u0, u1 = chi0.u, chi1.u
    xc = xi.centers

    x0 = _chi_cumulative(u0, xc)
    x1 = _chi_cumulative(u1, xc)
    p_u0 = fseg.pos_integral(u0)
    n_u0 = fseg.neg_integral(u0)
    a_pos = _one_sided_cumulative(fseg, u0, p_xi, p_u0, xc)
    b_neg = _one_sided_cumulative(fseg, u0, n_xi, n_u0, xc)
    if grid.bc == "periodic":
        a_left = np.roll(a_pos, 1, axis=0)
        b_right = np.roll(b_neg, -1, axis=0)
        p_left = np.roll(p_u0, 1)
        n_right = np.roll(n_u0, -1)
    else:
        a_left = np.vstack([a_pos[:1], a_pos[:-1]])
        b_right = np.vstack([b_neg[1:], b_neg[-1:]])
        p_left = np.concatenate([p_u0[:1], p_u0[:-1]])
        n_right = np.concatenate([n_u0[1:], n_u0[-1:]])

    transport = (a_pos - a_left) + (b_right - b_neg)
    m = (x1 - x0) / dt + transport / grid.dx
    flux_div = (p_u0 - p_left) + (n_right - n_u0)
    cons = (u1 - u0) / dt + flux_div / grid.dx
    return DefectField(grid, xi, chi0.t, dt, m, cons)


def accumulate_defects(traj: Trajectory, flux: FluxModel, xi: XiGrid) -> list[DefectField]:
    """Aggregate per-step defects into the reporting slabs between snapshots."""
    if traj.slabs is None:
        raise ValueError("trajectory was solved without record_slabs")
    if traj.times.size < 2:
        raise ValueError("need at least two snapshots")
    edges = traj.times
    n_rep = edges.size - 1
    acc = [np.zeros((traj.grid.n_cells, xi.n)) for _ in range(n_rep)]
    acc_cons = [np.zeros(traj.grid.n_cells) for _ in range(n_rep)]
    dur = np.zeros(n_rep)
    fseg_cache: dict[bytes, SegmentFlux] = {}
    for slab in traj.slabs:
        key = slab.c.tobytes()
        fseg = fseg_cache.get(key)
        if fseg is None:
            fseg = segment_flux(flux, slab.c)
            fseg_cache[key] = fseg
        k = int(np.searchsorted(edges, slab.t0 + 0.5 * slab.dt) - 1)
        k = min(max(k, 0), n_rep - 1)
        chi0 = ChiField(traj.grid, xi, slab.u0, slab.t0)
        chi1 = ChiField(traj.grid, xi, slab.u1, slab.t0 + slab.dt)
        d = defect_from_slab(chi0, chi1, flux, slab.c, slab.dt, fseg)
        acc[k] += slab.dt * d.values
        acc_cons[k] += slab.dt * d.cons_residual
        dur[k] += slab.dt
    out = []
    for k in range(n_rep):
        if dur[k] <= 0:
            continue
        out.append(
            DefectField(traj.grid, xi, float(edges[k]), float(dur[k]), acc[k] / dur[k], acc_cons[k] / dur[k])
        )
    return out


def tol_m(state0: CellState, xi: XiGrid) -> float:
    return TOL_M_FACTOR * state0.l2_sq() / xi.d_xi


def check_kf_bounds(defects: list[DefectField], state0: CellState) -> dict:
    """A priori defect bounds: total mass, per-xi mass, sign, support."""
    if not defects:
        raise ValueError("no defect fields")
    xi = defects[0].xi
    l2sq = state0.l2_sq()
    l1 = state0.l1()
    u_inf = float(np.max(np.abs(state0.u)))
    tol = TOL_M_FACTOR * l2sq / xi.d_xi

    total = sum(d.total_mass() for d in defects)
    xi_mass = np.sum([d.xi_line_mass() for d in defects], axis=0)
    min_m = min(d.min_value() for d in defects)
    support = max(d.support_excess(u_inf) for d in defects)
    cons = max(float(np.max(np.abs(d.cons_residual))) for d in defects)

    bound_total = 0.5 * l2sq
    bound_xi = l1
    tol_total = 0.05 * bound_total + 10.0 * tol
    tol_xi = 0.05 * bound_xi + 10.0 * tol
    report = {
        "total_mass": total,
        "bound_total": bound_total,
        "tol_total": tol_total,
        "total_ok": total <= bound_total + tol_total,
        "xi_mass_max": float(xi_mass.max()),
        "bound_xi": bound_xi,
        "tol_xi": tol_xi,
        "xi_ok": float(xi_mass.max()) <= bound_xi + tol_xi,
        "min_m": min_m,
        "tol_m": tol,
        "sign_ok": min_m >= -tol,
        "support_excess": support,
        "support_ok": support <= tol,
        "cons_residual_max": cons,
    }
    report["pass"] = bool(
        report["total_ok"] and report["xi_ok"] and report["sign_ok"] and report["support_ok"]
    )
    return report


def check_unpr1(traj: Trajectory, defects: list[DefectField]) -> dict:
    """Per-slab residual of d/dt ||u||_L1 = -2 int m(x, 0) dx."""
    lhs, rhs = [], []
    for k, d in enumerate(defects):
        u0, u1 = traj.states[k], traj.states[k + 1]
        lhs.append((u1.l1() - u0.l1()) / d.duration)
        rhs.append(-2.0 * d.grid.dx * float(np.sum(d.zero_level_line())))
    lhs = np.asarray(lhs)
    rhs = np.asarray(rhs)
    scale = max(float(np.max(np.abs(lhs))), float(np.max(np.abs(rhs))))
    if scale < 1e-14 * max(traj.states[0].l1(), 1.0):
        horizon = traj.times[-1] - traj.times[0]
        scale = max(traj.states[0].l1() / max(horizon, 1e-300), 1e-300)
    resid = np.abs(lhs - rhs)
    return {
        "lhs": lhs,
        "rhs": rhs,
        "residuals": resid,
        "scale": scale,
        "max_relative": float(resid.max() / scale),
    }


def xi_lipschitz_increments(defects: list[DefectField], psi_xt: Callable, t_eval: str = "mid") -> np.ndarray:
    """Increments of Q(xi) = sum_slabs int psi(x,t) m dx dt per unit xi.

    Returns |Q(xi_{i+1}) - Q(xi_i)| / d_xi; the a priori bound is
    (sup |D_{x,t} psi| + sup |psi(., 0)|) * ||u0||_L1.
    """
    xi = defects[0].xi
    q = np.zeros(xi.n)
    for d in defects:
        t = d.t0 + (0.5 * d.duration if t_eval == "mid" else 0.0)
        w = psi_xt(d.grid.centers, t)
        q += d.duration * d.grid.dx * (w @ d.values)
    return np.abs(np.diff(q)) / xi.d_xi


# -- transported kernel and the solution-definition residual ----------------


@dataclass(frozen=True)
class KernelRho:
    """rho_eta(z) = profile(z/eta)/eta with a smooth unit-mass profile on (-1,1)."""

    width: float
    profile: Callable[[np.ndarray], np.ndarray]
    dprofile: Callable[[np.ndarray], np.ndarray]

    def rho(self, z):
        return self.profile(np.asarray(z, dtype=float) / self.width) / self.width

    def drho(self, z):
        return self.dprofile(np.asarray(z, dtype=float) / self.width) / self.width**2


def default_kernel(width: float) -> KernelRho:
    if width <= 0:
        raise ValueError("kernel width must be positive")
    norm = bump_integral()
    return KernelRho(
        width,
        lambda z: bump_raw(z) / norm,
        lambda z: bump_raw_deriv(z) / norm,
    )


def transport_shift(flux: FluxModel, path: PiecewiseLinearPath, xi, t: float) -> np.ndarray:
    """sum_i a_i(xi) W^i(t): the kernel center offset at level xi and time t."""
    w = path.eval(t)
    xi = np.asarray(xi, dtype=float)
    out = np.zeros_like(xi)
    for wi, ch in zip(np.atleast_1d(w), flux.channels):
        out = out + wi * ch.a(xi)
    return out


def rho_eval(
    kernel: KernelRho, y, x, xi, t: float, path: PiecewiseLinearPath, flux: FluxModel
) -> np.ndarray:
    """rho(y, x, xi, t) = rho_eta(y - x + sum_i a_i(xi) W^i(t))."""
    shift = transport_shift(flux, path, xi, t)
    return kernel.rho(np.asarray(y, dtype=float) - np.asarray(x, dtype=float) + shift)


def definition_residual(
    traj: Trajectory,
    defects: list[DefectField],
    kernel: KernelRho,
    flux: FluxModel,
    path: PiecewiseLinearPath,
    pairs: list[tuple[Weight, Weight]],
    n_y: int = 33,
) -> list[float]:
    """Weak residual of the transported-kernel solution definition.

    For each weight pair (psi in xi, phi in t) assembles, per reporting slab,

        R(y) += -(phi(t1)-phi(t0)) * int psi(xi) (G(t0)+G(t1))/2 dxi
                + phi(t_mid) * dt * int [psi'(xi) rho + psi(xi) A'(xi) d_y rho] m dx dxi,

    with G(y, xi, t) = int chi rho dx and A'(xi) = sum_i a_i'(xi) W^i(t).  The
    time derivative lands on phi, the xi derivative on psi and rho.  Returns the
    L1-in-y norm of R on the periodic domain, normalized by
    ||psi||_inf ||phi||_inf ||u0||_L1.  (Integrating R dy instead would kill the
    kernel entirely because rho has unit mass; the definition is a statement for
    every y, so the norm over y is the meaningful scalar.)
    """
    grid = traj.grid
    if grid.bc != "periodic":
        raise ValueError("definition residual is implemented on periodic domains")
    xi = defects[0].xi
    length = grid.length
    if not kernel.width < 0.5 * length:
        raise ValueError("kernel width must be below half the domain length")
    for psi, phi in pairs:
        if psi.support[0] <= xi.lo or psi.support[1] >= xi.hi:
            raise ValueError("psi must be compactly supported inside the xi range")
        if phi.support[0] <= traj.times[0] or phi.support[1] >= traj.times[-1]:
            raise ValueError("phi must be compactly supported inside the time range")

    xc = xi.centers
    x = grid.centers
    y = np.linspace(grid.x_lo, grid.x_hi, n_y, endpoint=False)
    a_stack = np.stack([ch.a(xc) for ch in flux.channels])
    ap_stack = np.stack([ch.a_prime(xc) for ch in flux.channels])
    psi_v = [p.value(xc) for p, _ in pairs]
    psi_d = [p.deriv(xc) for p, _ in pairs]

    def wrap(z):
        return z - length * np.round(z / length)

    acc = [np.zeros(n_y) for _ in pairs]
    for k, d in enumerate(defects):
        t0, t1 = d.t0, d.t0 + d.duration
        tm = 0.5 * (t0 + t1)
        w0, w1, wm = path.eval(t0), path.eval(t1), path.eval(tm)
        shift0 = w0 @ a_stack
        shift1 = w1 @ a_stack
        shiftm = wm @ a_stack
        a_prime_m = wm @ ap_stack
        chi0 = chi_values(traj.states[k].u, xc).astype(float)
        chi1 = chi_values(traj.states[k + 1].u, xc).astype(float)
        g0 = np.empty((xi.n, n_y))
        g1 = np.empty((xi.n, n_y))
        h_rho = np.empty((xi.n, n_y))
        h_drho = np.empty((xi.n, n_y))
        base = y[None, :] - x[:, None]
        for i in range(xi.n):
            r0 = kernel.rho(wrap(base + shift0[i]))
            r1 = kernel.rho(wrap(base + shift1[i]))
            zm = wrap(base + shiftm[i])
            rm = kernel.rho(zm)
            rdm = kernel.drho(zm)
            g0[i] = grid.dx * (chi0[:, i] @ r0)
            g1[i] = grid.dx * (chi1[:, i] @ r1)
            h_rho[i] = grid.dx * (d.values[:, i] @ rm)
            h_drho[i] = grid.dx * (d.values[:, i] @ rdm)
        for j, (psi, phi) in enumerate(pairs):
            dphi = float(phi.value(t1) - phi.value(t0))
            phim = float(phi.value(tm))
            acc[j] += -dphi * xi.d_xi * (psi_v[j] @ (0.5 * (g0 + g1)))
            acc[j] += phim * d.duration * xi.d_xi * (
                psi_d[j] @ h_rho + (psi_v[j] * a_prime_m) @ h_drho
            )

    u0_l1 = traj.states[0].l1()
    out = []
    for j, (psi, phi) in enumerate(pairs):
        r_l1 = float(np.sum(np.abs(acc[j]))) * (length / n_y)
        out.append(r_l1 / (psi.sup * phi.sup * u0_l1))
    return out
