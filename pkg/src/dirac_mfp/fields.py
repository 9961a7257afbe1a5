"""Eulerian reconstruction from a solved Lagrangian flow.

Density, velocity and value are carried on the image nodes
``x = gamma(t_i, y_j)`` of the flow map itself, so no interpolation ever
crosses the free boundary.  The value is rebuilt in two steps: along each
label,

    ubar(t, y) = ubar(T, y) + int_t^T  m^theta + gamma_t^2 / 2  ds,

with the terminal slice obtained by integrating u_x = -gamma_t along the
terminal row and shifted so that int u(T) m_T = 0.  Outside the support
the value is continued by tangent characteristics of the boundary curve:
straight segments carrying the boundary slope, a constant state below the
level of an interior minimum of gamma_L when its velocity changes sign,
and a linear-in-x state beyond the last tangent otherwise; mirrored on
the right.  The continued field solves -u_t + u_x^2/2 = 0 away from the
support and matches value and slope at the free boundary.

Residual diagnostics keep the asymmetry of the solution concept: the
continuity equation is tested weakly against smooth bumps, the HJ
equation pointwise by nonuniform finite differences at fixed x.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline

from .errors import (
    CompatibilityError,
    CrossingCharacteristicsError,
    DegenerateStateError,
    InvalidParameterError,
)
from .profile import Profile
from .solver import FlowField
from .target import TerminalDensity

__all__ = [
    "EulerianSnapshot",
    "FreeBoundaries",
    "density",
    "velocity",
    "value_on_support",
    "extend_value",
    "free_boundaries",
    "snapshot",
    "pushforward_masses",
    "pushforward_partial_masses",
    "weak_continuity_residuals",
    "hj_interior_residual",
    "hj_exterior_residual",
    "d1_to_dirac",
    "save_snapshot_csv",
    "save_boundary_csv",
]

_SLOPE_FLOOR = 1e-12


# -- derivative stencils -----------------------------------------------------

def _slopes_all(f: FlowField) -> np.ndarray:
    """Label derivative gamma_y on every slice; centered inside, one-sided
    second order at the boundary columns."""
    s = np.gradient(f.gamma, f.grid.dy, axis=1, edge_order=2)
    if np.min(s) <= _SLOPE_FLOOR:
        raise DegenerateStateError("flow map slope collapsed; density undefined")
    return s


def _gamma_t_all(f: FlowField) -> np.ndarray:
    return np.gradient(f.gamma, f.grid.t, axis=0, edge_order=2)


def _second_derivative(values: np.ndarray, t: np.ndarray) -> np.ndarray:
    # second derivative of the local interpolating parabola; the end nodes
    # share the parabola of their neighbor
    hm = np.diff(t)[:-1]
    hp = np.diff(t)[1:]
    core = 2.0 * (values[2:] * hm - values[1:-1] * (hm + hp) + values[:-2] * hp)
    core /= hm * hp * (hm + hp)
    return np.concatenate([[core[0]], core, [core[-1]]])


# -- pointwise fields on the support -----------------------------------------

def density(f: FlowField, t_index: int) -> tuple[np.ndarray, np.ndarray]:
    """Density on the image nodes of slice ``t_index``.

    Returns ``(x, m)`` with ``m = phi(y) / gamma_y``; exactly zero at the
    two free-boundary nodes where phi vanishes.
    """
    p = f.profile
    row = f.gamma[t_index]
    s = np.gradient(row, f.grid.dy, edge_order=2)
    if np.min(s) <= _SLOPE_FLOOR:
        raise DegenerateStateError("flow map slope collapsed; density undefined")
    return row.copy(), p.phi(f.grid.y) / s


def velocity(f: FlowField, t_index: int) -> np.ndarray:
    """u_x on the image nodes of slice ``t_index``, as minus the label
    velocity of the flow (one-sided at t = 0, T)."""
    return -_gamma_t_all(f)[t_index]


def value_on_support(f: FlowField, p: Profile | None = None,
                     m: TerminalDensity | None = None) -> np.ndarray:
    """Value ubar(t_i, y_j) on every slice, shape (nt+1, ny+1).

    Integrates m^theta + gamma_t^2/2 backward in time along each label
    (trapezoid on the graded grid).  The terminal slice comes from
    u_x = -gamma_t integrated along the terminal row and is normalized so
    that the terminal value has zero mean against the target density.
    """
    p = f.profile if p is None else p
    g = f.grid
    if m is not None:
        expected = m.quantile(p.cdf(g.y))
        scale = 1.0 + float(np.max(np.abs(expected)))
        if np.max(np.abs(f.gamma[-1] - expected)) > 1e-8 * scale:
            raise CompatibilityError(
                "terminal row of the flow does not match the supplied target")
    gt = _gamma_t_all(f)
    s = _slopes_all(f)
    mth = (p.phi(g.y)[None, :] / s) ** p.theta
    psi = mth + 0.5 * gt * gt

    xT = f.gamma[-1]
    uxT = -gt[-1]
    uT = np.concatenate(
        [[0.0], np.cumsum(0.5 * (uxT[1:] + uxT[:-1]) * np.diff(xT))])
    w = p.node_masses(g.y)
    uT = uT - (w @ uT) / w.sum()

    F = cumulative_trapezoid(psi, g.t, axis=0, initial=0.0)
    return uT[None, :] + (F[-1][None, :] - F)


# -- free boundaries ----------------------------------------------------------

@dataclass(frozen=True)
class FreeBoundaries:
    """Boundary curves with discrete first and second time derivatives."""

    t: np.ndarray
    eps: float
    alpha: float
    gamma_L: np.ndarray
    gamma_R: np.ndarray
    dgL: np.ndarray
    dgR: np.ndarray
    ddgL: np.ndarray
    ddgR: np.ndarray

    @property
    def sigma(self) -> np.ndarray:
        return self.t + self.eps

    def velocity_envelopes(self) -> tuple[np.ndarray, np.ndarray]:
        """|gamma_dot| sigma^(1-alpha) for the two sides; bounded iff the
        boundary speed obeys the self-similar law."""
        fac = self.sigma ** (1.0 - self.alpha)
        return np.abs(self.dgL) * fac, np.abs(self.dgR) * fac

    def curvature_envelopes(self) -> tuple[np.ndarray, np.ndarray]:
        """gamma_ddot sigma^(2-alpha); signed, so convexity is visible."""
        fac = self.sigma ** (2.0 - self.alpha)
        return self.ddgL * fac, self.ddgR * fac


def free_boundaries(f: FlowField) -> FreeBoundaries:
    g = f.grid
    gL = f.gamma[:, 0].copy()
    gR = f.gamma[:, -1].copy()
    return FreeBoundaries(
        t=g.t.copy(),
        eps=g.eps,
        alpha=f.profile.alpha,
        gamma_L=gL,
        gamma_R=gR,
        dgL=np.gradient(gL, g.t, edge_order=2),
        dgR=np.gradient(gR, g.t, edge_order=2),
        ddgL=_second_derivative(gL, g.t),
        ddgR=_second_derivative(gR, g.t),
    )


# -- exterior continuation ----------------------------------------------------
#
# Everything below works in the left frame: boundary curve convex, exterior
# to the left.  The right side is handled by reflecting x.

@dataclass(frozen=True)
class _SideHistory:
    t: np.ndarray
    g: np.ndarray       # boundary positions, convex in t
    d: np.ndarray       # discrete boundary velocity
    ub: np.ndarray      # value along the boundary label
    k_min: int          # node index of the discrete minimum of g
    has_turn: bool      # velocity changes sign at an interior minimum


def _side_history(t: np.ndarray, g: np.ndarray, d: np.ndarray,
                  ub: np.ndarray) -> _SideHistory:
    k = int(np.argmin(g))
    turn = (0 < k < g.size - 1) and (d[0] < 0.0 < d[-1])
    return _SideHistory(t, g, d, ub, k, turn)


def _unit_root(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Root of a x^2 + b x + c in [0, 1], vectorized; assumes a sign change
    over the unit interval (guaranteed by the bracketing search)."""
    disc = np.maximum(b * b - 4.0 * a * c, 0.0)
    q = -0.5 * (b + np.copysign(np.sqrt(disc), np.where(b == 0.0, 1.0, b)))
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = np.where(a != 0.0, q / np.where(a != 0.0, a, 1.0), np.inf)
        r2 = np.where(q != 0.0, c / np.where(q != 0.0, q, 1.0), 0.0)
    tol = 1e-9
    lam = np.where((r2 >= -tol) & (r2 <= 1.0 + tol), r2, r1)
    return np.clip(lam, 0.0, 1.0)


def _fan_invert(h: _SideHistory, idx: np.ndarray, s: float,
                x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate the tangent fan over boundary nodes ``idx`` at time s.

    ``idx`` orders the branch so the tangent foot l_n(s) decreases; each x
    is bracketed between consecutive feet and the tangency time is found
    from the interpolated (g, d) data, which keeps the construction second
    order in the grid.
    """
    tn, gn, dn, un = h.t[idx], h.g[idx], h.d[idx], h.ub[idx]
    if idx.size == 1:
        return (un[0] + (tn[0] - s) * 0.5 * dn[0] ** 2
                ) * np.ones_like(x), -dn[0] * np.ones_like(x)
    l = gn + (s - tn) * dn
    span = abs(l[0] - l[-1]) + np.max(np.abs(l)) + 1e-30
    if np.max(np.diff(l)) > 1e-9 * span:
        # tangents of a convex curve cannot fold; a genuine fold means the
        # characteristics cross and the continuation is invalid
        raise CrossingCharacteristicsError(
            "tangent characteristics cross; boundary curve not convex")
    lm = np.minimum.accumulate(l)
    kk = np.clip(np.searchsorted(-lm, -x, side="right") - 1, 0, l.size - 2)

    t0, dt = tn[kk], tn[kk + 1] - tn[kk]
    g0, dg = gn[kk], gn[kk + 1] - gn[kk]
    d0, dd = dn[kk], dn[kk + 1] - dn[kk]
    u0, du = un[kk], un[kk + 1] - un[kk]
    lam = _unit_root(-dt * dd, dg + (s - t0) * dd - dt * d0,
                     g0 + (s - t0) * d0 - x)
    tl = t0 + lam * dt
    dl = d0 + lam * dd
    ul = u0 + lam * du
    # transport along the segment: du/ds = -gamma_dot^2 / 2
    return ul + (tl - s) * 0.5 * dl * dl, -dl


def _degenerate_region(h: _SideHistory, i: int, x: np.ndarray) -> np.ndarray:
    """True where the continuation is not a tangent fan: the constant
    state below the turning level, or the linear state beyond the last
    tangent.  The continued value is merely C^1 across the interface."""
    if h.has_turn:
        return x <= h.g[h.k_min]
    lT = h.g[-1] + (h.t[i] - h.t[-1]) * h.d[-1]
    return x < lT


def _extend_one_side(h: _SideHistory, i: int,
                     x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = h.t[i]
    u = np.empty_like(x)
    ux = np.empty_like(x)
    if h.has_turn:
        k = h.k_min
        below = x <= h.g[k]
        u[below] = h.ub[k]
        ux[below] = 0.0
        fan = ~below
        if np.any(fan):
            # before the turning time the fan runs backward from the
            # tangency, after it forward; both are oriented so the feet
            # decrease along idx
            idx = np.arange(i, k + 1) if i <= k else np.arange(i, k - 1, -1)
            u[fan], ux[fan] = _fan_invert(h, idx, s, x[fan])
    else:
        lT = h.g[-1] + (s - h.t[-1]) * h.d[-1]
        if lT > h.g[i] + 1e-12 * (1.0 + abs(h.g[i])):
            # the last tangent must fall below a convex boundary curve;
            # landing above it means the tangent lines fold
            raise CrossingCharacteristicsError(
                "tangent characteristics cross; boundary curve not convex")
        beyond = x < lT
        fan = ~beyond
        if np.any(fan):
            idx = np.arange(i, h.t.size)
            if idx.size == 1:
                u[fan] = h.ub[i]
                ux[fan] = -h.d[i]
            else:
                u[fan], ux[fan] = _fan_invert(h, idx, s, x[fan])
        if np.any(beyond):
            u_at_lT = h.ub[-1] + (h.t[-1] - s) * 0.5 * h.d[-1] ** 2
            u[beyond] = (lT - x[beyond]) * h.d[-1] + u_at_lT
            ux[beyond] = -h.d[-1]
    return u, ux


def extend_value(fb: FreeBoundaries, u_left: np.ndarray, u_right: np.ndarray,
                 t_index: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Continue the value to exterior points ``x`` at time ``t[t_index]``.

    ``u_left`` and ``u_right`` are the value histories along the two
    boundary labels.  Returns ``(u, u_x)``; points must lie on or outside
    the support at that time.
    """
    x = np.asarray(x, dtype=float)
    hL = _side_history(fb.t, fb.gamma_L, fb.dgL, np.asarray(u_left, float))
    hR = _side_history(fb.t, -fb.gamma_R, -fb.dgR, np.asarray(u_right, float))
    left = x <= fb.gamma_L[t_index]
    right = x >= fb.gamma_R[t_index]
    if not np.all(left | right):
        raise InvalidParameterError("extension requested inside the support")
    u = np.empty_like(x)
    ux = np.empty_like(x)
    if np.any(left):
        u[left], ux[left] = _extend_one_side(hL, t_index, x[left])
    if np.any(right):
        ur, uxr = _extend_one_side(hR, t_index, -x[right])
        u[right] = ur
        ux[right] = -uxr
    return u, ux


# -- snapshots ----------------------------------------------------------------

@dataclass(frozen=True)
class EulerianSnapshot:
    """One time slice on image nodes plus uniform exterior padding.

    ``y_nodes`` are the Lagrangian labels whose images form the support
    part of ``x_nodes``; downstream rescaling needs them to express
    pushforward certificates in mass coordinates.
    """

    t: float
    x_nodes: np.ndarray
    m: np.ndarray
    u: np.ndarray
    u_x: np.ndarray
    gamma_L: float
    gamma_R: float
    y_nodes: np.ndarray

    @property
    def support_mask(self) -> np.ndarray:
        return (self.x_nodes >= self.gamma_L) & (self.x_nodes <= self.gamma_R)


def snapshot(f: FlowField, t_index: int, p: Profile | None = None,
             m: TerminalDensity | None = None, n_pad: int | None = None,
             ubar: np.ndarray | None = None,
             fb: FreeBoundaries | None = None) -> EulerianSnapshot:
    """Assemble density, velocity and extended value at one time index.

    Padding uses the mean support spacing, ``n_pad`` nodes per side
    (default ny // 4).  ``ubar`` and ``fb`` may be passed to avoid
    recomputation when slicing many snapshots from one flow.
    """
    p = f.profile if p is None else p
    g = f.grid
    if ubar is None:
        ubar = value_on_support(f, p, m)
    if fb is None:
        fb = free_boundaries(f)
    if n_pad is None:
        n_pad = max(2, g.ny // 4)

    x_sup, m_sup = density(f, t_index)
    ux_sup = velocity(f, t_index)
    u_sup = ubar[t_index]
    gL, gR = x_sup[0], x_sup[-1]
    h = (gR - gL) / g.ny
    x_left = gL - h * np.arange(n_pad, 0, -1)
    x_right = gR + h * np.arange(1, n_pad + 1)
    uL, uxL = extend_value(fb, ubar[:, 0], ubar[:, -1], t_index, x_left)
    uR, uxR = extend_value(fb, ubar[:, 0], ubar[:, -1], t_index, x_right)

    return EulerianSnapshot(
        t=float(g.t[t_index]),
        x_nodes=np.concatenate([x_left, x_sup, x_right]),
        m=np.concatenate([np.zeros(n_pad), m_sup, np.zeros(n_pad)]),
        u=np.concatenate([uL, u_sup, uR]),
        u_x=np.concatenate([uxL, ux_sup, uxR]),
        gamma_L=float(gL),
        gamma_R=float(gR),
        y_nodes=g.y.copy(),
    )


# -- conservation and residual diagnostics ------------------------------------

def pushforward_masses(f: FlowField, p: Profile | None = None) -> np.ndarray:
    """Total mass of every slice, integrated in mass coordinates.

    The substitution x = gamma(t, y) turns int m dx into exact profile
    cell masses times the cell average of m gamma_y / phi; the node
    densities satisfy m gamma_y = phi identically, so the result is 1 up
    to roundoff and the contract tolerance is pure headroom.
    """
    p = f.profile if p is None else p
    g = f.grid
    s = _slopes_all(f)
    phi = p.phi(g.y)
    mvals = phi[None, :] / s
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(phi[None, :] > 0.0, mvals * s / phi[None, :], 1.0)
    w = p.cell_masses(g.y)
    return np.sum(w[None, :] * 0.5 * (ratio[:, :-1] + ratio[:, 1:]), axis=1)


def pushforward_partial_masses(f: FlowField, t_index: int,
                               p: Profile | None = None) -> np.ndarray:
    """Cumulative mass up to each image node of one slice."""
    p = f.profile if p is None else p
    g = f.grid
    _, m = density(f, t_index)
    s = np.gradient(f.gamma[t_index], g.dy, edge_order=2)
    phi = p.phi(g.y)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(phi > 0.0, m * s / phi, 1.0)
    w = p.cell_masses(g.y)
    cells = w * 0.5 * (ratio[:-1] + ratio[1:])
    return np.concatenate([[0.0], np.cumsum(cells)])


def _bump(z: np.ndarray) -> np.ndarray:
    out = np.zeros_like(z)
    inside = np.abs(z) < 1.0
    zi = z[inside]
    out[inside] = np.exp(-1.0 / (1.0 - zi * zi))
    return out


def _bump_prime(z: np.ndarray) -> np.ndarray:
    out = np.zeros_like(z)
    inside = np.abs(z) < 1.0
    zi = z[inside]
    w = 1.0 - zi * zi
    out[inside] = np.exp(-1.0 / w) * (-2.0 * zi / (w * w))
    return out


def weak_continuity_residuals(f: FlowField, p: Profile | None = None,
                              n_time: int = 4, n_space: int = 5) -> np.ndarray:
    """Continuity-equation residuals against a grid of smooth bumps.

    Each test function is a product of compactly supported bumps in t and
    x; the weak form int int m (psi_t - u_x psi_x) dx dt is evaluated with
    exact node masses in x and trapezoid weights in t, so the numbers
    measure how well the discrete flow transports mass, not the
    quadrature of phi.
    """
    p = f.profile if p is None else p
    g = f.grid
    gt = _gamma_t_all(f)
    w = p.node_masses(g.y)
    wt = g.wt
    T = g.T
    xmin, xmax = float(f.gamma.min()), float(f.gamma.max())
    res = np.empty(n_time * n_space)
    k = 0
    for a in range(n_time):
        ct = T * (a + 1.0) / (n_time + 1.0)
        ht = 0.9 * min(ct, T - ct)
        zt = (g.t - ct) / ht
        bt = _bump(zt)
        bpt = _bump_prime(zt) / ht
        for b in range(n_space):
            cx = xmin + (xmax - xmin) * (b + 1.0) / (n_space + 1.0)
            hx = 1.5 * (xmax - xmin) / (n_space + 1.0)
            zx = (f.gamma - cx) / hx
            bx = _bump(zx)
            bpx = _bump_prime(zx) / hx
            integrand = bpt[:, None] * bx + bt[:, None] * bpx * gt
            res[k] = np.abs(np.sum(wt[:, None] * integrand * w[None, :]))
            k += 1
    return res


class _ValueEvaluator:
    """u(t_k, x) for arbitrary x: cubic-spline interpolation on the
    support (linear would pollute the u_t stencils at O(dy^2/dtau)),
    characteristic continuation outside."""

    def __init__(self, f: FlowField, ubar: np.ndarray, hL: _SideHistory,
                 hR: _SideHistory):
        self.f = f
        self.ubar = ubar
        self.hL = hL
        self.hR = hR
        self._splines: dict[int, CubicSpline] = {}

    def __call__(self, k: int, x: np.ndarray) -> np.ndarray:
        row = self.f.gamma[k]
        sp = self._splines.get(k)
        if sp is None:
            sp = self._splines[k] = CubicSpline(row, self.ubar[k])
        u = sp(x)
        outL = x < row[0]
        outR = x > row[-1]
        if np.any(outL):
            u[outL] = _extend_one_side(self.hL, k, x[outL])[0]
        if np.any(outR):
            u[outR] = _extend_one_side(self.hR, k, -x[outR])[0]
        return u


def _histories(f: FlowField, ubar: np.ndarray,
               fb: FreeBoundaries) -> tuple[_SideHistory, _SideHistory]:
    hL = _side_history(fb.t, fb.gamma_L, fb.dgL, ubar[:, 0])
    hR = _side_history(fb.t, -fb.gamma_R, -fb.dgR, ubar[:, -1])
    return hL, hR


def hj_interior_residual(f: FlowField, p: Profile | None = None,
                         ubar: np.ndarray | None = None,
                         t_min: float | None = None) -> np.ndarray:
    """-u_t + u_x^2/2 - m^theta at fixed x on interior image nodes.

    u_t uses a nonuniform three-point stencil with the neighbor slices
    interpolated (or continued) to the current nodes, u_x differentiates
    the value row in x; nothing is reused from the construction of ubar,
    so this is a genuine consistency check of all reconstructed fields.

    NaN marks nodes where the pointwise statement does not apply: rows
    before ``t_min`` (default 10 eps, inside the initial layer), the
    boundary columns, and nodes whose time stencil leaves the open
    support at a neighbor slice.  The value is merely C^1 across the free
    boundary, so finite differences across it test the smoothness of the
    exact solution, not the reconstruction.
    """
    p = f.profile if p is None else p
    g = f.grid
    if ubar is None:
        ubar = value_on_support(f, p)
    fb = free_boundaries(f)
    hL, hR = _histories(f, ubar, fb)
    ev = _ValueEvaluator(f, ubar, hL, hR)
    if t_min is None:
        t_min = 10.0 * g.eps
    s = _slopes_all(f)
    mth = (p.phi(g.y)[None, :] / s) ** p.theta

    out = np.full_like(ubar, np.nan)
    for i in range(1, g.nt):
        if g.t[i] < t_min:
            continue
        x = f.gamma[i]
        hm = g.t[i] - g.t[i - 1]
        hp = g.t[i + 1] - g.t[i]
        um = ev(i - 1, x)
        up = ev(i + 1, x)
        u_t = (-hp / (hm * (hm + hp)) * um
               + (hp - hm) / (hm * hp) * ubar[i]
               + hm / (hp * (hm + hp)) * up)
        u_x = np.gradient(ubar[i], x, edge_order=2)
        res = -u_t + 0.5 * u_x * u_x - mth[i]
        inside = ((x > f.gamma[i - 1, 0]) & (x < f.gamma[i - 1, -1])
                  & (x > f.gamma[i + 1, 0]) & (x < f.gamma[i + 1, -1]))
        inside[0] = inside[-1] = False
        out[i, inside] = res[inside]
    return out


def hj_exterior_residual(f: FlowField, p: Profile | None = None,
                         ubar: np.ndarray | None = None,
                         t_min: float | None = None,
                         n_pad: int | None = None,
                         standoff: int = 4) -> np.ndarray:
    """-u_t + u_x^2/2 of the continued value on exterior pads.

    Same finite-difference protocol as the interior residual, evaluated on
    ``n_pad`` uniformly spaced nodes glued to each free boundary.  NaN on
    rows before ``t_min``, at nodes the moving boundary crosses within the
    time stencil, and within ``standoff`` pad cells of the boundary: the
    tangency time of the continuation satisfies dt_hat/ds ~ 1/(s - t_hat),
    so second time derivatives of the exact continued value blow up like
    distance^(-1/2) at the contact line and pointwise finite differences
    are meaningless there no matter how the field was produced.
    """
    p = f.profile if p is None else p
    g = f.grid
    if ubar is None:
        ubar = value_on_support(f, p)
    fb = free_boundaries(f)
    hL, hR = _histories(f, ubar, fb)
    ev = _ValueEvaluator(f, ubar, hL, hR)
    if t_min is None:
        t_min = 10.0 * g.eps
    if n_pad is None:
        n_pad = max(2, g.ny // 4)

    out = np.full((g.nt + 1, 2 * n_pad), np.nan)
    for i in range(1, g.nt):
        if g.t[i] < t_min:
            continue
        gL, gR = f.gamma[i, 0], f.gamma[i, -1]
        h = (gR - gL) / g.ny
        xl = gL - h * np.arange(n_pad, 0, -1)
        xr = gR + h * np.arange(1, n_pad + 1)
        ul, _ = _extend_one_side(hL, i, xl)
        ur_, uxr = _extend_one_side(hR, i, -xr)
        # one-sided gradients on [pads, boundary node] keep the stencil on
        # the correct side of the C^1 glue point
        u_x_l = np.gradient(np.concatenate([ul, [ubar[i, 0]]]),
                            np.concatenate([xl, [gL]]), edge_order=2)[:-1]
        u_x_r = np.gradient(np.concatenate([[ubar[i, -1]], ur_]),
                            np.concatenate([[gR], xr]), edge_order=2)[1:]
        x = np.concatenate([xl, xr])
        u0 = np.concatenate([ul, ur_])
        u_x = np.concatenate([u_x_l, u_x_r])
        hm = g.t[i] - g.t[i - 1]
        hp = g.t[i + 1] - g.t[i]
        um = ev(i - 1, x)
        up = ev(i + 1, x)
        u_t = (-hp / (hm * (hm + hp)) * um
               + (hp - hm) / (hm * hp) * u0
               + hm / (hp * (hm + hp)) * up)
        res = -u_t + 0.5 * u_x * u_x
        outside = np.concatenate([
            (xl < f.gamma[i - 1, 0] - standoff * h)
            & (xl < f.gamma[i + 1, 0] - standoff * h),
            (xr > f.gamma[i - 1, -1] + standoff * h)
            & (xr > f.gamma[i + 1, -1] + standoff * h),
        ])
        # drop nodes whose space or time stencil straddles a region
        # interface of the construction; u is C^1 but not C^2 there
        ok_l = np.ones(n_pad, dtype=bool)
        ok_r = np.ones(n_pad, dtype=bool)
        for k, xs in ((0, xl), (1, -xr)):
            hh = (hL, hR)[k]
            flags = [_degenerate_region(hh, j, xs) for j in (i - 1, i, i + 1)]
            same_t = (flags[0] == flags[1]) & (flags[1] == flags[2])
            fi = flags[1]
            same_x = np.ones_like(fi)
            same_x[1:-1] = (fi[:-2] == fi[1:-1]) & (fi[1:-1] == fi[2:])
            same_x[0] = fi[0] == fi[1]
            same_x[-1] = fi[-1] == fi[-2]
            if k == 0:
                ok_l = same_t & same_x
            else:
                ok_r = same_t & same_x
        out[i, outside & np.concatenate([ok_l, ok_r])] = \
            res[outside & np.concatenate([ok_l, ok_r])]
    return out


def d1_to_dirac(f: FlowField, p: Profile | None = None) -> np.ndarray:
    """int |x| m(t, x) dx per slice, i.e. the 1-Wasserstein distance to the
    unit atom at the origin, in mass coordinates."""
    p = f.profile if p is None else p
    w = p.node_masses(f.grid.y)
    return np.abs(f.gamma) @ w


# -- flat-file output ---------------------------------------------------------

def save_snapshot_csv(snap: EulerianSnapshot, path) -> None:
    data = np.column_stack([
        np.full_like(snap.x_nodes, snap.t), snap.x_nodes,
        snap.m, snap.u, snap.u_x,
    ])
    np.savetxt(path, data, fmt="%.17g", delimiter=",",
               header="t,x,m,u,ux", comments="")


def save_boundary_csv(fb: FreeBoundaries, path) -> None:
    data = np.column_stack([
        fb.t, fb.gamma_L, fb.gamma_R, fb.dgL, fb.dgR, fb.ddgL, fb.ddgR,
    ])
    np.savetxt(path, data, fmt="%.17g", delimiter=",",
               header="t,gammaL,gammaR,dgL,dgR,ddgL,ddgR", comments="")
