"""Wasserstein distances on quantile tables and scaling-rate fits.

One-dimensional optimal transport reduces to quantile calculus: with
Q_u, Q_v the quantile functions, d_p(u,v)^p = int_0^1 |Q_u - Q_v|^p dq.
Tables are treated as piecewise-linear quantile functions and the cell
integrals are evaluated exactly for p in {1, 2} (sign-split linear /
quadratic pieces), so the only approximation is in the tables
themselves.  For measures given as pushforwards of the congestion
profile by monotone maps the same distance is int |g - h|^p phi dy,
evaluated with the exact dual-cell masses; the two routes agree to
quadrature accuracy and are cross-checked in the tests.

Rate fitting is ordinary least squares in log coordinates, either
against t (power laws t^s) or against tau = log t (exponential laws
e^{s tau}); `rate_report` runs every scaling law the solver is expected
to reproduce and tabulates fitted against theoretical exponents.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .profile import Profile

__all__ = [
    "QuantileTable",
    "RateFit",
    "quantile_table",
    "wasserstein",
    "wasserstein_maps",
    "fit_rate",
    "rate_report",
    "save_rate_report",
]


@dataclass(frozen=True)
class QuantileTable:
    """Sampled quantile function of a probability measure.

    ``q`` must increase strictly from 0 to 1; ``x`` (the quantile
    values) must be nondecreasing.  Piecewise-linear interpolation
    between samples defines the measure used by `wasserstein`.
    """

    q: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        x = np.asarray(self.x, dtype=float)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "x", x)
        if q.ndim != 1 or q.shape != x.shape or q.size < 2:
            raise InvalidParameterError("quantile table needs matching 1d "
                                        f"arrays, got {q.shape} / {x.shape}")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(x))):
            raise InvalidParameterError("quantile table has non-finite entries")
        if abs(q[0]) > 1e-12 or abs(q[-1] - 1.0) > 1e-12:
            raise InvalidParameterError(
                "unnormalized input: quantile grid must span [0, 1], got "
                f"[{q[0]}, {q[-1]}]")
        if np.any(np.diff(q) <= 0.0):
            raise InvalidParameterError("quantile grid must increase strictly")
        if np.any(np.diff(x) < 0.0):
            raise InvalidParameterError("quantile values must be nondecreasing")


def quantile_table(p: Profile, g: np.ndarray,
                   y: np.ndarray | None = None) -> QuantileTable:
    """Table of the pushforward of phi by the monotone map ``g``."""
    if y is None:
        y = np.linspace(-p.r_alpha, p.r_alpha, np.asarray(g).size)
    return QuantileTable(q=p.cdf(y), x=np.asarray(g, dtype=float))


def _cell_abs_linear(d0: np.ndarray, d1: np.ndarray, dq: np.ndarray) -> np.ndarray:
    """Exact ``int |l(q)| dq`` for the linear l through (0,d0),(dq,d1)."""
    same = d0 * d1 >= 0.0
    out = np.empty_like(dq)
    out[same] = 0.5 * dq[same] * (np.abs(d0[same]) + np.abs(d1[same]))
    mixed = ~same
    # split at the interior root; the two triangles have areas
    # d0^2 and d1^2 over twice the total slope
    out[mixed] = 0.5 * dq[mixed] * (d0[mixed] ** 2 + d1[mixed] ** 2) \
        / np.abs(d0[mixed] - d1[mixed])
    return out


def wasserstein(pu: QuantileTable, pv: QuantileTable, order: int = 1) -> float:
    """d_p between two tabulated measures, exact for the interpolants."""
    if order not in (1, 2):
        raise InvalidParameterError(f"order must be 1 or 2, got {order}")
    qs = np.union1d(pu.q, pv.q)
    du = np.interp(qs, pu.q, pu.x) - np.interp(qs, pv.q, pv.x)
    dq = np.diff(qs)
    d0, d1 = du[:-1], du[1:]
    if order == 1:
        return float(np.sum(_cell_abs_linear(d0, d1, dq)))
    val = np.sum(dq * (d0 * d0 + d0 * d1 + d1 * d1) / 3.0)
    return float(np.sqrt(val))


def wasserstein_maps(p: Profile, g: np.ndarray, h: np.ndarray,
                     order: int = 1, y: np.ndarray | None = None) -> float:
    """d_p between pushforwards of phi by monotone maps on one y grid."""
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    if g.shape != h.shape:
        raise InvalidParameterError("maps must share the sample grid")
    if np.any(np.diff(g) < 0.0) or np.any(np.diff(h) < 0.0):
        raise InvalidParameterError("pushforward maps must be nondecreasing")
    if y is None:
        y = np.linspace(-p.r_alpha, p.r_alpha, g.size)
    wq = p.node_masses(y)
    gap = np.abs(g - h)
    if order == 1:
        return float(np.sum(wq * gap))
    if order == 2:
        return float(np.sqrt(np.sum(wq * gap * gap)))
    raise InvalidParameterError(f"order must be 1 or 2, got {order}")


@dataclass(frozen=True)
class RateFit:
    exponent: float
    log_prefactor: float
    r_squared: float
    window: tuple
    n_points: int


def fit_rate(abscissa: np.ndarray, values: np.ndarray,
             window: tuple | None = None, kind: str = "power") -> RateFit:
    """OLS fit of ``log(values)`` against the abscissa.

    ``kind="power"`` regresses on log(abscissa) (laws t^s, window in t);
    ``kind="exp"`` regresses on the abscissa itself (laws e^{s tau},
    window in tau).
    """
    if kind not in ("power", "exp"):
        raise InvalidParameterError(f"unknown fit kind {kind!r}")
    a = np.asarray(abscissa, dtype=float)
    v = np.asarray(values, dtype=float)
    if a.shape != v.shape or a.ndim != 1:
        raise InvalidParameterError("fit needs matching 1d series")
    keep = np.isfinite(a) & np.isfinite(v)
    if window is not None:
        keep &= (a >= window[0]) & (a <= window[1])
    if np.any(v[keep] <= 0.0):
        raise InvalidParameterError("fit window contains nonpositive values")
    a, v = a[keep], v[keep]
    if a.size < 4:
        raise InvalidParameterError(f"fit window too short: {a.size} points")
    xs = np.log(a) if kind == "power" else a
    if kind == "power" and np.any(a <= 0.0):
        raise InvalidParameterError("power-law fit needs positive abscissa")
    ys = np.log(v)
    slope, intercept = np.polyfit(xs, ys, 1)
    res = ys - (slope * xs + intercept)
    tot = ys - ys.mean()
    ss_tot = float(np.dot(tot, tot))
    ss_res = float(np.dot(res, res))
    # a constant series has ss_tot at roundoff level, not exactly zero
    if ss_tot <= 1e-28 * (float(np.dot(ys, ys)) + 1.0):
        r2 = 1.0
    else:
        r2 = max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    return RateFit(exponent=float(slope), log_prefactor=float(intercept),
                   r_squared=r2, window=(float(a.min()), float(a.max())),
                   n_points=int(a.size))


# ---------------------------------------------------------------------------
# scaling-law report
# ---------------------------------------------------------------------------

_REL_TOL = 0.10  # pass band around the theoretical exponent


def _law_row(law: str, theo: float, fit: RateFit | None) -> dict:
    if fit is None:
        return {"law": law, "theoretical_exponent": theo,
                "fitted_exponent": None, "r2": None, "window": None,
                "pass": False}
    ok = abs(fit.exponent - theo) <= _REL_TOL * abs(theo)
    return {"law": law, "theoretical_exponent": theo,
            "fitted_exponent": fit.exponent, "r2": fit.r_squared,
            "window": list(fit.window), "pass": bool(ok)}


def rate_report(f, p: Profile, window: tuple | None = None) -> dict:
    """Fit every applicable scaling law of a solved flow.

    Power laws (all theta): support radius ~ t^alpha, sup m ~ t^-alpha,
    int m^{theta+1} ~ t^{-alpha theta}, osc u ~ t^{2 alpha - 1} (skipped
    at theta = 2 where the exponent vanishes), sup|u_x| ~ t^{alpha-1}.
    Exponential laws in tau (theta > 2 only): H ~ e^{2 kappa tau},
    d2(mu, phi) ~ e^{kappa tau}, |duality pairing| ~ e^{2 kappa tau},
    each fitted over the rows where the series is sign-definite.
    """
    from . import fields as fields_mod
    from . import rescale as rescale_mod

    g = f.grid
    if window is None:
        window = (10.0 * g.eps, g.T / 4.0)
    lo, hi = float(window[0]), float(window[1])
    critical = abs(p.kappa) < 1e-12

    fb = fields_mod.free_boundaries(f)
    ubar = fields_mod.value_on_support(f, p)
    wq = p.node_masses(g.y)

    rows = [i for i in range(g.nt + 1) if lo <= g.t[i] <= hi]
    t = g.t[rows]
    radius = 0.5 * (fb.gamma_R[rows] - fb.gamma_L[rows])
    m_inf = np.empty(t.size)
    m_power = np.empty(t.size)
    ux_inf = np.empty(t.size)
    osc_u = np.empty(t.size)
    for k, i in enumerate(rows):
        slopes = np.gradient(f.gamma[i], g.y, edge_order=2)
        m_sup = p.phi(g.y) / slopes
        m_inf[k] = m_sup.max()
        # int m^{theta+1} dx pulled back to mass coordinates
        m_power[k] = np.sum(wq * m_sup ** p.theta)
        ux_inf[k] = np.max(np.abs(np.gradient(ubar[i], f.gamma[i],
                                              edge_order=2)))
        osc_u[k] = ubar[i].max() - ubar[i].min()

    def _fit_power(vals):
        try:
            return fit_rate(t, vals, kind="power")
        except InvalidParameterError:
            return None

    laws = [
        _law_row("support_radius", p.alpha, _fit_power(radius)),
        _law_row("m_inf", -p.alpha, _fit_power(m_inf)),
        _law_row("m_power_norm", -p.alpha * p.theta, _fit_power(m_power)),
        _law_row("ux_inf", p.alpha - 1.0, _fit_power(ux_inf)),
    ]
    if not critical:
        laws.append(_law_row("osc_u", 2.0 * p.alpha - 1.0, _fit_power(osc_u)))

    flags = []
    if critical:
        flags.append("critical: kappa=0, no exponential fit")
        flags.append("osc_u skipped: exponent 2*alpha-1 vanishes")
    elif p.kappa > 0.0:
        series = rescale_mod.build_series(f, p)
        tau = series["tau"]
        tau_win = (math.log(lo), math.log(hi))

        def _fit_exp(vals, signdef):
            keep = signdef & (tau >= tau_win[0]) & (tau <= tau_win[1])
            if keep.sum() < 4:
                return None
            return fit_rate(tau[keep], vals[keep], kind="exp")

        H = series["H"]
        d2 = series["d2"]
        du = series["duality_pairing"]
        laws.append(_law_row("lyapunov", 2.0 * p.kappa, _fit_exp(H, H > 0.0)))
        laws.append(_law_row("d2_profile", p.kappa, _fit_exp(d2, d2 > 0.0)))
        laws.append(_law_row("duality_pairing", 2.0 * p.kappa,
                             _fit_exp(np.abs(du), du < 0.0)))

    return {"theta": p.theta, "alpha": p.alpha, "kappa": p.kappa,
            "critical": critical, "flags": flags,
            "window": [lo, hi], "laws": laws}


def save_rate_report(report: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, allow_nan=False)
        fh.write("\n")
