"""Field reconstruction tests: density, velocity, value, extension,
free boundaries, conservation and residual diagnostics.

Analytic oracles come from the self-similar solution: on the exact flow
map gamma = (t+eps)^alpha y the density is exact by construction and the
value/velocity errors are pure quadrature, so their tolerances are
frozen from the time-step analysis (relative truncation ~ dtau^2) with a
factor-two margin.  Residual diagnostics run on solved 128x128 fields.
"""

import numpy as np
import pytest

from dirac_mfp import errors
from dirac_mfp import fields as F
from dirac_mfp.profile import make_profile
from dirac_mfp.solver import FlowField, make_grid, solve
from dirac_mfp.target import power_bump, self_similar_terminal


def analytic_flow(p, grid):
    gamma = (grid.t[:, None] + grid.eps) ** p.alpha * grid.y[None, :]
    return FlowField(grid=grid, profile=p, gamma=gamma)


@pytest.fixture(scope="module")
def theta1():
    return make_profile(1.0)


@pytest.fixture(scope="module")
def selfsim64(theta1):
    g = make_grid(theta1, eps=1e-3, T=1.0, nt=64, ny=64)
    return analytic_flow(theta1, g)


@pytest.fixture(scope="module")
def solved128(theta1):
    # run configuration of the conservation/residual contract: theta=1,
    # 128x128, eps large enough that dtau^2 sigma^(2a-2) stays below the
    # residual tolerances on the whole diagnostic window
    g = make_grid(theta1, eps=1e-2, T=1.0, nt=128, ny=128)
    m = power_bump(-1.0, 1.0, 1.0)
    return solve(theta1, m, g), m


# ---------------------------------------------------------------------------
# density
# ---------------------------------------------------------------------------

def test_density_exact_on_self_similar_flow(theta1, selfsim64):
    p, f = theta1, selfsim64
    g = f.grid
    for i in (0, 17, 40, g.nt):
        x, m = F.density(f, i)
        sig = g.t[i] + g.eps
        ref = sig ** (-p.alpha) * p.phi(sig ** (-p.alpha) * x)
        # the flow is linear in y, so centered slopes are exact
        assert np.max(np.abs(m - ref)) < 1e-12
        assert m[0] == 0.0 and m[-1] == 0.0
        assert np.all(m[1:-1] > 0)


def test_density_sup_envelope(solved128):
    f, _ = solved128
    p, g = f.profile, f.grid
    sup = np.array([F.density(f, i)[1].max() for i in range(g.nt + 1)])
    env = sup * (g.t + g.eps) ** p.alpha
    # profile controls the early slices, the target the late ones; the
    # envelope must not exceed either regime in between
    assert env.max() < 1.5 * max(env[0], env[-1])


def test_density_degenerate_slope_raises(theta1):
    g = make_grid(theta1, eps=1e-3, T=1.0, nt=8, ny=8)
    f = analytic_flow(theta1, g)
    gamma = f.gamma.copy()
    gamma[3] = gamma[3, ::-1]           # folded slice
    bad = FlowField(grid=g, profile=theta1, gamma=gamma)
    with pytest.raises(errors.DegenerateStateError):
        F.density(bad, 3)


# ---------------------------------------------------------------------------
# velocity
# ---------------------------------------------------------------------------

def test_velocity_oracle_on_self_similar_flow(theta1, selfsim64):
    p, f = theta1, selfsim64
    g = f.grid
    sig = g.sigma
    err = []
    for i in range(g.nt + 1):
        if g.t[i] < 0.1:
            continue
        ux = F.velocity(f, i)
        err.append(np.max(np.abs(ux + p.alpha * f.gamma[i] / sig[i])))
    assert max(err) < 5e-3


def test_velocity_odd_symmetry(theta1, selfsim64):
    ux = F.velocity(selfsim64, 20)
    assert abs(ux[selfsim64.grid.ny // 2]) < 1e-14
    assert np.max(np.abs(ux + ux[::-1])) < 1e-13


def test_velocity_envelope_on_solved_run(solved128):
    f, _ = solved128
    p, g = f.profile, f.grid
    env = [np.max(np.abs(F.velocity(f, i))) * (g.t[i] + g.eps) ** (1 - p.alpha)
           for i in range(g.nt + 1)]
    assert max(env) < 1.5 * p.alpha * p.r_alpha


# ---------------------------------------------------------------------------
# value on the support
# ---------------------------------------------------------------------------

def test_value_center_oracle(theta1, selfsim64):
    p, f = theta1, selfsim64
    g = f.grid
    ub = F.value_on_support(f, p)
    j0 = g.ny // 2
    sig = g.sigma
    k = 2 * p.alpha - 1
    exact = -p.value_constant * (sig ** k - sig[-1] ** k)
    err64 = np.max(np.abs((ub[:, j0] - ub[-1, j0]) - exact))
    assert err64 < 2.5e-3

    g2 = make_grid(p, eps=1e-3, T=1.0, nt=128, ny=128)
    f2 = analytic_flow(p, g2)
    ub2 = F.value_on_support(f2, p)
    sig2 = g2.sigma
    exact2 = -p.value_constant * (sig2 ** k - sig2[-1] ** k)
    err128 = np.max(np.abs((ub2[:, g2.ny // 2] - ub2[-1, g2.ny // 2]) - exact2))
    assert err64 / err128 > 3.0      # trapezoid-in-time is second order


def test_value_oscillation_oracle(theta1, selfsim64):
    p, f = theta1, selfsim64
    g = f.grid
    ub = F.value_on_support(f, p)
    osc = ub.max(axis=1) - ub.min(axis=1)
    sig = g.sigma
    exact = p.alpha * (p.r_alpha * sig ** p.alpha) ** 2 / (2.0 * sig)
    assert np.max(np.abs(osc - exact)) < 1e-2 * exact.max()


def test_value_terminal_normalization(theta1, selfsim64):
    p, f = theta1, selfsim64
    ub = F.value_on_support(f, p)
    w = p.node_masses(f.grid.y)
    assert abs(w @ ub[-1]) < 1e-10


def test_value_target_mismatch_raises(theta1, selfsim64):
    other = power_bump(-2.0, 2.0, 1.0)
    with pytest.raises(errors.CompatibilityError):
        F.value_on_support(selfsim64, theta1, other)


# ---------------------------------------------------------------------------
# free boundaries
# ---------------------------------------------------------------------------

def test_free_boundaries_self_similar(theta1, selfsim64):
    p, f = theta1, selfsim64
    g = f.grid
    fb = F.free_boundaries(f)
    sig = g.sigma
    ref = p.alpha * p.r_alpha * sig ** (p.alpha - 1.0)
    win = g.t >= 0.05
    assert np.max(np.abs(fb.dgR - ref)[win] / ref[win]) < 5e-3
    assert np.all(fb.ddgR[1:-1] < 0) and np.all(fb.ddgL[1:-1] > 0)
    vL, vR = fb.velocity_envelopes()
    assert np.max(np.abs(vR - p.alpha * p.r_alpha)) < 5e-2 * p.alpha * p.r_alpha
    cL, cR = fb.curvature_envelopes()
    exact_c = p.alpha * (1.0 - p.alpha) * p.r_alpha
    assert np.max(np.abs(cR + exact_c))[()] < 0.25 * exact_c


def test_free_boundaries_terminal_values(solved128):
    f, m = solved128
    fb = F.free_boundaries(f)
    assert fb.gamma_L[-1] == m.a and fb.gamma_R[-1] == m.b


def test_free_boundary_signs_on_solved_run(solved128):
    f, _ = solved128
    fb = F.free_boundaries(f)
    assert np.all(fb.ddgL[1:-1] > 0)
    assert np.all(fb.ddgR[1:-1] < 0)


# ---------------------------------------------------------------------------
# exterior continuation
# ---------------------------------------------------------------------------

def _quadratic_histories(tmin=0.0, tmax=1.0, n=81):
    # manufactured convex boundary with an interior turning point
    t = np.linspace(tmin, tmax, n)
    g = 0.3 * (t - 0.4) ** 2 - 0.5
    d = 0.6 * (t - 0.4)
    ub = 0.1 + 0.05 * t                  # any smooth boundary value works
    return t, g, d, ub


def test_extension_constant_below_turning_level():
    t, g, d, ub = _quadratic_histories()
    h = F._side_history(t, g, d, ub)
    assert h.has_turn
    k = h.k_min
    for i in (10, 40, 70):
        x = np.array([g[k] - 0.3, g[k] - 1e-9])
        u, ux = F._extend_one_side(h, i, x)
        assert np.all(u == ub[k])
        assert np.all(ux == 0.0)


def test_extension_matches_boundary_data():
    t, g, d, ub = _quadratic_histories()
    h = F._side_history(t, g, d, ub)
    for i in (5, 40, 75):
        u, ux = F._extend_one_side(h, i, np.array([g[i]]))
        assert abs(u[0] - ub[i]) < 1e-12
        assert abs(ux[0] + d[i]) < 1e-12


def test_extension_case_b_linear_region(theta1, selfsim64):
    p, f = theta1, selfsim64
    g = f.grid
    ub = F.value_on_support(f, p)
    fb = F.free_boundaries(f)
    i = 30
    s = g.t[i]
    lT = fb.gamma_L[-1] + (s - g.t[-1]) * fb.dgL[-1]
    x = lT - np.array([2.0, 1.5, 1.0, 0.5])
    u, ux = F.extend_value(fb, ub[:, 0], ub[:, -1], i, x)
    assert np.max(np.abs(ux - (-fb.dgL[-1]))) < 1e-12
    # exactly linear: second differences vanish
    assert np.max(np.abs(np.diff(u, 2))) < 1e-10
    expected = (lT - x) * fb.dgL[-1] + ub[-1, 0] \
        + (g.t[-1] - s) * 0.5 * fb.dgL[-1] ** 2
    assert np.max(np.abs(u - expected)) < 1e-10


def test_extension_rejects_interior_points(theta1, selfsim64):
    p, f = theta1, selfsim64
    ub = F.value_on_support(f, p)
    fb = F.free_boundaries(f)
    with pytest.raises(errors.InvalidParameterError):
        F.extend_value(fb, ub[:, 0], ub[:, -1], 30, np.array([0.0]))


def test_extension_crossing_characteristics_detected():
    t = np.linspace(0.0, 1.0, 81)
    g = -0.3 * (t - 0.4) ** 2 - 0.5      # concave: tangents fold
    d = -0.6 * (t - 0.4)
    h = F._side_history(t, g, d, 0.0 * t)
    with pytest.raises(errors.CrossingCharacteristicsError):
        F._extend_one_side(h, 10, np.array([g[10] - 1e-3]))


def test_exterior_slope_bounded_by_boundary_history(solved128):
    f, m = solved128
    p, g = f.profile, f.grid
    ub = F.value_on_support(f, p, m)
    fb = F.free_boundaries(f)
    bound = max(np.max(np.abs(fb.dgL)), np.max(np.abs(fb.dgR)))
    for i in (20, 60, 100):
        snap = F.snapshot(f, i, p, ubar=ub, fb=fb)
        out = ~snap.support_mask
        assert np.max(np.abs(snap.u_x[out])) <= bound + 1e-12


# ---------------------------------------------------------------------------
# snapshots and flat files
# ---------------------------------------------------------------------------

def test_snapshot_structure(solved128):
    f, m = solved128
    p, g = f.profile, f.grid
    snap = F.snapshot(f, 64, p, m)
    assert np.all(np.diff(snap.x_nodes) > 0)
    assert snap.gamma_L == f.gamma[64, 0] and snap.gamma_R == f.gamma[64, -1]
    inside = snap.support_mask
    assert np.all(snap.m[~inside] == 0.0)
    assert np.all(snap.m[inside][1:-1] > 0)
    # C0 gluing of the value across the boundary nodes
    jl = np.argmax(inside)
    ext_u, _ = F.extend_value(F.free_boundaries(f),
                              F.value_on_support(f, p)[:, 0],
                              F.value_on_support(f, p)[:, -1],
                              64, snap.x_nodes[jl:jl + 1])
    assert abs(ext_u[0] - snap.u[jl]) < 1e-12


def test_snapshot_csv_roundtrip(tmp_path, solved128):
    f, m = solved128
    snap = F.snapshot(f, 40, f.profile, m)
    path = tmp_path / "snap.csv"
    F.save_snapshot_csv(snap, path)
    with open(path) as fh:
        assert fh.readline().strip() == "t,x,m,u,ux"
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape == (snap.x_nodes.size, 5)
    assert np.all(data[:, 0] == snap.t)
    assert np.array_equal(data[:, 1], snap.x_nodes)
    assert np.array_equal(data[:, 2], snap.m)
    assert np.array_equal(data[:, 3], snap.u)
    assert np.array_equal(data[:, 4], snap.u_x)


def test_boundary_csv_roundtrip(tmp_path, solved128):
    f, _ = solved128
    fb = F.free_boundaries(f)
    path = tmp_path / "boundary.csv"
    F.save_boundary_csv(fb, path)
    with open(path) as fh:
        assert fh.readline().strip() == "t,gammaL,gammaR,dgL,dgR,ddgL,ddgR"
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert np.array_equal(data[:, 0], fb.t)
    assert np.array_equal(data[:, 1], fb.gamma_L)
    assert np.array_equal(data[:, 6], fb.ddgR)


# ---------------------------------------------------------------------------
# conservation and residuals
# ---------------------------------------------------------------------------

def test_pushforward_mass_every_slice(solved128):
    f, _ = solved128
    assert np.max(np.abs(F.pushforward_masses(f) - 1.0)) < 1e-6


def test_pushforward_partial_masses(theta1, solved128):
    f, _ = solved128
    g = f.grid
    for i in (0, 50, g.nt):
        part = F.pushforward_partial_masses(f, i)
        assert np.max(np.abs(part - theta1.cdf(g.y))) < 1e-6


def test_weak_continuity_residuals(solved128):
    f, _ = solved128
    res = F.weak_continuity_residuals(f)
    assert res.size == 20
    assert np.max(res) < 5e-3


def test_hj_interior_residual(solved128):
    f, _ = solved128
    res = F.hj_interior_residual(f)
    assert np.nanmax(np.abs(res)) < 5e-3


def test_hj_interior_second_order(theta1):
    sups = {}
    for n in (64, 128):
        g = make_grid(theta1, eps=1e-2, T=1.0, nt=n, ny=n)
        m = self_similar_terminal(theta1, 1.0, 1e-2)
        f = solve(theta1, m, g)
        res = F.hj_interior_residual(f)
        rows = g.t >= 0.25
        sups[n] = np.nanmax(np.abs(res[rows]))
    assert sups[64] / sups[128] > 2.5


def test_hj_exterior_residual(solved128):
    f, _ = solved128
    res = F.hj_exterior_residual(f)
    assert np.nanmax(np.abs(res)) < 5e-3


def test_d1_to_dirac_oracle(theta1, selfsim64):
    p, f = theta1, selfsim64
    g = f.grid
    d1 = F.d1_to_dirac(f)
    th = p.theta
    mean_abs = th / (p.c * (th + 1.0)) * (p.c * p.r_alpha ** 2) ** ((th + 1.0) / th)
    exact = mean_abs * g.sigma ** p.alpha
    assert np.max(np.abs(d1 - exact)) < 3e-4
    assert np.all(np.diff(d1) > 0)
