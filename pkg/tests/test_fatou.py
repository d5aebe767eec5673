import csv

import numpy as np
import pytest

from fatou2d import _kernels as K
from fatou2d.coords import psi0_inverse, sample_region_uv
from fatou2d.errors import OutOfRegion
from fatou2d.fatou import (
    alpha_of,
    asymptotic_profile,
    check_injectivity,
    extend_along_orbit,
    f3_violations,
    omega,
    orbit_bound_violations,
    separation_violations,
    tau,
    tau_uv,
    v_from_omega,
    w_of,
    write_orbit_csv,
)
from fatou2d.suite import abel_samples


def test_w_formula(ctx2):
    u, v = 200.0, 1e6
    r = ctx2.correctors.evaluate(np.array([u + 0j]))
    phi = r["phi"][:, 0]
    expect = v * (1 + phi[0] + phi[1] / v)
    assert abs(w_of(ctx2, u, v)[0] - expect) <= 1e-12 * abs(expect)
    with pytest.raises(OutOfRegion):
        w_of(ctx2, 5.0, 1e6)


def test_w_over_v_tends_to_one_plus_phi0(ctx2):
    u = 200.0
    phi0 = ctx2.correctors.evaluate(np.array([u + 0j]))["phi"][0, 0]
    gaps = [abs(w_of(ctx2, u, v)[0] / v - 1 - phi0) for v in (1e6, 1e8, 1e10)]
    # the remaining term is phi_1(u) / v
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-7


def test_phi0_tracks_quotient(ctx2):
    cs = ctx2.correctors
    errs = []
    for U in (1e2, 1e3, 1e4):
        phi0 = cs.evaluate(np.array([U + 0j]))["phi"][0, 0]
        g0 = cs.pack.g(0, U)
        errs.append(abs(phi0 - (-g0) / (1 + g0)))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-8


def test_alpha_growth(ctx2):
    u0 = ctx2.correctors.u0
    assert alpha_of(ctx2, np.array([u0 + 0j]))[0] == 0
    ratios = [abs(alpha_of(ctx2, np.array([U + 0j]))[0]) / U ** 0.5 for U in (1e2, 1e3, 1e4)]
    assert ratios[0] >= ratios[1] >= ratios[2]


@pytest.mark.parametrize("name", ["ctx2", "ctx3"])
def test_abel_equation(name, request):
    ctx = request.getfixturevalue(name)
    u, v = abel_samples(ctx, 10, seed=7)
    u1, v1 = ctx.step(u, v)
    a = omega(ctx, u, v)
    b = omega(ctx, u1, v1)
    assert np.max(np.abs(b.omega - a.omega - 1)) <= 1e-8


@pytest.mark.parametrize("name", ["ctx2", "ctx3"])
def test_tau_invariance(name, request):
    ctx = request.getfixturevalue(name)
    u, v = abel_samples(ctx, 10, seed=8)
    u1, v1 = ctx.step(u, v)
    assert np.max(np.abs(tau_uv(ctx, u1, v1).tau - tau_uv(ctx, u, v).tau)) <= 1e-6


def test_limit_diagnostics(ctx2):
    u, v = abel_samples(ctx2, 5, seed=9)
    vals = omega(ctx2, u, v)
    assert np.all(vals.n_used >= ctx2.policy.n_min)
    assert np.all(vals.n_used <= ctx2.policy.n_max)
    assert np.all(vals.omega_gap[vals.omega_confident] < ctx2.policy.eps_tail)
    assert np.all(np.isfinite(vals.omega_richardson))
    assert np.all(vals.omega_tail > 0)


def test_cauchy_gaps_decrease(ctx2):
    """Once n exceeds |v| the doubling gaps shrink at every checkpoint."""
    u = np.array([40.0 + 0j])
    v = np.array([1.05 * 40 ** 1.5 / ctx2.params.delta + 0j])
    gaps = []
    for n_max in (2**14, 2**16, 2**18, 2**20):
        gaps.append(omega(ctx2.with_policy(n_max=n_max, eps_tail=0.0), u, v).omega_gap[0])
    assert all(a > b for a, b in zip(gaps, gaps[1:]))


def test_inverse_on_fibre(ctx2):
    u, v = abel_samples(ctx2, 3, seed=11)
    om = omega(ctx2, u, v).omega
    v_back = v_from_omega(ctx2, u, om)
    assert np.max(np.abs(v_back - v) / np.abs(v)) < 1e-8
    assert np.max(np.abs(tau(ctx2, u, om) - tau_uv(ctx2, u, v).tau)) < 1e-6


def test_orbit_bounds_small(ctx2):
    u, v = sample_region_uv(ctx2.params, 5, seed=12, u_span=4.0, v_span=10.0)
    counts = orbit_bound_violations(ctx2, u, v, 2000)
    assert counts["v_upper"] == counts["v_lower"] == counts["u_upper"] == counts["u_lower"] == 0


def test_f3_invariance(ctx2):
    bad, total = f3_violations(ctx2.params, 2000, seed=1)
    assert bad == 0 and total == 2000


def test_extend_inside_region_matches_direct(ctx2):
    u, v = abel_samples(ctx2, 3, seed=13)
    x, y = psi0_inverse(u, v, 2)
    ext = extend_along_orbit(ctx2, x, y)
    assert np.all(ext.status == K.ENTERED) and np.all(ext.n_entry == 0)
    direct = tau_uv(ctx2, u, v)
    assert np.max(np.abs(ext.omega - direct.omega)) < 1e-9
    assert np.max(np.abs(ext.tau - direct.tau)) < 1e-9


def test_extend_one_step_coherence(ctx2):
    # slice points that enter the region after about 4000 germ steps
    x = np.array([-0.011363636363636364j, -0.018272727272727274j, -0.02j])
    y = np.array([-0.08545454545454546, -0.13454545454545455, -0.1509090909090909])
    ext = extend_along_orbit(ctx2, x, y)
    assert ext.attracted.all()
    x1, y1 = ctx2.chart.f0_step(x, y)
    ext1 = extend_along_orbit(ctx2, x1, y1)
    assert ext1.attracted.all()
    assert np.max(np.abs(ext1.omega - ext.omega - 1)) <= 1e-6
    assert np.max(np.abs(ext1.tau - ext.tau)) <= 1e-6


def test_extension_snapshot(ctx2):
    ext = extend_along_orbit(ctx2, 0.5, 0.5, n_entry=10_000)
    assert ext.status[0] == K.ESCAPED and ext.n_entry[0] == 3


def test_injectivity_small(ctx2):
    for which in ("psi1", "psi2"):
        rep = check_injectivity(ctx2, which, samples=100, seed=3)
        assert rep.violations == 0 and rep.pairs > 50


def test_separation_harness_flags_collisions():
    v = np.array([1.0 + 1j, 2.0 - 0.5j, 3.0])
    # v -> v^2 identifies v and -v, so every pair collides
    bad, eligible = separation_violations(v ** 2, (-v) ** 2, v, -v)
    assert eligible.all() and list(bad) == [0, 1, 2]
    bad, eligible = separation_violations(v, v, v, v)
    assert not eligible.any() and bad.size == 0


def test_asymptotic_profile_short(ctx2):
    v0 = 2e4
    w0 = w_of(ctx2, 40.0, v0)[0]
    prof = asymptotic_profile(ctx2, 40.0, v0, [1000, 10_000])
    for n, wn, un in prof:
        # w_n = w_0 + n + o(n)
        assert abs(wn * n - n - w0) / n < 0.01


def test_orbit_csv(ctx2, tmp_path):
    path = tmp_path / "orbit.csv"
    u0, v0 = 40.0 + 0j, 20000.0 + 0j
    rows = write_orbit_csv(ctx2, u0, v0, 20, path)
    with open(path) as fh:
        data = list(csv.reader(fh))
    assert data[0] == ["n", "re_u", "im_u", "re_v", "im_v", "re_w", "im_w", "step_residual"]
    assert rows == 21 == len(data) - 1
    assert float(data[1][1]) == u0.real and float(data[1][3]) == v0.real
    assert all(float(r[7]) < 1e-6 for r in data[1:-1])
