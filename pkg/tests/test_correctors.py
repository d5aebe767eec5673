import numpy as np
import pytest

from fatou2d.coords import sample_region_uv
from fatou2d.correctors import QuadraturePolicy, solve_correctors
from fatou2d.errors import QuadratureFailure
from fatou2d.expansion import eval_Fj


@pytest.fixture(params=["ctx2", "ctx3"])
def ctx(request):
    return request.getfixturevalue(request.param)


def test_ode_residual(ctx):
    u, _ = sample_region_uv(ctx.params, 50, seed=0)
    res = ctx.correctors.ode_residual(u)
    assert res.shape == (ctx.k, 50)
    assert res.max() <= 1e-9


def test_derivative_matches_central_differences(ctx):
    cs = ctx.correctors
    u, _ = sample_region_uv(ctx.params, 50, seed=1)
    dphi = cs.evaluate(u)["dphi"]
    fd = cs.fd_derivative(u, rel_step=1e-4)
    # the floor only matters for correctors that vanish identically
    scale = np.maximum(np.abs(dphi), 1e-14)
    assert np.max(np.abs(fd - dphi) / scale) <= 1e-5


def test_last_corrector_has_no_F(ctx):
    pack = ctx.correctors.pack
    k = ctx.k
    assert eval_Fj(pack, k - 1, 100.0) == 0
    assert ctx.correctors.F(k - 1, np.array([100.0 + 3j]))[0] == 0


def test_value_at_base_point_is_zero(ctx):
    cs = ctx.correctors
    r = cs.evaluate(np.array([cs.u0 + 0j]))
    assert np.all(r["phi"] == 0)


def test_closure_changes_only_last_corrector(ctx):
    cs = ctx.correctors
    plain = solve_correctors(cs.pack, cs.u0, closure=False)
    u, _ = sample_region_uv(ctx.params, 20, seed=2)
    a = plain.evaluate(u)["phi"]
    b = cs.evaluate(u)["phi"]
    assert np.array_equal(a[:-1], b[:-1])
    assert np.abs(a[-1] - b[-1]).max() > 0


def test_alpha_is_consistent(ctx2):
    cs = ctx2.correctors
    u = np.array([80.0 + 4j, 150.0 - 10j])
    r = cs.evaluate(u, want_alpha=True)
    al = r["alpha_l"]
    assert np.allclose(r["alpha"], -al[1] + al[2])
    assert np.allclose(cs.alpha(u), r["alpha"])


def test_panel_independence(ctx2):
    """Halving the panel length leaves the values unchanged to quadrature accuracy."""
    cs = ctx2.correctors
    fine = solve_correctors(cs.pack, cs.u0, policy=QuadraturePolicy(panel_length=4.0))
    u, _ = sample_region_uv(ctx2.params, 20, seed=3)
    a = cs.evaluate(u)["phi"]
    b = fine.evaluate(u)["phi"]
    assert np.max(np.abs(a - b)) <= 1e-10 * (1 + np.max(np.abs(a)))


def test_underresolved_panel_is_reported(ctx2):
    with pytest.raises(QuadratureFailure):
        ctx2.correctors.evaluate(np.array([1e5 + 0j]))


def test_base_point_validation(ctx2):
    with pytest.raises(ValueError):
        solve_correctors(ctx2.correctors.pack, -1.0)
