import numpy as np

from fatou2d.suite import CheckResult, check_ode_residual, check_region_invariance, fit_envelope


def test_fit_envelope_exact_shape():
    shape = np.array([1.0, 2.0, 4.0])
    C, excess = fit_envelope(3 * shape, shape)
    assert abs(C - 3) < 1e-14 and abs(excess - 1) < 1e-14


def test_fit_envelope_is_least_squares_not_max():
    shape = np.ones(4)
    C, excess = fit_envelope([1.0, 1.0, 1.0, 5.0], shape)
    assert C == 2.0 and excess == 2.5


def test_lines_keys():
    r = CheckResult("abel", 1e-10, True, 100)
    assert r.lines() == {"abel_max_residual": "1e-10", "abel_samples": "100", "abel_pass": "true"}
    bad = CheckResult("tau", float("inf"), False, 0, error="quadrature-failure: x")
    assert bad.lines()["tau_error"] == "quadrature-failure: x"


def test_region_and_ode_checks(ctx3):
    r = check_region_invariance(ctx3, 1000)
    assert r.passed and r.value == 0 and r.samples == 1000
    o = check_ode_residual(ctx3, 10)
    assert o.passed and o.samples == 30
