import csv
import math

import numpy as np
import pytest

from fatou2d.coords import ChartSystem, SectorParams, sample_region_uv
from fatou2d.errors import TruncationUnderflow
from fatou2d.expansion import (
    Limits,
    build_expansion,
    chart_delta_mp,
    eval_Fj,
    numeric_fit_gj,
    write_coeff_csv,
)
from fatou2d.germ import GermMap
from fatou2d.normal_form import normalize

GERMS = {
    "k2": GermMap.from_parts({(1, 1): 1}, {(0, 2): 1, (2, 0): 1}),
    "k2_pq": GermMap.from_parts({(1, 1): 1, (3, 0): 0.3, (1, 2): -0.2j},
                                {(0, 2): 1, (2, 0): 1, (2, 1): 0.5, (0, 3): 0.1}),
    "k3": GermMap.from_parts({(1, 2): 1}, {(0, 3): 1, (3, 0): 1}),
    "k3_pq": GermMap.from_parts({(1, 2): 1, (4, 0): 0.4, (2, 2): 0.3j},
                                {(0, 3): 1, (3, 0): 1, (1, 3): -0.5, (0, 4): 0.2}),
}


@pytest.fixture(scope="module", params=sorted(GERMS))
def case(request):
    ng = normalize(GERMS[request.param])
    return request.param, ng, build_expansion(ng)


def test_abate_g0_closed_form(abate_ng):
    pack = build_expansion(abate_ng)
    for u in (50.0, 200.0, 300 + 40j):
        assert abs(pack.g(0, u) + 1 / (2 * u)) < 1e-15
    assert all(h.is_zero() for h in pack.h_j)
    assert pack.h_series.is_zero()


def test_abate_u_step_has_no_h_term(abate_ng):
    ch = ChartSystem(abate_ng)
    v = 1e6
    du, _ = ch.f1_increments(100.0, v)
    # the remainder is O(1/v^2) with a constant close to 1
    assert abs(du[0] - 1 / v) <= 2 / v**2


def test_g0_has_no_constant(case):
    _, _, pack = case
    assert pack.g_j[0][0] == 0


def test_h_vanishes_without_p_q(case):
    name, ng, pack = case
    if ng.Ppart.is_zero() and ng.Qpart.is_zero():
        assert all(h.is_zero() for h in pack.h_j)
    else:
        assert not all(h.is_zero() for h in pack.h_j)


def test_symbolic_matches_numeric_fit(case):
    name, ng, pack = case
    p = SectorParams(ng.k, 32, 0.05, math.pi / 8)
    u, _ = sample_region_uv(p, 20, seed=3)
    for ui in u:
        fit = numeric_fit_gj(ng, ui, ng.k - 1)
        for j in range(ng.k):
            sym = pack.g(j, ui)
            assert abs(sym - fit[j]) <= 1e-6 * (1 + abs(sym)), (name, ui, j)


def test_fit_examples(abate_ng, k3_ng):
    assert abs(numeric_fit_gj(abate_ng, 200.0, 1)[0] + 0.0025) < 1e-8
    pack3 = build_expansion(k3_ng)
    assert abs(numeric_fit_gj(k3_ng, 300.0, 2)[0] - pack3.g(0, 300.0)) < 1e-7


def test_F_values(abate_ng, k3_ng):
    pack = build_expansion(abate_ng)
    assert abs(eval_Fj(pack, 0, 200.0) - 0.9975) < 1e-15
    assert eval_Fj(pack, 1, 200.0) == 0
    pack3 = build_expansion(k3_ng)
    assert eval_Fj(pack3, 2, 77.0) == 0
    assert abs(eval_Fj(pack3, 0, 1e12) - 1) < 1e-3
    with pytest.raises(ValueError):
        eval_Fj(pack3, 3, 50.0)


def test_remainder_order_stable(case):
    """|v1 - v - 1 - sum g_j t^j| <= C |v|^(-k/(k-1)) with C stable under doubling |v|.

    Germs whose t^k coefficient vanishes have a smaller remainder, so the
    constant may shrink; it must not grow.
    """
    name, ng, pack = case
    k = ng.k
    u = 60.0 + 5j
    consts = []
    for v in (1e6 * 2 ** m for m in range(5)):
        exact = complex(chart_delta_mp(ng, u, v)) + 1
        rem = abs(exact - pack.v_increment(u, v))
        consts.append(rem * v ** (k / (k - 1)))
    consts = np.array(consts)
    assert consts.max() <= 1.5 * consts[0], (name, consts)
    assert consts[-1] > 0


def test_truncation_underflow(abate_ng):
    with pytest.raises(TruncationUnderflow):
        build_expansion(abate_ng, Limits(trunc_n=1))


def test_coeff_csv(tmp_path, k3_ng):
    pack = build_expansion(k3_ng)
    path = tmp_path / "g.csv"
    write_coeff_csv(pack.g_j, path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["j", "m", "re", "im"]
    back = {}
    for j, m, re, im in rows[1:]:
        back[(int(j), int(m))] = complex(float(re), float(im))
    for j, ser in enumerate(pack.g_j):
        for m, c in ser.coeffs.items():
            assert back[(j, m)] == complex(c)
