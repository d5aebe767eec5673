import numpy as np
import pytest

from fatou2d.render import (
    ATTRACTED,
    NOT_DETECTED,
    SINGULAR,
    BasinGrid,
    SliceSpec,
    emit_ppm,
    pixel_rgb,
    render_policy,
    scan,
    write_pixel_csv,
)


def default_slice(width=16, height=16, n_entry=10_000):
    return SliceSpec(base=(0j, 0j), dir1=(-1j, 0j), dir2=(0j, -1 + 0j),
                     range1=(0.0, 0.02), range2=(0.0, 0.2),
                     width=width, height=height, n_entry=n_entry)


@pytest.fixture(scope="module")
def rctx(ctx2):
    return render_policy(ctx2)


def one_pixel(verdict, n_entry=0, omega=0j):
    spec = SliceSpec(width=1, height=1)
    return BasinGrid(spec, np.array([[verdict]]), np.array([[n_entry]]),
                     np.array([[0j]]), np.array([[omega]]))


def test_ppm_one_not_detected(tmp_path):
    path = tmp_path / "a.ppm"
    emit_ppm(one_pixel(NOT_DETECTED), path)
    assert path.read_bytes() == b"P6\n1 1\n255\n\x00\x00\x00"


def test_colour_map():
    assert pixel_rgb(ATTRACTED, 0, 0.0) == (255, 0, 0)
    assert pixel_rgb(ATTRACTED, 0, 3.0 + 2j) == (255, 0, 0)
    assert pixel_rgb(SINGULAR) == (255, 255, 255)
    assert pixel_rgb(NOT_DETECTED, 5, 0.3) == (0, 0, 0)
    # value falls with the entry time, hue follows frac(Re omega)
    assert pixel_rgb(ATTRACTED, 64, 0.0) == (128, 0, 0)
    assert pixel_rgb(ATTRACTED, 0, 1 / 3) == (0, 255, 0)
    assert pixel_rgb(ATTRACTED, 0, -1 / 3) == (0, 0, 255)


def test_pixel_centres():
    spec = SliceSpec(base=(1 + 0j, 0j), dir1=(1 + 0j, 0j), dir2=(0j, 1j),
                     range1=(0.0, 1.0), range2=(0.0, 2.0), width=2, height=2)
    x, y = spec.pixel_points()
    assert np.allclose(x, [1.25, 1.75, 1.25, 1.75])
    assert np.allclose(y, [1.5j, 1.5j, 0.5j, 0.5j])


@pytest.mark.parametrize("kw", [dict(width=0), dict(range1=(1.0, 1.0)), dict(n_entry=-1)])
def test_slice_validation(kw):
    with pytest.raises(ValueError):
        SliceSpec(**kw)


def test_origin_is_singular(rctx):
    spec = SliceSpec(width=1, height=1, range1=(-1.0, 1.0), range2=(-1.0, 1.0))
    grid = scan(rctx, spec)
    assert grid.verdict[0, 0] == SINGULAR


def test_immediate_entry(rctx):
    from fatou2d.coords import psi0_inverse
    from fatou2d.suite import abel_samples

    u, v = abel_samples(rctx, 1, seed=0)
    x, y = psi0_inverse(u[0], v[0], 2)
    spec = SliceSpec(base=(x, y), width=1, height=1, range1=(-1e-12, 1e-12),
                     range2=(-1e-12, 1e-12))
    grid = scan(rctx, spec)
    assert grid.verdict[0, 0] == ATTRACTED and grid.n_entry[0, 0] == 0


def test_real_diagonal_snapshot(rctx):
    spec = SliceSpec(base=(0j, 0j), dir1=(1 + 0j, 1 + 0j), dir2=(1j, 1j),
                     range1=(0.0, 0.2), range2=(-1e-9, 1e-9), width=64, height=1)
    assert scan(rctx, spec).attracted_count == 0


def test_determinism_across_workers(rctx, tmp_path):
    spec = default_slice()
    a = scan(rctx, spec, workers=1)
    b = scan(rctx, spec, workers=3, rows_per_task=1)
    assert a.attracted_count > 0
    emit_ppm(a, tmp_path / "a.ppm")
    emit_ppm(b, tmp_path / "b.ppm")
    assert (tmp_path / "a.ppm").read_bytes() == (tmp_path / "b.ppm").read_bytes()
    write_pixel_csv(a, tmp_path / "a.csv")
    write_pixel_csv(b, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_budget_monotone(rctx):
    small = scan(rctx, default_slice(n_entry=5000))
    large = scan(rctx, default_slice(n_entry=10_000))
    was = small.verdict == ATTRACTED
    assert np.all(large.verdict[was] == ATTRACTED)
    assert large.attracted_count >= small.attracted_count > 0


def test_pixel_abel_coherence(rctx):
    p = (-0.011363636363636364j, -0.08545454545454546 + 0j)
    x1, y1 = rctx.chart.f0_step(p[0], p[1])
    d = (x1[0] - p[0], y1[0] - p[1])
    # the two pixel centres are p and f0(p)
    spec = SliceSpec(base=p, dir1=d, dir2=(0j, 0j), range1=(-0.5, 1.5), range2=(-0.5, 0.5),
                     width=2, height=1)
    grid = scan(rctx, spec)
    assert (grid.verdict == ATTRACTED).all()
    assert abs(grid.omega[0, 1] - grid.omega[0, 0] - 1) <= 1e-4
    assert abs(grid.tau[0, 1] - grid.tau[0, 0]) <= 1e-4


def test_csv_layout(rctx, tmp_path):
    grid = scan(rctx, default_slice(4, 4))
    write_pixel_csv(grid, tmp_path / "g.csv")
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines[0] == "x,y,verdict,n_entry,re_tau,im_tau,re_omega,im_omega"
    assert len(lines) == 17
    assert lines[1].startswith("0,0,")
