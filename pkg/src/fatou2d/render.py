"""Basin slices: scan a real 2-parameter slice of C^2 and paint it by Fatou data.

A pixel is *attracted* when its germ orbit lands in the certified sector
region within the entry budget; it then carries (n_entry, tau, omega) with
omega pulled back along the orbit.  *not-detected* only means the budget ran
out (or the orbit escaped, or the limit could not be taken); it is never a
claim of non-attraction.  *chart-singular* marks orbits that hit x y = 0.
"""
from __future__ import annotations

import colorsys
import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from . import _kernels as K
from .errors import Fatou2dError
from .fatou import FatouContext, extend_along_orbit

__all__ = ["SliceSpec", "BasinGrid", "scan", "emit_ppm", "write_pixel_csv", "pixel_rgb",
           "NOT_DETECTED", "ATTRACTED", "SINGULAR", "render_policy"]

NOT_DETECTED = 0
ATTRACTED = 1
SINGULAR = 2
VERDICT_NAMES = {NOT_DETECTED: "not-detected", ATTRACTED: "attracted", SINGULAR: "chart-singular"}


@dataclass(frozen=True)
class SliceSpec:
    """Affine slice base + s1*dir1 + s2*dir2 with s1 in range1 (columns, left to
    right) and s2 in range2 (rows, the top row carrying the largest s2)."""

    base: Tuple[complex, complex] = (0j, 0j)
    dir1: Tuple[complex, complex] = (1 + 0j, 0j)
    dir2: Tuple[complex, complex] = (0j, 1 + 0j)
    range1: Tuple[float, float] = (-0.1, 0.1)
    range2: Tuple[float, float] = (-0.1, 0.1)
    width: int = 64
    height: int = 64
    n_entry: int = 10_000

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("width and height must be at least 1")
        if not (self.range1[0] < self.range1[1] and self.range2[0] < self.range2[1]):
            raise ValueError("slice parameter ranges must be nonempty")
        if self.n_entry < 0:
            raise ValueError("n_entry must be non-negative")

    def pixel_points(self, rows=None):
        """(x, y) at pixel centres for the given rows (all rows by default), row-major."""
        rows = np.arange(self.height) if rows is None else np.asarray(rows)
        c = (np.arange(self.width) + 0.5) / self.width
        r = (rows + 0.5) / self.height
        s1 = self.range1[0] + c * (self.range1[1] - self.range1[0])
        s2 = self.range2[1] - r * (self.range2[1] - self.range2[0])
        S1, S2 = np.meshgrid(s1, s2)
        S1, S2 = S1.ravel(), S2.ravel()
        x = self.base[0] + S1 * self.dir1[0] + S2 * self.dir2[0]
        y = self.base[1] + S1 * self.dir1[1] + S2 * self.dir2[1]
        return x.astype(complex), y.astype(complex)


@dataclass
class BasinGrid:
    spec: SliceSpec
    verdict: np.ndarray  # (height, width) of NOT_DETECTED / ATTRACTED / SINGULAR
    n_entry: np.ndarray
    tau: np.ndarray
    omega: np.ndarray

    @property
    def attracted_count(self):
        return int(np.sum(self.verdict == ATTRACTED))


def render_policy(ctx: FatouContext, n_max=4096):
    """Orbit policy used for pixels: a short fixed-length limit (colouring needs ~1e-4)."""
    return ctx.with_policy(n_max=n_max, eps_tail=0.0)


def _scan_rows(ctx, spec, rows):
    x, y = spec.pixel_points(rows)
    try:
        ext = extend_along_orbit(ctx, x, y, spec.n_entry)
        return _verdicts(ext), ext.n_entry, ext.tau, ext.omega
    except Fatou2dError:
        pass
    # a failing limit in the batch: fall back to one pixel at a time
    out = [np.empty(len(x), np.int64), np.zeros(len(x), np.int64),
           np.full(len(x), np.nan + 0j), np.full(len(x), np.nan + 0j)]
    for i in range(len(x)):
        try:
            ext = extend_along_orbit(ctx, x[i:i + 1], y[i:i + 1], spec.n_entry)
            vals = (_verdicts(ext)[0], ext.n_entry[0], ext.tau[0], ext.omega[0])
        except Fatou2dError:
            vals = (NOT_DETECTED, spec.n_entry, np.nan, np.nan)
        for arr, val in zip(out, vals):
            arr[i] = val
    return tuple(out)


def _verdicts(ext):
    v = np.full(ext.status.shape, NOT_DETECTED, np.int64)
    v[ext.status == K.ENTERED] = ATTRACTED
    v[ext.status == K.SINGULAR] = SINGULAR
    return v


def scan(ctx: FatouContext, spec: SliceSpec, workers=1, rows_per_task=4) -> BasinGrid:
    """Classify every pixel; rows are farmed out to a thread pool.

    Each pixel's verdict depends only on its centre, so the grid does not
    depend on the worker count or on scheduling order.
    """
    H, W = spec.height, spec.width
    chunks = [np.arange(r, min(r + rows_per_task, H)) for r in range(0, H, rows_per_task)]
    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda rows: _scan_rows(ctx, spec, rows), chunks))
    else:
        parts = [_scan_rows(ctx, spec, rows) for rows in chunks]
    verdict = np.concatenate([p[0] for p in parts]).reshape(H, W)
    nent = np.concatenate([p[1] for p in parts]).reshape(H, W)
    tau = np.concatenate([p[2] for p in parts]).reshape(H, W)
    om = np.concatenate([p[3] for p in parts]).reshape(H, W)
    return BasinGrid(spec, verdict, nent, tau, om)


def pixel_rgb(verdict, n_entry=0, omega=0j):
    """RGB bytes of one pixel (hexcone HSV for attracted pixels)."""
    if verdict == NOT_DETECTED:
        return (0, 0, 0)
    if verdict == SINGULAR:
        return (255, 255, 255)
    re = float(np.real(omega))
    hue = re - math.floor(re) if math.isfinite(re) else 0.0
    val = 1.0 / (1.0 + n_entry / 64.0)
    return tuple(int(round(255 * c)) for c in colorsys.hsv_to_rgb(hue, 1.0, val))


def emit_ppm(grid: BasinGrid, path):
    """Binary P6 image, top row first."""
    H, W = grid.verdict.shape
    buf = bytearray()
    for r in range(H):
        for c in range(W):
            buf.extend(pixel_rgb(int(grid.verdict[r, c]), int(grid.n_entry[r, c]),
                                 grid.omega[r, c]))
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (W, H))
        fh.write(bytes(buf))


def write_pixel_csv(grid: BasinGrid, path):
    """Companion table: pixel x (column), y (row), verdict, n_entry, tau, omega."""
    H, W = grid.verdict.shape
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "verdict", "n_entry", "re_tau", "im_tau", "re_omega", "im_omega"])
        for r in range(H):
            for c in range(W):
                v = int(grid.verdict[r, c])
                t, o = grid.tau[r, c], grid.omega[r, c]
                w.writerow([c, r, VERDICT_NAMES[v], int(grid.n_entry[r, c]),
                            repr(float(t.real)), repr(float(t.imag)),
                            repr(float(o.real)), repr(float(o.imag))])
