"""Compiled inner loops: exact chart steps, orbit advancement, basin entry.

All kernels are ``nogil`` so the renderer can drive them from threads.
The chart coordinates (u, v) are carried as compensated sums (a value plus
a running correction) because v grows linearly along an orbit and plain
summation would leak about 1e-7 of rounding error into the Fatou
coordinate after a million steps.
"""
import numpy as np
from numba import njit

OK = 0
OUT_OF_REGION = 1
SINGULAR = 2
ENTERED = 3
NOT_DETECTED = 4
ESCAPED = 5


@njit(cache=True, nogil=True, inline="always")
def chart_xy(u, v, k, alpha, beta):
    """Principal-branch preimage (x, y) of (u, v)."""
    if k == 2:
        s = 1.0 / np.sqrt(u)
        t = 1.0 / v
    elif k == 3:
        s = np.exp(-np.log(u) / 3.0)
        t = 1.0 / np.sqrt(v)
    else:
        s = np.exp(-np.log(u) / k)
        t = np.exp(-np.log(v) / (k - 1))
    y = beta * t
    x = alpha * s * y
    return x, y


@njit(cache=True, nogil=True)
def _table_size(sx, sy, dd):
    """Length of the power tables: index i holds the power i - 1."""
    top = 1
    for tr in (sx, sy, dd):
        for m in range(tr[0].shape[0]):
            top = max(top, tr[0][m], tr[1][m])
    return top + 2


@njit(cache=True, nogil=True, inline="always")
def _fill_powers(x, y, xp, yp):
    xp[0] = 1.0 / x
    yp[0] = 1.0 / y
    xp[1] = 1.0
    yp[1] = 1.0
    for i in range(2, xp.shape[0]):
        xp[i] = xp[i - 1] * x
        yp[i] = yp[i - 1] * y


@njit(cache=True, nogil=True, inline="always")
def _monomials(px, qx, cx, xp, yp):
    """sum c x^p y^q with exponents >= -1, read from the power tables."""
    acc = 0j
    for m in range(px.shape[0]):
        acc += cx[m] * xp[px[m] + 1] * yp[qx[m] + 1]
    return acc


@njit(cache=True, nogil=True, inline="always")
def chart_step(u, v, k, alpha, beta, sx, sy, dd, binom_k, binom_km1, xp, yp):
    """Increments (du, dv) of one exact step of the chart-conjugated map.

    sx, sy, dd are (p, q, c) triples describing x1/x - 1, y1/y - 1 and their
    difference with the common terms cancelled symbolically; xp, yp are
    power-table workspaces of length ``_table_size``.
    Returns (du, dv, flag) with flag SINGULAR when the image leaves the chart.
    """
    x, y = chart_xy(u, v, k, alpha, beta)
    _fill_powers(x, y, xp, yp)
    ex = _monomials(sx[0], sx[1], sx[2], xp, yp)
    ey = _monomials(sy[0], sy[1], sy[2], xp, yp)
    d = _monomials(dd[0], dd[1], dd[2], xp, yp)
    if 1.0 + ex == 0 or 1.0 + ey == 0:
        return 0j, 0j, SINGULAR
    r = d / (1.0 + ex)
    acc = 0j
    for i in range(k, 0, -1):
        acc = (acc + binom_k[i]) * r
    du = u * acc
    e = 0j
    for i in range(k - 1, 0, -1):
        e = (e + binom_km1[i]) * ey
    dv = -v * e / (1.0 + e)
    return du, dv, OK


@njit(cache=True, nogil=True, inline="always")
def _two_sum(a, b):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


@njit(cache=True, nogil=True, inline="always")
def _csum(hi, lo, d):
    re, e1 = _two_sum(hi.real, d.real)
    im, e2 = _two_sum(hi.imag, d.imag)
    lo = lo + complex(e1, e2)
    # renormalize so hi carries the rounded value
    re2, f1 = _two_sum(re, lo.real)
    im2, f2 = _two_sum(im, lo.imag)
    return complex(re2, im2), complex(f1, f2)


@njit(cache=True, nogil=True, inline="always")
def in_region(u, v, k, R, delta, tan_u, tan_v, expo):
    if not (u.real > R):
        return False
    if not (abs(u.imag) < tan_u * u.real):
        return False
    if not (v.real > 0 and abs(v.imag) < tan_v * v.real):
        return False
    au2 = u.real * u.real + u.imag * u.imag
    return au2 ** (0.5 * expo) < delta * abs(v)


@njit(cache=True, nogil=True)
def orbit_advance(uh, ul, vh, vl, status, nsteps, k, alpha, beta, sx, sy, dd,
                  binom_k, binom_km1, R, delta, tan_u, tan_v, expo, check_region):
    """Advance every point with status OK by nsteps exact steps, in place.

    The loop is step-outer and point-inner: one orbit is a chain of dependent
    divisions and roots, so interleaving independent orbits keeps the
    floating-point units busy.  Returns the number of steps taken per point.
    """
    n = uh.shape[0]
    taken = np.zeros(n, dtype=np.int64)
    ts = _table_size(sx, sy, dd)
    xp = np.empty(ts, dtype=np.complex128)
    yp = np.empty(ts, dtype=np.complex128)
    xp[1] = 1.0
    yp[1] = 1.0
    sxp, sxq, sxc = sx
    syp, syq, syc = sy
    ddp, ddq, ddc = dd
    live = np.empty(n, dtype=np.int64)
    m = 0
    for i in range(n):
        if status[i] == OK:
            live[m] = i
            m += 1
    for step in range(nsteps):
        if m == 0:
            break
        kept = 0
        for j in range(m):
            i = live[j]
            a_h = uh[i]
            a_l = ul[i]
            b_h = vh[i]
            b_l = vl[i]
            # chart_step written out: array-taking helpers cost refcount
            # traffic on every call even when inlined
            u = a_h + a_l
            v = b_h + b_l
            x, y = chart_xy(u, v, k, alpha, beta)
            xp[0] = 1.0 / x
            yp[0] = 1.0 / y
            for q in range(2, ts):
                xp[q] = xp[q - 1] * x
                yp[q] = yp[q - 1] * y
            ex = 0j
            for q in range(sxp.shape[0]):
                ex += sxc[q] * xp[sxp[q] + 1] * yp[sxq[q] + 1]
            ey = 0j
            for q in range(syp.shape[0]):
                ey += syc[q] * xp[syp[q] + 1] * yp[syq[q] + 1]
            d = 0j
            for q in range(ddp.shape[0]):
                d += ddc[q] * xp[ddp[q] + 1] * yp[ddq[q] + 1]
            if 1.0 + ex == 0 or 1.0 + ey == 0:
                status[i] = SINGULAR
                continue
            r = d / (1.0 + ex)
            acc = 0j
            for q in range(k, 0, -1):
                acc = (acc + binom_k[q]) * r
            du = u * acc
            e = 0j
            for q in range(k - 1, 0, -1):
                e = (e + binom_km1[q]) * ey
            dv = -v * e / (1.0 + e)
            a_h, a_l = _csum(a_h, a_l, du)
            b_h, b_l = _csum(b_h, b_l, dv)
            uh[i] = a_h
            ul[i] = a_l
            vh[i] = b_h
            vl[i] = b_l
            taken[i] += 1
            if check_region and not in_region(a_h + a_l, b_h + b_l, k, R, delta,
                                              tan_u, tan_v, expo):
                status[i] = OUT_OF_REGION
                continue
            live[kept] = i
            kept += 1
        m = kept
    return taken


@njit(cache=True, nogil=True)
def orbit_trace(u0, v0, nsteps, k, alpha, beta, sx, sy, dd, binom_k, binom_km1):
    """Full orbit (n = 0..nsteps) of a single point; stops early on a singular step."""
    us = np.empty(nsteps + 1, dtype=np.complex128)
    vs = np.empty(nsteps + 1, dtype=np.complex128)
    a_h, a_l, b_h, b_l = u0, 0j, v0, 0j
    us[0] = u0
    vs[0] = v0
    last = nsteps
    ts = _table_size(sx, sy, dd)
    xp = np.empty(ts, dtype=np.complex128)
    yp = np.empty(ts, dtype=np.complex128)
    for n in range(nsteps):
        du, dv, flag = chart_step(a_h + a_l, b_h + b_l, k, alpha, beta, sx, sy, dd,
                                  binom_k, binom_km1, xp, yp)
        if flag != OK:
            last = n
            break
        a_h, a_l = _csum(a_h, a_l, du)
        b_h, b_l = _csum(b_h, b_l, dv)
        us[n + 1] = a_h + a_l
        vs[n + 1] = b_h + b_l
    return us[: last + 1], vs[: last + 1]


@njit(cache=True, nogil=True, inline="always")
def _poly_eval(x, y, pi, pj, pc):
    acc = 0j
    for m in range(pi.shape[0]):
        term = pc[m]
        for _ in range(pi[m]):
            term = term * x
        for _ in range(pj[m]):
            term = term * y
        acc += term
    return acc


@njit(cache=True, nogil=True, inline="always")
def germ_step(x, y, f1, f2):
    """One step of the (polynomial) germ; f1, f2 are (i, j, c) triples."""
    return _poly_eval(x, y, f1[0], f1[1], f1[2]), _poly_eval(x, y, f2[0], f2[1], f2[2])


@njit(cache=True, nogil=True)
def entry_scan(xs, ys, n_entry, k, a, b, alpha, beta, f1, f2, R, delta, tan_u, tan_v,
               expo, branch_tol, escape_radius):
    """Iterate the germ until psi0 of the orbit lands in the sector region.

    Returns (status, n, u, v) arrays; status ENTERED, NOT_DETECTED, SINGULAR
    or ESCAPED.
    """
    m = xs.shape[0]
    status = np.full(m, NOT_DETECTED, dtype=np.int64)
    nent = np.zeros(m, dtype=np.int64)
    uo = np.zeros(m, dtype=np.complex128)
    vo = np.zeros(m, dtype=np.complex128)
    for i in range(m):
        x = xs[i]
        y = ys[i]
        for n in range(n_entry + 1):
            if x == 0 or y == 0:
                status[i] = SINGULAR
                nent[i] = n
                break
            if abs(x) + abs(y) > escape_radius:
                status[i] = ESCAPED
                nent[i] = n
                break
            yk1 = y ** (k - 1)
            v = b / yk1
            u = a * (y / x) ** k
            if in_region(u, v, k, R, delta, tan_u, tan_v, expo):
                xb, yb = chart_xy(u, v, k, alpha, beta)
                if abs(yb - y) <= branch_tol * abs(y) and abs(xb - x) <= branch_tol * abs(x):
                    status[i] = ENTERED
                    nent[i] = n
                    uo[i] = u
                    vo[i] = v
                    break
            if n == n_entry:
                nent[i] = n
                break
            x, y = germ_step(x, y, f1, f2)
    return status, nent, uo, vo


@njit(cache=True, nogil=True)
def step_batch(us, vs, k, alpha, beta, sx, sy, dd, binom_k, binom_km1):
    """One exact chart step for each point; singular images come back as nan."""
    n = us.shape[0]
    u1 = np.empty(n, dtype=np.complex128)
    v1 = np.empty(n, dtype=np.complex128)
    ts = _table_size(sx, sy, dd)
    xp = np.empty(ts, dtype=np.complex128)
    yp = np.empty(ts, dtype=np.complex128)
    for i in range(n):
        du, dv, flag = chart_step(us[i], vs[i], k, alpha, beta, sx, sy, dd, binom_k, binom_km1,
                                  xp, yp)
        if flag != OK:
            u1[i] = complex(np.nan, np.nan)
            v1[i] = complex(np.nan, np.nan)
        else:
            u1[i] = us[i] + du
            v1[i] = vs[i] + dv
    return u1, v1


@njit(cache=True, nogil=True)
def increment_batch(us, vs, k, alpha, beta, sx, sy, dd, binom_k, binom_km1):
    """The increments (u1 - u, v1 - v) of one chart step, without cancellation."""
    n = us.shape[0]
    du = np.empty(n, dtype=np.complex128)
    dv = np.empty(n, dtype=np.complex128)
    ts = _table_size(sx, sy, dd)
    xp = np.empty(ts, dtype=np.complex128)
    yp = np.empty(ts, dtype=np.complex128)
    for i in range(n):
        a, b, flag = chart_step(us[i], vs[i], k, alpha, beta, sx, sy, dd, binom_k, binom_km1,
                                xp, yp)
        if flag != OK:
            du[i] = complex(np.nan, np.nan)
            dv[i] = complex(np.nan, np.nan)
        else:
            du[i] = a
            dv[i] = b
    return du, dv


@njit(cache=True, nogil=True)
def germ_orbit(x0, y0, nsteps, f1, f2):
    xs = np.empty(nsteps + 1, dtype=np.complex128)
    ys = np.empty(nsteps + 1, dtype=np.complex128)
    xs[0] = x0
    ys[0] = y0
    for n in range(nsteps):
        xs[n + 1], ys[n + 1] = germ_step(xs[n], ys[n], f1, f2)
    return xs, ys
