"""Compiled integration kernels.

The potential enters through ``W(r) = -(2m/ħ²)·V(r) >= 0`` so that the
local wavenumber is ``q = sqrt(k² + W)``.  Models are dispatched on an
integer code with two parameters (see ``potential.kernel_params``).

The adaptive kernel integrates the local reflection ratio

    c(r) = u_out(r) / u_in(r),

the ratio of outgoing to incoming local WKB waves ``q^(-1/2) exp(±i∫q)``
that reproduce the exact ``u`` and ``u'`` at r.  It obeys the Riccati equation

    c' = 2iq·c + f·(1 - c²),     f = q'/(2q) = W'/(4q²),

which is exact.  The kernel integrates the deviation ``d = c - i·a`` from
the first-order adiabatic ratio ``a = f/(2q)``,

    d' = 2iq·d + f·a² - f·(2i·a·d + d²) - i·a',

whose source is second order in the WKB badness.  Error control relative
to ``|d|`` then resolves reflection amplitudes far below the adiabatic
part of ``c``, which would otherwise set a floor of about tolerance × |c|.
Deep in the WKB region ``d`` is tiny and non-oscillatory, so the step size
there is limited only by stability, not by the local wavelength.
"""
import math

import numba as nb

OK, MAX_STEPS, STEP_UNDERFLOW = 0, 1, 2


@nb.njit(cache=True, nogil=True)
def wfun(model, p0, p1, r):
    if model == 0:
        rl = r + p1
        W = p0 / (r * r * r * rl)
        g = 3.0 / r + 1.0 / rl
        return W, -W * g, W * (g * g + 3.0 / (r * r) + 1.0 / (rl * rl))
    elif model == 1:
        W = p1 / r**p0
        return W, -p0 * W / r, p0 * (p0 + 1.0) * W / (r * r)
    return 0.0, 0.0, 0.0


@nb.njit(cache=True, nogil=True)
def start_ratio(model, p0, p1, k, r, order):
    """Local reflection ratio of the incoming adiabatic (WKB) solution at r.

    order 1 is the exact conversion of the first-order WKB state
    u = q^(-1/2) e^(-iS), u' = (-iq - q'/2q) u; order 2 adds the next
    adiabatic correction (f/2q)'/(2q).
    """
    W, W1, W2 = wfun(model, p0, p1, r)
    q2 = k * k + W
    q = math.sqrt(q2)
    f = W1 / (4.0 * q2)
    if order <= 1:
        # c = (i q'/2q²) / (2 - i q'/2q²)
        e = W1 / (4.0 * q2 * q)
        den = 4.0 + e * e
        return -e * e / den, 2.0 * e / den
    q1 = W1 / (2.0 * q)
    fp = W2 / (4.0 * q2) - W1 * W1 / (4.0 * q2 * q2)
    g1 = fp / (2.0 * q) - f * q1 / (2.0 * q2)
    return g1 / (2.0 * q), f / (2.0 * q)


@nb.njit(cache=True, nogil=True)
def _adiabatic(model, p0, p1, k2, r):
    """First-order adiabatic ratio a = f/(2q) = W'/(8q³)."""
    W, W1, W2 = wfun(model, p0, p1, r)
    q = math.sqrt(k2 + W)
    return W1 / (8.0 * q * q * q)


@nb.njit(cache=True, nogil=True)
def _riccati(model, p0, p1, k2, r, x, y):
    """Right-hand side for the deviation d = x + iy."""
    W, W1, W2 = wfun(model, p0, p1, r)
    q2 = k2 + W
    q = math.sqrt(q2)
    q3 = q2 * q
    f = W1 / (4.0 * q2)
    a = W1 / (8.0 * q3)
    da = W2 / (8.0 * q3) - 3.0 * W1 * W1 / (16.0 * q3 * q2)
    dx = -2.0 * q * y + f * a * a - f * (x * x - y * y - 2.0 * a * y)
    dy = 2.0 * q * x - 2.0 * f * x * (a + y) - da
    return dx, dy


@nb.njit(cache=True, nogil=True)
def riccati_dp45(model, p0, p1, k, rmin, rmax, rtol, cr, ci, max_steps):
    """Dormand-Prince 5(4) with local extrapolation on the ratio equation.

    Takes and returns the full ratio c.  Returns (c_re, c_im, r_reached, accepted, rejected, status).
    """
    a21 = 1.0 / 5.0
    a31, a32 = 3.0 / 40.0, 9.0 / 40.0
    a41, a42, a43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
    a51, a52, a53, a54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
    a61, a62, a63, a64, a65 = 9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0
    b1, b3, b4, b5, b6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
    e1, e3, e4, e5, e6, e7 = (
        71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0,
    )
    atol = 1e-300
    k2 = k * k
    r = rmin
    ci -= _adiabatic(model, p0, p1, k2, r)
    W, W1, W2 = wfun(model, p0, p1, r)
    h = 0.1 / math.sqrt(k2 + W)
    k1r, k1i = _riccati(model, p0, p1, k2, r, cr, ci)
    accepted = 0
    rejected = 0
    while r < rmax:
        if accepted + rejected >= max_steps:
            return cr, ci + _adiabatic(model, p0, p1, k2, r), r, accepted, rejected, MAX_STEPS
        last = False
        if r + h >= rmax:
            h = rmax - r
            last = True
        if h <= 1e-15 * r:
            return cr, ci + _adiabatic(model, p0, p1, k2, r), r, accepted, rejected, STEP_UNDERFLOW
        k2r, k2i = _riccati(model, p0, p1, k2, r + h * 0.2, cr + h * a21 * k1r, ci + h * a21 * k1i)
        k3r, k3i = _riccati(
            model, p0, p1, k2, r + h * 0.3,
            cr + h * (a31 * k1r + a32 * k2r), ci + h * (a31 * k1i + a32 * k2i),
        )
        k4r, k4i = _riccati(
            model, p0, p1, k2, r + h * 0.8,
            cr + h * (a41 * k1r + a42 * k2r + a43 * k3r),
            ci + h * (a41 * k1i + a42 * k2i + a43 * k3i),
        )
        k5r, k5i = _riccati(
            model, p0, p1, k2, r + h * (8.0 / 9.0),
            cr + h * (a51 * k1r + a52 * k2r + a53 * k3r + a54 * k4r),
            ci + h * (a51 * k1i + a52 * k2i + a53 * k3i + a54 * k4i),
        )
        k6r, k6i = _riccati(
            model, p0, p1, k2, r + h,
            cr + h * (a61 * k1r + a62 * k2r + a63 * k3r + a64 * k4r + a65 * k5r),
            ci + h * (a61 * k1i + a62 * k2i + a63 * k3i + a64 * k4i + a65 * k5i),
        )
        nr = cr + h * (b1 * k1r + b3 * k3r + b4 * k4r + b5 * k5r + b6 * k6r)
        ni = ci + h * (b1 * k1i + b3 * k3i + b4 * k4i + b5 * k5i + b6 * k6i)
        r_new = rmax if last else r + h
        k7r, k7i = _riccati(model, p0, p1, k2, r_new, nr, ni)
        er = h * (e1 * k1r + e3 * k3r + e4 * k4r + e5 * k5r + e6 * k6r + e7 * k7r)
        ei = h * (e1 * k1i + e3 * k3i + e4 * k4i + e5 * k5i + e6 * k6i + e7 * k7i)
        # error measured on the complex modulus, relative to |d|
        scale = atol + rtol * max(math.sqrt(cr * cr + ci * ci), math.sqrt(nr * nr + ni * ni))
        err = math.sqrt(er * er + ei * ei) / scale
        if err <= 1.0:
            r = r_new
            cr, ci = nr, ni
            k1r, k1i = k7r, k7i
            accepted += 1
            fac = 5.0 if err < 1e-10 else min(5.0, 0.9 * err**-0.2)
        else:
            rejected += 1
            fac = max(0.2, 0.9 * err**-0.2)
        h *= fac
    return cr, ci + _adiabatic(model, p0, p1, k2, r), r, accepted, rejected, OK


@nb.njit(cache=True, nogil=True)
def _phase_rhs(model, p0, p1, k2, r, ur, ui, vr, vi):
    W, W1, W2 = wfun(model, p0, p1, r)
    q = math.sqrt(k2 + W)
    iq = 1.0 / q
    return iq, vr * iq, vi * iq, -q * ur, -q * ui


@nb.njit(cache=True, nogil=True)
def direct_rk4_phase(model, p0, p1, k, rmin, rmax, h, ur, ui, vr, vi, max_steps):
    """Classical RK4 on (u, u') with the WKB phase t as independent variable.

    dr/dt = 1/q, du/dt = u'/q, du'/dt = -q u: every step advances the phase
    by exactly h radians, so the grid is uniform in local wavelengths.
    Stops at the first node with r >= rmax.
    Returns (r, u_re, u_im, v_re, v_im, steps, status).
    """
    k2 = k * k
    r = rmin
    n = 0
    while r < rmax:
        if n >= max_steps:
            return r, ur, ui, vr, vi, n, MAX_STEPS
        a0, a1, a2, a3, a4 = _phase_rhs(model, p0, p1, k2, r, ur, ui, vr, vi)
        hh = 0.5 * h
        b0, b1, b2, b3, b4 = _phase_rhs(
            model, p0, p1, k2, r + hh * a0, ur + hh * a1, ui + hh * a2, vr + hh * a3, vi + hh * a4
        )
        c0, c1, c2, c3, c4 = _phase_rhs(
            model, p0, p1, k2, r + hh * b0, ur + hh * b1, ui + hh * b2, vr + hh * b3, vi + hh * b4
        )
        d0, d1, d2, d3, d4 = _phase_rhs(
            model, p0, p1, k2, r + h * c0, ur + h * c1, ui + h * c2, vr + h * c3, vi + h * c4
        )
        s = h / 6.0
        r += s * (a0 + 2.0 * b0 + 2.0 * c0 + d0)
        ur += s * (a1 + 2.0 * b1 + 2.0 * c1 + d1)
        ui += s * (a2 + 2.0 * b2 + 2.0 * c2 + d2)
        vr += s * (a3 + 2.0 * b3 + 2.0 * c3 + d3)
        vi += s * (a4 + 2.0 * b4 + 2.0 * c4 + d4)
        n += 1
    return r, ur, ui, vr, vi, n, OK
