"""Compiled right-hand side and integrators.

Everything here operates on a flattened description of a Hamiltonian
(see ``CompiledSystem`` in :mod:`stirap_lab.propagator`) so the whole step
loop runs without the interpreter and without holding the GIL.

State layout: ``y[:n]`` are the complex amplitudes, ``y[n:]`` are the
cumulative per-level losses ``2 gamma_k int |c_k|^2`` (stored as complex with
zero imaginary part so that a single vector is integrated).
"""

import math

import numpy as np
from numba import njit

GAUSSIAN = 0
SIN_SQUARED = 1
CONSTANT = 2
SQUARE = 3
NUMERIC = 4

STATUS_OK = 0
STATUS_STIFF = 1
STATUS_NONFINITE = 2
STATUS_MAX_STEPS = 3

# Dormand-Prince 5(4) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = np.array(
    [
        [0.0, 0.0, 0.0, 0.0, 0.0],
        [1 / 5, 0.0, 0.0, 0.0, 0.0],
        [3 / 40, 9 / 40, 0.0, 0.0, 0.0],
        [44 / 45, -56 / 15, 32 / 9, 0.0, 0.0],
        [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0],
        [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    ]
)
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# Difference between the 5th and embedded 4th order weights (7 stages, FSAL).
_E = np.array(
    [-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40]
)
# Free 4th-order continuous extension: y(t + th*h) = y + h * K.T @ P @ [th, th^2, th^3, th^4].
_P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)


@njit(cache=True, nogil=True)
def envelope(kind, peak, center, width, t):
    """Real envelope of an analytic pulse shape at ``t``."""
    if kind == GAUSSIAN:
        x = (t - center) / width
        return peak * math.exp(-x * x)
    if kind == SIN_SQUARED:
        u = (t - center) / width
        if u < -0.5 or u > 0.5:
            return 0.0
        c = math.cos(math.pi * u)
        return peak * c * c
    if kind == CONSTANT:
        return peak
    if kind == SQUARE:
        u = (t - center) / width
        if u >= -0.5 and u < 0.5:
            return peak
        return 0.0
    return math.nan


@njit(cache=True, nogil=True)
def envelope_rate(kind, peak, center, width, t):
    """Time derivative of :func:`envelope` (zero on the flat parts of a Square)."""
    if kind == GAUSSIAN:
        x = (t - center) / width
        return -2.0 * x / width * peak * math.exp(-x * x)
    if kind == SIN_SQUARED:
        u = (t - center) / width
        if u < -0.5 or u > 0.5:
            return 0.0
        return -peak * math.pi / width * math.sin(2.0 * math.pi * u)
    if kind == CONSTANT or kind == SQUARE:
        return 0.0
    return math.nan


@njit(cache=True, nogil=True)
def _spline_interval(knots, kstart, count, t):
    lo = 0
    hi = count
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if knots[kstart + mid] <= t:
            lo = mid
        else:
            hi = mid
    return lo


@njit(cache=True, nogil=True)
def spline_value(knots, coefs, kstart, cstart, count, t):
    """Piecewise-cubic value; zero outside the sampled range."""
    if t < knots[kstart] or t > knots[kstart + count]:
        return 0.0 + 0.0j
    i = _spline_interval(knots, kstart, count, t)
    dx = t - knots[kstart + i]
    j = cstart + i
    return ((coefs[0, j] * dx + coefs[1, j]) * dx + coefs[2, j]) * dx + coefs[3, j]


@njit(cache=True, nogil=True)
def spline_rate(knots, coefs, kstart, cstart, count, t):
    if t < knots[kstart] or t > knots[kstart + count]:
        return 0.0 + 0.0j
    i = _spline_interval(knots, kstart, count, t)
    dx = t - knots[kstart + i]
    j = cstart + i
    return (3.0 * coefs[0, j] * dx + 2.0 * coefs[1, j]) * dx + coefs[2, j]


@njit(cache=True, nogil=True)
def envelope_array(kind, peak, center, width, ts):
    out = np.empty(ts.size)
    for i in range(ts.size):
        out[i] = envelope(kind, peak, center, width, ts[i])
    return out


@njit(cache=True, nogil=True)
def envelope_rate_array(kind, peak, center, width, ts):
    out = np.empty(ts.size)
    for i in range(ts.size):
        out[i] = envelope_rate(kind, peak, center, width, ts[i])
    return out


@njit(cache=True, nogil=True)
def spline_array(knots, coefs, ts, derivative):
    count = knots.size - 1
    out = np.empty(ts.size, dtype=np.complex128)
    for i in range(ts.size):
        if derivative:
            out[i] = spline_rate(knots, coefs, 0, 0, count, ts[i])
        else:
            out[i] = spline_value(knots, coefs, 0, 0, count, ts[i])
    return out


@njit(cache=True, nogil=True)
def _term_amplitude(m, t, kinds, params, nidx, knots, coefs, kstarts, cstarts, counts):
    # params columns: peak, center, width, phase, scale, origin
    tt = t - params[m, 5]
    ph = params[m, 3]
    rot = complex(math.cos(ph), math.sin(ph))
    if kinds[m] == NUMERIC:
        k = nidx[m]
        val = spline_value(knots, coefs, kstarts[k], cstarts[k], counts[k], tt)
    else:
        val = envelope(kinds[m], params[m, 0], params[m, 1], params[m, 2], tt) + 0.0j
    return 0.5 * params[m, 4] * val * rot


@njit(cache=True, nogil=True)
def rhs(t, y, out, n, diag, gammas, rows, cols, kinds, params, nidx, knots, coefs,
        kstarts, cstarts, counts):
    for k in range(n):
        out[k] = -1j * diag[k] * y[k]
        out[n + k] = 2.0 * gammas[k] * (y[k].real * y[k].real + y[k].imag * y[k].imag)
    for m in range(rows.size):
        a = _term_amplitude(m, t, kinds, params, nidx, knots, coefs, kstarts, cstarts, counts)
        r = rows[m]
        c = cols[m]
        out[r] += -1j * a * y[c]
        out[c] += -1j * a.conjugate() * y[r]


@njit(cache=True, nogil=True)
def hamiltonian_at(t, n, diag, rows, cols, kinds, params, nidx, knots, coefs,
                   kstarts, cstarts, counts):
    h = np.zeros((n, n), dtype=np.complex128)
    for k in range(n):
        h[k, k] = diag[k]
    for m in range(rows.size):
        a = _term_amplitude(m, t, kinds, params, nidx, knots, coefs, kstarts, cstarts, counts)
        h[rows[m], cols[m]] += a
        h[cols[m], rows[m]] += a.conjugate()
    return h


@njit(cache=True, nogil=True)
def _rms_scaled(v, scale):
    s = 0.0
    for i in range(v.size):
        x = abs(v[i]) / scale[i]
        s += x * x
    return math.sqrt(s / v.size)


@njit(cache=True, nogil=True)
def integrate_dopri(t0, t1, y0, n_samples, rtol, atol, max_step, max_steps, n, diag,
                    gammas, rows, cols, kinds, params, nidx, knots, coefs, kstarts,
                    cstarts, counts):
    """Adaptive Dormand-Prince 5(4) with dense output on an even sample grid.

    Returns ``(samples, n_accepted, n_rejected, status, t_status)``.
    """
    dim = y0.size
    out = np.zeros((n_samples, dim), dtype=np.complex128)
    out[0, :] = y0
    span = t1 - t0
    dt_sample = span / (n_samples - 1)

    K = np.empty((7, dim), dtype=np.complex128)
    ytmp = np.empty(dim, dtype=np.complex128)
    ynew = np.empty(dim, dtype=np.complex128)
    err = np.empty(dim, dtype=np.complex128)
    scale = np.empty(dim)
    y = y0.copy()
    t = t0

    rhs(t, y, K[0], n, diag, gammas, rows, cols, kinds, params, nidx, knots, coefs,
        kstarts, cstarts, counts)

    # Initial step (Hairer, Norsett & Wanner, II.4).
    for i in range(dim):
        scale[i] = atol + abs(y[i]) * rtol
    d0 = _rms_scaled(y, scale)
    d1 = _rms_scaled(K[0], scale)
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, span)
    for i in range(dim):
        ytmp[i] = y[i] + h0 * K[0, i]
    rhs(t + h0, ytmp, K[1], n, diag, gammas, rows, cols, kinds, params, nidx, knots,
        coefs, kstarts, cstarts, counts)
    for i in range(dim):
        err[i] = K[1, i] - K[0, i]
    d2 = _rms_scaled(err, scale) / h0
    dmax = max(d1, d2)
    if dmax <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / dmax) ** 0.2
    h = min(100.0 * h0, h1, max_step)

    n_acc = 0
    n_rej = 0
    isample = 1
    rejected_last = False
    eps = 2.220446049250313e-16
    while isample < n_samples:
        if n_acc + n_rej >= max_steps:
            return out, n_acc, n_rej, STATUS_MAX_STEPS, t
        min_step = 16.0 * eps * max(abs(t), abs(span))
        if h < min_step:
            return out, n_acc, n_rej, STATUS_STIFF, t
        if h > max_step:
            h = max_step
        last = False
        if t + h >= t1 - 1e-13 * abs(span):
            h = t1 - t
            last = True

        for s in range(1, 6):
            for i in range(dim):
                acc = 0.0 + 0.0j
                for j in range(s):
                    acc += _A[s, j] * K[j, i]
                ytmp[i] = y[i] + h * acc
            rhs(t + _C[s] * h, ytmp, K[s], n, diag, gammas, rows, cols, kinds, params,
                nidx, knots, coefs, kstarts, cstarts, counts)
        for i in range(dim):
            acc = 0.0 + 0.0j
            for j in range(6):
                acc += _B[j] * K[j, i]
            ynew[i] = y[i] + h * acc
        t_new = t1 if last else t + h
        rhs(t_new, ynew, K[6], n, diag, gammas, rows, cols, kinds, params, nidx, knots,
            coefs, kstarts, cstarts, counts)
        for i in range(dim):
            acc = 0.0 + 0.0j
            for j in range(7):
                acc += _E[j] * K[j, i]
            err[i] = h * acc
            scale[i] = atol + max(abs(y[i]), abs(ynew[i])) * rtol
        err_norm = _rms_scaled(err, scale)
        if not math.isfinite(err_norm):
            return out, n_acc, n_rej, STATUS_NONFINITE, t

        if err_norm <= 1.0:
            while isample < n_samples:
                ts = t0 + isample * dt_sample
                if isample == n_samples - 1:
                    ts = t1
                if ts > t_new:
                    break
                theta = (ts - t) / h
                if theta >= 1.0 - 1e-14:
                    out[isample, :] = ynew
                else:
                    th2 = theta * theta
                    for i in range(dim):
                        acc = 0.0 + 0.0j
                        for j in range(7):
                            q = (_P[j, 0] * theta + _P[j, 1] * th2 + _P[j, 2] * th2 * theta
                                 + _P[j, 3] * th2 * th2)
                            acc += q * K[j, i]
                        out[isample, i] = y[i] + h * acc
                isample += 1
            if err_norm == 0.0:
                factor = 10.0
            else:
                factor = min(10.0, 0.9 * err_norm ** -0.2)
            if rejected_last:
                factor = min(1.0, factor)
            t = t_new
            for i in range(dim):
                y[i] = ynew[i]
                K[0, i] = K[6, i]
            n_acc += 1
            rejected_last = False
            h = h * factor
        else:
            h = h * max(0.2, 0.9 * err_norm ** -0.2)
            n_rej += 1
            rejected_last = True
    return out, n_acc, n_rej, STATUS_OK, t


@njit(cache=True, nogil=True)
def integrate_rk4(t0, t1, y0, n_samples, steps_per_sample, n, diag, gammas, rows, cols,
                  kinds, params, nidx, knots, coefs, kstarts, cstarts, counts):
    """Classical fixed-step RK4; samples land exactly on step boundaries."""
    dim = y0.size
    out = np.zeros((n_samples, dim), dtype=np.complex128)
    out[0, :] = y0
    n_steps = (n_samples - 1) * steps_per_sample
    h = (t1 - t0) / n_steps
    k1 = np.empty(dim, dtype=np.complex128)
    k2 = np.empty(dim, dtype=np.complex128)
    k3 = np.empty(dim, dtype=np.complex128)
    k4 = np.empty(dim, dtype=np.complex128)
    ytmp = np.empty(dim, dtype=np.complex128)
    y = y0.copy()
    for step in range(n_steps):
        t = t0 + step * h
        rhs(t, y, k1, n, diag, gammas, rows, cols, kinds, params, nidx, knots, coefs,
            kstarts, cstarts, counts)
        for i in range(dim):
            ytmp[i] = y[i] + 0.5 * h * k1[i]
        rhs(t + 0.5 * h, ytmp, k2, n, diag, gammas, rows, cols, kinds, params, nidx,
            knots, coefs, kstarts, cstarts, counts)
        for i in range(dim):
            ytmp[i] = y[i] + 0.5 * h * k2[i]
        rhs(t + 0.5 * h, ytmp, k3, n, diag, gammas, rows, cols, kinds, params, nidx,
            knots, coefs, kstarts, cstarts, counts)
        for i in range(dim):
            ytmp[i] = y[i] + h * k3[i]
        rhs(t + h, ytmp, k4, n, diag, gammas, rows, cols, kinds, params, nidx, knots,
            coefs, kstarts, cstarts, counts)
        finite = True
        for i in range(dim):
            y[i] = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if not (math.isfinite(y[i].real) and math.isfinite(y[i].imag)):
                finite = False
        if not finite:
            return out, step, 0, STATUS_NONFINITE, t
        if (step + 1) % steps_per_sample == 0:
            out[(step + 1) // steps_per_sample, :] = y
    return out, n_steps, 0, STATUS_OK, t1
