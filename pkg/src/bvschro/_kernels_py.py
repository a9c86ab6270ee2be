"""Pure-Python/numpy fallback for the propagation hot kernels.

Same call signatures as the compiled extension `bvschro._kernels`:

* `propagate_events` pushes a batch of (u, p) states through an ordered event
  table (constant-coefficient intervals and point-mass jumps), renormalizing
  after every event and accumulating the log of the removed scale.
* `rk8_piece` integrates the homogeneous first-order system across one
  polynomial-coefficient interval with an adaptive 12-stage order-8 stepper.

State convention: y = (u, p) with p = h^2*alpha*u' + i*h*b*u.  On a piece
where alpha, beta, b, V are constant the system y' = A y has

    A = [[-i*b/(h*alpha), 1/(h^2*alpha)],
         [(V - z)/beta - b^2/alpha, -i*b/(h*alpha)]]

and exp(A*dx) = e^{a*dx} (cosh(m*dx) I + sinh(m*dx)/m * (A - a I)) with
a = -i*b/(h*alpha) and m^2 = ((V - z)/beta - b^2/alpha) / (h^2*alpha).
"""

from __future__ import annotations

import numpy as np

from . import _rk8_tables as _rk

BACKEND = "python"

EVENT_PIECE = 0.0
EVENT_ATOM = 1.0

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_ERROR_EXP = -1.0 / 8.0


def _sinhc(w):
    """sinh(w)/w, stable near w = 0."""
    w = np.asarray(w, dtype=complex)
    out = np.empty_like(w)
    small = np.abs(w) < 1e-4
    ws = w[small]
    out[small] = 1.0 + ws * ws / 6.0 * (1.0 + ws * ws / 20.0)
    out[~small] = np.sinh(w[~small]) / w[~small]
    return out


def piece_transfer(alpha, beta, b, V, z, h, dx):
    """2x2 transfer matrix over a constant piece; z may be an array."""
    z = np.asarray(z, dtype=complex)
    a = -1j * b / (h * alpha)
    c = 1.0 / (h * h * alpha)
    q = (V - z) / beta - b * b / alpha
    m = np.sqrt(c * q + 0j)
    w = m * dx
    ch = np.cosh(w)
    sc = _sinhc(w) * dx
    ph = np.exp(a * dx)
    T = np.empty((2, 2) + z.shape, dtype=complex)
    T[0, 0] = ph * ch
    T[0, 1] = ph * sc * c
    T[1, 0] = ph * sc * q
    T[1, 1] = ph * ch
    return T


def propagate_events(events, y0, zs, h):
    """Push states through the event table for every z in the batch.

    events: (L, 7) float array, rows [kind, width, alpha, beta, b, V, extra].
    y0: (2, NZ) complex initial states.  Returns (y, logscale).
    """
    events = np.asarray(events, dtype=float)
    zs = np.asarray(zs, dtype=complex)
    y = np.array(y0, dtype=complex, copy=True)
    logscale = np.zeros(zs.shape, dtype=float)
    for row in events:
        kind = row[0]
        if kind == EVENT_PIECE:
            T = piece_transfer(row[2], row[3], row[4], row[5], zs, h, row[1])
            u = T[0, 0] * y[0] + T[0, 1] * y[1]
            p = T[1, 0] * y[0] + T[1, 1] * y[1]
            y[0], y[1] = u, p
        elif kind == EVENT_ATOM:
            y[1] = y[1] + row[6] * y[0]
        else:
            raise ValueError(f"unknown event kind {kind}")
        s = np.maximum(np.abs(y[0]), np.abs(y[1]))
        ok = s > 0
        y[:, ok] /= s[ok]
        logscale[ok] += np.log(s[ok])
    return y, logscale


def _polyval(c, x):
    out = 0.0
    for k in range(len(c) - 1, -1, -1):
        out = out * x + c[k]
    return out


def _rhs(x, y, ca, cbeta, cb, cV, z, h):
    alpha = _polyval(ca, x)
    beta = _polyval(cbeta, x)
    b = _polyval(cb, x)
    V = _polyval(cV, x)
    a = -1j * b / (h * alpha)
    c = 1.0 / (h * h * alpha)
    q = (V - z) / beta - b * b / alpha
    return np.array([a * y[0] + c * y[1], q * y[0] + a * y[1]])


def rk8_piece(ca, cbeta, cb, cV, x0, x1, u0, p0, z, h, rtol=1e-12, atol=1e-14):
    """Adaptive order-8 integration of the homogeneous system over [x0, x1].

    Returns (u1, p1, err_sum, n_steps).  err_sum accumulates the accepted
    local error-norm estimates (a one-sided defect proxy).
    """
    A, B, C, E3, E5 = _rk.A, _rk.B, _rk.C, _rk.E3, _rk.E5
    ns = _rk.N_STAGES
    direction = 1.0 if x1 >= x0 else -1.0
    x = float(x0)
    y = np.array([u0, p0], dtype=complex)
    f = _rhs(x, y, ca, cbeta, cb, cV, z, h)
    span = abs(x1 - x0)
    if span == 0:
        return y[0], y[1], 0.0, 0
    hs = 0.2 * span
    err_sum = 0.0
    n_steps = 0
    K = np.zeros((ns + 1, 2), dtype=complex)
    while direction * (x1 - x) > 0:
        hs = min(hs, abs(x1 - x))
        if hs < 1e-14 * span:
            raise RuntimeError("step size collapsed in rk8_piece")
        hstep = hs * direction
        K[0] = f
        for s in range(1, ns):
            dy = (K[:s].T @ A[s, :s]) * hstep
            K[s] = _rhs(x + C[s] * hstep, y + dy, ca, cbeta, cb, cV, z, h)
        y_new = y + hstep * (K[:ns].T @ B)
        f_new = _rhs(x + hstep, y_new, ca, cbeta, cb, cV, z, h)
        K[ns] = f_new
        scale = atol + np.maximum(np.abs(y), np.abs(y_new)) * rtol
        err5 = (K.T @ E5) / scale
        err3 = (K.T @ E3) / scale
        e5 = np.linalg.norm(err5) ** 2
        e3 = np.linalg.norm(err3) ** 2
        if e5 == 0.0 and e3 == 0.0:
            err = 0.0
        else:
            err = abs(hstep) * e5 / np.sqrt((e5 + 0.01 * e3) * 2.0)
        if err < 1.0:
            x += hstep
            y = y_new
            f = f_new
            err_sum += err * (rtol + atol)
            n_steps += 1
            fac = _MAX_FACTOR if err == 0.0 else min(_MAX_FACTOR, _SAFETY * err ** _ERROR_EXP)
            hs *= fac
        else:
            hs *= max(_MIN_FACTOR, _SAFETY * err ** _ERROR_EXP)
    return y[0], y[1], err_sum, n_steps
