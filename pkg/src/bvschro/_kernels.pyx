# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled propagation kernels.

Mirrors `bvschro._kernels_py` (the pure-Python reference); see that module
for the state convention and the closed-form constant-piece transfer.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, fmax, fmin, log, pow, sqrt

cdef extern from "complex.h":
    double complex csqrt(double complex) nogil
    double complex ccosh(double complex) nogil
    double complex csinh(double complex) nogil
    double complex cexp(double complex) nogil
    double cabs(double complex) nogil

from . import _rk8_tables as _rk

BACKEND = "cython"

EVENT_PIECE = 0.0
EVENT_ATOM = 1.0

cdef double[:, ::1] _TA = np.ascontiguousarray(_rk.A)
cdef double[::1] _TB = np.ascontiguousarray(_rk.B)
cdef double[::1] _TC = np.ascontiguousarray(_rk.C)
cdef double[::1] _TE3 = np.ascontiguousarray(_rk.E3)
cdef double[::1] _TE5 = np.ascontiguousarray(_rk.E5)
cdef int _NS = _rk.N_STAGES

cdef double _SAFETY = 0.9
cdef double _MIN_FACTOR = 0.2
cdef double _MAX_FACTOR = 10.0


cdef inline double complex _sinhc(double complex w) nogil:
    if cabs(w) < 1e-4:
        return 1.0 + w * w / 6.0 * (1.0 + w * w / 20.0)
    return csinh(w) / w


def propagate_events(events, y0, zs, double h):
    """Batch state propagation through an event table; see _kernels_py."""
    cdef double[:, ::1] ev = np.ascontiguousarray(events, dtype=np.float64)
    cdef cnp.ndarray[cnp.complex128_t, ndim=2] yarr = np.array(y0, dtype=np.complex128)
    cdef cnp.ndarray[cnp.complex128_t, ndim=1] zarr = np.ascontiguousarray(zs, dtype=np.complex128)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ls = np.zeros(zarr.shape[0])
    cdef Py_ssize_t nz = zarr.shape[0], ne = ev.shape[0], j, k
    cdef double complex u, p, z, a, c, q, m, w, ch, sc, ph, un, pn
    cdef double alpha, beta, b, V, dx, kind, extra, s, lsj
    with nogil:
        for j in range(nz):
            z = zarr[j]
            u = yarr[0, j]
            p = yarr[1, j]
            lsj = 0.0
            for k in range(ne):
                kind = ev[k, 0]
                if kind == 0.0:
                    dx = ev[k, 1]
                    alpha = ev[k, 2]
                    beta = ev[k, 3]
                    b = ev[k, 4]
                    V = ev[k, 5]
                    a = -1j * b / (h * alpha)
                    c = 1.0 / (h * h * alpha)
                    q = (V - z) / beta - b * b / alpha
                    m = csqrt(c * q)
                    w = m * dx
                    ch = ccosh(w)
                    sc = _sinhc(w) * dx
                    ph = cexp(a * dx)
                    un = ph * (ch * u + sc * c * p)
                    pn = ph * (sc * q * u + ch * p)
                    u = un
                    p = pn
                else:
                    p = p + ev[k, 6] * u
                s = fmax(cabs(u), cabs(p))
                if s > 0.0:
                    u /= s
                    p /= s
                    lsj += log(s)
            yarr[0, j] = u
            yarr[1, j] = p
            ls[j] = lsj
    return yarr, ls


cdef inline double complex _pv(double[::1] c, double x) nogil:
    cdef double out = 0.0
    cdef Py_ssize_t k
    for k in range(c.shape[0] - 1, -1, -1):
        out = out * x + c[k]
    return out


cdef inline void _rhs(double x, double complex u, double complex p,
                      double[::1] ca, double[::1] cbeta, double[::1] cb,
                      double[::1] cV, double complex z, double h,
                      double complex *fu, double complex *fp) nogil:
    cdef double alpha = _pv(ca, x).real
    cdef double beta = _pv(cbeta, x).real
    cdef double b = _pv(cb, x).real
    cdef double V = _pv(cV, x).real
    cdef double complex a = -1j * b / (h * alpha)
    cdef double complex c = 1.0 / (h * h * alpha)
    cdef double complex q = (V - z) / beta - b * b / alpha
    fu[0] = a * u + c * p
    fp[0] = q * u + a * p


def rk8_piece(ca, cbeta, cb, cV, double x0, double x1,
              double complex u0, double complex p0, double complex z,
              double h, double rtol=1e-12, double atol=1e-14):
    """Adaptive order-8 step across one polynomial piece; see _kernels_py."""
    cdef double[::1] a_ = np.ascontiguousarray(ca, dtype=np.float64)
    cdef double[::1] be_ = np.ascontiguousarray(cbeta, dtype=np.float64)
    cdef double[::1] b_ = np.ascontiguousarray(cb, dtype=np.float64)
    cdef double[::1] V_ = np.ascontiguousarray(cV, dtype=np.float64)
    cdef double direction = 1.0 if x1 >= x0 else -1.0
    cdef double x = x0, span = fabs(x1 - x0)
    cdef double complex yu = u0, yp = p0, fu, fp, du, dp, ynu, ynp, fnu, fnp
    cdef double complex Ku[13]
    cdef double complex Kp[13]
    cdef double complex e5u, e5p, e3u, e3p
    cdef double hs, hstep, s0, s1, e5n, e3n, err, fac, err_sum = 0.0
    cdef int n_steps = 0
    cdef Py_ssize_t st, m
    if span == 0.0:
        return u0, p0, 0.0, 0
    _rhs(x, yu, yp, a_, be_, b_, V_, z, h, &fu, &fp)
    hs = 0.2 * span
    while direction * (x1 - x) > 0.0:
        hs = fmin(hs, fabs(x1 - x))
        if hs < 1e-14 * span:
            raise RuntimeError("step size collapsed in rk8_piece")
        hstep = hs * direction
        Ku[0] = fu
        Kp[0] = fp
        for st in range(1, _NS):
            du = 0.0
            dp = 0.0
            for m in range(st):
                du = du + _TA[st, m] * Ku[m]
                dp = dp + _TA[st, m] * Kp[m]
            _rhs(x + _TC[st] * hstep, yu + hstep * du, yp + hstep * dp,
                 a_, be_, b_, V_, z, h, &Ku[st], &Kp[st])
        du = 0.0
        dp = 0.0
        for m in range(_NS):
            du = du + _TB[m] * Ku[m]
            dp = dp + _TB[m] * Kp[m]
        ynu = yu + hstep * du
        ynp = yp + hstep * dp
        _rhs(x + hstep, ynu, ynp, a_, be_, b_, V_, z, h, &fnu, &fnp)
        Ku[_NS] = fnu
        Kp[_NS] = fnp
        s0 = atol + fmax(cabs(yu), cabs(ynu)) * rtol
        s1 = atol + fmax(cabs(yp), cabs(ynp)) * rtol
        e5u = 0.0
        e5p = 0.0
        e3u = 0.0
        e3p = 0.0
        for m in range(_NS + 1):
            e5u = e5u + _TE5[m] * Ku[m]
            e5p = e5p + _TE5[m] * Kp[m]
            e3u = e3u + _TE3[m] * Ku[m]
            e3p = e3p + _TE3[m] * Kp[m]
        e5n = (cabs(e5u) / s0) ** 2 + (cabs(e5p) / s1) ** 2
        e3n = (cabs(e3u) / s0) ** 2 + (cabs(e3p) / s1) ** 2
        if e5n == 0.0 and e3n == 0.0:
            err = 0.0
        else:
            err = fabs(hstep) * e5n / sqrt((e5n + 0.01 * e3n) * 2.0)
        if err < 1.0:
            x += hstep
            yu = ynu
            yp = ynp
            fu = fnu
            fp = fnp
            err_sum += err * (rtol + atol)
            n_steps += 1
            fac = _MAX_FACTOR if err == 0.0 else fmin(_MAX_FACTOR, _SAFETY * pow(err, -0.125))
            hs *= fac
        else:
            hs *= fmax(_MIN_FACTOR, _SAFETY * pow(err, -0.125))
    return yu, yp, err_sum, n_steps
