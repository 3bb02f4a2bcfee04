# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled time-stepping loops.

Same algorithms as the numpy reference steps in :mod:`heatchain.integrators`,
written as scalar loops over one trajectory.  Noise arrives as half-step
increments of shape (n_steps, 2, noise_dim).
"""
import numpy as np

from libc.math cimport sqrt, exp, expm1, cos, sin, fabs

from heatchain.errors import BlowUpError

DEF BLOWUP = 1e12

cdef inline double _horner(const double[::1] c, double x) noexcept nogil:
    cdef Py_ssize_t j = c.shape[0] - 1
    cdef double acc
    if j < 0:
        return 0.0
    acc = c[j]
    while j > 0:
        j -= 1
        acc = acc * x + c[j]
    return acc


cdef class ChainKernel:
    """Nearest-neighbour chain with boundary Langevin baths and optional exchange noise."""

    cdef int coords_q, N, npos, dim, nnoise, v_mode
    cdef double[::1] du, dv
    cdef double v_in, v_out, fric, sig1, sigN, gamma, sqg
    cdef double[::1] F, xn

    def __init__(self, bint coords_q, int N, du, int v_mode, dv, double v_in, double v_out,
                 double fric, double sig1, double sigN, double gamma):
        self.coords_q = coords_q
        self.N = N
        self.npos = N if coords_q else N - 1
        self.dim = self.npos + N
        self.nnoise = N + 1 if gamma > 0 else 2
        self.du = np.ascontiguousarray(du, dtype=float)
        self.v_mode = v_mode
        self.dv = np.ascontiguousarray(dv, dtype=float)
        self.v_in = v_in
        self.v_out = v_out
        self.fric = fric
        self.sig1 = sig1
        self.sigN = sigN
        self.gamma = gamma
        self.sqg = sqrt(gamma)
        self.F = np.zeros(N)
        self.xn = np.zeros(self.dim)

    cdef inline void _forces(self, double[::1] x) noexcept nogil:
        cdef int i, N = self.N, m = self.npos
        cdef double r, u, s, q
        for i in range(N):
            self.F[i] = 0.0
        for i in range(N - 1):
            if self.coords_q:
                r = x[i + 1] - x[i]
            else:
                r = x[i]
            u = _horner(self.du, r)
            self.F[i] += u
            self.F[i + 1] -= u
        if self.coords_q and self.v_mode != 0:
            for i in range(N):
                q = x[i]
                if self.v_mode == 1:
                    self.F[i] -= _horner(self.dv, q)
                else:
                    s = self.v_in * q
                    self.F[i] -= self.v_out * s / sqrt(1.0 + s * s)

    cdef inline bint _bad(self, double[::1] x) noexcept nogil:
        cdef int i
        for i in range(self.dim):
            if not (fabs(x[i]) <= BLOWUP):
                return True
        return False

    cdef void _euler(self, double[::1] x, const double[:, :, ::1] dw, Py_ssize_t n, double dt) noexcept nogil:
        cdef int i, j, N = self.N, m = self.npos
        cdef double g = self.gamma, w
        self._forces(x)
        for i in range(m):
            if self.coords_q:
                self.xn[i] = x[i] + x[m + i] * dt
            else:
                self.xn[i] = x[i] + (x[m + i + 1] - x[m + i]) * dt
        for i in range(N):
            self.xn[m + i] = x[m + i] + self.F[i] * dt
        self.xn[m] -= self.fric * x[m] * dt
        self.xn[m + N - 1] -= self.fric * x[m + N - 1] * dt
        if g > 0:
            for i in range(N):
                self.xn[m + i] -= g * x[m + i] * dt
            self.xn[m] += 0.5 * g * x[m] * dt
            self.xn[m + N - 1] += 0.5 * g * x[m + N - 1] * dt
            for j in range(1, N):
                w = dw[n, 0, j] + dw[n, 1, j]
                self.xn[m + j - 1] -= self.sqg * x[m + j] * w
                self.xn[m + j] += self.sqg * x[m + j - 1] * w
        self.xn[m] += self.sig1 * (dw[n, 0, 0] + dw[n, 1, 0])
        self.xn[m + N - 1] += self.sigN * (dw[n, 0, self.nnoise - 1] + dw[n, 1, self.nnoise - 1])
        for i in range(self.dim):
            x[i] = self.xn[i]

    cdef inline void _ou(self, double[::1] x, const double[:, :, ::1] dw, Py_ssize_t n, int half, double h) noexcept nogil:
        cdef int m = self.npos, N = self.N
        cdef double c = self.fric, decay, amp1, ampN
        if c > 0:
            decay = exp(-c * h)
            amp1 = self.sig1 * sqrt(-expm1(-2.0 * c * h) / (2.0 * c * h))
            ampN = self.sigN * sqrt(-expm1(-2.0 * c * h) / (2.0 * c * h))
        else:
            decay = 1.0
            amp1 = self.sig1
            ampN = self.sigN
        x[m] = decay * x[m] + amp1 * dw[n, half, 0]
        x[m + N - 1] = decay * x[m + N - 1] + ampN * dw[n, half, self.nnoise - 1]

    cdef inline void _rotate(self, double[::1] x, int j, double theta) noexcept nogil:
        cdef int m = self.npos
        cdef double a = x[m + j - 1], b = x[m + j], c = cos(theta), s = sin(theta)
        x[m + j - 1] = c * a - s * b
        x[m + j] = s * a + c * b

    cdef void _verlet(self, double[::1] x, double dt) noexcept nogil:
        cdef int i, N = self.N, m = self.npos
        cdef double h = 0.5 * dt
        self._forces(x)
        for i in range(N):
            x[m + i] += h * self.F[i]
        for i in range(m):
            if self.coords_q:
                x[i] += dt * x[m + i]
            else:
                x[i] += dt * (x[m + i + 1] - x[m + i])
        self._forces(x)
        for i in range(N):
            x[m + i] += h * self.F[i]

    cdef void _split(self, double[::1] x, const double[:, :, ::1] dw, Py_ssize_t n, double dt) noexcept nogil:
        cdef int j, N = self.N
        cdef double h = 0.5 * dt
        self._ou(x, dw, n, 0, h)
        if self.gamma > 0:
            for j in range(1, N):
                self._rotate(x, j, self.sqg * dw[n, 0, j])
        self._verlet(x, dt)
        if self.gamma > 0:
            for j in range(N - 1, 0, -1):
                self._rotate(x, j, self.sqg * dw[n, 1, j])
        self._ou(x, dw, n, 1, h)

    def run(self, double[::1] x, const double[:, :, ::1] dw, double dt, int scheme,
            long step0, long record_every, double[:, ::1] out, long out_pos):
        """Advance ``x`` in place over all rows of ``dw``; returns the next record slot."""
        cdef Py_ssize_t n, i, nsteps = dw.shape[0]
        cdef bint bad = False
        with nogil:
            for n in range(nsteps):
                if scheme == 0:
                    self._euler(x, dw, n, dt)
                else:
                    self._split(x, dw, n, dt)
                if self._bad(x):
                    bad = True
                    break
                if (step0 + n + 1) % record_every == 0:
                    for i in range(self.dim):
                        out[out_pos, i] = x[i]
                    out_pos += 1
        if bad:
            raise BlowUpError(step0 + n, np.asarray(x).copy())
        return out_pos


cdef class LinearKernel:
    """dx = A x dt + B dW by Euler-Maruyama."""

    cdef double[:, ::1] A, B
    cdef double[::1] xn
    cdef int dim, nnoise

    def __init__(self, A, B):
        self.A = np.ascontiguousarray(A, dtype=float)
        self.B = np.ascontiguousarray(B, dtype=float)
        self.dim = self.A.shape[0]
        self.nnoise = self.B.shape[1]
        self.xn = np.zeros(self.dim)

    def run(self, double[::1] x, const double[:, :, ::1] dw, double dt, int scheme,
            long step0, long record_every, double[:, ::1] out, long out_pos):
        cdef Py_ssize_t n, i, j, nsteps = dw.shape[0]
        cdef double acc
        cdef bint bad = False
        with nogil:
            for n in range(nsteps):
                for i in range(self.dim):
                    acc = 0.0
                    for j in range(self.dim):
                        acc = acc + self.A[i, j] * x[j]
                    self.xn[i] = x[i] + acc * dt
                    for j in range(self.nnoise):
                        self.xn[i] += self.B[i, j] * (dw[n, 0, j] + dw[n, 1, j])
                for i in range(self.dim):
                    x[i] = self.xn[i]
                    if not (fabs(x[i]) <= BLOWUP):
                        bad = True
                if bad:
                    break
                if (step0 + n + 1) % record_every == 0:
                    for i in range(self.dim):
                        out[out_pos, i] = x[i]
                    out_pos += 1
        if bad:
            raise BlowUpError(step0 + n, np.asarray(x).copy())
        return out_pos
