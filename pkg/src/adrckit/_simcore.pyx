# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled integration backend: literal four-stage RK4 for ds/dt = F s + g."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BLOWUP_LIMIT = 1e9

cdef double _BLOWUP = 1e9


cdef class Integrator:
    """Fixed-step RK4 propagator for ds/dt = F s + g, constant g."""

    cdef double[:, ::1] F
    cdef double dt
    cdef Py_ssize_t n
    cdef double[::1] k1, k2, k3, k4, tmp

    def __init__(self, F, double dt):
        Fa = np.ascontiguousarray(F, dtype=np.float64)
        self.F = Fa
        self.dt = dt
        self.n = Fa.shape[0]
        self.k1 = np.empty(self.n)
        self.k2 = np.empty(self.n)
        self.k3 = np.empty(self.n)
        self.k4 = np.empty(self.n)
        self.tmp = np.empty(self.n)

    cdef void _field(self, double[::1] s, double[::1] g, double[::1] out) nogil:
        cdef Py_ssize_t i, j
        cdef double acc
        for i in range(self.n):
            acc = g[i]
            for j in range(self.n):
                acc += self.F[i, j] * s[j]
            out[i] = acc

    def run(self, double[::1] g, double[::1] s, double[:, ::1] out,
            Py_ssize_t start, Py_ssize_t nsteps):
        """Advance nsteps, writing rows start+1..start+nsteps of out.

        Mutates s in place.  Returns -1, or the row index at which the
        state first exceeded the blowup limit (integration stops there).
        """
        cdef Py_ssize_t i, step
        cdef Py_ssize_t status = -1
        cdef double h = self.dt
        cdef double half = h / 2.0
        cdef double sixth = h / 6.0
        cdef double amax, v
        with nogil:
            for step in range(nsteps):
                self._field(s, g, self.k1)
                for i in range(self.n):
                    self.tmp[i] = s[i] + half * self.k1[i]
                self._field(self.tmp, g, self.k2)
                for i in range(self.n):
                    self.tmp[i] = s[i] + half * self.k2[i]
                self._field(self.tmp, g, self.k3)
                for i in range(self.n):
                    self.tmp[i] = s[i] + h * self.k3[i]
                self._field(self.tmp, g, self.k4)
                amax = 0.0
                for i in range(self.n):
                    s[i] = s[i] + sixth * (self.k1[i] + 2.0 * self.k2[i]
                                           + 2.0 * self.k3[i] + self.k4[i])
                    out[start + 1 + step, i] = s[i]
                    v = s[i] if s[i] >= 0.0 else -s[i]
                    if v > amax:
                        amax = v
                if amax > _BLOWUP:
                    status = start + 1 + step
                    break
        return status
