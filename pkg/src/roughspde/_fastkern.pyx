# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twin of `_slowkern`: tight C loops for the per-slab stepping kernels."""

import numpy as np

cimport numpy as cnp

BACKEND = "compiled"


def heat_chain(double[::1] u0, double[::1] decay, double[::1] gain, double[:, ::1] forcing):
    """Propagate u through all slabs of `forcing`: u <- u * decay + forcing[i] * gain."""
    cdef Py_ssize_t m = forcing.shape[0]
    cdef Py_ssize_t n = forcing.shape[1]
    out = np.array(u0, dtype=np.float64, copy=True)
    cdef double[::1] u = out
    cdef Py_ssize_t i, a
    for i in range(m):
        for a in range(n):
            u[a] = u[a] * decay[a] + forcing[i, a] * gain[a]
    return out


def wave_chain(double[::1] u0, double[::1] v0, double[::1] cos_k, double[::1] sinc_k,
               double[::1] msin_k, double[::1] gain_u, double[::1] gain_v,
               double[:, ::1] forcing):
    """Rotate (u, v) through all slabs with per-slab-constant forcing."""
    cdef Py_ssize_t m = forcing.shape[0]
    cdef Py_ssize_t n = forcing.shape[1]
    out_u = np.array(u0, dtype=np.float64, copy=True)
    out_v = np.array(v0, dtype=np.float64, copy=True)
    cdef double[::1] u = out_u
    cdef double[::1] v = out_v
    cdef Py_ssize_t i, a
    cdef double un, f
    for i in range(m):
        for a in range(n):
            f = forcing[i, a]
            un = cos_k[a] * u[a] + sinc_k[a] * v[a] + f * gain_u[a]
            v[a] = msin_k[a] * u[a] + cos_k[a] * v[a] + f * gain_v[a]
            u[a] = un
    return out_u, out_v


cdef class FemStepper:
    """Semi-implicit Euler stepper: (M + delta A) u+ = M u + delta load.

    Thomas factorization of the symmetric tridiagonal system, computed once.
    """

    cdef double[::1] mass_main, mass_off, sys_off, cp, inv_den
    cdef double delta
    cdef Py_ssize_t nn

    def __init__(self, mass_main, mass_off, sys_main, sys_off, delta):
        self.mass_main = np.ascontiguousarray(mass_main, dtype=np.float64)
        self.mass_off = np.ascontiguousarray(mass_off, dtype=np.float64)
        self.sys_off = np.ascontiguousarray(sys_off, dtype=np.float64)
        cdef double[::1] main = np.ascontiguousarray(sys_main, dtype=np.float64)
        self.delta = delta
        self.nn = main.shape[0]
        self.cp = np.empty(self.nn)
        self.inv_den = np.empty(self.nn)
        cdef Py_ssize_t i
        self.inv_den[0] = 1.0 / main[0]
        if self.nn > 1:
            self.cp[0] = self.sys_off[0] * self.inv_den[0]
        for i in range(1, self.nn):
            self.inv_den[i] = 1.0 / (main[i] - self.sys_off[i - 1] * self.cp[i - 1])
            if i < self.nn - 1:
                self.cp[i] = self.sys_off[i] * self.inv_den[i]

    cdef void _advance(self, double[::1] u, double[::1] load, double[::1] work) nogil:
        cdef Py_ssize_t i
        cdef Py_ssize_t nn = self.nn
        # rhs = M u + delta * load, forward sweep stored in work
        for i in range(nn):
            work[i] = self.mass_main[i] * u[i] + self.delta * load[i]
        for i in range(1, nn):
            work[i] += self.mass_off[i - 1] * u[i - 1]
        for i in range(nn - 1):
            work[i] += self.mass_off[i] * u[i + 1]
        work[0] *= self.inv_den[0]
        for i in range(1, nn):
            work[i] = (work[i] - self.sys_off[i - 1] * work[i - 1]) * self.inv_den[i]
        u[nn - 1] = work[nn - 1]
        for i in range(nn - 2, -1, -1):
            u[i] = work[i] - self.cp[i] * u[i + 1]

    def step(self, u, load):
        """One substep: returns (M + delta A)^{-1} (M u + delta load)."""
        out = np.array(u, dtype=np.float64, copy=True)
        cdef double[::1] uv = out
        cdef double[::1] lv = np.ascontiguousarray(load, dtype=np.float64)
        work = np.empty(self.nn)
        cdef double[::1] wv = work
        self._advance(uv, lv, wv)
        return out

    def chain(self, u0, loads, int substeps):
        """All slabs, `substeps` substeps each, load held constant within a slab."""
        out = np.array(u0, dtype=np.float64, copy=True)
        cdef double[::1] u = out
        cdef double[:, ::1] lv = np.ascontiguousarray(loads, dtype=np.float64)
        work = np.empty(self.nn)
        cdef double[::1] wv = work
        cdef Py_ssize_t i, s
        cdef Py_ssize_t m = lv.shape[0]
        with nogil:
            for i in range(m):
                for s in range(substeps):
                    self._advance(u, lv[i], wv)
        return out
