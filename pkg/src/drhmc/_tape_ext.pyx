# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled reverse-mode tape; drop-in replacement for ``_tape_py.Tape``."""
from libc.math cimport sqrt, isfinite
from libc.stdlib cimport malloc, realloc, free

import numpy as np
cimport numpy as cnp

from .errors import NotSPDError

cnp.import_array()

BACKEND = "cython"

ctypedef cnp.int64_t idx_t


cdef class Tape:
    cdef double* val
    cdef double* d0
    cdef double* d1
    cdef idx_t* a0
    cdef idx_t* a1
    cdef Py_ssize_t cap
    cdef public Py_ssize_t n

    def __cinit__(self, capacity=256):
        self.cap = max(<Py_ssize_t>capacity, 16)
        self.n = 0
        self.val = <double*>malloc(self.cap * sizeof(double))
        self.d0 = <double*>malloc(self.cap * sizeof(double))
        self.d1 = <double*>malloc(self.cap * sizeof(double))
        self.a0 = <idx_t*>malloc(self.cap * sizeof(idx_t))
        self.a1 = <idx_t*>malloc(self.cap * sizeof(idx_t))
        if not (self.val and self.d0 and self.d1 and self.a0 and self.a1):
            raise MemoryError()

    def __dealloc__(self):
        free(self.val)
        free(self.d0)
        free(self.d1)
        free(self.a0)
        free(self.a1)

    def __len__(self):
        return self.n

    def reset(self):
        self.n = 0

    cdef void _grow(self, Py_ssize_t k) except *:
        cdef Py_ssize_t need = self.n + k
        cdef Py_ssize_t new
        if need <= self.cap:
            return
        new = max(need, 2 * self.cap)
        self.val = <double*>realloc(self.val, new * sizeof(double))
        self.d0 = <double*>realloc(self.d0, new * sizeof(double))
        self.d1 = <double*>realloc(self.d1, new * sizeof(double))
        self.a0 = <idx_t*>realloc(self.a0, new * sizeof(idx_t))
        self.a1 = <idx_t*>realloc(self.a1, new * sizeof(idx_t))
        if not (self.val and self.d0 and self.d1 and self.a0 and self.a1):
            raise MemoryError()
        self.cap = new

    cdef inline void _push(self, double v, idx_t p0, idx_t p1, double q0, double q1):
        cdef Py_ssize_t i = self.n
        self.val[i] = v
        self.a0[i] = p0
        self.a1[i] = p1
        self.d0[i] = q0
        self.d1[i] = q1
        self.n = i + 1

    # ------------------------------------------------------------------ nodes
    def input(self, val):
        cdef const double[::1] v = np.ascontiguousarray(val, dtype=np.float64).ravel()
        cdef Py_ssize_t k = v.shape[0], i
        cdef Py_ssize_t s = self.n
        self._grow(k)
        for i in range(k):
            self._push(v[i], -1, -1, 0.0, 0.0)
        return s

    const = input

    def unary(self, const idx_t[::1] a, const double[::1] val, const double[::1] d):
        cdef Py_ssize_t k = a.shape[0], i
        cdef Py_ssize_t s = self.n
        self._grow(k)
        for i in range(k):
            self._push(val[i], a[i], -1, d[i], 0.0)
        return s

    def binary(self, const idx_t[::1] a, const idx_t[::1] b, const double[::1] val,
               const double[::1] da, const double[::1] db):
        cdef Py_ssize_t k = a.shape[0], i
        cdef Py_ssize_t s = self.n
        self._grow(k)
        for i in range(k):
            self._push(val[i], a[i], b[i], da[i], db[i])
        return s

    def sum(self, const idx_t[::1] a):
        cdef Py_ssize_t k = a.shape[0], i
        cdef Py_ssize_t s
        cdef double acc
        if k == 0:
            return self.const(np.zeros(1))
        if k == 1:
            return a[0]
        self._grow(k - 1)
        s = self.n
        acc = self.val[a[0]] + self.val[a[1]]
        self._push(acc, a[0], a[1], 1.0, 1.0)
        for i in range(2, k):
            acc = acc + self.val[a[i]]
            self._push(acc, self.n - 1, a[i], 1.0, 1.0)
        return self.n - 1

    def tridiag_chol(self, const idx_t[::1] v, const idx_t[::1] c):
        cdef Py_ssize_t n = v.shape[0], i
        cdef Py_ssize_t s, di
        cdef double x, d, lv
        self._grow(2 * n - 1)
        s = self.n
        x = self.val[v[0]]
        if not (x > 0.0 and isfinite(x)):
            raise NotSPDError(0)
        d = sqrt(x)
        self._push(d, v[0], -1, 0.5 / d, 0.0)
        for i in range(n - 1):
            di = s + 2 * i
            lv = self.val[c[i]] / d
            self._push(lv, c[i], di, 1.0 / d, -lv / d)
            x = self.val[v[i + 1]] - lv * lv
            if not (x > 0.0 and isfinite(x)):
                self.n = s
                raise NotSPDError(i + 1)
            d = sqrt(x)
            self._push(d, v[i + 1], di + 1, 0.5 / d, -lv / d)
        return s

    def solve_L(self, const idx_t[::1] d, const idx_t[::1] l, const idx_t[::1] y):
        cdef Py_ssize_t n = d.shape[0], i
        cdef Py_ssize_t s, xi
        cdef double x, dv, lv, p, t
        self._grow(3 * n - 2)
        s = self.n
        dv = self.val[d[0]]
        x = self.val[y[0]] / dv
        self._push(x, y[0], d[0], 1.0 / dv, -x / dv)
        xi = s
        for i in range(1, n):
            lv = self.val[l[i - 1]]
            p = lv * x
            self._push(p, l[i - 1], xi, x, lv)
            t = self.val[y[i]] - p
            self._push(t, y[i], xi + 1, 1.0, -1.0)
            dv = self.val[d[i]]
            x = t / dv
            self._push(x, xi + 2, d[i], 1.0 / dv, -x / dv)
            xi += 3
        return s

    def solve_LT(self, const idx_t[::1] d, const idx_t[::1] l, const idx_t[::1] y):
        cdef Py_ssize_t n = d.shape[0], i
        cdef Py_ssize_t s, xi
        cdef double x, dv, lv, p, t
        self._grow(3 * n - 2)
        s = self.n
        dv = self.val[d[n - 1]]
        x = self.val[y[n - 1]] / dv
        self._push(x, y[n - 1], d[n - 1], 1.0 / dv, -x / dv)
        xi = s
        for i in range(n - 2, -1, -1):
            lv = self.val[l[i]]
            p = lv * x
            self._push(p, l[i], xi, x, lv)
            t = self.val[y[i]] - p
            self._push(t, y[i], xi + 1, 1.0, -1.0)
            dv = self.val[d[i]]
            x = t / dv
            self._push(x, xi + 2, d[i], 1.0 / dv, -x / dv)
            xi += 3
        return s

    # --------------------------------------------------------------- queries
    def values(self, Py_ssize_t start, Py_ssize_t stop):
        cdef cnp.ndarray[double, ndim=1] out = np.empty(stop - start)
        cdef Py_ssize_t i
        for i in range(start, stop):
            out[i - start] = self.val[i]
        return out

    def take(self, idx):
        cdef const idx_t[::1] ix = np.ascontiguousarray(idx, dtype=np.int64).ravel()
        cdef cnp.ndarray[double, ndim=1] out = np.empty(ix.shape[0])
        cdef Py_ssize_t i
        for i in range(ix.shape[0]):
            out[i] = self.val[ix[i]]
        return out.reshape(np.shape(idx))

    def first_nonfinite(self):
        cdef Py_ssize_t i
        for i in range(self.n):
            if not isfinite(self.val[i]):
                return i
        return -1

    def gradient(self, Py_ssize_t out, wrt):
        cdef cnp.ndarray[double, ndim=1] adj_arr = np.zeros(self.n)
        cdef double* adj = <double*>adj_arr.data
        cdef Py_ssize_t i
        cdef double g
        cdef idx_t j
        adj[out] = 1.0
        for i in range(out, -1, -1):
            g = adj[i]
            if g == 0.0:
                continue
            j = self.a0[i]
            if j >= 0:
                adj[j] += g * self.d0[i]
                j = self.a1[i]
                if j >= 0:
                    adj[j] += g * self.d1[i]
        return adj_arr[np.asarray(wrt, dtype=np.int64)]


# ------------------------------------------------------------ float kernels
def tridiag_chol_f(v, c):
    cdef const double[::1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef const double[::1] cc = np.ascontiguousarray(c, dtype=np.float64)
    cdef Py_ssize_t n = vv.shape[0], i
    cdef cnp.ndarray[double, ndim=1] d = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] l = np.empty(max(n - 1, 0))
    cdef double x, di, li
    x = vv[0]
    if not (x > 0.0 and isfinite(x)):
        raise NotSPDError(0)
    di = sqrt(x)
    d[0] = di
    for i in range(n - 1):
        li = cc[i] / di
        l[i] = li
        x = vv[i + 1] - li * li
        if not (x > 0.0 and isfinite(x)):
            raise NotSPDError(i + 1)
        di = sqrt(x)
        d[i + 1] = di
    return d, l


def solve_L_f(d, l, y):
    cdef const double[::1] dd = np.ascontiguousarray(d, dtype=np.float64)
    cdef const double[::1] ll = np.ascontiguousarray(l, dtype=np.float64)
    cdef const double[::1] yy = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = dd.shape[0], i
    cdef cnp.ndarray[double, ndim=1] x = np.empty(n)
    cdef double xi = yy[0] / dd[0]
    x[0] = xi
    for i in range(1, n):
        xi = (yy[i] - ll[i - 1] * xi) / dd[i]
        x[i] = xi
    return x


def solve_LT_f(d, l, y):
    cdef const double[::1] dd = np.ascontiguousarray(d, dtype=np.float64)
    cdef const double[::1] ll = np.ascontiguousarray(l, dtype=np.float64)
    cdef const double[::1] yy = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = dd.shape[0], i
    cdef cnp.ndarray[double, ndim=1] x = np.empty(n)
    cdef double xi = yy[n - 1] / dd[n - 1]
    x[n - 1] = xi
    for i in range(n - 2, -1, -1):
        xi = (yy[i] - ll[i] * xi) / dd[i]
        x[i] = xi
    return x
