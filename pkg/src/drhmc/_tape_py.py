"""Pure-Python/numpy reverse-mode tape.

Same interface as the compiled ``_tape_ext.Tape``.  Every node holds a value,
up to two parent indices and the local partial derivative with respect to
each parent.  Nodes are appended in bulk; each bulk append is remembered as a
segment so that the reverse sweep can process independent nodes with numpy
scatter-adds and only loop over the sequential kernels.
"""
import math

import numpy as np

from .errors import NotSPDError

BACKEND = "python"

_LEAF, _PAR, _SUM, _SEQ = 0, 1, 2, 3


class Tape:
    """Growable Wengert list with a reverse sweep."""

    def __init__(self, capacity=256):
        cap = max(int(capacity), 16)
        self._val = np.empty(cap)
        self._a0 = np.empty(cap, dtype=np.int64)
        self._a1 = np.empty(cap, dtype=np.int64)
        self._d0 = np.empty(cap)
        self._d1 = np.empty(cap)
        self._segs = []
        self.n = 0

    def __len__(self):
        return self.n

    def reset(self):
        self.n = 0
        self._segs = []

    def _grow(self, k):
        need = self.n + k
        cap = self._val.shape[0]
        if need <= cap:
            return
        new = max(need, 2 * cap)
        for name in ("_val", "_a0", "_a1", "_d0", "_d1"):
            old = getattr(self, name)
            arr = np.empty(new, dtype=old.dtype)
            arr[: self.n] = old[: self.n]
            setattr(self, name, arr)

    def _append(self, kind, val, a0, a1, d0, d1):
        k = val.shape[0]
        self._grow(k)
        s = self.n
        e = s + k
        self._val[s:e] = val
        self._a0[s:e] = a0
        self._a1[s:e] = a1
        self._d0[s:e] = d0
        self._d1[s:e] = d1
        self.n = e
        self._segs.append((s, e, kind))
        return s

    # ------------------------------------------------------------------ nodes
    def input(self, val):
        val = np.ascontiguousarray(val, dtype=float).ravel()
        return self._append(_LEAF, val, -1, -1, 0.0, 0.0)

    const = input

    def unary(self, a, val, d):
        return self._append(_PAR, val, a, -1, d, 0.0)

    def binary(self, a, b, val, da, db):
        return self._append(_PAR, val, a, b, da, db)

    def sum(self, a):
        """Sequential sum of nodes ``a``; returns the index of the result."""
        a = np.asarray(a, dtype=np.int64)
        k = a.shape[0]
        if k == 0:
            return self.const(np.zeros(1))
        if k == 1:
            return int(a[0])
        v = self._val[a]
        vals = np.cumsum(v)[1:]
        s = self.n
        a0 = np.empty(k - 1, dtype=np.int64)
        a0[0] = a[0]
        a0[1:] = np.arange(s, s + k - 2)
        self._append(_SUM, vals, a0, a[1:], 1.0, 1.0)
        return s + k - 2

    def _push_scalar(self, v, a0, a1, d0, d1):
        i = self.n
        self._val[i] = v
        self._a0[i] = a0
        self._a1[i] = a1
        self._d0[i] = d0
        self._d1[i] = d1
        self.n = i + 1

    def tridiag_chol(self, v, c):
        """Cholesky of a symmetric tridiagonal matrix given diag/sub node indices.

        Nodes are laid out as d0, l0, d1, l1, ..., d_{n-1}; returns the start.
        """
        v = np.asarray(v, dtype=np.int64)
        c = np.asarray(c, dtype=np.int64)
        n = v.shape[0]
        self._grow(2 * n - 1)
        s = self.n
        val = self._val
        x = val[v[0]]
        if not x > 0.0 or not math.isfinite(x):
            raise NotSPDError(0)
        d = math.sqrt(x)
        self._push_scalar(d, v[0], -1, 0.5 / d, 0.0)
        for i in range(n - 1):
            di = s + 2 * i
            li = c[i]
            lv = val[li] / d
            self._push_scalar(lv, li, di, 1.0 / d, -lv / d)
            x = val[v[i + 1]] - lv * lv
            if not x > 0.0 or not math.isfinite(x):
                self.n = s
                raise NotSPDError(i + 1)
            d = math.sqrt(x)
            self._push_scalar(d, v[i + 1], di + 1, 0.5 / d, -lv / d)
        self._segs.append((s, self.n, _SEQ))
        return s

    def solve_L(self, d, l, y):
        """x solving L x = y; x_i sits at start + 3 i."""
        d = np.asarray(d, dtype=np.int64)
        l = np.asarray(l, dtype=np.int64)
        y = np.asarray(y, dtype=np.int64)
        n = d.shape[0]
        self._grow(3 * n - 2)
        s = self.n
        val = self._val
        dv = val[d[0]]
        x = val[y[0]] / dv
        self._push_scalar(x, y[0], d[0], 1.0 / dv, -x / dv)
        xi = s
        for i in range(1, n):
            lv = val[l[i - 1]]
            p = lv * x
            self._push_scalar(p, l[i - 1], xi, x, lv)
            t = val[y[i]] - p
            self._push_scalar(t, y[i], xi + 1, 1.0, -1.0)
            dv = val[d[i]]
            x = t / dv
            self._push_scalar(x, xi + 2, d[i], 1.0 / dv, -x / dv)
            xi += 3
        self._segs.append((s, self.n, _SEQ))
        return s

    def solve_LT(self, d, l, y):
        """x solving L^T x = y; x_i sits at start + 3 (n - 1 - i)."""
        d = np.asarray(d, dtype=np.int64)
        l = np.asarray(l, dtype=np.int64)
        y = np.asarray(y, dtype=np.int64)
        n = d.shape[0]
        self._grow(3 * n - 2)
        s = self.n
        val = self._val
        dv = val[d[n - 1]]
        x = val[y[n - 1]] / dv
        self._push_scalar(x, y[n - 1], d[n - 1], 1.0 / dv, -x / dv)
        xi = s
        for i in range(n - 2, -1, -1):
            lv = val[l[i]]
            p = lv * x
            self._push_scalar(p, l[i], xi, x, lv)
            t = val[y[i]] - p
            self._push_scalar(t, y[i], xi + 1, 1.0, -1.0)
            dv = val[d[i]]
            x = t / dv
            self._push_scalar(x, xi + 2, d[i], 1.0 / dv, -x / dv)
            xi += 3
        self._segs.append((s, self.n, _SEQ))
        return s

    # --------------------------------------------------------------- queries
    def values(self, start, stop):
        return self._val[start:stop].copy()

    def take(self, idx):
        return self._val[np.asarray(idx, dtype=np.int64)]

    def first_nonfinite(self):
        bad = np.flatnonzero(~np.isfinite(self._val[: self.n]))
        return int(bad[0]) if bad.size else -1

    def gradient(self, out, wrt):
        """Adjoints of nodes ``wrt`` for the scalar output node ``out``."""
        adj = np.zeros(self.n)
        adj[out] = 1.0
        a0, a1, d0, d1 = self._a0, self._a1, self._d0, self._d1
        for s, e, kind in reversed(self._segs):
            if s > out or kind == _LEAF:
                continue
            if kind == _PAR:
                g = adj[s:e]
                np.add.at(adj, a0[s:e], g * d0[s:e])
                b = a1[s:e]
                m = b >= 0
                if m.all():
                    np.add.at(adj, b, g * d1[s:e])
                elif m.any():
                    np.add.at(adj, b[m], g[m] * d1[s:e][m])
            elif kind == _SUM:
                chain = np.cumsum(adj[s:e][::-1])[::-1]
                adj[s:e] = chain
                adj[a0[s]] += chain[0]
                np.add.at(adj, a1[s:e], chain)
            else:
                for i in range(e - 1, s - 1, -1):
                    g = adj[i]
                    if g == 0.0:
                        continue
                    adj[a0[i]] += g * d0[i]
                    j = a1[i]
                    if j >= 0:
                        adj[j] += g * d1[i]
        return adj[np.asarray(wrt, dtype=np.int64)]


# ------------------------------------------------------------ float kernels
def tridiag_chol_f(v, c):
    """Float Cholesky of tridiagonal (v, c); returns (diag, sub)."""
    v = np.asarray(v, dtype=float)
    c = np.asarray(c, dtype=float)
    n = v.shape[0]
    d = np.empty(n)
    l = np.empty(max(n - 1, 0))
    x = v[0]
    if not x > 0.0 or not math.isfinite(x):
        raise NotSPDError(0)
    di = math.sqrt(x)
    d[0] = di
    for i in range(n - 1):
        li = c[i] / di
        l[i] = li
        x = v[i + 1] - li * li
        if not x > 0.0 or not math.isfinite(x):
            raise NotSPDError(i + 1)
        di = math.sqrt(x)
        d[i + 1] = di
    return d, l


def solve_L_f(d, l, y):
    y = np.asarray(y, dtype=float)
    n = d.shape[0]
    x = np.empty(n)
    xi = y[0] / d[0]
    x[0] = xi
    for i in range(1, n):
        xi = (y[i] - l[i - 1] * xi) / d[i]
        x[i] = xi
    return x


def solve_LT_f(d, l, y):
    y = np.asarray(y, dtype=float)
    n = d.shape[0]
    x = np.empty(n)
    xi = y[n - 1] / d[n - 1]
    x[n - 1] = xi
    for i in range(n - 2, -1, -1):
        xi = (y[i] - l[i] * xi) / d[i]
        x[i] = xi
    return x
