"""Structured SPD matrices, their Cholesky factors and triangular solves.

Three structures are supported: diagonal, symmetric tridiagonal and small
dense.  Every routine accepts float arrays or :class:`~drhmc.autodiff.ADArray`
entries; in the latter case the sequential tridiagonal kernels are recorded
on the tape as single bulk calls.

Factors store the lower Cholesky factor ``L`` (``G = L L^T``) and
``log_det = log|L| = sum(log diag(L))``.
"""
import numpy as np

from . import autodiff as ad
from .autodiff import ADArray
from .errors import NotSPDError

_fk = ad.backend_module()


# ------------------------------------------------------------------- types
class DiagSym:
    """Diagonal SPD matrix given by its diagonal."""

    kind = "diag"

    def __init__(self, diag):
        self.diag = diag

    @property
    def n(self):
        return ad.value(self.diag).shape[0]

    def to_dense(self):
        return np.diag(np.asarray(ad.value(self.diag), dtype=float))

    def matvec(self, x):
        return self.diag * x


class TriDiagSym:
    """Symmetric tridiagonal matrix: diagonal ``diag`` (n), sub-diagonal ``sub`` (n-1)."""

    kind = "tridiag"

    def __init__(self, diag, sub):
        self.diag = diag
        self.sub = sub
        n = ad.value(diag).shape[0]
        if ad.value(sub).shape[0] != n - 1:
            raise ValueError("sub-diagonal must have length n - 1")

    @property
    def n(self):
        return ad.value(self.diag).shape[0]

    def to_dense(self):
        v = np.asarray(ad.value(self.diag), dtype=float)
        c = np.asarray(ad.value(self.sub), dtype=float)
        return np.diag(v) + np.diag(c, -1) + np.diag(c, 1)

    def matvec(self, x):
        v, c = self.diag, self.sub
        if self.n == 1:
            return v * x
        lo = c * x[:-1]
        up = c * x[1:]
        return v * x + ad.concatenate([np.zeros(1), lo]) + ad.concatenate([up, np.zeros(1)])

    def plus_diag(self, d):
        """Return ``self + diag(d)`` (``d`` scalar or vector)."""
        return TriDiagSym(self.diag + d, self.sub)

    def scaled(self, s):
        return TriDiagSym(self.diag * s, self.sub * s)


class DenseSym:
    """Small dense symmetric matrix (float ndarray or 2-D ADArray)."""

    kind = "dense"

    def __init__(self, a):
        self.a = a

    @property
    def n(self):
        return ad.value(self.a).shape[0]

    def to_dense(self):
        return np.asarray(ad.value(self.a), dtype=float).copy()

    def matvec(self, x):
        rows = [ad.dot(self.a[i], x) for i in range(self.n)]
        return ad.stack(rows)


def tridiag_const1n(n, a, b, c):
    """Tridiagonal matrix with corners ``a``, interior diagonal ``b``, off-diagonal ``c``."""
    if n == 1:
        return TriDiagSym(ad.stack([a]), np.zeros(0))
    inner = b * np.ones(n - 2)
    diag = ad.concatenate([ad.stack([a]), inner, ad.stack([a])]) if n > 2 else ad.stack([a, a])
    return TriDiagSym(diag, c * np.ones(n - 1))


def add(m, other):
    """Sum of two structured matrices, keeping the richer structure.

    ``other`` may also be a scalar or vector, interpreted as a diagonal.
    """
    if not isinstance(other, (DiagSym, TriDiagSym, DenseSym)):
        other = DiagSym(other * np.ones(m.n) if np.ndim(ad.value(other)) == 0 else other)
    if isinstance(m, DiagSym) and not isinstance(other, DiagSym):
        m, other = other, m
    if isinstance(m, DiagSym):
        return DiagSym(m.diag + other.diag)
    if isinstance(m, TriDiagSym):
        if isinstance(other, DiagSym):
            return TriDiagSym(m.diag + other.diag, m.sub)
        if isinstance(other, TriDiagSym):
            return TriDiagSym(m.diag + other.diag, m.sub + other.sub)
        return DenseSym(_dense_of(m) + other.a)
    if isinstance(other, DenseSym):
        return DenseSym(m.a + other.a)
    return DenseSym(m.a + _dense_of(other))


def _dense_of(m):
    if isinstance(m, DenseSym):
        return m.a
    n = m.n
    if not ad.is_ad(m.diag) and not (isinstance(m, TriDiagSym) and ad.is_ad(m.sub)):
        return m.to_dense()
    rows = []
    for i in range(n):
        row = [0.0] * n
        row[i] = m.diag[i]
        if isinstance(m, TriDiagSym):
            if i > 0:
                row[i - 1] = m.sub[i - 1]
            if i < n - 1:
                row[i + 1] = m.sub[i]
        rows.append(ad.stack(row))
    return ad.stack(rows)


# ----------------------------------------------------------------- factors
class DiagFactor:
    kind = "diag"

    def __init__(self, sd):
        self.sd = sd
        self.log_det = ad.sum(ad.log(sd))

    @property
    def n(self):
        return ad.value(self.sd).shape[0]

    def solve_L(self, y):
        return y / self.sd

    solve_LT = solve_L

    def solve(self, y):
        return y / (self.sd * self.sd)

    def mul_LT(self, x):
        return self.sd * x

    mul_L = mul_LT


class TriDiagFactor:
    """Lower bidiagonal Cholesky factor: ``diag`` (n) and ``sub`` (n-1)."""

    kind = "tridiag"

    def __init__(self, diag, sub):
        self.diag = diag
        self.sub = sub
        self.log_det = ad.sum(ad.log(diag))

    @property
    def n(self):
        return ad.value(self.diag).shape[0]

    @property
    def packed(self):
        """Entries packed as ``[diag (n), sub (n-1)]`` followed by ``log|L|``."""
        return np.concatenate(
            [ad.value(self.diag), ad.value(self.sub), [float(ad.value(self.log_det))]]
        )

    def solve_L(self, y):
        return solve_L(self, y)

    def solve_LT(self, y):
        return solve_LT(self, y)

    def solve(self, y):
        return solve_LT(self, solve_L(self, y))

    def mul_LT(self, x):
        d, l = self.diag, self.sub
        if self.n == 1:
            return d * x
        return d * x + ad.concatenate([l * x[1:], np.zeros(1)])

    def mul_L(self, x):
        d, l = self.diag, self.sub
        if self.n == 1:
            return d * x
        return d * x + ad.concatenate([np.zeros(1), l * x[:-1]])

    def to_dense(self):
        d = np.asarray(ad.value(self.diag), dtype=float)
        l = np.asarray(ad.value(self.sub), dtype=float)
        return np.diag(d) + np.diag(l, -1)


class DenseFactor:
    """Dense lower Cholesky factor held as a list of rows of scalars."""

    kind = "dense"

    def __init__(self, rows):
        self.rows = rows
        n = len(rows)
        self.log_det = ad.sum(ad.log(ad.stack([rows[i][i] for i in range(n)])))

    @property
    def n(self):
        return len(self.rows)

    def solve_L(self, y):
        n = self.n
        L = self.rows
        x = []
        for i in range(n):
            s = y[i]
            for k in range(i):
                s = s - L[i][k] * x[k]
            x.append(s / L[i][i])
        return ad.stack(x)

    def solve_LT(self, y):
        n = self.n
        L = self.rows
        x = [None] * n
        for i in range(n - 1, -1, -1):
            s = y[i]
            for k in range(i + 1, n):
                s = s - L[k][i] * x[k]
            x[i] = s / L[i][i]
        return ad.stack(x)

    def solve(self, y):
        return self.solve_LT(self.solve_L(y))

    def mul_LT(self, x):
        n = self.n
        L = self.rows
        out = []
        for i in range(n):
            s = L[i][i] * x[i]
            for k in range(i + 1, n):
                s = s + L[k][i] * x[k]
            out.append(s)
        return ad.stack(out)

    def mul_L(self, x):
        n = self.n
        L = self.rows
        out = []
        for i in range(n):
            s = L[i][0] * x[0]
            for k in range(1, i + 1):
                s = s + L[i][k] * x[k]
            out.append(s)
        return ad.stack(out)

    def to_dense(self):
        n = self.n
        out = np.zeros((n, n))
        for i in range(n):
            for k in range(i + 1):
                out[i, k] = float(ad.value(self.rows[i][k]))
        return out


# ---------------------------------------------------------------- routines
def tridiag_chol(m):
    """Cholesky factor of a symmetric tridiagonal matrix.

    Raises :class:`NotSPDError` carrying the failing pivot index.
    """
    v, c = m.diag, m.sub
    tape = ad.any_ad(v, c)
    n = m.n
    if tape is None:
        d, l = _fk.tridiag_chol_f(np.asarray(v, dtype=float), np.asarray(c, dtype=float))
        return TriDiagFactor(d, l)
    v = ad.lift(tape, v)
    c = ad.lift(tape, c)
    s = tape.tridiag_chol(
        np.ascontiguousarray(v.idx, dtype=np.int64), np.ascontiguousarray(c.idx, dtype=np.int64)
    )
    vals = tape.values(s, s + 2 * n - 1)
    di = s + 2 * np.arange(n, dtype=np.int64)
    li = s + 1 + 2 * np.arange(n - 1, dtype=np.int64)
    return TriDiagFactor(ADArray(tape, di, vals[0::2]), ADArray(tape, li, vals[1::2]))


def _solve(kernel_name, f, y):
    d, l = f.diag, f.sub
    tape = ad.any_ad(d, l, y)
    n = f.n
    if tape is None:
        return getattr(_fk, kernel_name + "_f")(d, l, np.asarray(y, dtype=float))
    d = ad.lift(tape, d)
    l = ad.lift(tape, l)
    y = ad.lift(tape, y)
    s = getattr(tape, kernel_name)(
        np.ascontiguousarray(d.idx, dtype=np.int64),
        np.ascontiguousarray(l.idx, dtype=np.int64),
        np.ascontiguousarray(y.idx, dtype=np.int64),
    )
    if kernel_name == "solve_L":
        xi = s + 3 * np.arange(n, dtype=np.int64)
    else:
        xi = s + 3 * (n - 1 - np.arange(n, dtype=np.int64))
    return ADArray(tape, xi, tape.take(xi))


def solve_L(f, y):
    """x with L x = y for a tridiagonal factor."""
    return _solve("solve_L", f, y)


def solve_LT(f, y):
    """x with L^T x = y for a tridiagonal factor."""
    return _solve("solve_LT", f, y)


def solve_LLT(f, y):
    """x with L L^T x = y."""
    return f.solve(y)


def dense_chol(m):
    """Cholesky of a small dense SPD matrix; entries may be AD scalars."""
    a = m.a if isinstance(m, DenseSym) else m
    n = ad.value(a).shape[0]
    rows = [[0.0] * n for _ in range(n)]
    for j in range(n):
        s = a[j][j]
        for k in range(j):
            s = s - rows[j][k] * rows[j][k]
        sv = float(ad.value(s))
        if not sv > 0.0 or not np.isfinite(sv):
            raise NotSPDError(j)
        djj = ad.sqrt(s)
        rows[j][j] = djj
        for i in range(j + 1, n):
            t = a[i][j]
            for k in range(j):
                t = t - rows[i][k] * rows[j][k]
            rows[i][j] = t / djj
    return DenseFactor(rows)


def cholesky(m):
    """Factor any supported structure."""
    if isinstance(m, DiagSym):
        dv = ad.value(m.diag)
        bad = np.flatnonzero(~(np.asarray(dv) > 0.0))
        if bad.size:
            raise NotSPDError(int(bad[0]))
        return DiagFactor(ad.sqrt(m.diag))
    if isinstance(m, TriDiagSym):
        return tridiag_chol(m)
    if isinstance(m, DenseSym):
        return dense_chol(m)
    raise TypeError(f"unsupported matrix type {type(m).__name__}")


def log_det(m):
    """log|M| for a structured SPD matrix."""
    return 2.0 * cholesky(m).log_det


def quad_form(m, x):
    """x^T M x."""
    return ad.dot(x, m.matvec(x))


def inv_quad_form(f, x):
    """x^T (L L^T)^{-1} x = |L^{-1} x|^2 from a factor."""
    z = f.solve_L(x)
    return ad.dot(z, z)
