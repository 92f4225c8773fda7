"""Reverse-mode automatic differentiation.

A scalar Wengert tape (see ``_tape_py``) with an array-valued front end.
:class:`ADArray` is a handle holding, for every element, the index of its
tape node and its value; elementwise operations append one node per element
in a single bulk call, indexing and concatenation only shuffle indices.

The module-level functions (``exp``, ``log``, ``sum`` ...) accept either
ADArrays or plain numbers/ndarrays, so model code written against them runs
unchanged in pure float mode (no tape) and in AD mode.

The compiled tape is used when available; set ``DRHMC_PURE_PYTHON=1`` to
force the numpy fallback.
"""
import math
import os

import numpy as np
from scipy import special

from .errors import DomainError, EvaluationError

if os.environ.get("DRHMC_PURE_PYTHON"):
    from . import _tape_py as _backend
else:
    try:
        from . import _tape_ext as _backend
    except ImportError:  # pragma: no cover - depends on the build
        from . import _tape_py as _backend

Tape = _backend.Tape
BACKEND = _backend.BACKEND

_I64 = np.int64


def backend_module(name=None):
    """Return the tape backend module, ``"cython"`` or ``"python"``."""
    if name is None:
        return _backend
    if name == "python":
        from . import _tape_py

        return _tape_py
    if name == "cython":
        from . import _tape_ext

        return _tape_ext
    raise ValueError(f"unknown backend {name!r}")


class ADArray:
    """Array of tape nodes.  ``idx`` and ``val`` share a shape."""

    __slots__ = ("tape", "idx", "val")
    __array_ufunc__ = None

    def __init__(self, tape, idx, val):
        self.tape = tape
        self.idx = idx
        self.val = val

    # ---------------------------------------------------------- structure
    @property
    def shape(self):
        return self.val.shape

    @property
    def ndim(self):
        return self.val.ndim

    @property
    def size(self):
        return self.val.size

    def __len__(self):
        return self.val.shape[0]

    def __repr__(self):
        return f"ADArray(shape={self.shape}, val={self.val!r})"

    def __getitem__(self, key):
        return ADArray(self.tape, self.idx[key], self.val[key])

    def reshape(self, *shape):
        return ADArray(self.tape, self.idx.reshape(*shape), self.val.reshape(*shape))

    def ravel(self):
        return ADArray(self.tape, self.idx.ravel(), self.val.ravel())

    @property
    def T(self):
        return ADArray(self.tape, self.idx.T, self.val.T)

    def __float__(self):
        return float(self.val)

    # --------------------------------------------------------- arithmetic
    def __neg__(self):
        return _unary(self, -self.val, -1.0)

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, ADArray):
            return _binary(self, other, self.val + other.val, 1.0, 1.0)
        return _unary(self, self.val + other, 1.0)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, ADArray):
            return _binary(self, other, self.val - other.val, 1.0, -1.0)
        return _unary(self, self.val - other, 1.0)

    def __rsub__(self, other):
        return _unary(self, other - self.val, -1.0)

    def __mul__(self, other):
        if isinstance(other, ADArray):
            return _binary(self, other, self.val * other.val, other.val, self.val)
        other = np.asarray(other, dtype=float)
        return _unary(self, self.val * other, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, ADArray):
            q = self.val / other.val
            return _binary(self, other, q, 1.0 / other.val, -q / other.val)
        other = np.asarray(other, dtype=float)
        return _unary(self, self.val / other, 1.0 / other)

    def __rtruediv__(self, other):
        q = other / self.val
        return _unary(self, q, -q / self.val)

    def __pow__(self, k):
        if isinstance(k, ADArray):
            raise TypeError("AD exponent not supported; use exp(k * log(x))")
        k = float(k)
        if k == 2.0:
            return _unary(self, self.val * self.val, 2.0 * self.val)
        return _unary(self, self.val**k, k * self.val ** (k - 1.0))

    def sum(self):
        return sum(self)


# ------------------------------------------------------------------ helpers
def _flat_partial(d, shape, n):
    if isinstance(d, (float, int)):
        return np.full(n, float(d))
    d = np.asarray(d, dtype=float)
    if d.shape != shape:
        if d.ndim == 0:
            return np.full(n, float(d))
        d = np.broadcast_to(d, shape)
    return np.ascontiguousarray(d).ravel()


def _flat_index(ix, shape):
    if ix.shape != shape:
        ix = np.broadcast_to(ix, shape)
    return np.ascontiguousarray(ix, dtype=_I64).ravel()


def _unary(x, val, d):
    val = np.asarray(val, dtype=float)
    shape = val.shape
    n = val.size
    s = x.tape.unary(_flat_index(x.idx, shape), np.ascontiguousarray(val).ravel(), _flat_partial(d, shape, n))
    return ADArray(x.tape, np.arange(s, s + n, dtype=_I64).reshape(shape), val)


def _binary(x, y, val, dx, dy):
    if x.tape is not y.tape:
        raise ValueError("operands live on different tapes")
    val = np.asarray(val, dtype=float)
    shape = val.shape
    n = val.size
    s = x.tape.binary(
        _flat_index(x.idx, shape),
        _flat_index(y.idx, shape),
        np.ascontiguousarray(val).ravel(),
        _flat_partial(dx, shape, n),
        _flat_partial(dy, shape, n),
    )
    return ADArray(x.tape, np.arange(s, s + n, dtype=_I64).reshape(shape), val)


def is_ad(x):
    return isinstance(x, ADArray)


def any_ad(*xs):
    for x in xs:
        if isinstance(x, ADArray):
            return x.tape
    return None


def value(x):
    """Numeric value of an ADArray, or the argument itself."""
    return x.val if isinstance(x, ADArray) else x


def constant(tape, x):
    """Put a float array on ``tape`` as constant nodes."""
    x = np.asarray(x, dtype=float)
    s = tape.const(x.ravel())
    return ADArray(tape, np.arange(s, s + x.size, dtype=_I64).reshape(x.shape), x.copy())


def lift(tape, x):
    """Return ``x`` as an ADArray on ``tape`` (constants get const nodes)."""
    if isinstance(x, ADArray):
        return x
    return constant(tape, x)


def unary_op(x, val, deriv):
    """Record an elementwise node with precomputed value and derivative."""
    return _unary(x, val, deriv)


def custom_unary(x, f, df):
    """Elementwise ``f`` with derivative ``df`` (both act on float arrays)."""
    if isinstance(x, ADArray):
        v = f(x.val)
        return _unary(x, v, df(x.val))
    return f(np.asarray(x, dtype=float)) if np.ndim(x) else f(float(x))


# ------------------------------------------------------ elementary functions
def exp(x):
    if isinstance(x, ADArray):
        v = np.exp(x.val)
        return _unary(x, v, v)
    return np.exp(x)


def log(x):
    if isinstance(x, ADArray):
        if np.any(x.val <= 0.0):
            raise DomainError("log of non-positive argument")
        return _unary(x, np.log(x.val), 1.0 / x.val)
    return np.log(x)


def sqrt(x):
    if isinstance(x, ADArray):
        if np.any(x.val <= 0.0):
            raise DomainError("sqrt of non-positive argument")
        v = np.sqrt(x.val)
        return _unary(x, v, 0.5 / v)
    return np.sqrt(x)


def log1p(x):
    if isinstance(x, ADArray):
        if np.any(x.val <= -1.0):
            raise DomainError("log1p of argument <= -1")
        return _unary(x, np.log1p(x.val), 1.0 / (1.0 + x.val))
    return np.log1p(x)


def expm1(x):
    if isinstance(x, ADArray):
        return _unary(x, np.expm1(x.val), np.exp(x.val))
    return np.expm1(x)


def tanh(x):
    if isinstance(x, ADArray):
        v = np.tanh(x.val)
        return _unary(x, v, 1.0 - v * v)
    return np.tanh(x)


def sin(x):
    if isinstance(x, ADArray):
        return _unary(x, np.sin(x.val), np.cos(x.val))
    return np.sin(x)


def cos(x):
    if isinstance(x, ADArray):
        return _unary(x, np.cos(x.val), -np.sin(x.val))
    return np.cos(x)


def cosh(x):
    if isinstance(x, ADArray):
        return _unary(x, np.cosh(x.val), np.sinh(x.val))
    return np.cosh(x)


def log_cosh(x):
    """log(cosh(x)) without overflow."""
    if isinstance(x, ADArray):
        return _unary(x, _log_cosh(x.val), np.tanh(x.val))
    return _log_cosh(x)


def _log_cosh(x):
    a = np.abs(x)
    return a + np.log1p(np.exp(-2.0 * a)) - math.log(2.0)


def absolute(x):
    if isinstance(x, ADArray):
        return _unary(x, np.abs(x.val), np.sign(x.val))
    return np.abs(x)


def square(x):
    if isinstance(x, ADArray):
        return _unary(x, x.val * x.val, 2.0 * x.val)
    return np.square(x)


def lgamma(x):
    if isinstance(x, ADArray):
        if np.any(x.val <= 0.0):
            raise DomainError("lgamma of non-positive argument")
        return _unary(x, special.gammaln(x.val), special.digamma(x.val))
    return special.gammaln(x)


def softplus(x):
    """log(1 + exp(x))."""
    if isinstance(x, ADArray):
        v = np.logaddexp(0.0, x.val)
        return _unary(x, v, special.expit(x.val))
    return np.logaddexp(0.0, x)


def sum(x):  # noqa: A001 - mirrors numpy
    """Sum of all elements (a scalar ADArray for AD input)."""
    if isinstance(x, ADArray):
        i = x.tape.sum(np.ascontiguousarray(x.idx, dtype=_I64).ravel())
        return ADArray(x.tape, np.asarray(i, dtype=_I64), np.asarray(x.tape.take(np.asarray([i]))[0]))
    return np.sum(x)


def dot(x, y):
    """Inner product of two vectors."""
    if isinstance(x, ADArray) or isinstance(y, ADArray):
        return sum(x * y)
    return float(np.dot(x, y))


def concatenate(parts):
    """Concatenate 1-D pieces; float pieces become constants if any piece is AD."""
    tape = any_ad(*parts)
    if tape is None:
        return np.concatenate([np.atleast_1d(np.asarray(p, dtype=float)) for p in parts])
    pieces = [lift(tape, np.atleast_1d(p)) if not isinstance(p, ADArray) else p for p in parts]
    idx = np.concatenate([np.atleast_1d(p.idx) for p in pieces])
    val = np.concatenate([np.atleast_1d(p.val) for p in pieces])
    return ADArray(tape, idx, val)


def stack(parts):
    """Stack scalars/equal-shape pieces along a new first axis."""
    tape = any_ad(*parts)
    if tape is None:
        return np.stack([np.asarray(p, dtype=float) for p in parts])
    pieces = [lift(tape, p) for p in parts]
    return ADArray(tape, np.stack([p.idx for p in pieces]), np.stack([p.val for p in pieces]))


def where_scalar(cond, a, b):
    """Python-level branch on a float condition (the branch is not traced)."""
    return a if cond else b


# ----------------------------------------------------------------- drivers
def inputs(tape, x):
    """Register ``x`` as leaf nodes; returns the ADArray handle."""
    x = np.asarray(x, dtype=float)
    s = tape.input(x.ravel())
    return ADArray(tape, np.arange(s, s + x.size, dtype=_I64).reshape(x.shape), x.copy())


def value_and_grad(f, x, tape=None):
    """Evaluate scalar ``f`` at ``x`` and its gradient by one reverse sweep.

    Raises :class:`EvaluationError` (with the offending node index) if any
    recorded intermediate is non-finite.
    """
    if tape is None:
        tape = Tape()
    else:
        tape.reset()
    x = np.asarray(x, dtype=float)
    xs = inputs(tape, x)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        out = f(xs)
    if not isinstance(out, ADArray):
        # f did not depend on its input
        v = float(out)
        if not math.isfinite(v):
            raise EvaluationError("non-finite output", None)
        return v, np.zeros_like(x)
    if out.size != 1:
        raise ValueError("value_and_grad needs a scalar-valued function")
    bad = tape.first_nonfinite()
    if bad >= 0:
        raise EvaluationError(f"non-finite value at tape node {bad}", bad)
    oi = int(np.asarray(out.idx).ravel()[0])
    g = tape.gradient(oi, xs.idx.ravel()).reshape(x.shape)
    return float(np.asarray(out.val).ravel()[0]), g


def grad(f, x):
    return value_and_grad(f, x)[1]


def central_difference(f, x, h=1e-5):
    """Central finite-difference gradient of a float function (test oracle)."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    flat = x.ravel()
    gf = g.ravel()
    for i in range(flat.size):
        e = flat.copy()
        step = h * max(1.0, abs(flat[i]))
        e[i] = flat[i] + step
        fp = f(e.reshape(x.shape))
        e[i] = flat[i] - step
        fm = f(e.reshape(x.shape))
        gf[i] = (fp - fm) / (2.0 * step)
    return g
