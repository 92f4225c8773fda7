"""Blockwise rescaling transform and the modified target density.

A parameter vector ``q`` is split into blocks ``q_1, ..., q_R``.  Each block
has a scaling matrix ``G_r`` and a location ``h_r`` that may only depend on
earlier blocks.  With ``G_r = L_r L_r^T`` the map from the sampled
coordinates ``qbar`` is

    q_r = h_r(q_1, ..., q_{r-1}) + L_r^{-T} qbar_r,

whose Jacobian is block triangular with log-determinant ``-sum_r log|L_r|``.
HMC then runs on ``log pi(Psi(qbar)) - sum_r log|L_r|``.
"""
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import autodiff as ad
from . import linalg as la
from .errors import DivergentEvaluation, NotSPDError, TransformError


# ---------------------------------------------------------------- scalings
class CholeskyScaling:
    """Scaling by ``G = L L^T``: unwhiten with ``L^{-T}``, whiten with ``L^T``."""

    def __init__(self, factor):
        self.factor = factor
        self.log_det = factor.log_det

    def unwhiten(self, z):
        return self.factor.solve_LT(z)

    def whiten(self, x):
        return self.factor.mul_LT(x)


class LowerScaling:
    """Scaling ``qbar = B x`` with a lower-triangular factor ``B``.

    Used for prior standardisation, where ``B`` maps a latent path to its
    innovations.
    """

    def __init__(self, factor):
        self.factor = factor
        self.log_det = factor.log_det

    def unwhiten(self, z):
        return self.factor.solve_L(z)

    def whiten(self, x):
        return self.factor.mul_L(x)


class IdentityScaling:
    log_det = 0.0

    def unwhiten(self, z):
        return z

    def whiten(self, x):
        return x


IDENTITY = IdentityScaling()


# ------------------------------------------------------------------ blocks
@dataclass(frozen=True)
class BlockSpec:
    """One parameter block.

    ``metric(prefix)`` returns the structured scaling matrix ``G_r`` and
    ``location(prefix, factor)`` the shift ``h_r`` (``None`` means zero).
    ``scaling(prefix)`` may be given instead of ``metric`` to supply a
    ready-made scaling object.  ``prefix`` is the list of earlier blocks
    only, so factories cannot read later blocks.
    """

    name: str
    dim: int
    metric: Optional[Callable] = None
    location: Optional[Callable] = None
    scaling: Optional[Callable] = None

    def make_scaling(self, prefix):
        if self.scaling is not None:
            return self.scaling(prefix)
        if self.metric is None:
            return IDENTITY
        return CholeskyScaling(la.cholesky(self.metric(prefix)))


def identity_block(name, dim):
    return BlockSpec(name, dim)


# ------------------------------------------------------ location strategies
def zero_location():
    return None


def fixed_location(vec):
    vec = np.asarray(vec, dtype=float)
    return lambda prefix, factor: vec


def conditional_mean_location(rhs):
    """h = G^{-1} rhs(prefix), solved with the block's own Cholesky factor."""

    def loc(prefix, factor):
        return factor.solve(rhs(prefix))

    return loc


def approx_conditional_mean(factor, info_a, prior_mean, info_c, qhat):
    """h = G^{-1} [I^A prior_mean + I^C qhat] given the factor of G.

    ``info_a`` and ``info_c`` are structured matrices, scalars or ``None``
    (a missing term contributes nothing).
    """
    rhs = 0.0
    if info_a is not None:
        rhs = rhs + _apply(info_a, prior_mean)
    if info_c is not None:
        rhs = rhs + _apply(info_c, qhat)
    return factor.solve(rhs * np.ones(factor.n) if np.ndim(ad.value(rhs)) == 0 else rhs)


def _apply(m, v):
    if isinstance(m, (la.DiagSym, la.TriDiagSym, la.DenseSym)):
        if np.ndim(ad.value(v)) == 0:
            v = v * np.ones(m.n)
        if isinstance(m, la.DenseSym):
            return ad.stack([ad.dot(m.a[i], v) for i in range(m.n)])
        return m.matvec(v)
    return m * v


def assemble_G(dim, info_a=None, info_b=(), info_c=()):
    """G_r = I^A + sum I^B + sum I^C as a structured matrix.

    Terms may be scalars, vectors (diagonals) or structured matrices; the
    result keeps tridiagonal structure when every term is diagonal or
    tridiagonal.
    """
    terms = ([info_a] if info_a is not None else []) + list(info_b) + list(info_c)
    if not terms:
        raise ValueError("G needs at least one information term")
    out = None
    for t in terms:
        if not isinstance(t, (la.DiagSym, la.TriDiagSym, la.DenseSym)):
            t = la.DiagSym(t * np.ones(dim) if np.ndim(ad.value(t)) == 0 else t)
        out = t if out is None else la.add(out, t)
    return out


# ---------------------------------------------------------------- blocking
@dataclass(frozen=True)
class Blocking:
    names: tuple
    dims: tuple

    @property
    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.dims)]).astype(int)

    @property
    def size(self):
        return int(sum(self.dims))

    def split(self, x):
        o = self.offsets
        return [x[o[i] : o[i + 1]] for i in range(len(self.dims))]

    def coordinate_names(self):
        out = []
        for n, d in zip(self.names, self.dims):
            out.extend([n] if d == 1 else [f"{n}[{i + 1}]" for i in range(d)])
        return out


# --------------------------------------------------------- modified target
class ModifiedTarget:
    """The density of ``qbar`` under the blockwise transform.

    ``log_density(qs)`` is the original log kernel taking a list of blocks.
    Evaluations are cached by ``qbar`` so the value, gradient and the
    constrained point share one forward pass.
    """

    def __init__(self, blocks: Sequence[BlockSpec], log_density, name="target"):
        self.blocks = list(blocks)
        self.blocking = Blocking(tuple(b.name for b in blocks), tuple(b.dim for b in blocks))
        self.log_density_q = log_density
        self.name = name
        self.tape = ad.Tape()
        self._key = None
        self._cached = None
        self.n_evals = 0

    @property
    def dim(self):
        return self.blocking.size

    # -- transform
    def forward(self, qbar):
        """(q blocks, log_jac) for float or AD ``qbar``."""
        qs = []
        log_jac = 0.0
        for r, (b, z) in enumerate(zip(self.blocks, self.blocking.split(qbar))):
            try:
                s = b.make_scaling(qs)
                q = s.unwhiten(z)
                if b.location is not None:
                    h = b.location(qs, getattr(s, "factor", None))
                    q = h + q
            except NotSPDError as e:
                raise TransformError(b.name, e) from e
            qs.append(q)
            log_jac = log_jac - s.log_det
        return qs, log_jac

    def inverse(self, q):
        """qbar from original coordinates ``q`` (floats)."""
        q = np.asarray(q, dtype=float)
        qs = self.blocking.split(q)
        out = []
        for r, b in enumerate(self.blocks):
            prefix = qs[:r]
            try:
                s = b.make_scaling(prefix)
                d = qs[r]
                if b.location is not None:
                    d = d - b.location(prefix, getattr(s, "factor", None))
            except NotSPDError as e:
                raise TransformError(b.name, e) from e
            out.append(np.asarray(s.whiten(d), dtype=float))
        return np.concatenate(out)

    def constrain(self, qbar):
        """Original coordinates Psi(qbar) as a flat float vector."""
        key = np.asarray(qbar, dtype=float).tobytes()
        if key == self._key:
            return self._cached[2]
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            qs, _ = self.forward(np.asarray(qbar, dtype=float))
        return np.concatenate([np.atleast_1d(np.asarray(q, dtype=float)) for q in qs])

    def log_jacobian(self, qbar):
        return float(self.forward(np.asarray(qbar, dtype=float))[1])

    # -- density
    def log_density(self, qbar):
        """Float value of the modified log density."""
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            qs, lj = self.forward(np.asarray(qbar, dtype=float))
            return float(self.log_density_q(qs) + lj)

    def _traced(self, qbar):
        qs, lj = self.forward(qbar)
        self._last_qs = qs
        return self.log_density_q(qs) + lj

    def value_and_grad(self, qbar):
        """(value, gradient) of the modified log density by one AD pass.

        Raises a :class:`DivergentEvaluation` subclass on failure.
        """
        qbar = np.asarray(qbar, dtype=float)
        key = qbar.tobytes()
        if key == self._key:
            return self._cached[0], self._cached[1]
        self.n_evals += 1
        self._last_qs = None
        v, g = ad.value_and_grad(self._traced, qbar, tape=self.tape)
        q = np.concatenate([np.atleast_1d(np.asarray(ad.value(x), dtype=float)) for x in self._last_qs])
        if not np.all(np.isfinite(g)):
            raise DivergentEvaluation("non-finite gradient")
        self._key = key
        self._cached = (v, g, q)
        return v, g

    def coordinate_names(self):
        return self.blocking.coordinate_names()


class PlainTarget(ModifiedTarget):
    """Identity transform: HMC directly on ``q``."""

    def __init__(self, names, dims, log_density, name="target"):
        super().__init__([identity_block(n, d) for n, d in zip(names, dims)], log_density, name)
