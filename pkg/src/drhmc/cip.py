"""Catalog of constant-information parameterizations (CIPs).

For each family the functions return the Fisher information of every
parameter block under a parameterization in which each block's information
depends only on earlier blocks.  Log-densities are provided alongside so the
information values can be checked against score variances.

All log-density and transform functions are polymorphic: they accept floats
or :class:`~drhmc.autodiff.ADArray` arguments.
"""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from . import autodiff as ad
from . import linalg as la
from .errors import ConvergenceError, InvalidData, InvalidParameterization, InvalidPrior

LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class FisherBlock:
    """Fisher information of one parameter block.

    ``depends_on`` lists the labels of earlier blocks the value may depend on.
    """

    label: str
    value: object
    depends_on: tuple = field(default_factory=tuple)


def _scalar_out(x, like):
    return float(x) if np.ndim(like) == 0 else x


# ---------------------------------------------------------------- Gaussian
def gauss_fisher(delta, lam):
    """(F_lambda, F_mu) for N(mu, 1/exp(delta*lam))."""
    if delta == 0:
        raise InvalidParameterization("delta must be non-zero")
    return 0.5 * delta * delta, ad.exp(delta * lam)


def gauss_logpdf(x, mu, lam, delta=1.0):
    """Elementwise log N(x | mu, exp(-delta*lam))."""
    return 0.5 * delta * lam - 0.5 * LOG_2PI - 0.5 * (x - mu) ** 2 * ad.exp(delta * lam)


# ------------------------------------------------------------------- Gamma
# shape map g*(a): asymptotes g(a) ~ G_POS + a (a -> inf), G_NEG + a/sqrt(2) (a -> -inf)
_G_POS = -0.1528257924495051
_G_NEG = -0.3061802078252214
# b_1..b_7, rational correction for a >= 0
_G_B = np.array(
    [
        0.7819628323755627,
        0.3868075653216423,
        0.1340846511972002,
        0.3337571885056357e-1,
        0.6120134586887599e-2,
        0.1011187678928435e-2,
        0.2624458484189310e-3,
    ]
)
# c_0..c_7, rational correction for a < 0
_G_C = np.array(
    [
        0.7111275199671186e-3,
        -0.5659420768392230,
        0.2086466930494937,
        -0.5092075232333923e-1,
        0.8296382016331113e-2,
        -0.1077983942724898e-2,
        0.2172698298392963e-3,
        -0.9042509934070973e-5,
    ]
)


def _poly(coef, x):
    """sum_k coef[k] x^(k+1) by Horner."""
    acc = np.zeros_like(x)
    for c in coef[::-1]:
        acc = (acc + c) * x
    return acc


def _dpoly(coef, x):
    """Derivative of ``_poly``."""
    acc = np.zeros_like(x)
    k = len(coef)
    for j in range(k - 1, -1, -1):
        acc = acc * x + (j + 1) * coef[j]
    return acc


def _g_parts(a):
    a = np.asarray(a, dtype=float)
    val = np.empty_like(a)
    der = np.empty_like(a)
    pos = a >= 0.0
    ap = a[pos]
    D = 1.0 + _poly(_G_B, ap)
    Dp = _dpoly(_G_B, ap)
    val[pos] = _G_POS + ap - _G_POS / D
    der[pos] = 1.0 + _G_POS * Dp / (D * D)
    neg = ~pos
    an = a[neg]
    r = np.sqrt(1.0 - an)
    D = 1.0 + _G_C[0] * (r - 1.0) + _poly(_G_C[1:], an)
    Dp = -_G_C[0] / (2.0 * r) + _dpoly(_G_C[1:], an)
    val[neg] = _G_NEG + an / math.sqrt(2.0) - _G_NEG / D
    der[neg] = 1.0 / math.sqrt(2.0) + _G_NEG * Dp / (D * D)
    return val, der


def gamma_g(a):
    """Approximate log-shape map g*(a) of the Gamma CIP (g*(0) = 0)."""
    if ad.is_ad(a):
        v, d = _g_parts(a.val)
        return ad.unary_op(a, v, d)
    v, _ = _g_parts(a)
    return _scalar_out(v, a)


def gamma_g_deriv(a):
    """Analytic derivative of g*."""
    _, d = _g_parts(a)
    return _scalar_out(d, a)


def gamma_fisher(a):
    """(F_a, F_b) for the Gamma CIP with shape exp(g(a)) and log-mean b."""
    return 0.5, ad.exp(gamma_g(a))


def gamma_logpdf(x, a, b):
    """log Gamma(x | shape exp(g(a)), rate exp(g(a) - b))."""
    ga = gamma_g(a)
    alpha = ad.exp(ga)
    lrate = ga - b
    return alpha * lrate - ad.lgamma(alpha) + (alpha - 1.0) * np.log(x) - x * ad.exp(lrate)


def fixed_shape_gamma_fisher(alpha):
    if not alpha > 0:
        raise InvalidParameterization("shape must be positive")
    return float(alpha)


def fixed_shape_gamma_logpdf(x, b, alpha, sign=1.0):
    """log Gamma(x | shape alpha, rate exp(sign*b)); sign=+1 log-rate, -1 log-scale."""
    return alpha * sign * b - special.gammaln(alpha) + (alpha - 1.0) * np.log(x) - x * ad.exp(sign * b)


# -------------------------------------------------------------- chi-square
_C_ASYM = 0.06756699579940
# d_0..d_8 for eta >= 0
_C_D = np.array(
    [
        0.1328187661904628,
        -0.8124042180306501,
        -0.6984149140560064,
        -0.2688718703460384,
        -0.1935917930606054,
        0.7544141784717283e-1,
        -0.1551443919329064e-1,
        0.6217289009833316e-3,
        0.2243193152771084e-3,
    ]
)
# g_1..g_8 for eta < 0
_C_G = np.array(
    [
        -1.043216558395395,
        0.6460991001293077,
        -0.2875916175338523,
        0.9904289739460698e-1,
        -0.2754355277497658e-1,
        0.6410214426494266e-2,
        -0.1291969976759803e-2,
        0.2718157192376444e-3,
    ]
)


def _c_parts(eta):
    e = np.asarray(eta, dtype=float)
    val = np.empty_like(e)
    der = np.empty_like(e)
    pos = e >= 0.0
    ep = e[pos]
    S = (1.0 + 0.5 * ep) ** 4 + _C_D[0] + _poly(_C_D[1:4], ep)
    Sp = 2.0 * (1.0 + 0.5 * ep) ** 3 + _dpoly(_C_D[1:4], ep)
    inv = 1.0 / (ep + 1.0)
    for k in range(4, 9):
        S = S + _C_D[k] * inv ** (k - 3)
        Sp = Sp - (k - 3) * _C_D[k] * inv ** (k - 2)
    val[pos] = 0.5 * np.log(S)
    der[pos] = 0.5 * Sp / S
    neg = ~pos
    en = e[neg]
    D = 1.0 + _poly(_C_G, en)
    Dp = _dpoly(_C_G, en)
    val[neg] = _C_ASYM + en / math.sqrt(2.0) - _C_ASYM / D
    der[neg] = 1.0 / math.sqrt(2.0) + _C_ASYM * Dp / (D * D)
    return val, der


def chi2_c(eta):
    """Approximate log-degrees-of-freedom map c*(eta) of the chi-square CIP."""
    if ad.is_ad(eta):
        v, d = _c_parts(eta.val)
        return ad.unary_op(eta, v, d)
    v, _ = _c_parts(eta)
    return _scalar_out(v, eta)


def chi2_c_deriv(eta):
    _, d = _c_parts(eta)
    return _scalar_out(d, eta)


def chi2_fisher():
    return 0.5


def chi2_logpdf(x, eta):
    """log chi-square density with exp(c(eta)) degrees of freedom."""
    half_k = 0.5 * ad.exp(chi2_c(eta))
    return (half_k - 1.0) * np.log(x) - 0.5 * x - half_k * math.log(2.0) - ad.lgamma(half_k)


# ------------------------------------------------------- Laplace / Weibull
def laplace_fisher(lam):
    """(F_lambda, F_mu) for the Laplace distribution with log-scale lambda."""
    return 1.0, ad.exp(-2.0 * lam)


def laplace_logpdf(x, mu, lam):
    return -ad.absolute(x - mu) * ad.exp(-lam) - lam - math.log(2.0)


WEIBULL_C = math.exp(1.0 - np.euler_gamma)  # exp(Gamma'(2))


def weibull_fisher(a):
    """(F_a, F_b) for the Weibull with log-shape a and log-scale b."""
    return math.pi**2 / 6.0, ad.exp(2.0 * a)


def weibull_logpdf(x, a, b):
    k = ad.exp(a)
    lx = np.log(x)
    return a + math.log(WEIBULL_C) - k * b + (k - 1.0) * lx - WEIBULL_C * ad.exp(k * (lx - b))


# ------------------------------------------------------------ Student's t
T_INFO_ANCHORS = {4: 0.06, 10: 0.01, 20: 0.003}


def student_t_fisher(a, lam, r=0.01):
    """(F_a, F_lambda, F_mu) for the approximate t CIP; F_a is the constant r."""
    nu = ad.exp(a)
    f_lam = 0.5 * nu / (nu + 3.0)
    f_mu = ad.exp(lam) * (nu + 1.0) ** 3 / (nu * nu * (nu + 3.0))
    return r, f_lam, f_mu


def student_t_logpdf(x, mu, lam, a):
    """Location-scale t with nu = exp(a) and scale nu*exp(-lam/2)/(nu+1)."""
    nu = ad.exp(a)
    q = (x - mu) ** 2 * ad.exp(lam) * (nu + 1.0) ** 2 * ad.exp(-3.0 * a)
    return (
        ad.lgamma(0.5 * (nu + 1.0))
        - ad.lgamma(0.5 * nu)
        - 0.5 * (a + math.log(math.pi))
        - a
        + 0.5 * lam
        + ad.log(nu + 1.0)
        - 0.5 * (nu + 1.0) * ad.log1p(q)
    )


# ------------------------------------------------------ discrete, observed
def observed_fisher_discrete(family, y, n=None):
    """Observed information at the maximizer for a discrete observation block.

    poisson: sum(y); binomial: y(n-y)/n; negbinomial: n*y/(n+y).
    """
    y = np.asarray(y, dtype=float)
    if np.any(y < 0) or np.any(y != np.floor(y)):
        raise InvalidData("counts must be non-negative integers")
    if family == "poisson":
        return float(y.sum())
    if n is None:
        raise InvalidData(f"{family} needs n")
    if family == "binomial":
        if np.any(y > n):
            raise InvalidData("binomial count exceeds n")
        return float(np.sum(y * (n - y) / n))
    if family == "negbinomial":
        if not n > 0:
            raise InvalidData("negative binomial needs n > 0")
        return float(np.sum(n * y / (n + y)))
    raise ValueError(f"unknown family {family!r}")


# ------------------------------------------------------------------- AR(1)
def _check_T(T):
    if T < 3:
        raise InvalidParameterization("AR(1) CIP needs T >= 3")


def ar1_u(a, T):
    """Integrand u(a) whose integral maps psi to omega."""
    a = np.asarray(a, dtype=float)
    with np.errstate(over="ignore"):
        sech2 = 1.0 / np.cosh(a) ** 2
    return 2.0 / math.sqrt(T) * np.sqrt(1.0 + 0.5 * (T - 3) * sech2)


def ar1_omega(psi, T):
    """omega = int_0^psi u(a) da, in closed form.

    With s = sinh(psi), b^2 = (T-1)/2 and c^2 = (T-3)/2 the antiderivative is
    asinh(s/b) + c*atan(c*s/sqrt(s^2 + b^2)), scaled by 2/sqrt(T).
    """
    _check_T(T)
    psi = np.asarray(psi, dtype=float)
    sgn = np.sign(psi)
    p = np.abs(psi)
    b2 = 0.5 * (T - 1)
    b = math.sqrt(b2)
    c = math.sqrt(0.5 * (T - 3))
    big = p > 700.0
    with np.errstate(over="ignore", divide="ignore"):
        sh = np.sinh(np.where(big, 0.0, p))
        t1 = np.where(big, p - math.log(b), np.arcsinh(sh / b))
        t2 = np.where(big, math.atan(c), np.arctan(c / np.sqrt(1.0 + (b / sh) ** 2)))
    out = sgn * (2.0 / math.sqrt(T)) * (t1 + c * t2)
    return _scalar_out(out, psi)


def _psi_float(omega, T):
    _check_T(T)
    w = np.asarray(omega, dtype=float)
    sgn = np.sign(w)
    w = np.abs(w)
    hi = 0.5 * math.sqrt(T) * w
    lo = w / float(ar1_u(0.0, T))
    psi = hi.copy()
    for _ in range(100):
        step = (np.asarray(ar1_omega(psi, T)) - w) / ar1_u(psi, T)
        new = np.clip(psi - step, lo, hi)
        done = np.abs(new - psi) <= 1e-15 * (1.0 + psi)
        psi = new
        if np.all(done):
            break
    else:
        raise ConvergenceError("psi Newton iteration did not converge")
    return sgn * psi


def ar1_psi(omega, T):
    """psi(omega): odd, increasing; phi = tanh(psi) is the AR(1) coefficient.

    Newton on the closed-form integral; for AD input the derivative
    d psi/d omega = 1/u(psi) is recorded directly (no differentiation
    through the root finder).
    """
    if ad.is_ad(omega):
        p = _psi_float(omega.val, T)
        return ad.unary_op(omega, p, 1.0 / ar1_u(p, T))
    return _scalar_out(_psi_float(omega, T), omega)


def ar1_phi(omega, T):
    return ad.tanh(ar1_psi(omega, T))


def ar1_fisher_matrix(lam, omega, T):
    """Full 3x3 Fisher information of (lambda, omega, mu); not block diagonal."""
    psi = float(ar1_psi(float(omega), T))
    dpsi = 1.0 / float(ar1_u(psi, T))
    sech2 = 1.0 / math.cosh(psi) ** 2
    phi = math.tanh(psi)
    F = np.zeros((3, 3))
    F[0, 0] = 0.5 * T
    F[0, 1] = F[1, 0] = -dpsi * phi
    F[1, 1] = dpsi**2 * (2.0 + (T - 3) * sech2)
    F[2, 2] = math.exp(lam) * (2.0 * (T - 1) * (1.0 - phi) - (T - 2) * sech2)
    return F


def ar1_fisher(lam, omega, T):
    """Block informations (F_lambda, F_omega, F_mu) used by the CIP blocking."""
    _check_T(T)
    psi = ar1_psi(omega, T)
    phi = ad.tanh(psi)
    sech2 = 1.0 - phi * phi
    f_mu = ad.exp(lam) * (2.0 * (T - 1) * (1.0 - phi) - (T - 2) * sech2)
    return 0.5 * T, 0.5 * T, f_mu


def ar1_precision_phi(lam, phi, T):
    """Precision of a stationary AR(1) path of length T with coefficient phi."""
    e = ad.exp(lam)
    corner = ad.stack([e]) if not ad.is_ad(e) else e.reshape(1)
    if T == 1:
        return la.TriDiagSym(corner * (1.0 - phi * phi), np.zeros(0))
    inner = e * (1.0 + phi * phi) * np.ones(T - 2)
    diag = ad.concatenate([corner, inner, corner])
    return la.TriDiagSym(diag, -(e * phi) * np.ones(T - 1))


def ar1_precision(lam, omega, T):
    return ar1_precision_phi(lam, ar1_phi(omega, T), T)


def rw1_precision(lam, T):
    """(Singular) precision of an intrinsic first-order random walk."""
    e = ad.exp(lam)
    return la.tridiag_const1n(T, e, 2.0 * e, -e)


def ar1_logpdf(x, lam, omega, mu, T=None):
    """log density of a stationary AR(1) path x (length T)."""
    T = len(x) if T is None else T
    psi = ar1_psi(omega, T)
    phi = ad.tanh(psi)
    d = x - mu
    e = ad.exp(lam)
    innov = d[1:] - phi * d[:-1]
    quad = (1.0 - phi * phi) * d[0] ** 2 + ad.sum(innov * innov)
    return -0.5 * T * LOG_2PI + 0.5 * T * lam - ad.log_cosh(psi) - 0.5 * e * quad


def rw1_logpdf(x, lam):
    """log kernel of an intrinsic RW(1): (T-1)/2 lam - exp(lam)/2 sum dx^2."""
    T = len(x)
    dx = x[1:] - x[:-1]
    return 0.5 * (T - 1) * lam - 0.5 * ad.exp(lam) * ad.sum(dx * dx)


def ar1_rw_fisher_lambda(kind, T):
    """Log-precision information of intrinsic Gaussian models."""
    if kind == "rw1":
        if T < 2:
            raise InvalidParameterization("RW(1) needs T >= 2")
        return 0.5 * (T - 1)
    if kind == "rw2":
        if T < 3:
            raise InvalidParameterization("RW(2) needs T >= 3")
        return 0.5 * (T - 2)
    if kind == "besag":
        if T < 2:
            raise InvalidParameterization("Besag model needs n >= 2")
        return 0.5 * (T - 1)
    if kind == "ar1":
        return 0.5 * T
    raise ValueError(f"unknown kind {kind!r}")


def ar1_omega_logprior(omega, alpha, beta, T):
    """log prior of omega when (phi(omega) + 1)/2 ~ Beta(alpha, beta)."""
    if not (alpha > 0 and beta > 0):
        raise InvalidPrior("Beta parameters must be positive")
    psi = ar1_psi(omega, T)
    phi = ad.tanh(psi)
    log_z = -ad.softplus(-2.0 * psi)
    log_1mz = -ad.softplus(2.0 * psi)
    u = (2.0 / math.sqrt(T)) * ad.sqrt(1.0 + 0.5 * (T - 3) * (1.0 - phi * phi))
    log_jac = -math.log(2.0) - 2.0 * ad.log_cosh(psi) - ad.log(u)
    return (alpha - 1.0) * log_z + (beta - 1.0) * log_1mz + log_jac - special.betaln(alpha, beta)


def ar1_omega_prior_mode(alpha, beta, T):
    f = lambda w: -float(ar1_omega_logprior(w, alpha, beta, T))
    # phi mode of the Beta gives a starting bracket in omega
    z0 = min(max((alpha - 1.0) / (alpha + beta - 2.0) if alpha + beta > 2 else 0.5, 1e-6), 1 - 1e-6)
    w0 = float(ar1_omega(math.atanh(2.0 * z0 - 1.0), T))
    res = optimize.minimize_scalar(f, bracket=(w0 - 1.0, w0, w0 + 1.0), tol=1e-12)
    if not res.success:
        raise ConvergenceError("omega prior mode search failed")
    return float(res.x)


def ar1_omega_prior_prec(alpha, beta, T, h=1e-4):
    """xi(T): minus the second derivative of the omega log prior at its mode."""
    w = ar1_omega_prior_mode(alpha, beta, T)
    f = lambda v: float(ar1_omega_logprior(v, alpha, beta, T))
    return -(f(w + h) - 2.0 * f(w) + f(w - h)) / (h * h)


# ------------------------------------------------ unrestricted precision
@dataclass
class PrecisionCipParams:
    """lam (n) log pivot scales and V[j-1] = V^[j] (length n-j), j=1..n-1."""

    lam: np.ndarray
    V: list

    @property
    def n(self):
        return len(self.lam)

    @classmethod
    def from_flat(cls, theta, n):
        """Inverse of :meth:`flat`: lam first, then V^[1], ..., V^[n-1]."""
        if not ad.is_ad(theta):
            theta = np.asarray(theta, dtype=float)
        lam = theta[:n]
        V = []
        k = n
        for j in range(1, n):
            V.append(theta[k : k + n - j])
            k += n - j
        return cls(lam, V)

    def flat(self):
        return np.concatenate([np.asarray(self.lam)] + [np.asarray(v) for v in self.V])


def _unit_lower(p):
    n = p.n
    V = np.eye(n)
    for j in range(1, n):
        V[j:, j - 1] = p.V[j - 1]
    return V


def mvn_cip_precision(p):
    """(P, Vt) with Vt = V diag(exp(lam/2)) and P = Vt Vt^T."""
    Vt = _unit_lower(p) * np.exp(0.5 * np.asarray(p.lam, dtype=float))[None, :]
    return Vt @ Vt.T, Vt


def mvn_cip_logpdf(x, mu, lam, V):
    """log N(x | mu, P^{-1}) with P from (lam, V); arguments may be AD."""
    n = len(x)
    d = x - mu
    zs = []
    for j in range(n):
        s = d[j]
        if j < n - 1:
            s = s + ad.dot(V[j], d[j + 1 :])
        zs.append(ad.exp(0.5 * lam[j]) * s)
    z = ad.stack(zs)
    return 0.5 * ad.sum(lam) - 0.5 * ad.dot(z, z) - 0.5 * n * LOG_2PI


def mvn_cip_score(x, mu, p):
    """Score of mvn_cip_logpdf: (d/d lam, [d/d V^[j]]) for draws x (..., n)."""
    x = np.asarray(x, dtype=float)
    d = x - mu
    _, Vt = mvn_cip_precision(p)
    z = d @ Vt  # rows: (Vt^T d)^T
    g_lam = 0.5 - 0.5 * z * z
    half = np.exp(0.5 * np.asarray(p.lam, dtype=float))
    g_V = [-(half[j - 1] * z[..., j - 1])[..., None] * d[..., j:] for j in range(1, p.n)]
    return g_lam, g_V


def mvn_cip_fisher(p):
    """Fisher blocks [lam, V^[n-1], ..., V^[1]] via the backward covariance recursion."""
    n = p.n
    lam = np.asarray(p.lam, dtype=float)
    blocks = [FisherBlock("lambda", 0.5 * np.eye(n), ())]
    if n == 1:
        return blocks
    sig = np.array([[math.exp(-lam[n - 1])]])
    blocks.append(FisherBlock(f"V[{n - 1}]", math.exp(lam[n - 2]) * sig, ("lambda",)))
    for j in range(n - 2, 0, -1):
        v = np.asarray(p.V[j], dtype=float)  # V^[j+1]
        rho = sig @ v
        top = math.exp(-lam[j]) + rho @ v
        new = np.empty((n - j, n - j))
        new[0, 0] = top
        new[0, 1:] = -rho
        new[1:, 0] = -rho
        new[1:, 1:] = sig
        sig = new
        deps = ("lambda",) + tuple(f"V[{k}]" for k in range(n - 1, j, -1))
        blocks.append(FisherBlock(f"V[{j}]", math.exp(lam[j - 1]) * sig, deps))
    return blocks


@dataclass
class WishartImplied:
    """Pre-computed pieces of the Wishart(Q, nu) prior expressed in (lam, V)."""

    Q: np.ndarray
    nu: float
    W: np.ndarray
    Qinv: np.ndarray
    lam_coef: np.ndarray  # (nu+n+1)/2 - j
    V_mean: list
    V_prec: list  # precision of V^[j] at lam_j = 0

    @classmethod
    def build(cls, Q, nu):
        Q = np.asarray(Q, dtype=float)
        n = Q.shape[0]
        if not nu > n:
            raise InvalidPrior("Wishart degrees of freedom must exceed the dimension")
        W = np.linalg.cholesky(Q)
        Qinv = np.linalg.inv(Q)
        Qinv = 0.5 * (Qinv + Qinv.T)
        coef = 0.5 * (nu + n + 1) - np.arange(1, n + 1)
        means, precs = [], []
        for j in range(1, n):
            S = Qinv[j:, j:]
            precs.append(S)
            means.append(-np.linalg.solve(S, Qinv[j:, j - 1]))
        return cls(Q, nu, W, Qinv, coef, means, precs)

    @property
    def lam_prior_precision(self):
        """Second-derivative approximation to the lam prior precision."""
        return self.lam_coef.copy()


def wishart_implied_logprior(p, Q, nu):
    """(logp_lam, logp_V) kernels so that P(lam, V) ~ Wishart_n(Q, nu).

    Returns the log kernels up to one additive constant; V^[j] | lam is
    Gaussian with precision exp(lam_j) [Q^{-1}]_{j+1:n, j+1:n}.
    """
    w = Q if isinstance(Q, WishartImplied) else WishartImplied.build(Q, nu)
    lam = p.lam
    wd2 = np.diag(w.W) ** 2
    logp_lam = ad.sum(w.lam_coef * lam - 0.5 * ad.exp(lam) / wd2)
    logp_V = 0.0
    for j in range(1, p.n):
        r = p.V[j - 1] - w.V_mean[j - 1]
        logp_V = logp_V - 0.5 * ad.exp(lam[j - 1]) * _quad_dense(w.V_prec[j - 1], r)
    return logp_lam, logp_V


def _quad_dense(S, r):
    rows = [ad.dot(S[i], r) for i in range(S.shape[0])]
    return ad.dot(r, ad.stack(rows))
