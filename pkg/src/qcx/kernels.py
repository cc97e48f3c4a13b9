"""Scalar power-function kernels and certified checks of the structural inequalities.

Everything here lives at the Hilbert-space level: inputs are real vectors of
any dimension (or any ndarray, treated through norms and dot products), and
all margin computations are vectorized over leading axes so that large random
sweeps stay in numpy.  The closed-form constants are the ones assembled in
the proofs, not sharp ones.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    MissingGradientError,
    NormalizationError,
    ParameterRangeError,
    QuadratureError,
    SingularPointError,
)

# Margins smaller than this in magnitude are ties ("tight"), not failures.
TIE_TOL = 1e-12


# ---------------------------------------------------------------------------
# parameters and constants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelParams:
    """Structural constants governing every inequality and construction.

    p : growth exponent, p > 1
    mu : regularization offset, mu >= 0
    nu : ellipticity constant, nu > 0
    lip : optional gradient Lipschitz constant, lip >= nu
    growth : optional growth constant, > 0
    """

    p: float
    mu: float = 0.0
    nu: float = 1.0
    lip: float | None = None
    growth: float | None = None

    def __post_init__(self):
        if not self.p > 1:
            raise ParameterRangeError(f"p must be > 1, got {self.p}")
        if self.mu < 0:
            raise ParameterRangeError(f"mu must be >= 0, got {self.mu}")
        if not self.nu > 0:
            raise ParameterRangeError(f"nu must be > 0, got {self.nu}")
        if self.lip is not None and self.lip < self.nu:
            raise ParameterRangeError(
                f"lip must be >= nu, got lip={self.lip}, nu={self.nu}")
        if self.growth is not None and not self.growth > 0:
            raise ParameterRangeError(f"growth must be > 0, got {self.growth}")


@dataclass(frozen=True)
class ConstantsTable:
    """Closed-form constants of the lower/upper integral and Taylor bounds.

    kappa_p, K_p bound the segment integrals from below/above; theta_p,
    Theta_p bound the second-order Taylor remainder of the power kernel;
    lam = nu / Theta_p is the admissible shift weight.
    """

    kappa_p: float
    K_p: float
    theta_p: float
    Theta_p: float
    lam: float

    def __post_init__(self):
        if not (0 < self.kappa_p <= 1 <= self.K_p):
            raise ParameterRangeError("need 0 < kappa_p <= 1 <= K_p")
        if not (0 < self.theta_p <= self.Theta_p):
            raise ParameterRangeError("need 0 < theta_p <= Theta_p")


def constants_for(params: ModelParams) -> ConstantsTable:
    """Assemble the proof constants for the given exponent.

    For 1 < p <= 2: kappa_p = 2^(p/2-2) and K_p is the larger of the two
    sufficient bounds 2^((2-p)/2)/(p-1), 2^(3(2-p)/2)/(p-1).  For p > 2:
    K_p = 2^((p-2)/2) and kappa_p = 5^((2-p)/2)/(4 p (p-1)), the smaller of
    the two case bounds.  theta_p = p min(p-1,1) kappa_p and
    Theta_p = p max(p-1,1) K_p.
    """
    p = params.p
    if p <= 2:
        kappa = 2.0 ** (p / 2 - 2)
        K = max(2.0 ** ((2 - p) / 2), 2.0 ** (1.5 * (2 - p))) / (p - 1)
    else:
        kappa = 5.0 ** ((2 - p) / 2) / (4 * p * (p - 1))
        K = 2.0 ** ((p - 2) / 2)
    theta = p * min(p - 1.0, 1.0) * kappa
    Theta = p * max(p - 1.0, 1.0) * K
    return ConstantsTable(kappa_p=kappa, K_p=K, theta_p=theta,
                          Theta_p=Theta, lam=params.nu / Theta)


# ---------------------------------------------------------------------------
# power kernel
# ---------------------------------------------------------------------------

def _norm_sq(x):
    """Squared norm over the last axis (vectors) or last two (matrices)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return x * x
    return np.sum(x * x, axis=-1)


def power_g(x, mu, p):
    """(mu^2 + |x|^2)^(p/2), vectorized over leading axes of x."""
    s = mu * mu + _norm_sq(x)
    return s ** (p / 2)


def grad_power_g(x, mu, p):
    """Gradient p (mu^2 + |x|^2)^((p-2)/2) x of the power kernel.

    Raises SingularPointError when p < 2, mu = 0 and some x vanishes: the
    weight exponent is negative there and the formula is not differentiable
    in the classical sense.
    """
    x = np.asarray(x, dtype=float)
    s = mu * mu + _norm_sq(x)
    if p < 2 and np.any(s == 0.0):
        raise SingularPointError("grad undefined at x=0 when p<2 and mu=0")
    with np.errstate(divide="ignore"):
        w = p * s ** ((p - 2) / 2)
    w = np.where(s == 0.0, 0.0, w)  # p >= 2: continuous extension is 0
    return np.asarray(w)[..., None] * x


def power_hessian_bound(p) -> float:
    """Constant C with |second derivative of the power kernel| <= C (mu^2+|x|^2)^((p-2)/2)."""
    return p * max(p - 1.0, 1.0)


def weighted_sq(sq, mu, p):
    """(mu^2 + sq)^((p-2)/2) * sq with the continuous 0 at sq=0, mu=0."""
    sq = np.asarray(sq, dtype=float)
    base = mu * mu + sq
    with np.errstate(divide="ignore", invalid="ignore"):
        out = base ** ((p - 2) / 2) * sq
    return np.where(base == 0.0, 0.0, out)


def weight_factor(sq, mu, p):
    """(mu^2 + sq)^((p-2)/2); equals 0^((p-2)/2) conventions of numpy at base 0."""
    base = mu * mu + np.asarray(sq, dtype=float)
    with np.errstate(divide="ignore"):
        return base ** ((p - 2) / 2)


# ---------------------------------------------------------------------------
# segment quadrature: integral over t in [0,1] of (mu^2+|x+ty|^2)^((p-2)/2) w(t)
# ---------------------------------------------------------------------------
#
# |x+ty|^2 = m + c2 (t - t0)^2 with m = |x_perp|^2 (rejection of x from y),
# c2 = |y|^2 and t0 the segment parameter closest to the origin, so only
# three coefficients per sample are carried.  The completed-square form stays
# accurate near the singular set, where the monomial quadratic would cancel
# catastrophically.  The vectorized path doubles a uniform panel count until
# the composite Gauss-Legendre value stabilizes; stragglers (near-singular
# integrands at mu=0, p<2) fall back to a scalar adaptive bisection that
# grades panels toward the singularity.

_MAX_UNIFORM_LEVEL = 6       # up to 2^6 uniform panels in the vectorized pass
_MAX_ADAPTIVE_DEPTH = 40     # panel width down to 2^-40 in the fallback


def _leggauss(nodes):
    return np.polynomial.legendre.leggauss(nodes)


def _panel_points(edges, nodes):
    """Gauss points/weights for consecutive panels [edges[i], edges[i+1]]."""
    z, w = _leggauss(nodes)
    a = edges[:-1][:, None]
    b = edges[1:][:, None]
    pts = 0.5 * (b - a) * (z[None, :] + 1.0) + a
    wts = 0.5 * (b - a) * w[None, :]
    return pts.ravel(), wts.ravel()


def _integrand(m, t0, c2, t, mu, p, weighted):
    """Weight (1-t) (weighted) or 1, times (mu^2 + m + c2 (t-t0)^2)^((p-2)/2)."""
    dt = t - t0[..., None]
    s = mu * mu + m[..., None] + c2[..., None] * dt * dt
    with np.errstate(divide="ignore"):
        vals = s ** ((p - 2) / 2)
    if weighted:
        vals = vals * (1.0 - t)
    return vals


def _segment_integral_batch(m, t0, c2, mu, p, weighted, nodes,
                            rel_tol=1e-11, abs_tol=1e-14):
    """Vectorized composite quadrature; returns (value, error_bound) arrays.

    Samples whose doubling estimate has not stabilized at the deepest uniform
    level are recomputed one by one with the adaptive fallback.
    """
    shape = np.broadcast(m, t0, c2).shape
    m, t0, c2 = np.broadcast_arrays(m, t0, c2)
    prev = None
    value = np.zeros(shape)
    err = np.full(shape, np.inf)
    active = np.ones(shape, dtype=bool)
    for level in range(_MAX_UNIFORM_LEVEL + 1):
        edges = np.linspace(0.0, 1.0, 2 ** level + 1)
        pts, wts = _panel_points(edges, nodes)
        cur = np.einsum(
            "...k,k->...",
            _integrand(m[active], t0[active], c2[active], pts, mu, p, weighted),
            wts)
        if prev is not None:
            delta = np.abs(cur - prev)
            tol = np.maximum(abs_tol, rel_tol * np.abs(cur))
            done = delta <= tol
            idx = np.flatnonzero(active.ravel())
            value.ravel()[idx] = cur
            err.ravel()[idx] = delta
            still = ~done
            active.ravel()[idx[done]] = False
            prev = cur[still]
            if not np.any(active):
                break
        else:
            prev = cur
    if np.any(active):
        idx = np.flatnonzero(active.ravel())
        for i in idx:
            v, e = _segment_integral_adaptive(
                m.ravel()[i], t0.ravel()[i], c2.ravel()[i],
                mu, p, weighted, nodes, rel_tol, abs_tol)
            value.ravel()[i] = v
            err.ravel()[i] = e
    return value, err


def _segment_integral_adaptive(m, t0, c2, mu, p, weighted, nodes,
                               rel_tol=1e-11, abs_tol=1e-14):
    """Scalar adaptive bisection with per-panel split-vs-whole error estimate."""

    def panel(a, b):
        pts, wts = _panel_points(np.array([a, b]), nodes)
        whole = float(_integrand(np.array(m), np.array(t0), np.array(c2),
                                 pts, mu, p, weighted) @ wts)
        mid = 0.5 * (a + b)
        pts2, wts2 = _panel_points(np.array([a, mid, b]), nodes)
        halves = float(_integrand(np.array(m), np.array(t0), np.array(c2),
                                  pts2, mu, p, weighted) @ wts2)
        return halves, abs(halves - whole)

    val, e = panel(0.0, 1.0)
    heap = [(-e, 0.0, 1.0, val, e)]
    total, total_err = val, e
    while True:
        tol = max(abs_tol, rel_tol * abs(total))
        if total_err <= tol:
            return total, total_err
        neg_e, a, b, v, e = heapq.heappop(heap)
        if b - a < 2.0 ** (-_MAX_ADAPTIVE_DEPTH):
            raise QuadratureError(
                "segment quadrature did not converge: singular integrand "
                f"(panel width {b - a:.3e}, residual error {total_err:.3e})")
        mid = 0.5 * (a + b)
        vl, el = panel(a, mid)
        vr, er = panel(mid, b)
        total += vl + vr - v
        total_err += el + er - e
        heapq.heappush(heap, (-el, a, mid, vl, el))
        heapq.heappush(heap, (-er, mid, b, vr, er))


def segment_integral(x, y, mu, p, weighted, nodes=16,
                     rel_tol=1e-11, abs_tol=1e-14):
    """Integral over [0,1] of (mu^2+|x+ty|^2)^((p-2)/2), optionally times (1-t).

    x, y may carry leading batch axes; returns (value, error_bound).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    c2 = np.sum(y * y, axis=-1)
    cross = np.sum(x * y, axis=-1)
    coef = np.divide(cross, c2, out=np.zeros(np.shape(cross)), where=c2 > 0.0)
    perp = x - coef[..., None] * y
    m = np.sum(perp * perp, axis=-1)
    t0 = -coef
    return _segment_integral_batch(m, t0, c2, mu, p, weighted, nodes,
                                   rel_tol, abs_tol)


# ---------------------------------------------------------------------------
# check results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InequalityCheck:
    """Outcome of one pointwise or quadrature-backed inequality check.

    margins : slack of each displayed inequality (>= 0 means it holds)
    error_bound : accumulated quadrature error charged against the margins
    ok : every margin >= -(error_bound + tie tolerance)
    tight : some margin sits inside the tie band
    """

    ok: bool
    margins: tuple
    error_bound: float = 0.0
    tight: bool = False

    @property
    def margin(self) -> float:
        return min(self.margins)


def _as_check(margins, error_bound=0.0):
    margins = tuple(float(m) for m in margins)
    band = error_bound + TIE_TOL
    ok = all(m >= -band for m in margins)
    tight = any(abs(m) <= band for m in margins)
    return InequalityCheck(ok=ok, margins=margins,
                           error_bound=float(error_bound), tight=tight)


def _validate_pm(mu, p, *, upper=None):
    if not p > 1:
        raise ParameterRangeError(f"p must be > 1, got {p}")
    if upper is not None and p > upper:
        raise ParameterRangeError(f"p must be <= {upper}, got {p}")
    if mu < 0:
        raise ParameterRangeError(f"mu must be >= 0, got {mu}")


# ---------------------------------------------------------------------------
# lower / upper segment-integral bounds
# ---------------------------------------------------------------------------

def prima_margins(x, y, mu, p, nodes=16):
    """Batched slack of the weighted lower bound; returns (margins, errors)."""
    lhs, err = segment_integral(x, y, mu, p, weighted=True, nodes=nodes)
    kappa = constants_for(ModelParams(p=p)).kappa_p
    rhs = weight_factor(_norm_sq(x) + _norm_sq(y), mu, p)
    return lhs - kappa * rhs, err


def seconda_margins(x, y, mu, p, nodes=16):
    """Batched slack of the unweighted upper bound; returns (margins, errors)."""
    lhs, err = segment_integral(x, y, mu, p, weighted=False, nodes=nodes)
    K = constants_for(ModelParams(p=p)).K_p
    rhs = weight_factor(_norm_sq(x) + _norm_sq(y), mu, p)
    return K * rhs - lhs, err


def _reject_singular_segment(x, y, mu, p):
    if p < 2 and mu == 0.0:
        both = _norm_sq(x) + _norm_sq(y)
        if np.any(both == 0.0):
            raise SingularPointError(
                "integrand undefined along x = y = 0 when p < 2 and mu = 0")


def check_prima(x, y, mu, p, quad_nodes=16) -> InequalityCheck:
    """Certified check of the lower segment-integral bound at one point."""
    _validate_pm(mu, p)
    if quad_nodes < 16:
        raise ParameterRangeError("quadrature node count must be >= 16")
    _reject_singular_segment(x, y, mu, p)
    m, e = prima_margins(x, y, mu, p, nodes=quad_nodes)
    return _as_check([float(m)], float(e))


def check_seconda(x, y, mu, p, quad_nodes=16) -> InequalityCheck:
    """Certified check of the upper segment-integral bound at one point."""
    _validate_pm(mu, p)
    if quad_nodes < 16:
        raise ParameterRangeError("quadrature node count must be >= 16")
    _reject_singular_segment(x, y, mu, p)
    m, e = seconda_margins(x, y, mu, p, nodes=quad_nodes)
    return _as_check([float(m)], float(e))


# ---------------------------------------------------------------------------
# Taylor remainder bounds for the power kernel
# ---------------------------------------------------------------------------

def power_remainder(x, y, mu, p, ysq=None):
    """g(x+y) - g(x) - grad g(x).y evaluated without catastrophic cancellation.

    Uses s1 := s0 + d with d = 2 x.y + |y|^2, so the scalar remainder of
    u -> u^(p/2) carries the rounding instead of two independent big norms.
    At p = 2 the result is exactly |y|^2.  Callers comparing against a bound
    built from their own |y|^2 atoms may pass it as ysq.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if ysq is None:
        ysq = _norm_sq(y)
    if p == 2:
        return ysq + np.zeros(np.broadcast(_norm_sq(x), ysq).shape)
    s0 = mu * mu + _norm_sq(x)
    if p < 2 and np.any(s0 == 0.0):
        raise SingularPointError("remainder undefined at x=0 when p<2 and mu=0")
    d = 2.0 * np.sum(x * y, axis=-1) + ysq
    with np.errstate(divide="ignore", invalid="ignore"):
        w0 = (p / 2) * s0 ** ((p - 2) / 2)
    w0 = np.where(s0 == 0.0, 0.0, w0)  # reachable only for p > 2
    bend = (s0 + d) ** (p / 2) - s0 ** (p / 2) - w0 * d
    return bend + w0 * ysq


def taylor_margins(x, y, mu, p):
    """Batched slacks (lower, upper) of the two-sided remainder bound."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    remainder = power_remainder(x, y, mu, p)
    tbl = constants_for(ModelParams(p=p))
    wsq = weight_factor(_norm_sq(x) + _norm_sq(y), mu, p) * _norm_sq(y)
    return remainder - tbl.theta_p * wsq, tbl.Theta_p * wsq - remainder


def check_taylor_bounds(x, y, mu, p) -> InequalityCheck:
    """Two-sided second-order remainder bound at one point (exact evaluation)."""
    _validate_pm(mu, p)
    lo, hi = taylor_margins(x, y, mu, p)
    return _as_check([float(lo), float(hi)])


def product_taylor_margins(x, xi, y, eta, mu, p, beta):
    """Batched slacks of the product-space remainder bounds.

    Returns (first, second) where second is None unless p >= 2.  Reduction:
    the weighted product norm is the plain norm of (x, beta*y).
    """
    x, xi = np.asarray(x, float), np.asarray(xi, float)
    y, eta = np.asarray(y, float), np.asarray(eta, float)
    z = np.concatenate(np.broadcast_arrays(x, beta * y), axis=-1)
    w = np.concatenate(np.broadcast_arrays(xi, beta * eta), axis=-1)
    scaled_eta_sq = _norm_sq(beta * eta)
    inc_sq = _norm_sq(xi) + scaled_eta_sq
    base_sq = _norm_sq(x) + _norm_sq(beta * y)
    lhs = power_remainder(z, w, mu, p, ysq=inc_sq)
    tbl = constants_for(ModelParams(p=p))
    first = lhs - tbl.theta_p * weight_factor(base_sq + inc_sq, mu, p) * inc_sq
    if p < 2:
        return first, None
    # p = 2 tightness: grouping the two eta terms reproduces inc_sq bitwise
    rhs2 = (tbl.theta_p * weight_factor(_norm_sq(x) + _norm_sq(xi), mu, p)
            * _norm_sq(xi)
            + (0.5 * tbl.theta_p * weight_factor(_norm_sq(x), mu, p)
               * scaled_eta_sq
               + 0.5 * tbl.theta_p * scaled_eta_sq ** (p / 2)))
    return first, lhs - rhs2


def check_product_taylor(x, xi, y, eta, mu, p, beta) -> InequalityCheck:
    """Remainder lower bounds for the beta-weighted product kernel (both displays)."""
    _validate_pm(mu, p)
    if beta < 0:
        raise ParameterRangeError(f"beta must be >= 0, got {beta}")
    first, second = product_taylor_margins(x, xi, y, eta, mu, p, beta)
    margins = [float(first)] if second is None else [float(first), float(second)]
    return _as_check(margins)


# ---------------------------------------------------------------------------
# elementary weighted-square inequalities (1 < p <= 2)
# ---------------------------------------------------------------------------

def lemma10_margins(x, y, mu, p, eps):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    wx = weighted_sq(_norm_sq(x), mu, p)
    wy = weighted_sq(_norm_sq(y), mu, p)
    m1 = 2.0 * wx + 2.0 * wy - weighted_sq(_norm_sq(x + y), mu, p)
    mixed = weight_factor(_norm_sq(x) + _norm_sq(y), mu, p) * _norm_sq(y)
    mixed = np.where(_norm_sq(y) == 0.0, 0.0, mixed)
    m2 = mixed + eps * wx - eps ** ((2 - p) / 2) * wy
    return m1, m2


def check_lemma10(x, y, mu, p, eps) -> InequalityCheck:
    """Both weighted-square comparison inequalities, pointwise."""
    _validate_pm(mu, p, upper=2)
    if not 0 < eps < 1:
        raise ParameterRangeError(f"eps must be in (0,1), got {eps}")
    m1, m2 = lemma10_margins(x, y, mu, p, eps)
    return _as_check([float(m1), float(m2)])


def lemma12_margins(a, b, mu, p, eps):
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    lead = 8.0 * eps ** ((p - 2) / p) * weight_factor(
        a * a + b * b, mu, p) * b * b
    lead = np.where(b == 0.0, 0.0, lead)
    return lead + eps * a ** p + eps * mu ** p - b ** p


def check_lemma12(a, b, mu, p, eps) -> InequalityCheck:
    """Scalar interpolation inequality for b^p, pointwise."""
    _validate_pm(mu, p, upper=2)
    if not 0 < eps < 1:
        raise ParameterRangeError(f"eps must be in (0,1), got {eps}")
    if np.any(np.asarray(a, float) < 0) or np.any(np.asarray(b, float) < 0):
        raise ParameterRangeError("a and b must be >= 0")
    return _as_check([float(lemma12_margins(a, b, mu, p, eps))])


# ---------------------------------------------------------------------------
# gradient Lipschitz bound from a Hessian bound
# ---------------------------------------------------------------------------

def gradient_lipschitz_margins(grad, hess_bound, x, y, mu, p):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    diff = np.linalg.norm(
        np.asarray(grad(x + y)) - np.asarray(grad(x)), axis=-1)
    K = constants_for(ModelParams(p=p)).K_p
    ynorm = np.sqrt(_norm_sq(y))
    return (K * hess_bound
            * weight_factor(_norm_sq(x) + _norm_sq(y), mu, p) * ynorm - diff)


def check_gradient_lipschitz(grad, hess_bound, x, y, mu, p) -> InequalityCheck:
    """Gradient increments bounded through the Hessian weight, pointwise.

    grad is the analytic gradient callable; hess_bound is the constant C of
    its certified weighted Hessian bound.  (The callable-plus-constant
    signature keeps this module below the energy catalog.)
    """
    _validate_pm(mu, p)
    if grad is None:
        raise MissingGradientError("analytic gradient required")
    return _as_check([float(gradient_lipschitz_margins(
        grad, hess_bound, x, y, mu, p))])


# ---------------------------------------------------------------------------
# three-point estimate with explicit epsilon constants
# ---------------------------------------------------------------------------

def lemma4_constant(eps, p) -> float:
    """Explicit constant of the three-point estimate, assembled from the proof.

    1 < p <= 2: 1 + max of the two case constants 2^((2-p)/2)/(4 eps) and
    2^((2-p)/2)/(p (q eps)^(p-1)), q = p/(p-1).  p >= 2: the chain constant
    a1 = 6^((p-2)/2) + 2^((p-4)/2)/eps, plus a Young split of the
    |y|^(p-2)|z|^2 term recycling eps/2 into the mixed-weight budget.
    """
    if eps <= 0:
        raise ParameterRangeError(f"eps must be > 0, got {eps}")
    if p <= 2:
        q = p / (p - 1)
        k1 = 2.0 ** ((2 - p) / 2) / (4 * eps)
        k2 = 2.0 ** ((2 - p) / 2) / (p * (q * eps) ** (p - 1))
        return 1.0 + max(k1, k2)
    a1 = 6.0 ** ((p - 2) / 2) + 2.0 ** ((p - 4) / 2) / eps
    # a1 |y|^(p-2)|z|^2 <= (eps/2)|y|^p + extra |z|^p via Young with p/(p-2), p/2
    t = (eps * p / (2 * (p - 2) * a1)) ** ((p - 2) / p)
    extra = a1 * (2.0 / p) * t ** (-p / 2)
    return max(a1, 3.0 ** ((p - 2) / 2) + extra)


def _spot_check_normalization(f, grad_f, points, mu, p):
    """Reject f whose gradient increments exceed the unit-constant bound."""
    for u, v in points:
        lhs = float(np.linalg.norm(
            np.asarray(grad_f(u + v)) - np.asarray(grad_f(u))))
        rhs = float(weight_factor(_norm_sq(u) + _norm_sq(v), mu, p)
                    * math.sqrt(float(_norm_sq(v))))
        if lhs > rhs * (1.0 + 1e-9) + 1e-13:
            raise NormalizationError(
                "supplied f violates the unit gradient-increment bound "
                f"({lhs:.6g} > {rhs:.6g}); rescale before checking")


def lemma4_margins(f, grad_f, x, y, z, mu, p, eps):
    x, y, z = (np.asarray(v, float) for v in (x, y, z))
    lhs = np.abs(np.asarray(f(x + y + z)) - np.asarray(f(x + y))
                 - np.sum(np.asarray(grad_f(x)) * z, axis=-1))
    c = lemma4_constant(eps, p)
    common = eps * weight_factor(_norm_sq(x) + _norm_sq(y), mu, p) * _norm_sq(y)
    common = np.where(_norm_sq(y) == 0.0, 0.0, common)
    if p <= 2:
        rhs = common + c * weighted_sq(_norm_sq(z), mu, p)
    else:
        rhs = (common + c * weight_factor(_norm_sq(x), mu, p) * _norm_sq(z)
               + c * _norm_sq(z) ** (p / 2))
    return rhs - lhs


def check_lemma4(f, grad_f, x, y, z, mu, p, eps) -> InequalityCheck:
    """Three-point estimate for a unit-normalized f, pointwise.

    The caller rescales f so its gradient increments satisfy the weighted
    bound with constant 1; a spot check on the supplied points enforces this.
    """
    _validate_pm(mu, p)
    if grad_f is None:
        raise MissingGradientError("analytic gradient required")
    if not eps > 0:
        raise ParameterRangeError(f"eps must be > 0, got {eps}")
    x, y, z = (np.asarray(v, float) for v in (x, y, z))
    _spot_check_normalization(f, grad_f, [(x, y), (x + y, z), (x, z)], mu, p)
    return _as_check([float(lemma4_margins(f, grad_f, x, y, z, mu, p, eps))])


# ---------------------------------------------------------------------------
# sweep driver
# ---------------------------------------------------------------------------

SWEEP_LEMMAS = ("prima", "seconda", "taylor", "product_taylor",
                "gradient_lipschitz", "three_point", "weighted_square",
                "scalar_interpolation")

_EPS_GRID = (0.1, 0.5, 0.9)
_BETA_GRID = (0.5, 1.0, 4.0)


@dataclass
class SweepCell:
    """Worst-case summary of one (lemma, p, mu) sweep cell."""

    lemma: str
    p: float
    mu: float
    samples: int
    worst_margin: float
    max_error_bound: float
    uncertified: int
    tight: int
    skipped: str | None = None

    @property
    def ok(self) -> bool:
        return self.skipped is not None or self.uncertified == 0

    def to_dict(self):
        return {
            "lemma": self.lemma, "p": self.p, "mu": self.mu,
            "samples": self.samples, "worst_margin": self.worst_margin,
            "max_error_bound": self.max_error_bound,
            "uncertified": self.uncertified, "tight": self.tight,
            "skipped": self.skipped,
        }


@dataclass
class SweepReport:
    cells: list
    seed: int

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.cells)

    def worst(self) -> float:
        margins = [c.worst_margin for c in self.cells if c.skipped is None]
        return min(margins) if margins else math.inf

    def to_dict(self):
        return {"schema": "qcx/lemma-sweeps/1", "seed": self.seed,
                "ok": self.ok, "cells": [c.to_dict() for c in self.cells]}


def _cell_tally(lemma, p, mu, margins_and_errs):
    worst = math.inf
    max_err = 0.0
    uncert = 0
    tight = 0
    total = 0
    for margins, err in margins_and_errs:
        for m in margins:
            m = np.asarray(m, float)
            e = np.zeros_like(m) if err is None else np.broadcast_to(
                np.asarray(err, float), m.shape)
            total += m.size
            worst = min(worst, float(m.min()))
            if err is not None:
                max_err = max(max_err, float(e.max()))
            band = e + TIE_TOL
            uncert += int(np.count_nonzero(m < -band))
            tight += int(np.count_nonzero(np.abs(m) <= band))
    # margins come in tuples per sample; report per-sample count
    return SweepCell(lemma=lemma, p=p, mu=mu, samples=total,
                     worst_margin=worst, max_error_bound=max_err,
                     uncertified=uncert, tight=tight)


def _draw(rng, count, dim):
    scale = rng.choice((0.3, 1.0, 3.0), size=count)[:, None]
    return rng.standard_normal((count, dim)) * scale


def run_sweeps(p_grid, mu_grid, samples=10_000, dims=(2, 3, 4, 5, 6),
               seed=0, quad_nodes=16, lemmas=SWEEP_LEMMAS) -> SweepReport:
    """Random sweeps of every scalar inequality over a (p, mu) grid.

    Each cell draws `samples` vector tuples split across `dims`, evaluates
    the batched margins and tallies uncertified failures (margin below the
    quadrature error bound plus the tie tolerance).
    """
    if samples < 1:
        raise ParameterRangeError("samples must be >= 1")
    cells = []
    for p in p_grid:
        tbl = constants_for(ModelParams(p=p))
        theta_norm = tbl.Theta_p
        for mu in mu_grid:
            rng = np.random.default_rng(
                np.random.SeedSequence(seed, spawn_key=(
                    int(p * 1000), int(mu * 1000))))
            per_dim = max(1, samples // len(dims))
            for lemma in lemmas:
                if lemma in ("weighted_square", "scalar_interpolation") and p > 2:
                    cells.append(SweepCell(
                        lemma=lemma, p=p, mu=mu, samples=0,
                        worst_margin=math.inf, max_error_bound=0.0,
                        uncertified=0, tight=0,
                        skipped="defined only for 1 < p <= 2"))
                    continue
                batches = []
                for dim in dims:
                    x = _draw(rng, per_dim, dim)
                    y = _draw(rng, per_dim, dim)
                    if lemma == "prima":
                        batches.append(prima_margins(
                            x, y, mu, p, nodes=quad_nodes))
                    elif lemma == "seconda":
                        batches.append(seconda_margins(
                            x, y, mu, p, nodes=quad_nodes))
                    elif lemma == "taylor":
                        batches.append((taylor_margins(x, y, mu, p), None))
                    elif lemma == "product_taylor":
                        xi = _draw(rng, per_dim, dim)
                        eta = _draw(rng, per_dim, dim)
                        for beta in _BETA_GRID:
                            first, second = product_taylor_margins(
                                x, xi, y, eta, mu, p, beta)
                            margins = (first,) if second is None \
                                else (first, second)
                            batches.append((margins, None))
                    elif lemma == "gradient_lipschitz":
                        m = gradient_lipschitz_margins(
                            lambda v: grad_power_g(v, mu, p),
                            power_hessian_bound(p), x, y, mu, p)
                        batches.append(((m,), None))
                    elif lemma == "three_point":
                        z = _draw(rng, per_dim, dim)
                        f = lambda v: power_g(v, mu, p) / theta_norm
                        gf = lambda v: grad_power_g(v, mu, p) / theta_norm
                        for eps in _EPS_GRID:
                            batches.append(((lemma4_margins(
                                f, gf, x, y, z, mu, p, eps),), None))
                    elif lemma == "weighted_square":
                        for eps in _EPS_GRID:
                            batches.append((lemma10_margins(
                                x, y, mu, p, eps), None))
                    elif lemma == "scalar_interpolation":
                        a = np.abs(x[:, 0]) * 3.0
                        b = np.abs(y[:, 0]) * 3.0
                        for eps in _EPS_GRID:
                            batches.append(((lemma12_margins(
                                a, b, mu, p, eps),), None))
                    else:
                        raise ParameterRangeError(f"unknown lemma {lemma!r}")
                normalized = []
                for item in batches:
                    margins, err = item
                    if not isinstance(margins, tuple):
                        margins = (margins,)
                    normalized.append((margins, err))
                cells.append(_cell_tally(lemma, p, mu, normalized))
    return SweepReport(cells=cells, seed=seed)
