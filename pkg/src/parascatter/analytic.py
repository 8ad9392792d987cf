"""Closed-form and series solutions for delta-wall parabolic barriers.

The wall sits on eta = eta0. Two strength profiles are supported:

* curvature-proportional, gamma(s) = gamma0 sqrt(pi/8) / sqrt(eta0^2 + xi^2),
  solved in closed form for the infinite wall and the knife edge;
* constant, gamma(s) = gamma0 sqrt(pi/8), on a finite wall |xi| < xi0,
  solved through the truncated coefficient system (1 + gamma0 F / 4) c = p.

Over the real line the PCFs of argument sigma*xi are orthogonal with weight
sqrt(2 pi) n! / sigma (the 1/sigma comes from rotating the contour onto the
Gaussian axis); that constant is used for every projection below.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_points, check_positive, check_strength
from .expansions import MAX_TERMS_CAP, SeriesControl, TruncationWarning, WaveParams, plane_wave
from .geometry import cartesian_to_parabolic
from .specfun import SQRT_HALF_PI, pcf_minus_one, pcf_neg_all, pcf_nonneg_all

# i * alpha with alpha = -i/4 (Rydberg units)
I_ALPHA = 0.25


class IllConditionedWarning(UserWarning):
    """A linear system was solved with a condition number above 1e12."""


def orthogonality_constant(k: float) -> complex:
    """Integral of D_0(sigma xi)^2 over the real line, sqrt(2 pi)/sigma."""
    return math.sqrt(2.0 * math.pi) / WaveParams(k).sigma


def q_factor(m: int, u, v, k: float):
    """Q_m(u, v) = D_{-m-1}(sigma u) D_m(i sigma v)."""
    sigma = WaveParams(k).sigma
    neg = pcf_neg_all(m + 1, sigma * np.asarray(u, dtype=float))[m + 1]
    pos = pcf_nonneg_all(m, 1j * sigma * np.asarray(v, dtype=float))[m]
    return neg * pos


def _q_table(n_terms, u, v, k):
    sigma = WaveParams(k).sigma
    neg = pcf_neg_all(n_terms, sigma * np.asarray(u, dtype=float))[1:]
    pos = pcf_nonneg_all(n_terms - 1, 1j * sigma * np.asarray(v, dtype=float))
    return neg * pos


def _d0(z):
    return np.exp(-z * z / 4.0)


def infinite_barrier_axis(xi, eta, eta0: float, gamma0, k: float):
    """Field of the infinite curvature-strength wall for incidence along +x.

    gamma0 = inf gives the Dirichlet limit. Valid on both sides of the wall.
    """
    gamma0 = check_strength(gamma0)
    sigma = WaveParams(k).sigma
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    big = np.maximum(eta, eta0)
    small = np.minimum(eta, eta0)
    ratio = pcf_minus_one(sigma * big) * _d0(1j * sigma * small)
    wall = pcf_minus_one(sigma * eta0) * _d0(1j * sigma * eta0)
    if math.isinf(gamma0):
        scattered = ratio / pcf_minus_one(sigma * eta0)
    else:
        a = I_ALPHA * gamma0 * orthogonality_constant(k)
        scattered = a * ratio * _d0(1j * sigma * eta0) / (1.0 + a * wall)
    return _d0(sigma * xi) * (_d0(1j * sigma * eta) - scattered)


def interior_constant(eta0: float, gamma0, k: float) -> complex:
    """C(eta0) with psi = C(eta0) exp(ikx) inside the infinite wall."""
    gamma0 = check_strength(gamma0)
    if math.isinf(gamma0):
        return 0j
    sigma = WaveParams(k).sigma
    a = I_ALPHA * gamma0 * orthogonality_constant(k)
    wall = complex(pcf_minus_one(sigma * eta0) * _d0(1j * sigma * eta0))
    return 1.0 - a * wall / (1.0 + a * wall)


def incident_coefficients(params: WaveParams, eta0: float, n_terms: int) -> np.ndarray:
    """p_m, projections of the plane wave on D_m(sigma xi) along eta = eta0."""
    beta = params.beta
    if not abs(beta) < math.pi / 2:
        raise ValueError("the infinite-wall series needs |beta| < pi/2")
    sigma = params.sigma
    m = np.arange(n_terms)
    ratio = 1j * math.tan(beta / 2)
    pos = pcf_nonneg_all(n_terms - 1, 1j * sigma * eta0)
    return (
        orthogonality_constant(params.k) / math.cos(beta / 2) * ratio ** m * pos
    )


def infinite_barrier_coefficients(params: WaveParams, eta0, gamma0, n_terms):
    """Solved coefficients c_m of the infinite curvature-strength wall."""
    gamma0 = check_strength(gamma0)
    p = incident_coefficients(params, eta0, n_terms)
    m = np.arange(n_terms)
    q_wall = _q_table(n_terms, eta0, eta0, params.k)
    if math.isinf(gamma0):
        # i alpha gamma0 c_m -> p_m / (N (-i)^m Q_m)
        return p / (orthogonality_constant(params.k) * (-1j) ** m * q_wall)
    a = I_ALPHA * gamma0 * orthogonality_constant(params.k)
    return p / (1.0 + a * (-1j) ** m * q_wall)


def _scattered_sum(xi, eta, eta0, k, weights):
    """sum_m (-i)^m / m! Q_m(eta_>, eta_<) D_m(sigma xi) weights_m."""
    n = len(weights)
    sigma = WaveParams(k).sigma
    big = np.maximum(eta, eta0)
    small = np.minimum(eta, eta0)
    q = _q_table(n, big, small, k)
    d = pcf_nonneg_all(n - 1, sigma * xi)
    fac = np.array([(-1j) ** j / math.factorial(j) for j in range(n)])
    fac = (fac * weights).reshape((-1,) + (1,) * np.ndim(xi))
    terms = fac * q * d
    # odd terms vanish on xi = 0, so the tail is judged on the last two
    tail = np.abs(terms[-2:]).max(axis=0) if n > 1 else np.abs(terms[-1])
    return terms.sum(axis=0), tail


def infinite_barrier_general(
    xi, eta, eta0: float, gamma0, params: WaveParams, ctrl: SeriesControl = SeriesControl()
):
    """Infinite curvature-strength wall, incidence angle |beta| < pi/2."""
    gamma0 = check_strength(gamma0)
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    c = infinite_barrier_coefficients(params, eta0, gamma0, ctrl.max_terms)
    weight = 1.0 if math.isinf(gamma0) else I_ALPHA * gamma0
    s, tail = _scattered_sum(xi, eta, eta0, params.k, weight * c)
    # the incident wave has unit modulus, so the tolerance is taken against 1
    bad = tail > ctrl.tail_tol * np.maximum(np.abs(s), 1.0)
    if np.any(bad):
        warnings.warn(f"infinite wall series: tail {float(np.max(tail)):.3e} above tolerance "
                      f"at {int(np.sum(bad))} points after {len(c)} terms",
                      TruncationWarning, stacklevel=3)
    x = 0.5 * (xi * xi - eta * eta)
    y = xi * eta
    return plane_wave(x, y, params) - s


def knife_edge(xi, eta, gamma0, k: float):
    """Closed-form field of the eta0 -> 0 wall for incidence along +x."""
    gamma0 = check_strength(gamma0)
    sigma = WaveParams(k).sigma
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    dm1 = pcf_minus_one(sigma * eta)
    if math.isinf(gamma0):
        scattered = dm1 / SQRT_HALF_PI
    else:
        a = I_ALPHA * gamma0 * orthogonality_constant(k)
        scattered = a * dm1 / (1.0 + a * SQRT_HALF_PI)
    return _d0(sigma * xi) * (_d0(1j * sigma * eta) - scattered)


# --------------------------------------------------------------------------
# finite wall, constant strength


@dataclass
class CoeffSystem:
    """Truncated coefficient system of the finite constant-strength wall."""

    F: np.ndarray
    p: np.ndarray
    eta0: float
    xi0: float
    params: WaveParams
    quad_panels: int
    quad_change: float
    c: Optional[np.ndarray] = None
    condition: float = math.nan

    @property
    def n_terms(self) -> int:
        return self.p.size


def _inner_products(eta0, xi0, params, n_terms, panels, order=24):
    """Gauss-Legendre quadrature of <f_n|D_m> and <f_n|phi> on panels."""
    t, w = leggauss(order)
    edges = np.linspace(-xi0, xi0, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    d = pcf_nonneg_all(n_terms - 1, params.sigma * nodes)
    h = np.hypot(nodes, eta0)
    x = 0.5 * (nodes**2 - eta0**2)
    y = nodes * eta0
    phi = plane_wave(x, y, params)
    fw = d * (h * weights)
    return fw @ d.T, fw @ phi


def assemble_F(eta0: float, xi0: float, params: WaveParams, n_terms: Optional[int] = None,
               quad_tol: float = 1e-10, max_panels: int = 4096) -> CoeffSystem:
    """Matrix F_nm = (-i)^m Q_m(eta0, eta0)/m! <f_n|D_m> and vector p_n = <f_n|phi>.

    Panels are doubled until the largest entry change, relative to the
    largest entry, is below quad_tol.
    """
    if n_terms is None:
        n_terms = default_terms(params.k)
    if not 1 <= n_terms <= MAX_TERMS_CAP:
        raise ValueError(f"n_terms must lie in [1, {MAX_TERMS_CAP}]")
    panels = 4
    gram, p = _inner_products(eta0, xi0, params, n_terms, panels)
    change = math.inf
    while panels < max_panels:
        panels *= 2
        gram2, p2 = _inner_products(eta0, xi0, params, n_terms, panels)
        scale = max(np.abs(gram2).max(), 1e-300)
        change = max(np.abs(gram2 - gram).max() / scale,
                     np.abs(p2 - p).max() / max(np.abs(p2).max(), 1e-300))
        gram, p = gram2, p2
        if change <= quad_tol:
            break
    else:
        warnings.warn(f"F quadrature did not reach {quad_tol:g}; relative change {change:.2e}")
    fac = np.array([(-1j) ** j / math.factorial(j) for j in range(n_terms)])
    q = _q_table(n_terms, eta0, eta0, params.k)
    F = gram * (fac * q)[None, :]
    return CoeffSystem(F=F, p=p, eta0=eta0, xi0=xi0, params=params,
                       quad_panels=panels, quad_change=change)


def default_terms(k: float) -> int:
    return min(MAX_TERMS_CAP, max(30, math.ceil(3 * k)))


def _solve(A, b, what):
    cond = np.linalg.cond(A)
    if not np.isfinite(cond):
        raise np.linalg.LinAlgError(f"{what}: singular matrix")
    if cond >= 1e12:
        warnings.warn(f"{what}: condition number {cond:.2e}", IllConditionedWarning, stacklevel=3)
    return np.linalg.solve(A, b), cond


def solve_finite(system: CoeffSystem, gamma0) -> CoeffSystem:
    """Fill system.c: c = (1 + i alpha gamma0 F)^-1 p, or W p in the hard-wall limit."""
    gamma0 = check_strength(gamma0)
    n = system.n_terms
    if math.isinf(gamma0):
        # i alpha gamma0 c -> W p
        system.c, cond = _solve(system.F, system.p, "impenetrable F system")
    else:
        system.c, cond = _solve(np.eye(n) + I_ALPHA * gamma0 * system.F, system.p, "F system")
    system.condition = cond
    return system


def finite_barrier_constant(xi, eta, system: CoeffSystem, gamma0):
    """Field of the finite constant-strength wall from a solved system."""
    gamma0 = check_strength(gamma0)
    if system.c is None:
        solve_finite(system, gamma0)
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    weight = 1.0 if math.isinf(gamma0) else I_ALPHA * gamma0
    s, _ = _scattered_sum(xi, eta, system.eta0, system.params.k, weight * system.c)
    x = 0.5 * (xi * xi - eta * eta)
    return plane_wave(x, xi * eta, system.params) - s


def finite_barrier_impenetrable(xi, eta, system: CoeffSystem):
    """Hard-wall limit psi = phi - sum (-i)^m/m! Q_m D_m (W p)_m, W = F^-1."""
    if system.c is None:
        solve_finite(system, math.inf)
    return finite_barrier_constant(xi, eta, system, math.inf)


# --------------------------------------------------------------------------
# estimators


class _FieldEstimator(BaseEstimator):
    def predict(self, X):
        """Complex field psi at Cartesian points X of shape (n, 2)."""
        check_is_fitted(self)
        X = check_points(X)
        xi, eta = cartesian_to_parabolic(X[:, 0], X[:, 1])
        return self._field(xi, eta)

    def transform(self, X):
        """Probability density |psi|^2 at X."""
        return np.abs(self.predict(X)) ** 2

    def fit_predict(self, X, y=None):
        return self.fit(X, y).predict(X)


class InfiniteBarrierScatterer(_FieldEstimator):
    """Infinite parabolic wall eta = eta0 with curvature-proportional strength.

    Parameters
    ----------
    k : float
        Wavenumber (E = k^2).
    beta : float
        Incidence angle in radians, |beta| < pi/2.
    eta0 : float
        Wall parameter.
    gamma0 : float or "inf"
        Strength scale; "inf" gives the Dirichlet wall.
    max_terms : int
        Series truncation for beta != 0.
    """

    def __init__(self, k=10.0, beta=0.0, eta0=0.5, gamma0=1.0, max_terms=60):
        self.k = k
        self.beta = beta
        self.eta0 = eta0
        self.gamma0 = gamma0
        self.max_terms = max_terms

    def fit(self, X=None, y=None):
        check_positive("k", self.k)
        check_positive("eta0", self.eta0)
        self.gamma0_ = check_strength(self.gamma0)
        self.wave_ = WaveParams(float(self.k), float(self.beta))
        self.ctrl_ = SeriesControl(int(self.max_terms))
        if self.beta == 0:
            self.coef_ = None
        else:
            self.coef_ = infinite_barrier_coefficients(
                self.wave_, self.eta0, self.gamma0_, self.ctrl_.max_terms
            )
        return self

    def _field(self, xi, eta):
        if self.coef_ is None:
            return infinite_barrier_axis(xi, eta, self.eta0, self.gamma0_, self.wave_.k)
        return infinite_barrier_general(xi, eta, self.eta0, self.gamma0_, self.wave_, self.ctrl_)


class KnifeEdgeScatterer(_FieldEstimator):
    """Semi-infinite edge (eta0 = 0) with curvature-proportional strength."""

    def __init__(self, k=10.0, gamma0=1.0):
        self.k = k
        self.gamma0 = gamma0

    def fit(self, X=None, y=None):
        check_positive("k", self.k)
        self.gamma0_ = check_strength(self.gamma0)
        return self

    def _field(self, xi, eta):
        return knife_edge(xi, eta, self.gamma0_, float(self.k))


class FiniteBarrierScatterer(_FieldEstimator):
    """Finite wall |xi| < xi0 on eta = eta0 with constant strength gamma0 sqrt(pi/8)."""

    def __init__(self, k=10.0, beta=0.0, eta0=0.5, xi0=1.0, gamma0=10.0, n_terms=None,
                 quad_tol=1e-10):
        self.k = k
        self.beta = beta
        self.eta0 = eta0
        self.xi0 = xi0
        self.gamma0 = gamma0
        self.n_terms = n_terms
        self.quad_tol = quad_tol

    def fit(self, X=None, y=None):
        check_positive("k", self.k)
        check_positive("eta0", self.eta0)
        check_positive("xi0", self.xi0)
        self.gamma0_ = check_strength(self.gamma0)
        wave = WaveParams(float(self.k), float(self.beta))
        self.system_ = assemble_F(self.eta0, self.xi0, wave, self.n_terms, self.quad_tol)
        solve_finite(self.system_, self.gamma0_)
        return self

    def _field(self, xi, eta):
        return finite_barrier_constant(xi, eta, self.system_, self.gamma0_)
