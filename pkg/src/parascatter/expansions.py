"""Incident plane wave and free Green function, direct and as PCF series.

Units are Rydberg (hbar = 2M = 1): E = k^2 and G0 = -(i/4) H0(k|r - r'|).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .specfun import hankel0, pcf_neg_all, pcf_nonneg_all

MAX_TERMS_CAP = 60
GREEN_PREFACTOR = -0.25j


class TruncationWarning(UserWarning):
    """A truncated series stopped with a tail bound above tolerance."""


@dataclass(frozen=True)
class SeriesControl:
    max_terms: int = 60
    tail_tol: float = 1e-12

    def __post_init__(self):
        if not 1 <= self.max_terms <= MAX_TERMS_CAP:
            raise ValueError(f"max_terms must lie in [1, {MAX_TERMS_CAP}]")
        if not self.tail_tol > 0:
            raise ValueError("tail_tol must be positive")


@dataclass(frozen=True)
class WaveParams:
    """Plane-wave parameters: wavenumber k and incidence angle beta (radians)."""

    k: float
    beta: float = 0.0

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("k must be positive")

    @property
    def sigma(self) -> complex:
        """Principal sqrt(-2ik) = sqrt(2k) exp(-i pi/4)."""
        return math.sqrt(2.0 * self.k) * complex(math.cos(-math.pi / 4), math.sin(-math.pi / 4))

    @property
    def direction(self) -> np.ndarray:
        return np.array([math.cos(self.beta), math.sin(self.beta)])


@dataclass
class SeriesResult:
    """Value of a truncated series with its bookkeeping.

    ``tail`` is the magnitude of the last retained term (array-valued for
    array input); ``converged`` tells whether it fell below the tolerance.
    """

    value: np.ndarray
    tail: np.ndarray
    terms: int
    converged: bool


def plane_wave(x, y, params: WaveParams):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    c, s = math.cos(params.beta), math.sin(params.beta)
    return np.exp(1j * params.k * (x * c + y * s))


def plane_wave_identity(xi, eta, k: float):
    """exp(ikx) as the product D_0(sigma xi) D_0(i sigma eta)."""
    sigma = WaveParams(k).sigma
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    a = sigma * xi
    b = 1j * sigma * eta
    return np.exp(-a * a / 4.0) * np.exp(-b * b / 4.0)


def _accumulate(terms, ctrl: SeriesControl, what: str) -> SeriesResult:
    """Sum along axis 0, stopping once two successive terms are below tail_tol*|sum|.

    Two terms are needed because parity zeroes every other term on the axes.
    """
    total = np.zeros(terms.shape[1:], dtype=complex)
    n = terms.shape[0]
    mags = np.abs(terms)
    last = mags[0]
    used = n
    for m in range(n):
        total = total + terms[m]
        last = np.maximum(mags[m], mags[m - 1]) if m >= 1 else mags[0]
        if m >= 2 and np.all(last <= ctrl.tail_tol * np.maximum(np.abs(total), 1e-300)):
            used = m + 1
            break
    converged = bool(np.all(last <= ctrl.tail_tol * np.maximum(np.abs(total), 1e-300)))
    if not converged:
        warnings.warn(
            f"{what}: tail bound {float(np.max(last)):.3e} above tolerance after {used} terms",
            TruncationWarning,
            stacklevel=3,
        )
    return SeriesResult(total, last, used, converged)


def plane_wave_series(xi, eta, params: WaveParams, ctrl: SeriesControl = SeriesControl()):
    """Truncated PCF expansion of the plane wave travelling along beta.

    The two branches cover |beta| < pi/2 and |beta| > pi/2; grazing
    incidence |beta| = pi/2 is rejected.
    """
    beta = math.remainder(params.beta, 2 * math.pi)
    if math.isclose(abs(beta), math.pi / 2, abs_tol=1e-14):
        raise ValueError("plane_wave_series is undefined at |beta| = pi/2")
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    sigma = params.sigma
    m = np.arange(ctrl.max_terms)
    inv_fact = np.array([1.0 / math.factorial(int(j)) for j in m])
    if abs(beta) < math.pi / 2:
        pref = 1.0 / math.cos(beta / 2)
        ratio = 1j * math.tan(beta / 2)
        da = pcf_nonneg_all(ctrl.max_terms - 1, sigma * xi)
        db = pcf_nonneg_all(ctrl.max_terms - 1, 1j * sigma * eta)
    else:
        pref = 1.0 / math.sin(abs(beta) / 2)
        ratio = 1j / math.tan(beta / 2)
        da = pcf_nonneg_all(ctrl.max_terms - 1, 1j * sigma * xi)
        db = pcf_nonneg_all(ctrl.max_terms - 1, sigma * eta)
    coef = pref * ratio ** m * inv_fact
    coef = coef.reshape((-1,) + (1,) * xi.ndim)
    return _accumulate(coef * da * db, ctrl, "plane_wave_series")


def green_direct(r_obs, r_src, k: float):
    """Free Green function -(i/4) H0(k|r - r'|) for Cartesian points (..., 2)."""
    r_obs = np.asarray(r_obs, dtype=float)
    r_src = np.asarray(r_src, dtype=float)
    dist = np.hypot(r_obs[..., 0] - r_src[..., 0], r_obs[..., 1] - r_src[..., 1])
    if np.any(dist == 0):
        raise ValueError("green_direct is singular at zero separation")
    return GREEN_PREFACTOR * hankel0(k * dist)


def hankel_convergence_margin(xi, eta, xi_src, eta_src):
    """|eta - eta'| - |xi| - |xi'|: positive where the Hankel series converges.

    The n-th term behaves like exp(-sqrt(k n) * margin).
    """
    return np.abs(np.asarray(eta) - eta_src) - np.abs(xi) - np.abs(xi_src)


def hankel_series(xi, eta, xi_src, eta_src, k: float, ctrl: SeriesControl = SeriesControl()):
    """Truncated PCF expansion of H0(k|r - r'|) in separated parabolic form.

    Observation (xi, eta) may be arrays; the source is a single point. The
    branch is chosen per point by comparing eta with eta_src; equal eta is
    rejected (use green_direct). The series converges only where
    hankel_convergence_margin is positive.
    """
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if np.any(eta == eta_src):
        raise ValueError("hankel_series needs eta != eta_src; use green_direct")
    sigma = WaveParams(k).sigma
    n = ctrl.max_terms
    outer = eta > eta_src
    eta_big = np.where(outer, eta, eta_src)
    eta_small = np.where(outer, eta_src, eta)
    src = pcf_nonneg_all(n - 1, sigma * complex(xi_src)).reshape((-1,) + (1,) * xi.ndim)
    standing = src * pcf_nonneg_all(n - 1, sigma * xi)
    standing = standing * pcf_nonneg_all(n - 1, 1j * sigma * eta_small)
    travelling = pcf_neg_all(n, sigma * eta_big)[1:]
    m = np.arange(n)
    coef = np.array([(-1j) ** int(j) / math.factorial(int(j)) for j in m])
    coef = coef.reshape((-1,) + (1,) * xi.ndim)
    res = _accumulate(coef * standing * travelling, ctrl, "hankel_series")
    res.value = res.value * (math.sqrt(8.0 / math.pi) / 1j)
    res.tail = res.tail * math.sqrt(8.0 / math.pi)
    return res
