"""Boundary Wall Method for discretized delta walls.

The boundary Green matrix uses the mean-value rule off the diagonal,
M_ij = G0(r_i, r_j) ds_j. On the diagonal the log singularity of G0 is
integrated over the segment (``diagonal="integrated"``, default), or
approximated by the split-segment rule M_ii = G0(ds_i/2) ds_i
(``diagonal="midpoint"``). The T-matrix is
gamma (1 - M gamma)^-1 for finite strengths and -M^-1 for a hard wall, and
the field anywhere is psi = phi + sum_j G0(r, r_j) ds_j (T Phi)_j.
"""
from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import linalg
from scipy.special import itj0y0
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_points, check_positive
from .expansions import GREEN_PREFACTOR, WaveParams, plane_wave
from .geometry import Boundary, parabolic_to_cartesian
from .specfun import hankel0

logger = logging.getLogger(__name__)

COND_WARN = 1e12
EVAL_CHUNK = 2048
DIAGONAL_RULES = ("integrated", "midpoint")
DEFAULT_DIAGONAL = "integrated"


class NearFieldWarning(UserWarning):
    """Observation points closer than half a segment to a midpoint."""


class ConditionWarning(UserWarning):
    """A boundary system is nearly singular."""


def self_term(ds, k: float, diagonal: str = DEFAULT_DIAGONAL):
    """Self-interaction of a straight segment of length ds about its midpoint.

    "integrated" is the exact integral of G0 over the segment,
    (-i/4) (2/k) int_0^{k ds/2} H0(t) dt; "midpoint" is the split-segment
    mean-value rule (-i/4) H0(k ds/2) ds.
    """
    ds = np.asarray(ds, dtype=float)
    if diagonal == "integrated":
        ij0, iy0 = itj0y0(0.5 * k * ds)
        return GREEN_PREFACTOR * (2.0 / k) * (ij0 + 1j * iy0)
    if diagonal == "midpoint":
        return GREEN_PREFACTOR * hankel0(0.5 * k * ds) * ds
    raise ValueError(f"diagonal must be one of {DIAGONAL_RULES}, got {diagonal!r}")


def assemble_M(boundary: Boundary, k: float, diagonal: str = DEFAULT_DIAGONAL) -> np.ndarray:
    """Boundary Green matrix: mean-value rule off the diagonal, see self_term on it."""
    k = check_positive("k", k)
    dist = boundary.distances
    n = boundary.n
    off = ~np.eye(n, dtype=bool)
    if np.any(dist[off] == 0):
        raise ValueError("boundary has coincident midpoints")
    ds = boundary.seg_lengths
    arg = k * dist
    np.fill_diagonal(arg, 1.0)
    M = GREEN_PREFACTOR * hankel0(arg) * ds[None, :]
    M[np.diag_indices(n)] = self_term(ds, k, diagonal)
    return M


def _curve_nodes(lo, hi, t, w):
    """Gauss nodes (x, y) and arc-length weights on curved pieces lo -> hi.

    lo, hi are (n, 2) parabolic coordinates sharing one fixed coordinate.
    """
    nodes_xi = 0.5 * (lo[:, None, 0] + hi[:, None, 0]) + 0.5 * (hi - lo)[:, None, 0] * t
    nodes_eta = 0.5 * (lo[:, None, 1] + hi[:, None, 1]) + 0.5 * (hi - lo)[:, None, 1] * t
    # ds = h * |d(param)| with h = sqrt(xi^2 + eta^2)
    dparam = 0.5 * np.abs(hi - lo).sum(axis=1)
    weights = np.hypot(nodes_xi, nodes_eta) * dparam[:, None] * w[None, :]
    x, y = parabolic_to_cartesian(nodes_xi, nodes_eta)
    return x, y, weights


def assemble_M_quadrature(boundary: Boundary, k: float, order: int = 24) -> np.ndarray:
    """Reference M by Gauss-Legendre quadrature of G0 along each curved segment.

    Each segment is split at its midpoint so the diagonal log singularity
    sits at a panel end; those halves are further graded towards the
    midpoint. Requires ``boundary.ends``. For cross-checks only.
    """
    if boundary.ends is None:
        raise ValueError("quadrature reference needs segment end points")
    t, w = leggauss(order)
    lo, hi = boundary.ends[:, 0], boundary.ends[:, 1]
    mid = np.column_stack([boundary.xi, boundary.eta])
    p = boundary.points
    n = boundary.n
    M = np.zeros((n, n), dtype=complex)
    # geometric grading towards the midpoint handles the log singularity
    fractions = [0.0] + [2.0 ** -j for j in range(12, -1, -1)]
    for end in (lo, hi):
        for f0, f1 in zip(fractions[:-1], fractions[1:]):
            a = mid + f0 * (end - mid)
            b = mid + f1 * (end - mid)
            x, y, wt = _curve_nodes(a, b, t, w)
            for i in range(n):
                r = np.hypot(x - p[i, 0], y - p[i, 1])
                M[i] += (GREEN_PREFACTOR * hankel0(k * r) * wt).sum(axis=1)
    return M


@dataclass
class BwmSystem:
    """Solved boundary system for one wavenumber."""

    boundary: Boundary
    k: float
    M: np.ndarray
    T: np.ndarray
    condition: float
    Phi: Optional[np.ndarray] = None
    TPhi: Optional[np.ndarray] = None
    params: Optional[WaveParams] = None

    @property
    def t_norm(self) -> float:
        return float(np.abs(self.T).sum())


def _check_condition(A, what):
    cond = float(np.linalg.cond(A))
    if not np.isfinite(cond):
        raise np.linalg.LinAlgError(f"{what} is singular")
    if cond >= COND_WARN:
        warnings.warn(f"{what}: condition number {cond:.2e}", ConditionWarning, stacklevel=3)
    return cond


def assemble_T(M: np.ndarray, boundary: Boundary, check_condition: bool = True):
    """T-matrix; returns (T, condition estimate or nan when not checked)."""
    n = boundary.n
    cond = math.nan
    if boundary.impenetrable:
        if check_condition:
            cond = _check_condition(M, "M")
        T = -linalg.inv(M, check_finite=False)
    else:
        g = boundary.gammas
        A = np.eye(n) - M * g[None, :]
        if check_condition:
            cond = _check_condition(A, "1 - M gamma")
        T = g[:, None] * linalg.inv(A, check_finite=False)
    return T, cond


def solve_system(boundary: Boundary, k: float, check_condition: bool = True,
                 diagonal: str = DEFAULT_DIAGONAL) -> BwmSystem:
    M = assemble_M(boundary, k, diagonal)
    T, cond = assemble_T(M, boundary, check_condition)
    return BwmSystem(boundary=boundary, k=float(k), M=M, T=T, condition=cond)


def boundary_solve(system: BwmSystem, params: WaveParams) -> BwmSystem:
    """Compute Phi at the midpoints and T Phi (= gamma Psi)."""
    p = system.boundary.points
    system.params = params
    system.Phi = plane_wave(p[:, 0], p[:, 1], params)
    system.TPhi = system.T @ system.Phi
    return system


def boundary_psi(system: BwmSystem) -> np.ndarray:
    """Psi at the midpoints.

    With finite strengths Psi_i = (T Phi)_i / gamma_i where gamma_i > 0;
    zero-strength segments carry nan. For any mode Psi is also Phi + M T Phi,
    which is what a hard wall reports.
    """
    b = system.boundary
    if b.impenetrable:
        return system.Phi + system.M @ system.TPhi
    g = b.gammas
    out = np.full(b.n, np.nan + 0j)
    ok = g > 0
    out[ok] = system.TPhi[ok] / g[ok]
    return out


def field_at(points, system: BwmSystem, n_threads: int = 1):
    """psi = phi + sum_j G0(r, r_j) ds_j (T Phi)_j at Cartesian points (n, 2).

    Points lying exactly on a midpoint get the boundary-solved value.
    Per-point sums run sequentially, so results do not depend on n_threads.
    """
    if system.TPhi is None:
        raise ValueError("system has no incident wave; call boundary_solve first")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    b = system.boundary
    mids = b.points
    w = b.seg_lengths * system.TPhi
    k = system.k
    psi = np.empty(len(pts), dtype=complex)
    near = np.zeros(len(pts), dtype=bool)

    def work(lo):
        hi = min(lo + EVAL_CHUNK, len(pts))
        chunk = pts[lo:hi]
        r = np.hypot(chunk[:, None, 0] - mids[None, :, 0], chunk[:, None, 1] - mids[None, :, 1])
        on = r == 0
        near[lo:hi] = np.any(r < 0.5 * b.seg_lengths[None, :], axis=1)
        g = GREEN_PREFACTOR * hankel0(np.where(on, 1.0, k * r))
        g[on] = 0
        val = plane_wave(chunk[:, 0], chunk[:, 1], system.params) + g @ w
        rows, cols = np.nonzero(on)
        if rows.size:
            val[rows] = system.Phi[cols] + system.M[cols] @ system.TPhi
        psi[lo:hi] = val

    starts = range(0, len(pts), EVAL_CHUNK)
    if n_threads > 1:
        with ThreadPoolExecutor(n_threads) as ex:
            list(ex.map(work, starts))
    else:
        for lo in starts:
            work(lo)
    if near.any():
        warnings.warn(
            f"{int(near.sum())} points within half a segment of the wall; near-field values are inaccurate",
            NearFieldWarning,
            stacklevel=2,
        )
    return psi


class BoundaryWallScatterer(BaseEstimator):
    """Plane-wave scattering by a discretized delta wall.

    ``fit`` takes the Boundary (its strengths select finite or hard-wall
    mode) and solves the boundary system; ``predict`` evaluates psi.

    Parameters
    ----------
    k : float
        Wavenumber.
    beta : float
        Incidence angle in radians.
    n_threads : int
        Worker threads for field evaluation.
    diagonal : {"integrated", "midpoint"}
        Self-interaction rule for M.
    """

    def __init__(self, k=1.0, beta=0.0, n_threads=1, diagonal=DEFAULT_DIAGONAL):
        self.k = k
        self.beta = beta
        self.n_threads = n_threads
        self.diagonal = diagonal

    def fit(self, X, y=None):
        if not isinstance(X, Boundary):
            raise TypeError("fit expects a Boundary")
        check_positive("k", self.k)
        params = WaveParams(float(self.k), float(self.beta))
        self.system_ = boundary_solve(solve_system(X, params.k, diagonal=self.diagonal), params)
        self.boundary_ = X
        return self

    def predict(self, X):
        check_is_fitted(self)
        return field_at(check_points(X), self.system_, int(self.n_threads))

    def transform(self, X):
        return np.abs(self.predict(X)) ** 2

    @property
    def t_norm_(self) -> float:
        check_is_fitted(self)
        return self.system_.t_norm
