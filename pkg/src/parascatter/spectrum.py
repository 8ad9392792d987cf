"""Billiard resonances from the entrywise L1 norm of the T-matrix.

A coarse sweep of ||T|| = sum_ij |T_ij| over k locates candidate peaks;
each candidate is then refined by rescanning a shrinking window around the
current maximum until successive centres agree to within epsilon.
"""
from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy import signal
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_positive, check_strength
from .bwm import DEFAULT_DIAGONAL, assemble_M, assemble_T
from .geometry import IMPENETRABLE, BilliardSpec, Boundary, discretize_billiard

logger = logging.getLogger(__name__)

REFINE_SAMPLES = 41
SHRINK = 0.25


class RefinementWarning(UserWarning):
    """A resonance refinement stopped without meeting its criterion."""


def t_norm(T) -> float:
    """Sum of the moduli of all entries."""
    return float(np.abs(np.asarray(T)).sum())


@dataclass
class SpectrumScan:
    """||T|| sampled on an increasing set of wavenumbers.

    ``errors`` maps sample index to the message of a failed solve; those
    samples carry nan norms.
    """

    k_values: np.ndarray
    norms: np.ndarray
    billiard: BilliardSpec
    n_points: int
    gamma: float = math.inf
    errors: Dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        self.k_values = np.asarray(self.k_values, dtype=float)
        self.norms = np.asarray(self.norms, dtype=float)
        if self.k_values.shape != self.norms.shape:
            raise ValueError("k_values and norms differ in length")
        if np.any(np.diff(self.k_values) <= 0):
            raise ValueError("k_values must be strictly increasing")

    @property
    def energies(self) -> np.ndarray:
        return self.k_values**2


@dataclass
class Resonance:
    """A refined peak of ||T||.

    ``window`` is the half-width of the last window scanned. ``escaped``
    marks a maximum that sat on the window edge at the final iteration.
    """

    k_n: float
    energy: float
    iterations: int
    window: float
    converged: bool
    escaped: bool = False
    t_norm: float = math.nan

    @classmethod
    def from_k(cls, k, **kw) -> "Resonance":
        return cls(k_n=float(k), energy=float(k) * float(k), **kw)

    def to_dict(self) -> dict:
        return asdict(self)


def billiard_boundary(billiard: BilliardSpec, n_points: int, gamma=IMPENETRABLE) -> Boundary:
    g = check_strength(gamma)
    return discretize_billiard(billiard, n_points, IMPENETRABLE if math.isinf(g) else g)


def norm_at(boundary: Boundary, k: float, diagonal: str = DEFAULT_DIAGONAL) -> float:
    """||T|| for one wavenumber (no condition check; peaks are near-singular by nature)."""
    T, _ = assemble_T(assemble_M(boundary, k, diagonal), boundary, check_condition=False)
    return t_norm(T)


def _norms(boundary, ks, n_threads, diagonal):
    out = np.full(len(ks), np.nan)
    errors = {}

    def work(i):
        try:
            out[i] = norm_at(boundary, ks[i], diagonal)
        except (np.linalg.LinAlgError, ValueError) as exc:
            errors[i] = str(exc)

    # each sample writes its own slot, so threading cannot change the values
    if n_threads > 1:
        with ThreadPoolExecutor(n_threads) as ex:
            list(ex.map(work, range(len(ks))))
    else:
        for i in range(len(ks)):
            work(i)
    return out, errors


def scan_grid(k_min: float, k_max: float, samples: int, spacing: str = "k") -> np.ndarray:
    """Sample points uniform in k or, with spacing="energy", uniform in k^2."""
    k_min = check_positive("k_min", k_min)
    k_max = check_positive("k_max", k_max)
    if not k_max > k_min:
        raise ValueError("scan range is empty: need k_min < k_max")
    if samples < 2:
        raise ValueError("a scan needs at least 2 samples")
    if spacing == "k":
        return np.linspace(k_min, k_max, samples)
    if spacing == "energy":
        return np.sqrt(np.linspace(k_min**2, k_max**2, samples))
    raise ValueError(f"unknown spacing {spacing!r}")


def scan(
    billiard: BilliardSpec,
    k_min: float,
    k_max: float,
    samples: int = 300,
    n_points: int = 200,
    gamma=IMPENETRABLE,
    spacing: str = "k",
    n_threads: int = 1,
    diagonal: str = DEFAULT_DIAGONAL,
) -> SpectrumScan:
    """Sweep ||T|| over [k_min, k_max].

    Failed solves are logged, stored in ``errors`` and leave nan behind;
    the sweep carries on.
    """
    ks = scan_grid(k_min, k_max, samples, spacing)
    boundary = billiard_boundary(billiard, n_points, gamma)
    norms, errors = _norms(boundary, ks, n_threads, diagonal)
    for i, msg in errors.items():
        logger.warning("scan sample k=%g failed: %s", ks[i], msg)
    return SpectrumScan(ks, norms, billiard, n_points, check_strength(gamma), errors)


def find_peaks(scan: SpectrumScan, prominence_frac: float = 0.05) -> np.ndarray:
    """Wavenumbers of local maxima standing out from their surroundings.

    A peak qualifies when its prominence (height above the higher of the
    two neighbouring minima) exceeds prominence_frac * (max - median).
    """
    v = np.nan_to_num(scan.norms, nan=-np.inf)
    finite = v[np.isfinite(v)]
    if finite.size < 3:
        return np.empty(0)
    spread = finite.max() - np.median(finite)
    if spread <= 0:
        return np.empty(0)
    idx, _ = signal.find_peaks(np.where(np.isfinite(v), v, finite.min()),
                               prominence=prominence_frac * spread)
    return scan.k_values[idx]


def peak_width(k_values, norms, k_peak: float) -> float:
    """Full width in k at half prominence of the sampled peak nearest k_peak."""
    k_values = np.asarray(k_values, dtype=float)
    norms = np.asarray(norms, dtype=float)
    idx, _ = signal.find_peaks(norms)
    if idx.size == 0:
        raise ValueError("no local maximum in the samples")
    i = idx[np.argmin(np.abs(k_values[idx] - k_peak))]
    widths, _, left, right = signal.peak_widths(norms, [i], rel_height=0.5)
    grid = np.arange(len(k_values))
    return float(np.interp(right[0], grid, k_values) - np.interp(left[0], grid, k_values))


def _vertex(ks, values, fallback: float) -> float:
    """Abscissa of the parabola through three equally spaced samples."""
    a, b, c = values
    curv = a - 2 * b + c
    if not np.isfinite(curv) or curv >= 0:
        return fallback
    h = ks[1] - ks[0]
    return float(ks[1] + 0.5 * h * (a - c) / curv)


def refine_maximum(
    f: Callable[[np.ndarray], np.ndarray],
    k_candidate: float,
    delta_k: float,
    epsilon: float = 1e-6,
    max_iter: int = 30,
    samples: int = REFINE_SAMPLES,
    _stacklevel: int = 2,
) -> Resonance:
    """Iteratively rescan [k - dk, k + dk], re-centre on the maximum of f, dk *= 1/4.

    The new centre is the vertex of the parabola through the largest sample
    and its two neighbours. Re-centring on the bare sample would report a
    zero step whenever the maximum sits on the old centre, stopping at grid
    resolution instead of epsilon.

    ``f`` maps an array of wavenumbers to values. Stops when two successive
    centres differ by at most epsilon. If that never happens within
    max_iter the best estimate is returned with ``converged=False``;
    ``escaped`` flags a final maximum on the window edge. The window is
    not shrunk while the maximum sits on its edge, so it can walk uphill.
    """
    check_positive("delta_k", delta_k)
    check_positive("epsilon", epsilon)
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if samples < 3:
        raise ValueError("refinement needs at least 3 samples per window")
    k, dk = float(k_candidate), float(delta_k)
    converged = escaped = False
    best = math.nan
    it = 0
    for it in range(1, max_iter + 1):
        lo = max(k - dk, 0.5 * k)
        ks = np.linspace(lo, k + dk, samples)
        values = np.asarray(f(ks), dtype=float)
        j = int(np.nanargmax(values))
        escaped = j in (0, samples - 1)
        k_new, best = float(ks[j]), float(values[j])
        if not escaped:
            k_new = _vertex(ks[j - 1:j + 2], values[j - 1:j + 2], k_new)
        step = abs(k_new - k)
        k = k_new
        if step <= epsilon:
            converged = True
            break
        if not escaped:
            dk *= SHRINK
    if not converged:
        warnings.warn(f"refinement near k={k:.6g} did not converge in {max_iter} iterations",
                      RefinementWarning, stacklevel=_stacklevel)
    if escaped:
        warnings.warn(f"refined maximum near k={k:.6g} sits on the window edge",
                      RefinementWarning, stacklevel=_stacklevel)
    return Resonance.from_k(k, iterations=it, window=dk, converged=converged,
                            escaped=escaped, t_norm=best)


def refine_peak(
    billiard: BilliardSpec,
    k_candidate: float,
    delta_k: float,
    epsilon: float = 1e-6,
    max_iter: int = 30,
    n_points: int = 200,
    gamma=IMPENETRABLE,
    samples: int = REFINE_SAMPLES,
    boundary: Optional[Boundary] = None,
    diagonal: str = DEFAULT_DIAGONAL,
) -> Resonance:
    """Refine a ||T|| peak of the billiard with :func:`refine_maximum`."""
    if boundary is None:
        boundary = billiard_boundary(billiard, n_points, gamma)

    def norms(ks):
        return _norms(boundary, ks, 1, diagonal)[0]

    return refine_maximum(norms, k_candidate, delta_k, epsilon, max_iter, samples, _stacklevel=3)


class ResonanceSearch(BaseEstimator):
    """Scan a billiard's ||T|| spectrum and refine every detected peak.

    Parameters
    ----------
    k_min, k_max : float
        Wavenumber range of the coarse scan.
    samples : int
        Coarse scan size.
    n_points : int
        Boundary points (multiple of 4).
    gamma : float or "inf"
        Wall strength.
    prominence_frac : float
        Peak threshold as a fraction of max - median of the scan.
    epsilon, max_iter, refine_samples :
        Refinement controls; the initial window is one coarse step.
    spacing : {"k", "energy"}
    n_threads : int
    diagonal : {"integrated", "midpoint"}
        Self-interaction rule for M.
    """

    def __init__(self, k_min=0.01, k_max=2.0, samples=300, n_points=200, gamma="inf",
                 prominence_frac=0.05, epsilon=1e-6, max_iter=30, refine_samples=REFINE_SAMPLES,
                 spacing="k", n_threads=1, diagonal=DEFAULT_DIAGONAL, extra_seeds=()):
        self.k_min = k_min
        self.k_max = k_max
        self.samples = samples
        self.n_points = n_points
        self.gamma = gamma
        self.prominence_frac = prominence_frac
        self.epsilon = epsilon
        self.max_iter = max_iter
        self.refine_samples = refine_samples
        self.spacing = spacing
        self.n_threads = n_threads
        self.diagonal = diagonal
        self.extra_seeds = extra_seeds

    def fit(self, X: BilliardSpec, y=None):
        if not isinstance(X, BilliardSpec):
            raise TypeError("fit expects a BilliardSpec")
        self.scan_ = scan(X, self.k_min, self.k_max, self.samples, self.n_points, self.gamma,
                          self.spacing, int(self.n_threads), self.diagonal)
        seeds = list(find_peaks(self.scan_, self.prominence_frac)) + [float(s) for s in self.extra_seeds]
        step = float(np.max(np.diff(self.scan_.k_values)))
        boundary = billiard_boundary(X, self.n_points, self.gamma)
        res: List[Resonance] = []
        for s in seeds:
            res.append(refine_peak(X, s, step, self.epsilon, self.max_iter, self.n_points, self.gamma,
                                   self.refine_samples, boundary, self.diagonal))
        self.resonances_ = dedupe(res, 10 * float(self.epsilon))
        return self

    def predict(self, X=None) -> np.ndarray:
        """Refined resonance energies k_n^2, ascending."""
        check_is_fitted(self)
        return np.array([r.energy for r in self.resonances_])


def dedupe(resonances: Sequence[Resonance], tol: float) -> List[Resonance]:
    """Sort by k and drop refinements that landed on the same peak."""
    out: List[Resonance] = []
    for r in sorted(resonances, key=lambda r: r.k_n):
        if out and abs(r.k_n - out[-1].k_n) <= tol:
            continue
        out.append(r)
    return out
