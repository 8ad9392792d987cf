"""Parabolic coordinates and delta-wall boundary discretization.

Coordinates follow x = (xi^2 - eta^2)/2, y = xi*eta with eta >= 0, so the
positive x-axis is the branch cut of xi.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

IMPENETRABLE = "inf"


@dataclass(frozen=True)
class ParabolicPoint:
    xi: float
    eta: float

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")

    @property
    def x(self) -> float:
        return 0.5 * (self.xi**2 - self.eta**2)

    @property
    def y(self) -> float:
        return self.xi * self.eta

    @property
    def r(self) -> float:
        return 0.5 * (self.xi**2 + self.eta**2)


@dataclass(frozen=True)
class BilliardSpec:
    """Confocal parabolic billiard B(xi0, eta0)."""

    xi0: float
    eta0: float

    def __post_init__(self):
        if not (self.xi0 > 0 and self.eta0 > 0):
            raise ValueError("billiard needs xi0 > 0 and eta0 > 0")

    def contains(self, x, y):
        """Boolean mask of points strictly inside the billiard."""
        xi, eta = cartesian_to_parabolic(x, y)
        return (eta < self.eta0) & (np.abs(xi) < self.xi0)


def parabolic_to_cartesian(xi, eta):
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    return 0.5 * (xi * xi - eta * eta), xi * eta


def cartesian_to_parabolic(x, y):
    """Inverse map. Points on the positive x-axis get xi = +sqrt(2x)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.hypot(x, y)
    big = np.sqrt(r + np.abs(x))
    # the smaller root from xi*eta = |y| avoids cancellation in r - |x|
    with np.errstate(invalid="ignore", divide="ignore"):
        small = np.where(big > 0, np.abs(y) / np.where(big > 0, big, 1.0), 0.0)
    right = x >= 0
    sign = np.where(y < 0, -1.0, 1.0)
    xi = sign * np.where(right, big, small)
    eta = np.where(right, small, big)
    return xi, eta


def scale_factor(xi, eta):
    """Metric factor h = sqrt(xi^2 + eta^2) = sqrt(2r)."""
    return np.hypot(xi, eta)


def arc_length(xi0: float, eta0: float) -> float:
    """Length of the parabola eta = eta0 between xi = -xi0 and xi = xi0."""
    if xi0 < 0 or eta0 <= 0:
        raise ValueError("arc_length needs xi0 >= 0 and eta0 > 0")
    h = math.hypot(xi0, eta0)
    return xi0 * h + eta0**2 * math.log((xi0 + h) / eta0)


def _half_arc(t, c):
    # arc length of the parabola with fixed coordinate c from 0 to t
    h = math.hypot(t, c)
    return 0.5 * (t * h + c * c * math.asinh(t / c))


def billiard_perimeter(spec: BilliardSpec) -> float:
    return arc_length(spec.xi0, spec.eta0) + arc_length(spec.eta0, spec.xi0)


def min_points(perimeter: float, k: float) -> int:
    """Smallest N with at least ten boundary pieces per wavelength."""
    if perimeter <= 0 or k <= 0:
        raise ValueError("perimeter and k must be positive")
    return max(1, math.ceil(5.0 * perimeter * k / math.pi))


def pieces_per_wavelength(n_points: int, perimeter: float, k: float) -> float:
    return 2.0 * math.pi * n_points / (perimeter * k)


def _invert_arc(s_targets, c, t_max):
    """Parameters t in [0, t_max] with _half_arc(t, c) equal to each target."""
    out = np.empty(len(s_targets))
    total = _half_arc(t_max, c)
    for i, s in enumerate(s_targets):
        # end points hit exactly up to roundoff in the cumulative sum
        if s <= 0.0:
            out[i] = 0.0
            continue
        if s >= total:
            out[i] = t_max
            continue
        out[i] = brentq(lambda t: _half_arc(t, c) - s, 0.0, t_max, xtol=1e-14, rtol=1e-15)
    return out


def _equal_pieces(c, t_max, n):
    """Midpoint and end parameters splitting 0..t_max into n equal arcs."""
    total = _half_arc(t_max, c)
    ds = total / n
    mids = _invert_arc((np.arange(n) + 0.5) * ds, c, t_max)
    edges = _invert_arc(np.arange(n + 1) * ds, c, t_max)
    return mids, edges, ds


@dataclass
class Boundary:
    """Discretized delta wall.

    Attributes
    ----------
    xi, eta : ndarray, shape (N,)
        Parabolic coordinates of the segment midpoints.
    seg_lengths : ndarray, shape (N,)
        Segment lengths.
    gammas : ndarray or "inf"
        Per-segment strengths, or IMPENETRABLE for a hard wall.
    closed : bool
    ends : ndarray, shape (N, 2, 2), optional
        (xi, eta) of the two end points of each curved segment.
    """

    xi: np.ndarray
    eta: np.ndarray
    seg_lengths: np.ndarray
    gammas: object = IMPENETRABLE
    closed: bool = False
    ends: Optional[np.ndarray] = None
    _dist: Optional[np.ndarray] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.xi = np.asarray(self.xi, dtype=float)
        self.eta = np.asarray(self.eta, dtype=float)
        self.seg_lengths = np.asarray(self.seg_lengths, dtype=float)
        n = self.xi.size
        if n < 1 or self.eta.shape != (n,) or self.seg_lengths.shape != (n,):
            raise ValueError("midpoints and segment lengths must share one length N >= 1")
        if np.any(self.seg_lengths <= 0):
            raise ValueError("segment lengths must be positive")
        if self.ends is not None:
            self.ends = np.asarray(self.ends, dtype=float).reshape(n, 2, 2)
        if not self.impenetrable:
            g = np.broadcast_to(np.asarray(self.gammas, dtype=float), (n,)).copy()
            if np.any(g < 0):
                raise ValueError("strengths must be >= 0")
            self.gammas = g

    @property
    def n(self) -> int:
        return self.xi.size

    @property
    def impenetrable(self) -> bool:
        return isinstance(self.gammas, str) and self.gammas == IMPENETRABLE

    @property
    def points(self) -> np.ndarray:
        x, y = parabolic_to_cartesian(self.xi, self.eta)
        return np.column_stack([x, y])

    @property
    def distances(self) -> np.ndarray:
        """Pairwise midpoint distances (cached; geometry is k-independent)."""
        if self._dist is None:
            p = self.points
            self._dist = np.hypot(p[:, None, 0] - p[None, :, 0], p[:, None, 1] - p[None, :, 1])
        return self._dist

    def with_gammas(self, gammas) -> "Boundary":
        return Boundary(self.xi, self.eta, self.seg_lengths, gammas, self.closed, self.ends)

    def to_dict(self) -> dict:
        return {
            "midpoints": self.points.tolist(),
            "seg_lengths": self.seg_lengths.tolist(),
            "gammas": IMPENETRABLE if self.impenetrable else self.gammas.tolist(),
            "closed": self.closed,
            "ends": None if self.ends is None else self.ends.tolist(),
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "Boundary":
        pts = np.asarray(d["midpoints"], dtype=float).reshape(-1, 2)
        xi, eta = cartesian_to_parabolic(pts[:, 0], pts[:, 1])
        return cls(xi, eta, d["seg_lengths"], d["gammas"], bool(d.get("closed", False)),
                   d.get("ends"))

    @classmethod
    def from_json(cls, path) -> "Boundary":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


GammaFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


def _sample_gamma(gamma_fn, xi, eta):
    if gamma_fn is None or (isinstance(gamma_fn, str) and gamma_fn == IMPENETRABLE):
        return IMPENETRABLE
    if callable(gamma_fn):
        return np.asarray(gamma_fn(xi, eta), dtype=float) * np.ones_like(xi)
    # a constant, or one value per segment
    return np.broadcast_to(np.asarray(gamma_fn, dtype=float), xi.shape).copy()


def discretize_barrier(xi0: float, eta0: float, n: int, gamma_fn=None) -> Boundary:
    """Split the wall {eta = eta0, |xi| < xi0} into n equal-length segments.

    gamma_fn may be a callable of (xi, eta), a constant, or None / "inf"
    for an impenetrable wall.
    """
    if n < 2:
        raise ValueError("barrier needs at least 2 segments")
    if not (xi0 > 0 and eta0 > 0):
        raise ValueError("barrier needs xi0 > 0 and eta0 > 0")
    total = 2.0 * _half_arc(xi0, eta0)
    ds = total / n
    # signed arc coordinate measured from the apex
    s = (np.arange(n) + 0.5) * ds - 0.5 * total
    xi = np.sign(s) * _invert_arc(np.abs(s), eta0, xi0)
    eta = np.full(n, float(eta0))
    s_edge = np.arange(n + 1) * ds - 0.5 * total
    xi_edge = np.sign(s_edge) * _invert_arc(np.abs(s_edge), eta0, xi0)
    ends = np.stack([np.column_stack([xi_edge[:-1], eta]), np.column_stack([xi_edge[1:], eta])], axis=1)
    return Boundary(xi, eta, np.full(n, ds), _sample_gamma(gamma_fn, xi, eta), False, ends)


def discretize_knife_edge(length: float, n: int, gamma_fn=None) -> Boundary:
    """Half-line y = 0, 0 <= x < length (the eta = 0 wall) in n equal segments.

    Midpoints are reported with xi > 0; gamma_fn sees those coordinates.
    """
    if n < 2 or length <= 0:
        raise ValueError("knife edge needs n >= 2 and length > 0")
    ds = length / n
    xi = np.sqrt(2.0 * (np.arange(n) + 0.5) * ds)
    eta = np.zeros(n)
    edge = np.sqrt(2.0 * np.arange(n + 1) * ds)
    ends = np.stack([np.column_stack([edge[:-1], eta]), np.column_stack([edge[1:], eta])], axis=1)
    return Boundary(xi, eta, np.full(n, ds), _sample_gamma(gamma_fn, xi, eta), False, ends)


def discretize_billiard(
    spec: BilliardSpec, n: int, gamma_fn=None, proportional: bool = False
) -> Boundary:
    """Mirror-symmetric discretization of the billiard boundary.

    Half of C1 (eta = eta0, 0 < xi < xi0) and half of C2 (xi = xi0,
    0 < eta < eta0) are each split into equal pieces starting next to the
    x-axis; the union is then mirrored to y < 0. Corners are not sampled.
    By default each half-contour receives n/4 points; ``proportional``
    splits the n/2 upper points in proportion to the contour lengths.
    """
    if n <= 0 or n % 4:
        raise ValueError(f"billiard point count must be a positive multiple of 4, got {n}")
    xi0, eta0 = spec.xi0, spec.eta0
    if proportional:
        l1, l2 = _half_arc(xi0, eta0), _half_arc(eta0, xi0)
        n1 = int(round(n / 2 * l1 / (l1 + l2)))
        n1 = min(max(n1, 1), n // 2 - 1)
        n2 = n // 2 - n1
    else:
        n1 = n2 = n // 4
    t1, e1, ds1 = _equal_pieces(eta0, xi0, n1)
    t2, e2, ds2 = _equal_pieces(xi0, eta0, n2)
    xi_up = np.concatenate([t1, np.full(n2, xi0)])
    eta_up = np.concatenate([np.full(n1, eta0), t2])
    ds_up = np.concatenate([np.full(n1, ds1), np.full(n2, ds2)])
    xi = np.concatenate([xi_up, -xi_up])
    eta = np.concatenate([eta_up, eta_up])
    ds = np.concatenate([ds_up, ds_up])
    lo_up = np.concatenate([np.column_stack([e1[:-1], np.full(n1, eta0)]),
                            np.column_stack([np.full(n2, xi0), e2[:-1]])])
    hi_up = np.concatenate([np.column_stack([e1[1:], np.full(n1, eta0)]),
                            np.column_stack([np.full(n2, xi0), e2[1:]])])
    mirror = np.array([-1.0, 1.0])
    ends = np.concatenate([np.stack([lo_up, hi_up], axis=1),
                           np.stack([lo_up * mirror, hi_up * mirror], axis=1)])
    return Boundary(xi, eta, ds, _sample_gamma(gamma_fn, xi, eta), True, ends)


def curvature_profile(gamma0: float, eta0: float) -> GammaFn:
    """gamma(s) = gamma0 sqrt(pi/8) / sqrt(eta0^2 + xi^2) as a strength function."""
    def fn(xi, eta):
        return gamma0 * math.sqrt(math.pi / 8.0) / np.hypot(xi, eta0)
    return fn


def knife_edge_wall(length: float, n: int, gamma0) -> Boundary:
    """Half-line wall equivalent to the eta0 -> 0 limit of the curvature profile.

    The parabolic contour eta = 0 runs over the half-line twice (xi and -xi
    land on the same point), so the physical line density is twice
    gamma0 sqrt(pi/8) / sqrt(2x). Its 1/sqrt(x) singularity at the tip is
    averaged over each segment instead of sampled at the midpoint.
    """
    b = discretize_knife_edge(length, n, IMPENETRABLE)
    if isinstance(gamma0, str) or math.isinf(float(gamma0)):
        return b
    # int dx / sqrt(2x) = sqrt(2x) = xi, so the average is d(xi)/ds
    dxi = b.ends[:, 1, 0] - b.ends[:, 0, 0]
    return b.with_gammas(2.0 * float(gamma0) * math.sqrt(math.pi / 8.0) * dxi / b.seg_lengths)
