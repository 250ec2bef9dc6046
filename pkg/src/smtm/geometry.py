"""Stereographic projection between R^d and the radius-R sphere in R^{d+1}.

The projection pole is the north pole e_{d+1}; the sphere is embedded with
unit radius and the chart radius R enters the plane<->sphere maps as a pure
scale.  The quantity that controls numerical accuracy everywhere is the
polar gap 1 - z_{d+1}: for |x| ~ 1e6 it is ~2e-12, so forming it by literal
subtraction leaves only a handful of significant bits.  `SpherePoint`
therefore carries the gap as a separately computed field, derived from
algebraically equivalent, cancellation-free expressions at every site that
creates a point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateProposal,
    DimensionMismatch,
    NorthPoleSingularity,
)

# Below this gap a point is treated as the projection pole.
NORTH_POLE_GAP = 1e-12

# Tangent steps shorter than this are refused rather than renormalized.
MIN_PROPOSAL_NORM = 1e-12

_NORM_TOL = 1e-10


@dataclass(frozen=True)
class SpherePoint:
    """Point on the unit sphere S^d embedded in R^{d+1}.

    Attributes:
        coords: shape (d+1,); unit Euclidean norm within 1e-10.
        gap: 1 - coords[-1], computed without catastrophic cancellation.
    """

    coords: np.ndarray
    gap: float

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        object.__setattr__(self, "coords", c)
        if c.ndim != 1 or c.shape[0] < 2:
            raise DimensionMismatch(f"sphere point needs >= 2 coords, got shape {c.shape}")
        nrm = float(np.sqrt(c @ c))
        if abs(nrm - 1.0) > _NORM_TOL:
            raise ValueError(f"sphere point norm {nrm!r} deviates from 1 beyond 1e-10")
        if not self.gap > 0.0:
            raise ValueError("polar gap must be strictly positive (z_{d+1} < 1)")

    @property
    def d(self) -> int:
        return self.coords.shape[0] - 1


@dataclass(frozen=True)
class StereoChart:
    """Chart parameters: ambient dimension, radius, and center offset.

    The plane->sphere map first shifts by `center`, so re-centering the
    chart relocates which plane point maps to the south pole.
    """

    d: int
    radius: float
    center: np.ndarray | None = None

    def __post_init__(self):
        if self.d < 1:
            raise DimensionMismatch(f"chart dimension must be >= 1, got {self.d}")
        if not self.radius > 0.0:
            raise ValueError(f"chart radius must be positive, got {self.radius!r}")
        c = np.zeros(self.d) if self.center is None else np.asarray(self.center, dtype=float)
        if c.shape != (self.d,):
            raise DimensionMismatch(f"center shape {c.shape} does not match d={self.d}")
        object.__setattr__(self, "center", c)


def _check_plane_shape(chart: StereoChart, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (chart.d,):
        raise DimensionMismatch(f"point shape {x.shape} does not match chart d={chart.d}")
    return x


def inverse_batch(chart: StereoChart, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map plane points (k, d) to sphere coords (k, d+1) and gaps (k,).

    The gap comes out as 2R^2/(|u|^2 + R^2), a ratio of positive terms,
    never as 1 - z_{d+1}.
    """
    x = _check_plane_shape(chart, np.atleast_2d(x))
    r2 = chart.radius * chart.radius
    u = x - chart.center
    s = np.einsum("ij,ij->i", u, u)
    denom = s + r2
    coords = np.empty((x.shape[0], chart.d + 1))
    coords[:, : chart.d] = (2.0 * chart.radius / denom)[:, None] * u
    coords[:, chart.d] = (s - r2) / denom
    gaps = 2.0 * r2 / denom
    return coords, gaps


def forward_batch(chart: StereoChart, coords: np.ndarray, gaps: np.ndarray) -> np.ndarray:
    """Map sphere coords (k, d+1) with gaps (k,) back to the plane (k, d).

    Rows with gap < NORTH_POLE_GAP are the caller's problem; this routine
    assumes all gaps are usable.
    """
    scale = chart.radius / gaps
    return chart.center + scale[:, None] * coords[:, : chart.d]


def sp_inverse(chart: StereoChart, x: np.ndarray) -> SpherePoint:
    """Lift one plane point onto the sphere."""
    coords, gaps = inverse_batch(chart, np.asarray(x, dtype=float)[None, :])
    return SpherePoint(coords[0], float(gaps[0]))


def sp_forward(chart: StereoChart, z: SpherePoint) -> np.ndarray:
    """Project one sphere point to the plane.

    Raises:
        NorthPoleSingularity: if the polar gap is below NORTH_POLE_GAP.
    """
    if z.coords.shape[0] != chart.d + 1:
        raise DimensionMismatch(
            f"sphere point dim {z.coords.shape[0] - 1} does not match chart d={chart.d}"
        )
    if z.gap < NORTH_POLE_GAP:
        raise NorthPoleSingularity(f"gap {z.gap:.3e} is inside the pole guard")
    return forward_batch(chart, z.coords[None, :], np.array([z.gap]))[0]


def log_sphere_density(chart: StereoChart, target, z: SpherePoint) -> float:
    """Log density of the pushed-forward target at z, up to one global constant.

    Uses log pi(SP(z)) + d*(log(2R^2) - log gap); the Jacobian factor
    R^2 + |x - center|^2 equals 2R^2/gap exactly, so the gap field is the
    only large-|x| quantity that enters.
    """
    x = sp_forward(chart, z)
    vals = log_density_batch(chart, target, x[None, :], np.array([z.gap]))
    return float(vals[0])


def log_density_batch(
    chart: StereoChart, target, x: np.ndarray, gaps: np.ndarray
) -> np.ndarray:
    """Sphere log-densities for pre-projected plane points x (k, d)."""
    logpi = np.atleast_1d(target.log_density(x))
    r2 = chart.radius * chart.radius
    return logpi + chart.d * (np.log(2.0 * r2) - np.log(gaps))


def tangent_project(coords: np.ndarray, raw: np.ndarray) -> np.ndarray:
    """Project raw (k, d+1) onto the tangent space at unit vector coords."""
    return raw - np.outer(raw @ coords, coords)


def _gaps_from_unnormalized(w: np.ndarray, norms: np.ndarray) -> np.ndarray:
    """Polar gaps of w/|w| without subtracting nearly equal numbers.

    For w_{d+1} > 0:  1 - w_{d+1}/|w| = |w_{1:d}|^2 / (|w| (|w| + w_{d+1})),
    a ratio of positive quantities.  Otherwise the plain form is already
    cancellation-free.
    """
    last = w[:, -1]
    head_sq = np.einsum("ij,ij->i", w[:, :-1], w[:, :-1])
    # abs() keeps the unused branch of the where() finite.
    safe = norms * (norms + np.abs(last))
    return np.where(last > 0.0, head_sq / safe, (norms - last) / norms)


def propose_tangent_batch(
    z: SpherePoint, h: float, raw: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Tangent random-walk proposals from z for pre-drawn normals raw (k, d+1).

    Each row is renormalized back to the sphere:  w = z + h * P_z raw,
    z' = w/|w|.  Since the tangent step is orthogonal to z, |w| >= 1 and the
    degenerate-norm branch cannot fire for finite inputs; it is kept as a
    guard against non-finite raw values.

    Returns:
        (coords (k, d+1), gaps (k,)).
    """
    dz = h * tangent_project(z.coords, np.asarray(raw, dtype=float))
    w = z.coords[None, :] + dz
    norms = np.sqrt(np.einsum("ij,ij->i", w, w))
    if not np.all(norms > MIN_PROPOSAL_NORM):
        raise DegenerateProposal("tangent proposal collapsed to zero length")
    coords = w / norms[:, None]
    return coords, _gaps_from_unnormalized(w, norms)


def tangent_rw_propose(
    chart: StereoChart, z: SpherePoint, h: float, rng: np.random.Generator
) -> SpherePoint:
    """Draw one tangent random-walk proposal from z with step scale h."""
    if z.coords.shape[0] != chart.d + 1:
        raise DimensionMismatch(
            f"sphere point dim {z.coords.shape[0] - 1} does not match chart d={chart.d}"
        )
    if not h > 0.0:
        raise ValueError(f"step scale must be positive, got {h!r}")
    raw = rng.standard_normal((1, chart.d + 1))
    coords, gaps = propose_tangent_batch(z, h, raw)
    return SpherePoint(coords[0], float(gaps[0]))
