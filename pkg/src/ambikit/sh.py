"""Real spherical harmonics, ACN indexing, normalizations and spherical quadrature.

Conventions: real-valued SH without Condon-Shortley phase, ACN channel order,
SN3D as base normalization (degree-0 term is the constant 1). Azimuth is
counterclockwise from +x, elevation measured up from the horizontal plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .errors import (
    InvalidArgumentError,
    MalformedSignalError,
    UnsupportedConventionError,
)

FUMA_MAX_ORDER = 3


class Normalization(str, Enum):
    SN3D = "sn3d"
    N3D = "n3d"
    FUMA = "fuma"


@dataclass(frozen=True)
class ModeIndex:
    n: int
    m: int

    def __post_init__(self):
        if self.n < 0 or abs(self.m) > self.n:
            raise InvalidArgumentError(f"invalid mode (n={self.n}, m={self.m})")

    @property
    def acn(self) -> int:
        return acn_index(self)


@dataclass(frozen=True)
class Direction:
    """Unit direction in radians. Azimuth is wrapped to (-pi, pi], elevation clamped."""

    azimuth: float
    elevation: float = 0.0

    def __post_init__(self):
        az = float(self.azimuth)
        az = az - 2 * math.pi * math.ceil((az - math.pi) / (2 * math.pi))
        el = min(max(float(self.elevation), -math.pi / 2), math.pi / 2)
        object.__setattr__(self, "azimuth", az)
        object.__setattr__(self, "elevation", el)

    @classmethod
    def from_degrees(cls, azimuth_deg: float, elevation_deg: float = 0.0) -> "Direction":
        return cls(math.radians(azimuth_deg), math.radians(elevation_deg))

    @classmethod
    def from_vector(cls, v) -> "Direction":
        x, y, z = (float(c) for c in v)
        r = math.sqrt(x * x + y * y + z * z)
        if r == 0.0:
            raise InvalidArgumentError("zero vector has no direction")
        return cls(math.atan2(y, x), math.asin(max(-1.0, min(1.0, z / r))))

    def unit_vector(self) -> np.ndarray:
        ce = math.cos(self.elevation)
        return np.array([
            ce * math.cos(self.azimuth),
            ce * math.sin(self.azimuth),
            math.sin(self.elevation),
        ])


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Sampling of the sphere with weights in steradians.

    Integrates every polynomial on the sphere up to ``exactness_degree`` exactly.
    """

    azimuth: np.ndarray
    elevation: np.ndarray
    weights: np.ndarray
    exactness_degree: int

    @property
    def directions(self) -> list[Direction]:
        return [Direction(a, e) for a, e in zip(self.azimuth, self.elevation)]

    def unit_vectors(self) -> np.ndarray:
        return unit_vectors(self.azimuth, self.elevation)

    def __len__(self):
        return len(self.weights)


def unit_vectors(azimuth, elevation) -> np.ndarray:
    """Cartesian unit vectors, shape (Q, 3)."""
    azimuth = np.asarray(azimuth, dtype=float)
    elevation = np.asarray(elevation, dtype=float)
    ce = np.cos(elevation)
    return np.stack([ce * np.cos(azimuth), ce * np.sin(azimuth), np.sin(elevation)], axis=-1)


def channel_count(order: int) -> int:
    if order < 0:
        raise InvalidArgumentError(f"order must be >= 0, got {order}")
    return (order + 1) ** 2


def acn_index(mode: ModeIndex) -> int:
    return mode.n * mode.n + mode.n + mode.m


def mode_from_acn(k: int) -> ModeIndex:
    if k < 0:
        raise InvalidArgumentError(f"ACN index must be >= 0, got {k}")
    n = math.isqrt(k)
    return ModeIndex(n, k - n * n - n)


def order_from_channels(channels: int) -> int:
    """Order of a full-sphere signal with ``channels`` channels."""
    n = math.isqrt(channels)
    if channels < 1 or n * n != channels:
        raise MalformedSignalError(f"channel count {channels} is not (N+1)^2")
    return n - 1


def degrees_of(order: int) -> np.ndarray:
    """Degree n of every ACN channel up to ``order``."""
    return np.repeat(np.arange(order + 1), 2 * np.arange(order + 1) + 1)


def modes_of(order: int) -> np.ndarray:
    """Mode m of every ACN channel up to ``order``."""
    return np.concatenate([np.arange(-n, n + 1) for n in range(order + 1)])


def _legendre_n3d(order: int, x: np.ndarray) -> np.ndarray:
    """Fully normalized associated Legendre functions, shape (order+1, order+1, Q).

    Entry [n, m] holds sqrt((2n+1)(2-delta_m0)(n-m)!/(n+m)!) P_n^m(x), no
    Condon-Shortley phase, evaluated by the standard stable upward recurrence.
    """
    x = np.asarray(x, dtype=float)
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    P = np.zeros((order + 1, order + 1) + x.shape)
    P[0, 0] = 1.0
    for m in range(1, order + 1):
        if m == 1:
            P[1, 1] = math.sqrt(3.0) * s
        else:
            P[m, m] = math.sqrt((2 * m + 1) / (2 * m)) * s * P[m - 1, m - 1]
    for m in range(order):
        P[m + 1, m] = math.sqrt(2 * m + 3) * x * P[m, m]
    for m in range(order + 1):
        for n in range(m + 2, order + 1):
            a = math.sqrt((4 * n * n - 1) / (n * n - m * m))
            b = math.sqrt(((n - 1) ** 2 - m * m) * (2 * n + 1) / ((2 * n - 3) * (n * n - m * m)))
            P[n, m] = a * x * P[n - 1, m] - b * P[n - 2, m]
    return P


# SN3D -> FuMa (maxN, W additionally scaled by 1/sqrt(2)), keyed by (n, |m|)
_FUMA_FROM_SN3D = {
    (0, 0): 1 / math.sqrt(2),
    (1, 0): 1.0,
    (1, 1): 1.0,
    (2, 0): 1.0,
    (2, 1): 2 / math.sqrt(3),
    (2, 2): 2 / math.sqrt(3),
    (3, 0): 1.0,
    (3, 1): math.sqrt(45 / 32),
    (3, 2): 3 / math.sqrt(5),
    (3, 3): math.sqrt(8 / 5),
}


def _gain_from_sn3d(n: int, m: int, norm: Normalization) -> float:
    norm = Normalization(norm)
    if norm is Normalization.SN3D:
        return 1.0
    if norm is Normalization.N3D:
        return math.sqrt(2 * n + 1)
    if n > FUMA_MAX_ORDER:
        raise UnsupportedConventionError(f"FuMa normalization is limited to order {FUMA_MAX_ORDER}, got degree {n}")
    return _FUMA_FROM_SN3D[(n, abs(m))]


def normalization_gain(mode: ModeIndex, source: Normalization, target: Normalization) -> float:
    """Scalar g with g * Y_source = Y_target for the given mode."""
    return _gain_from_sn3d(mode.n, mode.m, target) / _gain_from_sn3d(mode.n, mode.m, source)


def normalization_gains(order: int, source: Normalization, target: Normalization) -> np.ndarray:
    """Per-ACN-channel conversion gains up to ``order``."""
    return np.array([normalization_gain(mode_from_acn(k), source, target)
                     for k in range(channel_count(order))])


def sh_matrix(azimuth, elevation, order: int, norm: Normalization = Normalization.SN3D) -> np.ndarray:
    """Real SH evaluated at many directions, shape (Q, (order+1)^2), ACN order."""
    if order < 0:
        raise InvalidArgumentError(f"order must be >= 0, got {order}")
    norm = Normalization(norm)
    if norm is Normalization.FUMA and order > FUMA_MAX_ORDER:
        raise UnsupportedConventionError(f"FuMa normalization is limited to order {FUMA_MAX_ORDER}, got {order}")
    azimuth = np.atleast_1d(np.asarray(azimuth, dtype=float))
    elevation = np.atleast_1d(np.asarray(elevation, dtype=float))
    azimuth, elevation = np.broadcast_arrays(azimuth, elevation)
    P = _legendre_n3d(order, np.sin(elevation))
    Y = np.empty(azimuth.shape + (channel_count(order),))
    for n in range(order + 1):
        scale = 1.0 / math.sqrt(2 * n + 1)
        for m in range(-n, n + 1):
            am = abs(m)
            trig = np.cos(am * azimuth) if m >= 0 else np.sin(am * azimuth)
            Y[..., n * n + n + m] = scale * P[n, am] * trig * _gain_from_sn3d(n, m, norm)
    return Y


def sh_vector(direction: Direction, order: int, norm: Normalization = Normalization.SN3D) -> np.ndarray:
    return sh_matrix(direction.azimuth, direction.elevation, order, norm)[0]


@lru_cache(maxsize=None)
def _grid_cached(degree: int) -> QuadratureGrid:
    n_el = degree // 2 + 1
    n_az = degree + 1
    x, w_el = np.polynomial.legendre.leggauss(n_el)
    az = 2 * np.pi * np.arange(n_az) / n_az
    az = np.where(az > np.pi, az - 2 * np.pi, az)
    el = np.arcsin(x)
    azimuth = np.tile(az, n_el)
    elevation = np.repeat(el, n_az)
    weights = np.repeat(w_el, n_az) * (2 * np.pi / n_az)
    for a in (azimuth, elevation, weights):
        a.setflags(write=False)
    return QuadratureGrid(azimuth, elevation, weights, degree)


def quadrature_grid(degree: int) -> QuadratureGrid:
    """Gauss-Legendre (in sin elevation) x equiangular azimuth product grid.

    Exact for spherical polynomials of total degree <= ``degree``.
    """
    if degree < 0:
        raise InvalidArgumentError(f"quadrature degree must be >= 0, got {degree}")
    return _grid_cached(int(degree))


def sh_synthesis(coeffs, azimuth, elevation=None) -> np.ndarray:
    """Evaluate an SN3D coefficient vector (or a (channels, T) matrix) at directions.

    ``azimuth`` may also be a list of :class:`Direction` or a :class:`QuadratureGrid`.
    Returns shape (Q,) or (Q, T).
    """
    coeffs = np.asarray(coeffs, dtype=float)
    order = order_from_channels(coeffs.shape[0])
    az, el = _split_directions(azimuth, elevation)
    return sh_matrix(az, el, order) @ coeffs


def sh_analysis(samples, grid: QuadratureGrid, order: int) -> np.ndarray:
    """SN3D coefficients of a function sampled on ``grid``.

    Exact for functions band-limited to ``order`` when the grid integrates
    degree 2*order exactly. Higher-order content aliases into the result.
    """
    if grid.exactness_degree < 2 * order:
        raise InvalidArgumentError(
            f"grid exactness {grid.exactness_degree} is below 2*order = {2 * order}")
    samples = np.asarray(samples, dtype=float)
    if samples.shape[0] != len(grid):
        raise InvalidArgumentError(f"expected {len(grid)} samples, got {samples.shape[0]}")
    Y = sh_matrix(grid.azimuth, grid.elevation, order)
    scale = (2 * degrees_of(order) + 1) / (4 * np.pi)
    wf = grid.weights.reshape((-1,) + (1,) * (samples.ndim - 1)) * samples
    out = Y.T @ wf
    return out * scale.reshape((-1,) + (1,) * (samples.ndim - 1))


def _split_directions(azimuth, elevation):
    if isinstance(azimuth, QuadratureGrid):
        return azimuth.azimuth, azimuth.elevation
    if isinstance(azimuth, Direction):
        return np.array([azimuth.azimuth]), np.array([azimuth.elevation])
    if elevation is None:
        dirs = list(azimuth)
        return (np.array([d.azimuth for d in dirs], dtype=float),
                np.array([d.elevation for d in dirs], dtype=float))
    return np.asarray(azimuth, dtype=float), np.asarray(elevation, dtype=float)
