"""Manipulations of ambisonic signals.

Spatial operations (rotation, mirroring, directional gain, warping, segment
extraction) act as channel-mixing matrices; non-spatial processing (gain,
filtering, compression) applies one identical operation to every channel.
All functions expect canonical ACN/SN3D buffers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.signal import lfilter

from .buffer import AmbisonicBuffer, HorizontalBuffer, sectoral_acn
from .errors import InvalidArgumentError
from .rotation import RotationSpec, sh_rotation_matrix
from .sh import (
    Direction,
    QuadratureGrid,
    degrees_of,
    modes_of,
    quadrature_grid,
    sh_matrix,
    unit_vectors,
)

WEIGHT_BANDWIDTH = 8


def rotate(buffer: AmbisonicBuffer, rot: RotationSpec) -> AmbisonicBuffer:
    """Rotate the whole scene: a source at d ends up at R d."""
    buffer.require_canonical()
    if rot.is_identity():
        return buffer.with_samples(buffer.samples.copy())
    M = sh_rotation_matrix(rot.matrix(), buffer.order)
    return buffer.with_samples(M @ buffer.samples)


def rotate_matrix(buffer: AmbisonicBuffer, R: np.ndarray) -> AmbisonicBuffer:
    buffer.require_canonical()
    return buffer.with_samples(sh_rotation_matrix(R, buffer.order) @ buffer.samples)


class MirrorPlane(str, Enum):
    LEFT_RIGHT = "left-right"
    FRONT_BACK = "front-back"
    TOP_BOTTOM = "top-bottom"


def mirror_signs(order: int, plane: MirrorPlane) -> np.ndarray:
    n = degrees_of(order)
    m = modes_of(order)
    plane = MirrorPlane(plane)
    if plane is MirrorPlane.LEFT_RIGHT:
        flip = m < 0
    elif plane is MirrorPlane.TOP_BOTTOM:
        flip = (n + m) % 2 == 1
    else:
        flip = ((m >= 0) & (m % 2 == 1)) | ((m < 0) & (m % 2 == 0))
    return np.where(flip, -1.0, 1.0)


def mirror(buffer: AmbisonicBuffer, plane: MirrorPlane) -> AmbisonicBuffer:
    buffer.require_canonical()
    signs = mirror_signs(buffer.order, plane)
    return buffer.with_samples(buffer.samples * signs[:, np.newaxis])


# --- grid-based directional processing -----------------------------------------

def default_grid(order: int) -> QuadratureGrid:
    return quadrature_grid(2 * order + WEIGHT_BANDWIDTH)


def _resample_operator(order: int, grid: QuadratureGrid, weights: np.ndarray,
                       source_az: np.ndarray, source_el: np.ndarray) -> np.ndarray:
    """Channel matrix for: synthesize at source directions, weight, re-analyze on grid.

    The signal is read as a directional amplitude density (N3D-consistent
    expansion), so a unit weight with unmoved directions is an exact identity.
    """
    Y_grid = sh_matrix(grid.azimuth, grid.elevation, order)
    Y_src = sh_matrix(source_az, source_el, order)
    density = 2 * degrees_of(order) + 1
    return (Y_grid.T * (grid.weights * weights)) @ (Y_src * density) / (4 * np.pi)


def sample_on_grid(fn, grid: QuadratureGrid) -> np.ndarray:
    """Evaluate ``fn(azimuth, elevation)`` (vectorized, radians) on the grid."""
    return np.asarray(fn(grid.azimuth, grid.elevation), dtype=float) * np.ones(len(grid))


def directional_gain(buffer: AmbisonicBuffer, weights, grid: QuadratureGrid | None = None,
                     weight_bandwidth: int = WEIGHT_BANDWIDTH) -> AmbisonicBuffer:
    """Multiply the scene by a direction-dependent gain sampled on ``grid``.

    The product is truncated back to the input order, so weights with fine
    angular detail are smoothed.
    """
    buffer.require_canonical()
    grid = grid or default_grid(buffer.order)
    need = 2 * buffer.order + weight_bandwidth
    if grid.exactness_degree < need:
        raise InvalidArgumentError(
            f"grid exactness {grid.exactness_degree} is below 2*order + {weight_bandwidth} = {need}")
    weights = np.asarray(weights, dtype=float).ravel()
    if weights.shape[0] != len(grid):
        raise InvalidArgumentError(f"expected {len(grid)} weights, got {weights.shape[0]}")
    if not np.all(np.isfinite(weights)):
        raise InvalidArgumentError("weights must be finite")
    T = _resample_operator(buffer.order, grid, weights, grid.azimuth, grid.elevation)
    return buffer.with_samples(T @ buffer.samples)


def _check_monotone(warp) -> int:
    el = np.linspace(-np.pi / 2, np.pi / 2, 2049)
    values = np.asarray([warp(e) for e in el], dtype=float)
    d = np.diff(values)
    if np.all(d > 0):
        return 1
    if np.all(d < 0):
        return -1
    raise InvalidArgumentError("elevation warp must be strictly monotone on [-pi/2, pi/2]")


def _derivative(warp, el: np.ndarray, h: float = 1e-6) -> np.ndarray:
    lo = np.maximum(el - h, -np.pi / 2)
    hi = np.minimum(el + h, np.pi / 2)
    return (np.asarray(warp(hi), dtype=float) - np.asarray(warp(lo), dtype=float)) / (hi - lo)


def directional_warp(buffer: AmbisonicBuffer, warp, nodes: int | None = None) -> AmbisonicBuffer:
    """Move content from elevation el to warp(el) and re-encode at the input order.

    The re-analysis integral is taken over the source sphere, where the
    integrand stays smooth even when ``warp`` does not cover every elevation;
    ``nodes`` sets the Gauss-Legendre node count in elevation. Directions
    outside the image of ``warp`` receive no content, and no amplitude or area
    compensation is applied.
    """
    buffer.require_canonical()
    _check_monotone(warp)
    order = buffer.order
    nodes = nodes or max(64, 4 * order + 16)
    x, w = np.polynomial.legendre.leggauss(nodes)
    el = x * np.pi / 2
    warped = np.asarray(warp(el), dtype=float) * np.ones_like(el)
    # area element of the warped sphere expressed in source coordinates
    w_el = w * np.pi / 2 * np.cos(warped) * np.abs(_derivative(warp, el))
    n_az = 2 * order + 1
    az = -np.pi + 2 * np.pi * np.arange(n_az) / n_az
    A, E = np.meshgrid(az, el)
    _, W = np.meshgrid(az, w_el * 2 * np.pi / n_az)
    Y_src = sh_matrix(A.ravel(), E.ravel(), order)
    Y_dst = sh_matrix(A.ravel(), np.meshgrid(az, warped)[1].ravel(), order)
    density = 2 * degrees_of(order) + 1
    T = (Y_dst.T * W.ravel()) @ (Y_src * density) / (4 * np.pi)
    return buffer.with_samples(T @ buffer.samples)


def elevation_squash(alpha: float):
    """Warp family that maps the sphere onto itself, squashing toward the zenith for alpha > 0.

    sin(el') = (sin(el) + alpha) / (1 + alpha sin(el)), |alpha| < 1.
    """
    if not -1.0 < alpha < 1.0:
        raise InvalidArgumentError(f"alpha must lie in (-1, 1), got {alpha}")

    def warp(el):
        s = np.sin(el)
        return np.arcsin(np.clip((s + alpha) / (1 + alpha * s), -1.0, 1.0))

    return warp


# --- uniform (all-channel) processing ------------------------------------------

def uniform_process(buffer: AmbisonicBuffer, kernel, mode: str = "gain") -> AmbisonicBuffer:
    """Apply the same gain envelope (``mode='gain'``) or FIR filter (``mode='fir'``) to every channel.

    Gains may be a scalar or one value per frame. FIR output keeps the input length.
    """
    kernel = np.asarray(kernel, dtype=float)
    if not np.all(np.isfinite(kernel)):
        raise InvalidArgumentError("kernel must be finite")
    if mode == "gain":
        if kernel.ndim == 0:
            return buffer.with_samples(buffer.samples * kernel)
        if kernel.shape != (buffer.frames,):
            raise InvalidArgumentError(f"gain envelope needs {buffer.frames} values, got {kernel.shape}")
        return buffer.with_samples(buffer.samples * kernel[np.newaxis, :])
    if mode == "fir":
        taps = np.atleast_1d(kernel)
        return buffer.with_samples(lfilter(taps, [1.0], buffer.samples, axis=1))
    raise InvalidArgumentError(f"unknown processing mode {mode!r}")


@dataclass(frozen=True)
class CompressorParams:
    threshold_db: float = -20.0
    ratio: float = 4.0
    attack_ms: float = 5.0
    release_ms: float = 100.0
    makeup_db: float = 0.0
    detector: str = "peak"

    def __post_init__(self):
        if self.ratio < 1:
            raise InvalidArgumentError(f"compression ratio must be >= 1, got {self.ratio}")
        if self.attack_ms <= 0 or self.release_ms <= 0:
            raise InvalidArgumentError("attack and release times must be positive")
        if self.detector not in ("peak", "rms"):
            raise InvalidArgumentError(f"detector must be 'peak' or 'rms', got {self.detector!r}")


RMS_WINDOW_MS = 3.0
_FLOOR_DB = -200.0


def _one_pole(ms: float, fs: float) -> float:
    return math.exp(-1.0 / (ms * 1e-3 * fs))


def detector_level(x: np.ndarray, fs: float, params: CompressorParams) -> np.ndarray:
    """Detector output in dBFS for the control signal ``x``."""
    if params.detector == "rms":
        n = max(1, int(round(RMS_WINDOW_MS * 1e-3 * fs)))
        ms = lfilter(np.full(n, 1.0 / n), [1.0], x * x)
        env = np.sqrt(np.maximum(ms, 0.0))
    else:
        # instant attack, decay with the release time constant
        r = _one_pole(params.release_ms, fs)
        ax = np.abs(x)
        env = np.empty_like(ax)
        prev = 0.0
        for i, v in enumerate(ax):
            prev = v if v > prev * r else prev * r
            env[i] = prev
    with np.errstate(divide="ignore"):
        level = 20.0 * np.log10(env)
    return np.maximum(level, _FLOOR_DB)


def compressor_gain(control: np.ndarray, fs: float, params: CompressorParams) -> np.ndarray:
    """Linear gain sequence derived from the control signal."""
    level = detector_level(np.asarray(control, dtype=float), fs, params)
    target = np.minimum(0.0, (params.threshold_db - level) * (1.0 - 1.0 / params.ratio))
    a_att = _one_pole(params.attack_ms, fs)
    a_rel = _one_pole(params.release_ms, fs)
    smooth = np.empty_like(target)
    g = 0.0
    for i, t in enumerate(target):
        a = a_att if t < g else a_rel
        g = a * g + (1.0 - a) * t
        smooth[i] = g
    return 10.0 ** ((smooth + params.makeup_db) / 20.0)


def compress(buffer: AmbisonicBuffer, params: CompressorParams) -> AmbisonicBuffer:
    """Dynamic compression keyed by the omnidirectional (ACN 0) channel.

    One gain sequence multiplies every channel, so spatial relations are kept.
    """
    buffer.require_canonical()
    if params.ratio == 1 and params.makeup_db == 0:
        return buffer.with_samples(buffer.samples.copy())
    gain = compressor_gain(buffer.samples[0], buffer.sample_rate, params)
    return buffer.with_samples(buffer.samples * gain[np.newaxis, :])


# --- angular segments ------------------------------------------------------------

@dataclass(frozen=True)
class SpatialWindow:
    """Cap around ``center``: unity up to ``inner_radius``, raised-cosine fade to zero at ``outer_radius``."""

    center: Direction
    inner_radius: float
    outer_radius: float

    def __post_init__(self):
        if not 0.0 <= self.inner_radius <= self.outer_radius <= np.pi:
            raise InvalidArgumentError(
                f"need 0 <= inner <= outer <= pi, got {self.inner_radius}, {self.outer_radius}")

    def gain(self, azimuth, elevation) -> np.ndarray:
        u = unit_vectors(azimuth, elevation)
        angle = np.arccos(np.clip(u @ self.center.unit_vector(), -1.0, 1.0))
        if self.outer_radius == self.inner_radius:
            return np.where(angle <= self.inner_radius + 1e-12, 1.0, 0.0)
        t = np.clip((angle - self.inner_radius) / (self.outer_radius - self.inner_radius), 0.0, 1.0)
        return 0.5 * (1.0 + np.cos(np.pi * t))


def extract_segment(buffer: AmbisonicBuffer, window: SpatialWindow,
                    grid: QuadratureGrid | None = None) -> tuple[AmbisonicBuffer, AmbisonicBuffer]:
    """Split the scene into the windowed segment and the exact residual."""
    grid = grid or default_grid(buffer.order)
    segment = directional_gain(buffer, window.gain(grid.azimuth, grid.elevation), grid)
    residual = buffer.with_samples(buffer.samples - segment.samples)
    return segment, residual


def horizontal_subset(buffer: AmbisonicBuffer) -> HorizontalBuffer:
    """Keep the 2N+1 sectoral channels (|m| = n)."""
    buffer.require_canonical()
    idx = sectoral_acn(buffer.order)
    return HorizontalBuffer(buffer.samples[idx].copy(), buffer.sample_rate, buffer.order)
