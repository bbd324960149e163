"""Loudspeaker decoder design, decoding, and energy/velocity-vector analysis."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.spatial import Delaunay
from scipy.special import eval_legendre

from .buffer import AmbisonicBuffer, HorizontalBuffer, sectoral_acn
from .errors import IllConditionedLayoutError, InvalidArgumentError, ParseError
from .sh import (
    Direction,
    channel_count,
    degrees_of,
    quadrature_grid,
    sh_matrix,
    unit_vectors,
)
from .vbap import vbap_2d, vbap_3d

MIN_SEPARATION = math.radians(0.5)
SVD_CUTOFF = 1e-4


class Geometry(str, Enum):
    SPHERICAL = "3d"
    CIRCULAR = "2d"


class Method(str, Enum):
    PROJECTION = "projection"
    MODE_MATCHING = "mode-matching"
    ALLRAD = "allrad"

    @classmethod
    def parse(cls, text) -> "Method":
        if isinstance(text, cls):
            return text
        t = str(text).lower().replace("_", "-")
        return {"modematch": cls.MODE_MATCHING, "mm": cls.MODE_MATCHING}.get(t) or cls(t)


@dataclass(frozen=True)
class Speaker:
    direction: Direction
    radius: float = 1.0


@dataclass
class SpeakerLayout:
    speakers: list[Speaker]
    geometry: Geometry = Geometry.SPHERICAL

    def __post_init__(self):
        self.geometry = Geometry(self.geometry)
        if not self.speakers:
            raise InvalidArgumentError("a layout needs at least one speaker")
        u = self.unit_vectors()
        cos = np.clip(u @ u.T, -1.0, 1.0)
        np.fill_diagonal(cos, -1.0)
        if np.any(np.arccos(cos.max(axis=1)) <= MIN_SEPARATION):
            raise InvalidArgumentError("speaker directions must be at least 0.5 degrees apart")
        if any(s.radius <= 0 for s in self.speakers):
            raise InvalidArgumentError("speaker radius must be positive")

    def __len__(self):
        return len(self.speakers)

    @property
    def azimuth(self) -> np.ndarray:
        return np.array([s.direction.azimuth for s in self.speakers])

    @property
    def elevation(self) -> np.ndarray:
        if self.geometry is Geometry.CIRCULAR:
            return np.zeros(len(self))
        return np.array([s.direction.elevation for s in self.speakers])

    @property
    def radii(self) -> np.ndarray:
        return np.array([s.radius for s in self.speakers])

    @property
    def mean_radius(self) -> float:
        return float(self.radii.mean())

    def unit_vectors(self) -> np.ndarray:
        return unit_vectors(self.azimuth, self.elevation)

    def positions(self) -> np.ndarray:
        return self.unit_vectors() * self.radii[:, np.newaxis]

    @classmethod
    def circle(cls, count: int, radius: float = 1.0, offset: float = 0.0) -> "SpeakerLayout":
        """``count`` equally spaced horizontal speakers, first one at ``offset`` radians."""
        az = offset + 2 * np.pi * np.arange(count) / count
        return cls([Speaker(Direction(a, 0.0), radius) for a in az], Geometry.CIRCULAR)

    @classmethod
    def from_json(cls, doc: dict) -> "SpeakerLayout":
        try:
            geometry = Geometry(doc.get("geometry", "3d"))
            speakers = [
                Speaker(Direction.from_degrees(float(s["azimuth_deg"]), float(s.get("elevation_deg", 0.0))),
                        float(s.get("radius_m", 1.0)))
                for s in doc["speakers"]
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed layout: {exc}", 0) from None
        return cls(speakers, geometry)

    def to_json(self) -> dict:
        return {
            "geometry": self.geometry.value,
            "speakers": [
                {"azimuth_deg": math.degrees(s.direction.azimuth),
                 "elevation_deg": math.degrees(s.direction.elevation),
                 "radius_m": s.radius}
                for s in self.speakers
            ],
        }


def load_layout(path) -> SpeakerLayout:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid layout JSON: {exc.msg}", exc.pos) from None
    return SpeakerLayout.from_json(doc)


@dataclass
class DecoderMatrix:
    """Gains (speakers, channels) applied to canonical ACN/SN3D channels.

    For horizontal decoders the columns are the 2N+1 sectoral channels.
    """

    matrix: np.ndarray
    order: int
    method: Method
    weights: np.ndarray
    horizontal: bool = False

    def __post_init__(self):
        expected = 2 * self.order + 1 if self.horizontal else channel_count(self.order)
        if self.matrix.shape[1] != expected:
            raise InvalidArgumentError(f"decoder needs {expected} columns, got {self.matrix.shape[1]}")

    @property
    def speakers(self) -> int:
        return self.matrix.shape[0]


def max_re_weights(order: int) -> np.ndarray:
    """Per-order gains P_n(cos(137.9 deg / (N + 1.51))) for 3D decoding."""
    if order < 0:
        raise InvalidArgumentError(f"order must be >= 0, got {order}")
    x = math.cos(math.radians(137.9) / (order + 1.51))
    return np.array([eval_legendre(n, x) for n in range(order + 1)])


def max_re_weights_2d(order: int) -> np.ndarray:
    """Per-order gains cos(n pi / (2N + 2)) for horizontal decoding."""
    return np.cos(np.arange(order + 1) * np.pi / (2 * order + 2))


def _order_weights(order: int, weights, horizontal: bool) -> np.ndarray:
    if weights is None or weights == "none":
        return np.ones(order + 1)
    if isinstance(weights, str):
        if weights.lower().replace("_", "-") not in ("max-re", "maxre"):
            raise InvalidArgumentError(f"unknown order weighting {weights!r}")
        return max_re_weights_2d(order) if horizontal else max_re_weights(order)
    w = np.asarray(weights, dtype=float)
    if w.shape != (order + 1,):
        raise InvalidArgumentError(f"need {order + 1} order weights, got {w.shape}")
    return w


def _sectoral_horizon_gains(order: int) -> np.ndarray:
    """SN3D amplitude of each sectoral harmonic on the horizon (its cos/sin factor aside)."""
    Y = sh_matrix(0.0, 0.0, order)[0]
    n = degrees_of(order)[sectoral_acn(order)]
    return Y[n * n + 2 * n]


def _pinv(Y: np.ndarray, cutoff: float, allow_underdetermined: bool, what: str) -> np.ndarray:
    """Truncated-SVD pseudo-inverse of Y (channels, speakers) -> (speakers, channels)."""
    C, L = Y.shape
    U, s, Vt = np.linalg.svd(Y, full_matrices=False)
    cond = s[0] / s[-1] if s[-1] > 0 else np.inf
    if L < C:
        if not allow_underdetermined:
            raise IllConditionedLayoutError(
                f"{L} {what} cannot support {C} channels for mode-matching "
                f"(condition number {cond:.3g})", cond)
        warnings.warn(f"mode-matching with {L} {what} for {C} channels; using a regularized pseudo-inverse")
    elif s[-1] < cutoff * s[0]:
        raise IllConditionedLayoutError(
            f"layout is rank deficient for mode-matching, condition number {cond:.3g}", cond)
    keep = s >= cutoff * s[0]
    return (Vt[keep].T / s[keep]) @ U[:, keep].T


def build_decoder(layout: SpeakerLayout, order: int, method="projection", weights=None,
                  cutoff: float = SVD_CUTOFF, allow_underdetermined: bool = True,
                  virtual_degree: int | None = None) -> DecoderMatrix:
    """Design a decoder matrix for ``layout``.

    projection: (1/L) Y^T with Y in N3D (applied after SN3D->N3D scaling).
    mode-matching: truncated-SVD pseudo-inverse of the SN3D speaker SH matrix.
    allrad: sampling decoder on an internal virtual grid panned to the layout
    with VBAP, scaled to unit mean energy over all source directions.
    Order weights (e.g. ``"max-re"``) scale the columns per order.
    """
    method = Method.parse(method)
    channel_count(order)
    horizontal = layout.geometry is Geometry.CIRCULAR
    L = len(layout)
    w = _order_weights(order, weights, horizontal)
    if horizontal:
        idx = sectoral_acn(order)
        n_of = degrees_of(order)[idx]
        Y = sh_matrix(layout.azimuth, np.zeros(L), order)[:, idx].T  # (2N+1, L)
        if method is Method.PROJECTION:
            c = _sectoral_horizon_gains(order)
            kappa = np.where(n_of == 0, 1.0, 2.0) / c ** 2
            D = Y.T * kappa / L
        elif method is Method.MODE_MATCHING:
            D = _pinv(Y, cutoff, allow_underdetermined, "speakers")
        else:
            M = (virtual_degree if virtual_degree is not None else 2 * order + 2) + 1
            v_az = 2 * np.pi * np.arange(M) / M
            Yv = sh_matrix(v_az, np.zeros(M), order)[:, idx]
            c = _sectoral_horizon_gains(order)
            kappa = np.where(n_of == 0, 1.0, 2.0) / c ** 2
            D = _normalize_energy_2d(vbap_2d(layout.azimuth, v_az) @ (Yv * kappa / M), order, idx)
    else:
        n_of = degrees_of(order)
        Y = sh_matrix(layout.azimuth, layout.elevation, order).T  # (C, L) SN3D
        if method is Method.PROJECTION:
            D = Y.T * (2 * n_of + 1) / L
        elif method is Method.MODE_MATCHING:
            D = _pinv(Y, cutoff, allow_underdetermined, "speakers")
        else:
            grid = quadrature_grid(virtual_degree if virtual_degree is not None else 2 * order + 2)
            Yv = sh_matrix(grid.azimuth, grid.elevation, order)
            sampling = (Yv * (2 * n_of + 1)) * (grid.weights / (4 * np.pi))[:, np.newaxis]
            G = vbap_3d(layout.unit_vectors(), grid.unit_vectors())
            D = _normalize_energy_3d(G @ sampling, order)
    D = D * w[n_of][np.newaxis, :]
    return DecoderMatrix(D, order, method, w, horizontal)


def _normalize_energy_3d(D: np.ndarray, order: int) -> np.ndarray:
    grid = quadrature_grid(2 * order + 2)
    G = D @ sh_matrix(grid.azimuth, grid.elevation, order).T
    mean_energy = np.sum((G ** 2).sum(axis=0) * grid.weights) / (4 * np.pi)
    return D / math.sqrt(mean_energy) if mean_energy > 0 else D


def _normalize_energy_2d(D: np.ndarray, order: int, idx: np.ndarray) -> np.ndarray:
    M = 4 * order + 8
    az = 2 * np.pi * np.arange(M) / M
    G = D @ sh_matrix(az, np.zeros(M), order)[:, idx].T
    mean_energy = (G ** 2).sum(axis=0).mean()
    return D / math.sqrt(mean_energy) if mean_energy > 0 else D


def apply_decoder(buffer, dec: DecoderMatrix) -> np.ndarray:
    """Speaker feeds (speakers, frames). Orders above the decoder's are discarded."""
    if isinstance(buffer, HorizontalBuffer):
        if not dec.horizontal:
            raise InvalidArgumentError("a horizontal-only signal needs a circular-layout decoder")
        x = buffer.samples
        if buffer.order >= dec.order:
            x = x[:2 * dec.order + 1]
        else:
            x = np.vstack([x, np.zeros((2 * (dec.order - buffer.order), buffer.frames))])
        return dec.matrix @ x
    if not isinstance(buffer, AmbisonicBuffer):
        raise InvalidArgumentError("apply_decoder expects an AmbisonicBuffer")
    buffer.require_canonical()
    C = channel_count(dec.order)
    if buffer.order >= dec.order:
        x = buffer.samples[:C]
    else:
        x = np.vstack([buffer.samples, np.zeros((C - buffer.channels, buffer.frames))])
    if dec.horizontal:
        if buffer.order > 0:
            warnings.warn("decoding a 3D signal on a circular layout: using its horizontal subset")
        x = x[sectoral_acn(dec.order)]
    return dec.matrix @ x


def speaker_gains(dec: DecoderMatrix, directions) -> np.ndarray:
    """Gains (speakers, S) that a unit plane wave from each direction produces."""
    az, el = _direction_arrays(directions)
    Y = sh_matrix(az, el, dec.order).T
    if dec.horizontal:
        Y = Y[sectoral_acn(dec.order)]
    return dec.matrix @ Y


def _direction_arrays(directions):
    dirs = [directions] if isinstance(directions, Direction) else list(directions)
    return (np.array([d.azimuth for d in dirs], dtype=float),
            np.array([d.elevation for d in dirs], dtype=float))


# --- energy / velocity vectors -------------------------------------------------

@dataclass
class AnalysisReport:
    """rE / rV predictions per (source direction, listening position)."""

    source_directions: list[Direction]
    positions: np.ndarray          # (P, 3) metres
    r_e: np.ndarray                # (S, P, 3)
    r_v: np.ndarray                # (S, P, 3)
    error_deg: np.ndarray          # (S, P) angle between rE and the true direction
    velocity_error_deg: np.ndarray  # (S, P)
    array_radius: float = 1.0
    meta: dict = field(default_factory=dict)

    @property
    def mean_error_deg(self) -> np.ndarray:
        """Localization uncertainty map: error averaged over source directions, shape (P,)."""
        return self.error_deg.mean(axis=0)

    def to_json(self) -> dict:
        return {
            "array_radius": self.array_radius,
            "meta": self.meta,
            "positions": self.positions.tolist(),
            "mean_error_deg": self.mean_error_deg.tolist(),
            "sources": [
                {"azimuth_deg": math.degrees(d.azimuth), "elevation_deg": math.degrees(d.elevation),
                 "error_deg": self.error_deg[i].tolist(),
                 "r_e_norm": np.linalg.norm(self.r_e[i], axis=-1).tolist()}
                for i, d in enumerate(self.source_directions)
            ],
        }


def _angle_deg(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    na = np.linalg.norm(a, axis=-1)
    nb = np.linalg.norm(b, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cos = np.sum(a * b, axis=-1) / (na * nb)
    ang = np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))
    return np.where((na < 1e-9) | (nb < 1e-12) | ~np.isfinite(ang), 180.0, ang)


def inside_hull(layout: SpeakerLayout, positions: np.ndarray) -> np.ndarray:
    pts = layout.positions()
    if layout.geometry is Geometry.CIRCULAR:
        if len(layout) < 3:
            return np.zeros(len(positions), dtype=bool)
        tri = Delaunay(pts[:, :2])
        return (tri.find_simplex(positions[:, :2]) >= 0) & (np.abs(positions[:, 2]) < 1e-12)
    if len(layout) < 4:
        return np.zeros(len(positions), dtype=bool)
    return Delaunay(pts).find_simplex(positions) >= 0


def _as_points(listen_positions) -> np.ndarray:
    p = np.atleast_2d(np.asarray(listen_positions, dtype=float))
    if p.shape[1] == 2:
        p = np.hstack([p, np.zeros((len(p), 1))])
    if p.shape[1] != 3:
        raise InvalidArgumentError("listening positions must be 2D or 3D points")
    return p


def analyze_decoder(dec: DecoderMatrix, layout: SpeakerLayout, source_dirs, listen_positions,
                    source_distance: float | None = None) -> AnalysisReport:
    """Energy (rE) and velocity (rV) vectors at each listening position.

    Speakers are point sources with 1/r amplitude decay and no delay term. The
    true direction is toward the virtual source placed at ``source_distance``
    (default: the mean speaker radius) in the encoded direction. A vanishing
    rE (complete cancellation) is reported as a 180 degree error.
    """
    if dec.speakers != len(layout):
        raise InvalidArgumentError(f"decoder has {dec.speakers} rows, layout has {len(layout)} speakers")
    p = _as_points(listen_positions)
    inside = inside_hull(layout, p)
    if not np.all(inside):
        bad = p[np.argmin(inside)]
        raise InvalidArgumentError(f"listening position {bad.tolist()} lies outside the loudspeaker hull")
    dirs = [source_dirs] if isinstance(source_dirs, Direction) else list(source_dirs)
    radius = layout.mean_radius if source_distance is None else source_distance
    g = speaker_gains(dec, dirs)                          # (L, S)
    spk = layout.positions()                              # (L, 3)
    vec = spk[np.newaxis, :, :] - p[:, np.newaxis, :]     # (P, L, 3)
    dist = np.linalg.norm(vec, axis=-1)                   # (P, L)
    u = vec / dist[..., np.newaxis]
    a = g.T[:, np.newaxis, :] / dist[np.newaxis, :, :]    # (S, P, L)
    sum_a = a.sum(axis=-1, keepdims=True)
    sum_e = (a ** 2).sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        r_v = np.einsum("spl,pld->spd", a, u) / sum_a
        r_e = np.einsum("spl,pld->spd", a ** 2, u) / sum_e
    r_v = np.where(np.isfinite(r_v), r_v, 0.0)
    r_e = np.where(np.isfinite(r_e), r_e, 0.0)
    src = unit_vectors(*_direction_arrays(dirs)) * radius            # (S, 3)
    true = src[:, np.newaxis, :] - p[np.newaxis, :, :]
    return AnalysisReport(
        dirs, p, r_e, r_v, _angle_deg(r_e, true), _angle_deg(r_v, true),
        layout.mean_radius, {"order": dec.order, "method": dec.method.value},
    )


def position_grid(layout: SpeakerLayout, points_per_axis: int = 40) -> np.ndarray:
    """Square grid of listening positions spanning the array, restricted to its hull."""
    R = layout.radii.max()
    x = np.linspace(-R, R, points_per_axis)
    X, Y = np.meshgrid(x, x)
    pts = np.column_stack([X.ravel(), Y.ravel(), np.zeros(X.size)])
    return pts[inside_hull(layout, pts)]


def sweet_area_radius(report: AnalysisReport, threshold: float = 30.0) -> float:
    """Largest radius (fraction of the array radius) inside which every position stays below threshold."""
    r = np.linalg.norm(report.positions, axis=1)
    err = report.mean_error_deg
    order = np.argsort(r, kind="stable")
    radius = 0.0
    for i in order:
        if not err[i] < threshold:
            break
        radius = r[i]
    return float(radius / report.array_radius)


def energy_vector(buffer_or_coeffs, grid_degree: int | None = None) -> np.ndarray:
    """Energy vector of a signal rendered on a dense virtual sphere with max-rE weighting.

    Accepts a coefficient vector or an AmbisonicBuffer (energy summed over frames).
    """
    x = buffer_or_coeffs.samples if isinstance(buffer_or_coeffs, AmbisonicBuffer) else buffer_or_coeffs
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, np.newaxis]
    order = math.isqrt(x.shape[0]) - 1
    grid = quadrature_grid(grid_degree if grid_degree is not None else 2 * order + 2)
    n_of = degrees_of(order)
    w = max_re_weights(order)[n_of] * (2 * n_of + 1)
    g = sh_matrix(grid.azimuth, grid.elevation, order) @ (x * w[:, np.newaxis])
    e = (g ** 2).sum(axis=1) * grid.weights
    return (grid.unit_vectors() * e[:, np.newaxis]).sum(axis=0) / e.sum()
