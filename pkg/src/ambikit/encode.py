"""Encoding of virtual sources, scenes and tetrahedral A-format recordings."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .buffer import AmbisonicBuffer, CANONICAL
from .errors import InvalidArgumentError, ParseError
from .sh import Direction, channel_count, sh_vector


@dataclass
class Source:
    audio: np.ndarray
    sample_rate: float
    direction: Direction
    gain: float = 1.0

    def __post_init__(self):
        self.audio = np.asarray(self.audio, dtype=np.float64).ravel()
        if not math.isfinite(self.gain) or self.gain < 0:
            raise InvalidArgumentError(f"source gain must be finite and >= 0, got {self.gain}")


@dataclass
class SceneDescription:
    order: int
    sample_rate: float
    sources: list[Source] = field(default_factory=list)

    def __post_init__(self):
        channel_count(self.order)
        for i, src in enumerate(self.sources):
            if src.sample_rate != self.sample_rate:
                raise InvalidArgumentError(
                    f"source {i} has sample rate {src.sample_rate}, scene uses {self.sample_rate}")


def encode_source(signal, direction: Direction, order: int, sample_rate: float = 48000.0) -> AmbisonicBuffer:
    """Plane-wave encoding: every channel is the signal times the SN3D SH gain."""
    signal = np.asarray(signal, dtype=np.float64).ravel()
    gains = sh_vector(direction, order)
    return AmbisonicBuffer(np.outer(gains, signal), sample_rate, order)


def mix(a: AmbisonicBuffer, b: AmbisonicBuffer) -> AmbisonicBuffer:
    """Add two signals channel by channel; missing channels and frames count as zero."""
    if a.sample_rate != b.sample_rate:
        raise InvalidArgumentError(f"cannot mix sample rates {a.sample_rate} and {b.sample_rate}")
    a.require_canonical()
    b.require_canonical()
    order = max(a.order, b.order)
    frames = max(a.frames, b.frames)
    out = np.zeros((channel_count(order), frames))
    out[:a.channels, :a.frames] += a.samples
    out[:b.channels, :b.frames] += b.samples
    return AmbisonicBuffer(out, a.sample_rate, order)


def render_scene(scene: SceneDescription) -> AmbisonicBuffer:
    """Anechoic rendering: sum of the encoded, gain-scaled sources in list order."""
    frames = max((len(s.audio) for s in scene.sources), default=0)
    out = np.zeros((channel_count(scene.order), frames))
    for src in scene.sources:
        out[:, :len(src.audio)] += np.outer(sh_vector(src.direction, scene.order), src.gain * src.audio)
    return AmbisonicBuffer(out, scene.sample_rate, scene.order)


def load_scene(path, read_mono=None) -> SceneDescription:
    """Load a scene file; audio paths are resolved relative to the file."""
    if read_mono is None:
        from .audio_io import read_mono
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid scene JSON: {exc.msg}", exc.pos) from None
    try:
        order = int(doc["order"])
        rate = float(doc["sample_rate"])
        entries = doc.get("sources", [])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"scene file needs integer 'order' and 'sample_rate': {exc}", 0) from None
    sources = []
    for i, entry in enumerate(entries):
        try:
            audio_path = path.parent / entry["audio"]
            direction = Direction.from_degrees(float(entry.get("azimuth_deg", 0.0)),
                                               float(entry.get("elevation_deg", 0.0)))
            gain = 10.0 ** (float(entry.get("gain_db", 0.0)) / 20.0)
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"scene source {i} is malformed: {exc}", 0) from None
        audio, src_rate = read_mono(audio_path)
        sources.append(Source(audio, src_rate, direction, gain))
    return SceneDescription(order, rate, sources)


# --- tetrahedral microphone ----------------------------------------------------

_TETRA_AXES = np.array([
    [1.0, 1.0, 1.0],     # FLU
    [1.0, -1.0, -1.0],   # FRD
    [-1.0, 1.0, -1.0],   # BLD
    [-1.0, -1.0, 1.0],   # BRU
]) / math.sqrt(3.0)


@dataclass(frozen=True)
class TetraGeometry:
    """Coincident tetrahedral array, capsules ordered FLU, FRD, BLD, BRU.

    ``alpha`` sets the capsule pattern alpha + (1 - alpha) cos(angle); 0.5 is a cardioid.
    """

    alpha: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise InvalidArgumentError(f"capsule pattern alpha must lie in [0, 1], got {self.alpha}")

    @property
    def axes(self) -> np.ndarray:
        return _TETRA_AXES.copy()

    def capsule_gains(self, direction: Direction) -> np.ndarray:
        return self.alpha + (1.0 - self.alpha) * (_TETRA_AXES @ direction.unit_vector())

    def simulate(self, signal, direction: Direction) -> np.ndarray:
        """Capsule signals (4, frames) for a plane wave, no inter-capsule delays."""
        return np.outer(self.capsule_gains(direction), np.asarray(signal, dtype=np.float64).ravel())


def tetra_a_to_b(a_format, geom: TetraGeometry = TetraGeometry(), sample_rate: float = 48000.0) -> AmbisonicBuffer:
    """Sum/difference matrixing of the four capsules into a first-order ACN/SN3D signal."""
    a = np.asarray(a_format, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != 4:
        raise InvalidArgumentError(f"A-format input needs exactly 4 channels, got shape {a.shape}")
    if not 0.0 < geom.alpha < 1.0:
        raise InvalidArgumentError("pure omni or figure-of-eight capsules cannot be matrixed to B-format")
    flu, frd, bld, bru = a
    w = (flu + frd + bld + bru) / (4.0 * geom.alpha)
    dipole = math.sqrt(3.0) / (4.0 * (1.0 - geom.alpha))
    x = (flu + frd - bld - bru) * dipole
    y = (flu - frd + bld - bru) * dipole
    z = (flu - frd - bld + bru) * dipole
    return AmbisonicBuffer(np.stack([w, y, z, x]), sample_rate, 1, CANONICAL)
