"""Binaural rendering through a virtual loudspeaker array made of HRIR directions."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve

from .buffer import AmbisonicBuffer
from .decode import Geometry, Speaker, SpeakerLayout, apply_decoder, build_decoder
from .errors import InvalidArgumentError, ParseError
from .formats import read_pcm, write_pcm
from .rotation import RotationSpec
from .sh import Direction, quadrature_grid
from .transform import rotate


@dataclass
class HrirEntry:
    direction: Direction
    left: np.ndarray
    right: np.ndarray


@dataclass
class HrirSet:
    entries: list[HrirEntry]
    sample_rate: float

    def __post_init__(self):
        if len(self.entries) < 4:
            raise InvalidArgumentError(f"an HRIR set needs at least 4 entries, got {len(self.entries)}")
        lengths = {len(e.left) for e in self.entries} | {len(e.right) for e in self.entries}
        if len(lengths) != 1:
            raise InvalidArgumentError(f"impulse responses differ in length: {sorted(lengths)}")
        # SpeakerLayout rejects coincident directions
        self.layout()

    @property
    def length(self) -> int:
        return len(self.entries[0].left)

    def __len__(self):
        return len(self.entries)

    def layout(self) -> SpeakerLayout:
        try:
            return SpeakerLayout([Speaker(e.direction) for e in self.entries], Geometry.SPHERICAL)
        except InvalidArgumentError:
            raise InvalidArgumentError("HRIR set contains duplicate directions") from None

    def impulse_responses(self) -> tuple[np.ndarray, np.ndarray]:
        """Left and right responses stacked as (entries, length)."""
        return (np.stack([e.left for e in self.entries]),
                np.stack([e.right for e in self.entries]))


@dataclass(frozen=True)
class BinauralConfig:
    method: str = "projection"
    weights: str | None = None
    head: RotationSpec = field(default_factory=RotationSpec)
    order: int | None = None

    def __post_init__(self):
        if self.method not in ("projection", "mode-matching"):
            raise InvalidArgumentError(f"binaural decoding supports projection or mode-matching, not {self.method!r}")


def load_hrir_set(manifest) -> HrirSet:
    """Read a JSON manifest listing stereo WAV files with their directions.

    Responses are zero-padded to the longest one.
    """
    manifest = Path(manifest)
    try:
        doc = json.loads(manifest.read_text())
        declared = float(doc["sample_rate"]) if "sample_rate" in doc else None
        items = doc["entries"]
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid HRIR manifest JSON: {exc.msg}", exc.pos) from None
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"HRIR manifest needs 'sample_rate' and 'entries': {exc}", 0) from None
    if not items:
        raise InvalidArgumentError("HRIR manifest lists no entries")
    raw = []
    rate = declared
    for item in items:
        path = manifest.parent / item["file"]
        if not path.exists():
            raise FileNotFoundError(f"HRIR file not found: {path}")
        samples, info = read_pcm(path)
        if info.channels != 2:
            raise InvalidArgumentError(f"{path.name} has {info.channels} channels, HRIRs must be stereo")
        if rate is None:
            rate = info.sample_rate
        elif info.sample_rate != rate:
            raise InvalidArgumentError(
                f"HRIR sample rates differ: {path.name} is {info.sample_rate:g} Hz, expected {rate:g} Hz")
        d = Direction.from_degrees(float(item["azimuth_deg"]), float(item.get("elevation_deg", 0.0)))
        raw.append((d, samples))
    length = max(s.shape[1] for _, s in raw)
    entries = []
    for d, s in raw:
        padded = np.zeros((2, length))
        padded[:, :s.shape[1]] = s
        entries.append(HrirEntry(d, padded[0], padded[1]))
    return HrirSet(entries, rate)


def write_hrir_set(hrirs: HrirSet, directory) -> Path:
    """Store a set as float32 stereo WAVs plus a manifest; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    items = []
    for i, e in enumerate(hrirs.entries):
        name = f"hrir_{i:03d}.wav"
        write_pcm(directory / name, np.stack([e.left, e.right]), hrirs.sample_rate, "float32", "wav")
        items.append({"azimuth_deg": math.degrees(e.direction.azimuth),
                      "elevation_deg": math.degrees(e.direction.elevation), "file": name})
    manifest = directory / "manifest.json"
    manifest.write_text(json.dumps({"sample_rate": hrirs.sample_rate, "entries": items}, indent=2) + "\n")
    return manifest


def binaural_render(buffer: AmbisonicBuffer, hrirs: HrirSet, config: BinauralConfig = BinauralConfig()) -> np.ndarray:
    """Stereo ear signals (2, frames + hrir_length - 1).

    The scene is counter-rotated by the head orientation, decoded to one virtual
    speaker per HRIR direction, filtered with that direction's responses and summed.
    """
    if buffer.sample_rate != hrirs.sample_rate:
        raise InvalidArgumentError(
            f"signal rate {buffer.sample_rate:g} Hz differs from HRIR rate {hrirs.sample_rate:g} Hz")
    buffer.require_canonical()
    order = buffer.order if config.order is None else config.order
    if not config.head.is_identity():
        buffer = rotate(buffer, config.head.inverse())
    dec = build_decoder(hrirs.layout(), order, config.method, config.weights, allow_underdetermined=False)
    feeds = apply_decoder(buffer, dec)
    left_ir, right_ir = hrirs.impulse_responses()
    frames = buffer.frames + hrirs.length - 1
    if buffer.frames == 0:
        return np.zeros((2, max(frames, 0)))
    left = fftconvolve(feeds, left_ir, axes=1).sum(axis=0)
    right = fftconvolve(feeds, right_ir, axes=1).sum(axis=0)
    return np.stack([left, right])[:, :frames]


# --- deterministic fixtures --------------------------------------------------------

def synthetic_hrir_set(sample_rate: float = 48000.0, degree: int = 8, length: int = 64,
                       max_itd: float = 0.7e-3, ild: float = 0.4) -> HrirSet:
    """Left/right-symmetric HRIRs with direction-dependent delay (ITD) and cosine level shading (ILD).

    Directions come from the product quadrature grid of the given degree, which
    is symmetric under y -> -y, so the right ear at (az, el) equals the left ear at (-az, el).
    """
    grid = quadrature_grid(degree)
    smooth = np.array([0.25, 0.5, 0.25])
    base = 4
    need = base + int(round(max_itd * sample_rate)) + len(smooth)
    if length < need:
        raise InvalidArgumentError(f"length {length} cannot hold the largest delay; need at least {need}")
    entries = []
    for az, el in zip(grid.azimuth, grid.elevation):
        lateral = math.sin(az) * math.cos(el)  # +1 = fully left
        entries.append(HrirEntry(Direction(az, el),
                                 _ear_ir(lateral, sample_rate, length, max_itd, ild, base, smooth),
                                 _ear_ir(-lateral, sample_rate, length, max_itd, ild, base, smooth)))
    return HrirSet(entries, sample_rate)


def _ear_ir(lateral, fs, length, max_itd, ild, base, smooth):
    delay = base + int(round(0.5 * (1.0 - lateral) * max_itd * fs))
    ir = np.zeros(length)
    ir[delay:delay + len(smooth)] = (1.0 + ild * lateral) * smooth
    return ir


def delta_hrir_set(directions, sample_rate: float = 48000.0) -> HrirSet:
    """Single-sample unit impulses for both ears at every direction."""
    one = np.array([1.0])
    return HrirSet([HrirEntry(d, one.copy(), one.copy()) for d in directions], sample_rate)
