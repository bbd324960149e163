"""Reading and writing ambisonic audio files (WAV + sidecar, CAF/AmbiX, AMB).

A plain ``.wav`` carries no ambisonic metadata, so a JSON sidecar
``<stem>.meta.json`` holding ``{order, ordering, normalization}`` travels with it.
``.caf`` defaults to ACN/SN3D and ``.amb`` to FuMa.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .buffer import (
    CANONICAL,
    FUMA,
    AmbisonicBuffer,
    ChannelOrdering,
    Convention,
    HorizontalBuffer,
    convert_convention,
)
from .errors import InvalidArgumentError, MalformedSignalError, ParseError, UnsupportedFormatError
from .formats import read_pcm, write_pcm
from .sh import FUMA_MAX_ORDER, Normalization, order_from_channels


class Container(str, Enum):
    WAV = "wav"
    CAF = "caf"
    AMB = "amb"

    @classmethod
    def from_path(cls, path) -> "Container":
        suffix = Path(path).suffix.lower().lstrip(".")
        try:
            return cls(suffix)
        except ValueError:
            raise UnsupportedFormatError(f"unsupported file extension {Path(path).suffix!r}") from None


@dataclass(frozen=True)
class FormatMeta:
    container: Container
    convention: Convention = CANONICAL
    order: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "container", Container(self.container))
        if self.container is Container.AMB:
            if self.convention != FUMA:
                raise UnsupportedFormatError("AMB files always use FuMa ordering and normalization")
            if self.order is not None and self.order > FUMA_MAX_ORDER:
                raise UnsupportedFormatError(f"AMB is limited to order {FUMA_MAX_ORDER}, got {self.order}")


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def read_sidecar(path) -> dict | None:
    side = sidecar_path(path)
    if not side.exists():
        return None
    try:
        meta = json.loads(side.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid sidecar JSON in {side}: {exc.msg}", exc.pos) from None
    if not isinstance(meta, dict):
        raise ParseError(f"sidecar {side} must hold a JSON object", 0)
    return meta


def write_sidecar(path, order: int, convention: Convention, horizontal: bool = False):
    meta = {
        "order": int(order),
        "ordering": convention.ordering.value,
        "normalization": convention.normalization.value,
    }
    if horizontal:
        meta["horizontal"] = True
    sidecar_path(path).write_text(json.dumps(meta, indent=2) + "\n")


def _convention_from_sidecar(meta: dict) -> Convention:
    try:
        return Convention(ChannelOrdering(meta["ordering"]), Normalization(meta["normalization"]))
    except (KeyError, ValueError) as exc:
        raise ParseError(f"sidecar lacks a valid ordering/normalization: {exc}", 0) from None


def default_meta(path) -> FormatMeta | None:
    """Metadata implied by the extension alone (None for plain WAV)."""
    container = Container.from_path(path)
    if container is Container.AMB:
        return FormatMeta(container, FUMA)
    if container is Container.CAF:
        return FormatMeta(container, CANONICAL)
    return None


def resolve_meta(path, meta_hint: FormatMeta | None = None) -> tuple[FormatMeta, bool]:
    """Pick the metadata for ``path``: hint, else sidecar, else extension default.

    Returns (meta, horizontal). Raises when nothing identifies a plain WAV.
    """
    container = Container.from_path(path)
    side = read_sidecar(path) if container is Container.WAV or meta_hint is None else None
    horizontal = bool(side and side.get("horizontal", False))
    if meta_hint is not None:
        return meta_hint, horizontal
    if side is not None:
        order = side.get("order")
        return FormatMeta(container, _convention_from_sidecar(side), order), horizontal
    meta = default_meta(path)
    if meta is None:
        raise InvalidArgumentError(
            f"no ambisonic metadata for {Path(path).name}: give a convention or provide "
            f"{sidecar_path(path).name}")
    return meta, False


def read_audio(path, meta_hint: FormatMeta | None = None):
    """Read an ambisonic file into an :class:`AmbisonicBuffer` in the file's convention.

    A sidecar marking the signal horizontal-only yields a :class:`HorizontalBuffer`.
    """
    samples, info = read_pcm(path)
    if meta_hint is None and info.channels >= 1:
        # channel-count validity is checked before metadata so bad files fail early
        root = int(round(np.sqrt(info.channels)))
        if root * root != info.channels and not _sidecar_says_horizontal(path):
            raise MalformedSignalError(f"channel count {info.channels} is not (N+1)^2")
    meta, horizontal = resolve_meta(path, meta_hint)
    if horizontal:
        buf = HorizontalBuffer(samples, info.sample_rate)
        if meta.order is not None and meta.order != buf.order:
            raise MalformedSignalError(f"sidecar order {meta.order} does not match {buf.channels} channels")
        return buf
    order = order_from_channels(info.channels)
    if meta.order is not None and meta.order != order:
        raise MalformedSignalError(
            f"metadata says order {meta.order} but the file has {info.channels} channels")
    if meta.container is Container.AMB and order > FUMA_MAX_ORDER:
        raise UnsupportedFormatError(f"AMB is limited to order {FUMA_MAX_ORDER}, file has order {order}")
    return AmbisonicBuffer(samples, info.sample_rate, order, meta.convention)


def _sidecar_says_horizontal(path) -> bool:
    try:
        side = read_sidecar(path)
    except ParseError:
        return False
    return bool(side and side.get("horizontal", False))


def write_audio(buffer, path, target: FormatMeta | None = None, sample_format: str = "float32"):
    """Write ``buffer`` to ``path``, converting to the target convention first.

    WAV output is accompanied by a sidecar describing the written convention.
    """
    path = Path(path)
    container = Container.from_path(path)
    if target is None:
        target = default_meta(path) or FormatMeta(container, buffer.convention
                                                  if isinstance(buffer, AmbisonicBuffer) else CANONICAL)
    if target.container is not container:
        raise UnsupportedFormatError(
            f"target container {target.container.value} does not match extension {path.suffix}")
    if isinstance(buffer, HorizontalBuffer):
        if container is not Container.WAV:
            raise UnsupportedFormatError("horizontal-only signals are written as WAV with a sidecar")
        write_pcm(path, buffer.samples, buffer.sample_rate, sample_format, "wav")
        write_sidecar(path, buffer.order, CANONICAL, horizontal=True)
        return
    if target.order is not None and target.order != buffer.order:
        raise InvalidArgumentError(f"target order {target.order} differs from buffer order {buffer.order}")
    if container is Container.AMB and buffer.order > FUMA_MAX_ORDER:
        raise UnsupportedFormatError(f"AMB is limited to order {FUMA_MAX_ORDER}, got order {buffer.order}")
    out = convert_convention(buffer, target.convention)
    write_pcm(path, out.samples, out.sample_rate, sample_format, container.value,
              ambisonic=container is Container.AMB)
    if container is Container.WAV:
        write_sidecar(path, out.order, out.convention)


def read_mono(path) -> tuple[np.ndarray, float]:
    """Read a single-channel file for use as a source signal."""
    samples, info = read_pcm(path)
    if info.channels != 1:
        raise InvalidArgumentError(f"{Path(path).name} has {info.channels} channels, expected mono")
    return samples[0], info.sample_rate
