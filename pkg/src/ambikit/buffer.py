"""The in-memory ambisonic signal and channel-convention conversion."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .errors import InvalidArgumentError, MalformedSignalError, UnsupportedConventionError
from .sh import (
    FUMA_MAX_ORDER,
    Normalization,
    channel_count,
    degrees_of,
    modes_of,
    normalization_gains,
    order_from_channels,
)


class ChannelOrdering(str, Enum):
    ACN = "acn"
    FUMA = "fuma"


# FuMa channel i (W X Y Z R S T U V K L M N O P Q) carries ACN channel FUMA_TO_ACN[i]
FUMA_TO_ACN = (0, 3, 1, 2, 6, 7, 5, 8, 4, 12, 13, 11, 14, 10, 15, 9)


@dataclass(frozen=True)
class Convention:
    ordering: ChannelOrdering = ChannelOrdering.ACN
    normalization: Normalization = Normalization.SN3D

    def __post_init__(self):
        object.__setattr__(self, "ordering", ChannelOrdering(self.ordering))
        object.__setattr__(self, "normalization", Normalization(self.normalization))
        if self.ordering is ChannelOrdering.FUMA and self.normalization is not Normalization.FUMA:
            raise UnsupportedConventionError("FuMa ordering requires FuMa normalization")

    @property
    def max_order(self):
        if self.normalization is Normalization.FUMA or self.ordering is ChannelOrdering.FUMA:
            return FUMA_MAX_ORDER
        return None

    def check_order(self, order: int):
        if self.max_order is not None and order > self.max_order:
            raise UnsupportedConventionError(
                f"{self} is limited to order {self.max_order}, got order {order}")

    @classmethod
    def parse(cls, text: str) -> "Convention":
        """Parse 'acn/sn3d', 'acn-n3d', 'fuma', 'ambix' and similar."""
        t = text.strip().lower().replace("-", "/").replace("_", "/")
        aliases = {"ambix": "acn/sn3d", "fuma": "fuma/fuma", "bformat": "fuma/fuma"}
        t = aliases.get(t, t)
        try:
            ordering, normalization = t.split("/")
            return cls(ChannelOrdering(ordering), Normalization(normalization))
        except ValueError:
            raise InvalidArgumentError(f"unknown channel convention {text!r}") from None

    def __str__(self):
        return f"{self.ordering.value}/{self.normalization.value}"


CANONICAL = Convention(ChannelOrdering.ACN, Normalization.SN3D)
FUMA = Convention(ChannelOrdering.FUMA, Normalization.FUMA)


@dataclass
class AmbisonicBuffer:
    """Multichannel ambisonic signal, samples shaped (channels, frames)."""

    samples: np.ndarray
    sample_rate: float
    order: int | None = None
    convention: Convention = field(default=CANONICAL)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim == 1:
            s = s[np.newaxis, :]
        if s.ndim != 2:
            raise MalformedSignalError(f"samples must be (channels, frames), got shape {s.shape}")
        self.samples = s
        inferred = order_from_channels(s.shape[0])
        if self.order is None:
            self.order = inferred
        elif self.order != inferred:
            raise MalformedSignalError(
                f"order {self.order} needs {channel_count(self.order)} channels, got {s.shape[0]}")
        if not self.sample_rate or self.sample_rate <= 0:
            raise InvalidArgumentError(f"sample rate must be positive, got {self.sample_rate}")
        self.convention.check_order(self.order)

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def frames(self) -> int:
        return self.samples.shape[1]

    def with_samples(self, samples) -> "AmbisonicBuffer":
        """Same metadata, new sample matrix (order follows the channel count)."""
        return replace(self, samples=samples, order=None)

    def truncated(self, order: int) -> "AmbisonicBuffer":
        if order > self.order:
            raise InvalidArgumentError(f"cannot truncate order {self.order} to {order}")
        self.require_canonical()
        return self.with_samples(self.samples[:channel_count(order)].copy())

    def require_canonical(self):
        if self.convention != CANONICAL:
            raise InvalidArgumentError(
                f"operation requires {CANONICAL} channels, buffer is {self.convention}")

    @classmethod
    def zeros(cls, order: int, frames: int, sample_rate: float) -> "AmbisonicBuffer":
        return cls(np.zeros((channel_count(order), frames)), sample_rate)


@dataclass
class HorizontalBuffer:
    """Horizontal-only signal: the 2N+1 sectoral channels (|m| = n) in ACN order, SN3D."""

    samples: np.ndarray
    sample_rate: float
    order: int | None = None

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 2 or s.shape[0] % 2 == 0:
            raise MalformedSignalError(f"channel count {s.shape[0]} is not 2N+1")
        self.samples = s
        inferred = (s.shape[0] - 1) // 2
        if self.order is None:
            self.order = inferred
        elif self.order != inferred:
            raise MalformedSignalError(f"order {self.order} needs {2 * self.order + 1} channels")

    @property
    def channels(self) -> int:
        return self.samples.shape[0]

    @property
    def frames(self) -> int:
        return self.samples.shape[1]

    @property
    def acn_channels(self) -> np.ndarray:
        return sectoral_acn(self.order)


def sectoral_acn(order: int) -> np.ndarray:
    """ACN indices of the modes with |m| = n, ascending."""
    n = degrees_of(order)
    return np.flatnonzero(np.abs(modes_of(order)) == n)


def _fuma_permutation(order: int) -> np.ndarray:
    return np.array(FUMA_TO_ACN[:channel_count(order)])


def convert_convention(buffer: AmbisonicBuffer, target: Convention) -> AmbisonicBuffer:
    """Permute and rescale channels so the represented sound field is unchanged."""
    target.check_order(buffer.order)
    source = buffer.convention
    if source == target:
        return replace(buffer, samples=buffer.samples.copy())
    s = buffer.samples
    if source.ordering is ChannelOrdering.FUMA:
        acn = np.empty_like(s)
        acn[_fuma_permutation(buffer.order)] = s
        s = acn
    gains = normalization_gains(buffer.order, source.normalization, target.normalization)
    s = s * gains[:, np.newaxis]
    if target.ordering is ChannelOrdering.FUMA:
        s = s[_fuma_permutation(buffer.order)]
    return AmbisonicBuffer(s, buffer.sample_rate, buffer.order, target)


def to_canonical(buffer: AmbisonicBuffer) -> AmbisonicBuffer:
    return convert_convention(buffer, CANONICAL)
