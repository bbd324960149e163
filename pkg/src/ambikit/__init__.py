"""Ambisonics toolkit: encode sound scenes, manipulate them, decode to speakers or headphones."""

__version__ = "0.1.0"

from .buffer import CANONICAL, FUMA, AmbisonicBuffer, ChannelOrdering, Convention, convert_convention
from .sh import Direction, ModeIndex, Normalization, channel_count, sh_vector

__all__ = [
    "AmbisonicBuffer",
    "CANONICAL",
    "ChannelOrdering",
    "Convention",
    "Direction",
    "FUMA",
    "ModeIndex",
    "Normalization",
    "channel_count",
    "convert_convention",
    "sh_vector",
]
