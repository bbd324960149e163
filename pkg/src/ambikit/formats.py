"""Low-level WAV/RIFF and CAF readers and writers.

Samples are exchanged as float64 arrays shaped (channels, frames). Integer PCM
is scaled to [-1, 1). Only linear PCM and IEEE float payloads are handled.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InvalidArgumentError, ParseError, UnsupportedFormatError

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE

_KSDATAFORMAT_TAIL = bytes.fromhex("000000001000800000aa00389b71")
_AMBISONIC_TAIL = bytes.fromhex("00002107d3118644c8c1ca000000")

SAMPLE_FORMATS = ("float32", "pcm16", "pcm24")


@dataclass
class PcmInfo:
    """What the container header declared."""

    sample_rate: float
    channels: int
    bits: int
    is_float: bool
    frames: int
    data_offset: int
    ambisonic_guid: bool = False


def _decode(raw: bytes, channels: int, bits: int, is_float: bool, big_endian: bool) -> np.ndarray:
    end = ">" if big_endian else "<"
    if is_float:
        if bits not in (32, 64):
            raise UnsupportedFormatError(f"unsupported float sample width {bits}")
        data = np.frombuffer(raw, dtype=f"{end}f{bits // 8}").astype(np.float64)
    elif bits == 8:
        data = (np.frombuffer(raw, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    elif bits in (16, 32):
        data = np.frombuffer(raw, dtype=f"{end}i{bits // 8}").astype(np.float64) / 2.0 ** (bits - 1)
    elif bits == 24:
        b = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        if big_endian:
            b = b[:, ::-1]
        v = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        v = np.where(v >= 1 << 23, v - (1 << 24), v)
        data = v.astype(np.float64) / 2.0 ** 23
    else:
        raise UnsupportedFormatError(f"unsupported PCM sample width {bits}")
    return data.reshape(-1, channels).T.copy()


def _encode(samples: np.ndarray, sample_format: str, big_endian: bool) -> bytes:
    end = ">" if big_endian else "<"
    inter = np.ascontiguousarray(np.asarray(samples, dtype=np.float64).T)
    if sample_format == "float32":
        return inter.astype(f"{end}f4").tobytes()
    if sample_format == "pcm16":
        q = np.clip(np.round(inter * 32768.0), -32768, 32767).astype(f"{end}i2")
        return q.tobytes()
    if sample_format == "pcm24":
        q = np.clip(np.round(inter * 2.0 ** 23), -(2 ** 23), 2 ** 23 - 1).astype(np.int32).ravel()
        b = np.stack([q & 0xFF, (q >> 8) & 0xFF, (q >> 16) & 0xFF], axis=1).astype(np.uint8)
        if big_endian:
            b = b[:, ::-1]
        return b.tobytes()
    raise InvalidArgumentError(f"unknown sample format {sample_format!r}; choose from {SAMPLE_FORMATS}")


def _format_bits(sample_format: str) -> tuple[int, bool]:
    return {"float32": (32, True), "pcm16": (16, False), "pcm24": (24, False)}[sample_format]


# --- WAV -------------------------------------------------------------------

def parse_wav(blob: bytes) -> tuple[np.ndarray, PcmInfo]:
    if len(blob) < 12:
        raise ParseError("file too short for a RIFF header", 0)
    if blob[0:4] != b"RIFF":
        raise ParseError(f"expected 'RIFF' magic, found {blob[0:4]!r}", 0)
    if blob[8:12] != b"WAVE":
        raise ParseError(f"expected 'WAVE' form type, found {blob[8:12]!r}", 8)
    pos = 12
    fmt = None
    data_span = None
    while pos + 8 <= len(blob):
        cid = blob[pos:pos + 4]
        (size,) = struct.unpack_from("<I", blob, pos + 4)
        body = pos + 8
        if cid == b"fmt ":
            if size < 16 or body + size > len(blob):
                raise ParseError(f"truncated 'fmt ' chunk of declared size {size}", pos)
            fmt = _parse_fmt(blob, body, size)
            fmt_body = body
        elif cid == b"data":
            if body + size > len(blob):
                raise ParseError(
                    f"'data' chunk declares {size} bytes but only {len(blob) - body} remain", pos)
            data_span = (body, size)
        pos = body + size + (size & 1)
    if fmt is None:
        raise ParseError("missing 'fmt ' chunk", pos)
    if data_span is None:
        raise ParseError("missing 'data' chunk", pos)
    channels, rate, block_align, bits, is_float, amb = fmt
    body, size = data_span
    width = bits // 8
    if block_align != channels * width:
        raise ParseError(f"block align {block_align} != channels*bytes ({channels}*{width})", fmt_body + 12)
    if size % block_align:
        raise ParseError(f"data size {size} is not a multiple of the frame size {block_align}", body - 8)
    samples = _decode(blob[body:body + size], channels, bits, is_float, big_endian=False)
    info = PcmInfo(float(rate), channels, bits, is_float, size // block_align, body, amb)
    return samples, info


def _parse_fmt(blob: bytes, body: int, size: int):
    code, channels, rate, _byte_rate, block_align, bits = struct.unpack_from("<HHIIHH", blob, body)
    amb = False
    if code == WAVE_FORMAT_EXTENSIBLE:
        if size < 40:
            raise ParseError("WAVE_FORMAT_EXTENSIBLE 'fmt ' chunk shorter than 40 bytes", body)
        guid = blob[body + 24:body + 40]
        (code,) = struct.unpack_from("<H", guid, 0)
        tail = guid[2:]
        if tail == _AMBISONIC_TAIL:
            amb = True
        elif tail != _KSDATAFORMAT_TAIL:
            raise UnsupportedFormatError(f"unsupported extensible sub-format GUID {guid.hex()}")
    if code == WAVE_FORMAT_PCM:
        is_float = False
    elif code == WAVE_FORMAT_IEEE_FLOAT:
        is_float = True
    else:
        raise UnsupportedFormatError(f"unsupported WAV format code 0x{code:04X}")
    if channels == 0:
        raise ParseError("'fmt ' declares zero channels", body + 2)
    if bits % 8:
        raise UnsupportedFormatError(f"unsupported sample width {bits} bits")
    return channels, rate, block_align, bits, is_float, amb


def build_wav(samples: np.ndarray, sample_rate: float, sample_format: str = "float32",
              ambisonic: bool = False) -> bytes:
    samples = np.atleast_2d(samples)
    channels = samples.shape[0]
    bits, is_float = _format_bits(sample_format)
    width = bits // 8
    block_align = channels * width
    rate = int(round(sample_rate))
    if rate != sample_rate:
        raise InvalidArgumentError(f"WAV needs an integer sample rate, got {sample_rate}")
    code = WAVE_FORMAT_IEEE_FLOAT if is_float else WAVE_FORMAT_PCM
    head = struct.pack("<HHIIHH", 0, channels, rate, rate * block_align, block_align, bits)
    if channels > 2 or ambisonic:
        tail = _AMBISONIC_TAIL if ambisonic else _KSDATAFORMAT_TAIL
        guid = struct.pack("<H", code) + tail
        fmt = (struct.pack("<H", WAVE_FORMAT_EXTENSIBLE) + head[2:]
               + struct.pack("<HHI", 22, bits, 0) + guid)
    else:
        fmt = struct.pack("<H", code) + head[2:]
        if is_float:
            fmt += struct.pack("<H", 0)
    payload = _encode(samples, sample_format, big_endian=False)
    chunks = b"fmt " + struct.pack("<I", len(fmt)) + fmt
    if is_float:
        chunks += b"fact" + struct.pack("<II", 4, samples.shape[1])
    chunks += b"data" + struct.pack("<I", len(payload)) + payload
    if len(payload) & 1:
        chunks += b"\x00"
    return b"RIFF" + struct.pack("<I", 4 + len(chunks)) + b"WAVE" + chunks


# --- CAF -------------------------------------------------------------------

_CAF_FLOAT = 1
_CAF_LITTLE_ENDIAN = 2


def parse_caf(blob: bytes) -> tuple[np.ndarray, PcmInfo]:
    if len(blob) < 8:
        raise ParseError("file too short for a CAF header", 0)
    if blob[0:4] != b"caff":
        raise ParseError(f"expected 'caff' magic, found {blob[0:4]!r}", 0)
    version, _flags = struct.unpack_from(">HH", blob, 4)
    if version != 1:
        raise UnsupportedFormatError(f"unsupported CAF version {version}")
    pos = 8
    desc = None
    data_span = None
    while pos + 12 <= len(blob):
        cid = blob[pos:pos + 4]
        (size,) = struct.unpack_from(">q", blob, pos + 4)
        body = pos + 12
        if size == -1:
            if cid != b"data":
                raise ParseError(f"chunk {cid!r} has unknown size", pos + 4)
            size = len(blob) - body
        if size < 0 or body + size > len(blob):
            raise ParseError(f"chunk {cid!r} declares {size} bytes, {len(blob) - body} remain", pos)
        if cid == b"desc":
            if size < 32:
                raise ParseError("'desc' chunk shorter than 32 bytes", pos)
            desc = struct.unpack_from(">d4sIIIII", blob, body)
        elif cid == b"data":
            if size < 4:
                raise ParseError("'data' chunk lacks the edit count", pos)
            data_span = (body + 4, size - 4)
        pos = body + size
    if desc is None:
        raise ParseError("missing 'desc' chunk", 8)
    if data_span is None:
        raise ParseError("missing 'data' chunk", pos)
    rate, format_id, flags, bytes_per_packet, frames_per_packet, channels, bits = desc
    if format_id != b"lpcm":
        raise UnsupportedFormatError(f"unsupported CAF format {format_id!r}; only 'lpcm' is read")
    if channels == 0 or bits % 8:
        raise ParseError(f"invalid 'desc' ({channels} channels, {bits} bits)", 20)
    frame_bytes = channels * bits // 8
    if bytes_per_packet != frame_bytes or frames_per_packet != 1:
        raise UnsupportedFormatError("packed or multi-frame CAF packets are not supported")
    body, size = data_span
    if size % frame_bytes:
        raise ParseError(f"data size {size} is not a multiple of the frame size {frame_bytes}", body - 16)
    is_float = bool(flags & _CAF_FLOAT)
    samples = _decode(blob[body:body + size], channels, bits, is_float,
                      big_endian=not (flags & _CAF_LITTLE_ENDIAN))
    return samples, PcmInfo(rate, channels, bits, is_float, size // frame_bytes, body)


def build_caf(samples: np.ndarray, sample_rate: float, sample_format: str = "float32") -> bytes:
    samples = np.atleast_2d(samples)
    channels = samples.shape[0]
    bits, is_float = _format_bits(sample_format)
    frame_bytes = channels * bits // 8
    flags = _CAF_FLOAT if is_float else 0
    desc = struct.pack(">d4sIIIII", float(sample_rate), b"lpcm", flags, frame_bytes, 1, channels, bits)
    payload = _encode(samples, sample_format, big_endian=True)
    out = b"caff" + struct.pack(">HH", 1, 0)
    out += b"desc" + struct.pack(">q", len(desc)) + desc
    out += b"data" + struct.pack(">qI", len(payload) + 4, 0) + payload
    return out


# --- file helpers ------------------------------------------------------------

def read_pcm(path) -> tuple[np.ndarray, PcmInfo]:
    """Read any supported container by sniffing its magic bytes."""
    blob = Path(path).read_bytes()
    if blob[:4] == b"caff":
        return parse_caf(blob)
    if blob[:4] == b"RIFF":
        return parse_wav(blob)
    raise ParseError(f"unrecognized container magic {blob[:4]!r}", 0)


def write_pcm(path, samples: np.ndarray, sample_rate: float, sample_format: str = "float32",
              container: str | None = None, ambisonic: bool = False):
    path = Path(path)
    container = (container or path.suffix.lstrip(".")).lower()
    if container == "caf":
        blob = build_caf(samples, sample_rate, sample_format)
    elif container in ("wav", "amb"):
        blob = build_wav(samples, sample_rate, sample_format, ambisonic=ambisonic)
    else:
        raise UnsupportedFormatError(f"unknown container {container!r}")
    path.write_bytes(blob)
