"""Command-line front end: encode -> edit -> decode on audio files.

Exit codes: 0 success, 2 usage, 3 parse/format, 4 numerical/validation.
Angles are given in degrees.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .audio_io import Container, FormatMeta, read_audio, write_audio
from .binaural import BinauralConfig, binaural_render, load_hrir_set
from .buffer import CANONICAL, FUMA, AmbisonicBuffer, Convention, HorizontalBuffer, to_canonical
from .decode import (
    analyze_decoder,
    apply_decoder,
    build_decoder,
    load_layout,
    position_grid,
    sweet_area_radius,
)
from .encode import TetraGeometry, load_scene, mix, render_scene, tetra_a_to_b
from .errors import (
    AmbiError,
    MalformedSignalError,
    ParseError,
    UnsupportedFormatError,
)
from .formats import read_pcm, write_pcm
from .rotation import RotationSpec
from .sh import Direction, quadrature_grid
from .transform import (
    CompressorParams,
    MirrorPlane,
    SpatialWindow,
    compress,
    default_grid,
    directional_gain,
    directional_warp,
    elevation_squash,
    extract_segment,
    horizontal_subset,
    mirror,
    rotate,
)

EXIT_USAGE = 2
EXIT_FORMAT = 3
EXIT_VALIDATION = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# --- helpers -----------------------------------------------------------------------

def _existing(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"input file not found: {path}")
    return p


def _read(path: str, args) -> AmbisonicBuffer | HorizontalBuffer:
    p = _existing(path)
    hint = None
    if getattr(args, "convention", None):
        hint = FormatMeta(Container.from_path(p), Convention.parse(args.convention))
    buf = read_audio(p, hint)
    if isinstance(buf, HorizontalBuffer):
        return buf
    return to_canonical(buf)


def _read_full(path: str, args) -> AmbisonicBuffer:
    buf = _read(path, args)
    if isinstance(buf, HorizontalBuffer):
        raise MalformedSignalError(f"{path} is horizontal-only; this command needs a full-sphere signal")
    return buf


def _write(buf, path: str, convention: str | None = None):
    container = Container.from_path(path)
    if convention:
        conv = Convention.parse(convention)
    else:
        conv = FUMA if container is Container.AMB else CANONICAL
    write_audio(buf, path, FormatMeta(container, conv))


def _direction(args) -> Direction:
    return Direction.from_degrees(args.azimuth, args.elevation)


# --- subcommands ------------------------------------------------------------------

def cmd_info(args):
    buf = read_audio(_existing(args.input), FormatMeta(Container.from_path(args.input),
                                                       Convention.parse(args.convention))
                     if args.convention else None)
    horizontal = isinstance(buf, HorizontalBuffer)
    conv = str(CANONICAL) if horizontal else str(buf.convention)
    info = {"order": buf.order, "channels": buf.channels, "convention": conv,
            "horizontal": horizontal, "sample_rate": buf.sample_rate, "frames": buf.frames}
    if args.json:
        print(json.dumps(info))
        return
    suffix = " (horizontal only)" if horizontal else ""
    print(f"order: {buf.order}, channels: {buf.channels}, convention: {conv}{suffix}")
    print(f"sample_rate: {buf.sample_rate:g}, frames: {buf.frames}, "
          f"duration: {buf.frames / buf.sample_rate:.3f} s")


def cmd_encode(args):
    scene = load_scene(_existing(args.scene))
    if args.order is not None:
        scene.order = args.order
    _write(render_scene(scene), args.out)


def cmd_encode_mic(args):
    samples, info = read_pcm(_existing(args.input))
    if info.channels != 4:
        raise MalformedSignalError(f"A-format input needs 4 channels, got {info.channels}")
    _write(tetra_a_to_b(samples, TetraGeometry(args.alpha), info.sample_rate), args.out)


def cmd_mix(args):
    _write(mix(_read_full(args.a, args), _read_full(args.b, args)), args.out)


def cmd_rotate(args):
    rot = RotationSpec.from_degrees(args.yaw, args.pitch, args.roll)
    _write(rotate(_read_full(args.input, args), rot), args.out)


def cmd_mirror(args):
    _write(mirror(_read_full(args.input, args), MirrorPlane(args.plane)), args.out)


def cmd_dirgain(args):
    buf = _read_full(args.input, args)
    window = SpatialWindow(_direction(args), math.radians(args.inner), math.radians(args.outer))
    grid = default_grid(buf.order)
    w = 1.0 + (10 ** (args.gain_db / 20.0) - 1.0) * window.gain(grid.azimuth, grid.elevation)
    _write(directional_gain(buf, w, grid), args.out)


def cmd_warp(args):
    _write(directional_warp(_read_full(args.input, args), elevation_squash(args.alpha)), args.out)


def cmd_compress(args):
    params = CompressorParams(args.threshold, args.ratio, args.attack, args.release,
                              args.makeup, args.detector)
    _write(compress(_read_full(args.input, args), params), args.out)


def cmd_segment(args):
    buf = _read_full(args.input, args)
    window = SpatialWindow(_direction(args), math.radians(args.inner), math.radians(args.outer))
    segment, residual = extract_segment(buf, window)
    _write(segment, args.out_segment)
    _write(residual, args.out_residual)


def cmd_subset_horizontal(args):
    if Container.from_path(args.out) is not Container.WAV:
        raise UnsupportedFormatError("horizontal-only output must be a .wav file (metadata goes to the sidecar)")
    write_audio(horizontal_subset(_read_full(args.input, args)), args.out)


def cmd_decode(args):
    buf = _read(args.input, args)
    layout = load_layout(_existing(args.layout))
    order = args.order if args.order is not None else buf.order
    dec = build_decoder(layout, order, args.method, args.weights)
    feeds = apply_decoder(buf, dec)
    out = args.out or str(Path(args.input).with_suffix("")) + ".feeds.wav"
    write_pcm(out, feeds, buf.sample_rate, "float32", "wav")


def cmd_analyze(args):
    layout = load_layout(_existing(args.layout))
    dec = build_decoder(layout, args.order, args.method, args.weights)
    count = args.sources
    if layout.geometry.value == "2d":
        sources = [Direction(2 * math.pi * k / count) for k in range(count)]
    else:
        sources = quadrature_grid(max(2, int(math.sqrt(count)))).directions
    report = analyze_decoder(dec, layout, sources, position_grid(layout, args.grid))
    radius = sweet_area_radius(report, args.threshold)
    if args.json:
        doc = report.to_json()
        doc["sweet_area_radius"] = radius
        doc["threshold_deg"] = args.threshold
        print(json.dumps(doc))
        return
    r = np.linalg.norm(report.positions, axis=1) / report.array_radius
    err = report.mean_error_deg
    print(f"decoder: {dec.method.value}, order {dec.order}, weights {args.weights or 'none'}, "
          f"{len(layout)} speakers")
    print(f"sweet area radius ({args.threshold:g} deg): {radius:.3f} of array radius")
    print(f"{'radius':>8} {'mean_err':>9} {'max_err':>9} {'positions':>9}")
    edges = np.linspace(0.0, 1.0, 11)
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (r >= lo) & (r < hi)
        if sel.any():
            print(f"{lo:4.1f}-{hi:3.1f} {err[sel].mean():9.2f} {err[sel].max():9.2f} {sel.sum():9d}")


def cmd_binaural(args):
    buf = _read_full(args.input, args)
    hrirs = load_hrir_set(_existing(args.hrirs))
    head = RotationSpec.from_degrees(args.yaw, args.pitch, args.roll)
    config = BinauralConfig(args.method, args.weights, head, args.order)
    write_pcm(args.out, binaural_render(buf, hrirs, config), buf.sample_rate, "float32", "wav")


def cmd_convert(args):
    p = _existing(args.input)
    hint = FormatMeta(Container.from_path(p), Convention.parse(args.convention)) if args.convention else None
    buf = read_audio(p, hint)
    if isinstance(buf, HorizontalBuffer):
        raise MalformedSignalError("horizontal-only signals cannot be converted")
    _write(buf, args.out, args.to)


# --- parser --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ambikit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"ambikit {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    def add(name, func, help_text, inputs=("input",)):
        p = sub.add_parser(name, help=help_text, description=help_text)
        for inp in inputs:
            p.add_argument(inp)
        if inputs:
            p.add_argument("--convention", help="input channel convention, e.g. acn/sn3d, acn/n3d, fuma "
                                                "(default: sidecar, then file extension)")
        p.set_defaults(func=func)
        return p

    p = add("info", cmd_info, "print order, channel count and convention")
    p.add_argument("--json", action="store_true")

    p = add("encode", cmd_encode, "render a JSON scene description", inputs=())
    p.add_argument("scene")
    p.add_argument("--order", type=int, help="override the scene order")
    p.add_argument("--out", required=True)

    p = add("encode-mic", cmd_encode_mic, "convert tetrahedral A-format (FLU, FRD, BLD, BRU) to first order")
    p.add_argument("--alpha", type=float, default=0.5, help="capsule pattern, 0.5 = cardioid")
    p.add_argument("--out", required=True)

    p = add("mix", cmd_mix, "add two ambisonic signals", inputs=("a", "b"))
    p.add_argument("--out", required=True)

    p = add("rotate", cmd_rotate, "rotate the scene (intrinsic yaw, pitch, roll in degrees)")
    p.add_argument("--yaw", type=float, default=0.0)
    p.add_argument("--pitch", type=float, default=0.0)
    p.add_argument("--roll", type=float, default=0.0)
    p.add_argument("--out", required=True)

    p = add("mirror", cmd_mirror, "mirror the scene about a coordinate plane")
    p.add_argument("--plane", required=True, choices=[m.value for m in MirrorPlane])
    p.add_argument("--out", required=True)

    def window_flags(p):
        p.add_argument("--azimuth", type=float, default=0.0, help="window center azimuth (deg)")
        p.add_argument("--elevation", type=float, default=0.0, help="window center elevation (deg)")
        p.add_argument("--inner", type=float, default=30.0, help="full-gain radius (deg)")
        p.add_argument("--outer", type=float, default=60.0, help="zero-gain radius (deg)")

    p = add("dirgain", cmd_dirgain, "amplify or attenuate a direction")
    window_flags(p)
    p.add_argument("--gain-db", type=float, required=True)
    p.add_argument("--out", required=True)

    p = add("warp", cmd_warp, "squash the scene toward the zenith (alpha > 0) or nadir (alpha < 0)")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--out", required=True)

    p = add("compress", cmd_compress, "dynamic compression keyed by the omni channel")
    p.add_argument("--threshold", type=float, default=-20.0, help="dBFS")
    p.add_argument("--ratio", type=float, default=4.0)
    p.add_argument("--attack", type=float, default=5.0, help="ms")
    p.add_argument("--release", type=float, default=100.0, help="ms")
    p.add_argument("--makeup", type=float, default=0.0, help="dB")
    p.add_argument("--detector", choices=("peak", "rms"), default="peak")
    p.add_argument("--out", required=True)

    p = add("segment", cmd_segment, "split the scene into an angular segment and the residual")
    window_flags(p)
    p.add_argument("--out-segment", required=True)
    p.add_argument("--out-residual", required=True)

    p = add("subset-horizontal", cmd_subset_horizontal, "keep the 2N+1 horizontal channels")
    p.add_argument("--out", required=True)

    def decoder_flags(p):
        p.add_argument("--layout", required=True, help="JSON speaker layout")
        p.add_argument("--method", default="projection",
                       choices=("projection", "modematch", "mode-matching", "allrad"))
        p.add_argument("--weights", choices=("none", "max-re"), default=None)

    p = add("decode", cmd_decode, "decode to loudspeaker feeds")
    decoder_flags(p)
    p.add_argument("--order", type=int, help="decoder order (default: signal order)")
    p.add_argument("--out", help="feeds WAV (default: <input>.feeds.wav)")

    p = add("analyze", cmd_analyze, "energy-vector analysis and sweet-area radius", inputs=())
    decoder_flags(p)
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--grid", type=int, default=40, help="listening positions per axis")
    p.add_argument("--sources", type=int, default=72, help="number of source directions")
    p.add_argument("--threshold", type=float, default=30.0, help="degrees")
    p.add_argument("--json", action="store_true")

    p = add("binaural", cmd_binaural, "render to headphones with an HRIR set")
    p.add_argument("--hrirs", required=True, help="HRIR manifest JSON")
    p.add_argument("--method", default="projection", choices=("projection", "mode-matching"))
    p.add_argument("--weights", choices=("none", "max-re"), default=None)
    p.add_argument("--order", type=int)
    p.add_argument("--yaw", type=float, default=0.0, help="head yaw (deg)")
    p.add_argument("--pitch", type=float, default=0.0)
    p.add_argument("--roll", type=float, default=0.0)
    p.add_argument("--out", required=True)

    p = add("convert", cmd_convert, "change container and/or channel convention")
    p.add_argument("--to", help="output convention (default: implied by the output extension)")
    p.add_argument("--out", required=True)
    return parser


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("ambikit: a subcommand is required")
        if getattr(args, "method", None) == "modematch":
            args.method = "mode-matching"
        if getattr(args, "weights", None) == "none":
            args.weights = None
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            args.func(args)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    except SystemExit as exc:
        # --help / --version
        return exc.code if isinstance(exc.code, int) else 0
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, UnsupportedFormatError, MalformedSignalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except AmbiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    return 0


def main():
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
