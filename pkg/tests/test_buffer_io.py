import json
import math
import struct

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ambikit.audio_io import (
    Container,
    FormatMeta,
    read_audio,
    read_mono,
    sidecar_path,
    write_audio,
)
from ambikit.buffer import (
    CANONICAL,
    FUMA,
    AmbisonicBuffer,
    ChannelOrdering,
    Convention,
    HorizontalBuffer,
    convert_convention,
)
from ambikit.encode import encode_source
from ambikit.errors import (
    InvalidArgumentError,
    MalformedSignalError,
    ParseError,
    UnsupportedConventionError,
    UnsupportedFormatError,
)
from ambikit.formats import build_caf, build_wav, parse_caf, parse_wav, read_pcm, write_pcm
from ambikit.sh import Direction, Normalization
from ambikit.transform import horizontal_subset

N3D = Convention(ChannelOrdering.ACN, Normalization.N3D)


def f32(x):
    return np.asarray(x, dtype=np.float32).astype(np.float64)


@pytest.fixture
def order1(rng):
    return AmbisonicBuffer(f32(rng.uniform(-0.9, 0.9, (4, 300))), 48000.0)


class TestBuffer:
    def test_infers_order(self, order1):
        assert order1.order == 1 and order1.channels == 4 and order1.frames == 300

    def test_rejects_non_square(self):
        with pytest.raises(MalformedSignalError, match=r"channel count 5 is not \(N\+1\)\^2"):
            AmbisonicBuffer(np.zeros((5, 10)), 48000)

    def test_rejects_bad_rate(self):
        with pytest.raises(InvalidArgumentError):
            AmbisonicBuffer(np.zeros((4, 10)), 0)

    def test_fuma_limited_to_order_three(self):
        with pytest.raises(UnsupportedConventionError):
            AmbisonicBuffer(np.zeros((25, 4)), 48000, convention=FUMA)

    def test_fuma_ordering_needs_fuma_normalization(self):
        with pytest.raises(UnsupportedConventionError):
            Convention(ChannelOrdering.FUMA, Normalization.SN3D)

    @pytest.mark.parametrize("text, expect", [("acn/sn3d", CANONICAL), ("ambix", CANONICAL),
                                              ("acn-n3d", N3D), ("fuma", FUMA)])
    def test_parse_convention(self, text, expect):
        assert Convention.parse(text) == expect

    def test_convention_str(self):
        assert str(CANONICAL) == "acn/sn3d"

    def test_horizontal_buffer_channels(self):
        assert HorizontalBuffer(np.zeros((7, 3)), 48000).order == 3
        with pytest.raises(MalformedSignalError):
            HorizontalBuffer(np.zeros((4, 3)), 48000)


class TestConvention:
    def test_fuma_permutation(self):
        # ACN carries W, Y, Z, X
        buf = AmbisonicBuffer(np.array([[1.0], [2.0], [3.0], [4.0]]), 48000)
        fuma = convert_convention(buf, FUMA)
        np.testing.assert_allclose(fuma.samples[:, 0], [1 / math.sqrt(2), 4, 2, 3], atol=1e-15)

    def test_fuma_w_amplitude(self):
        buf = AmbisonicBuffer(np.eye(4)[:, :1], 48000)
        assert convert_convention(buf, FUMA).samples[0, 0] == pytest.approx(0.7071068, abs=1e-7)

    @pytest.mark.parametrize("order", [0, 1, 2, 3])
    @pytest.mark.parametrize("target", [FUMA, N3D])
    def test_roundtrip(self, rng, order, target):
        buf = AmbisonicBuffer(rng.normal(size=((order + 1) ** 2, 50)), 48000)
        back = convert_convention(convert_convention(buf, target), CANONICAL)
        assert np.abs(back.samples - buf.samples).max() <= 1e-12

    def test_fuma_encodes_maxn_field(self):
        # third-order FuMa channels of an encoded source never exceed 1 (W is 1/sqrt2)
        d = Direction(0.4, 0.3)
        fuma = convert_convention(encode_source(np.ones(1), d, 3), FUMA)
        assert np.abs(fuma.samples[1:]).max() <= 1 + 1e-12

    @given(st.floats(-4, 4), st.integers(0, 3))
    def test_conversion_commutes_with_gain(self, g, order):
        rng = np.random.default_rng(order)
        buf = AmbisonicBuffer(rng.normal(size=((order + 1) ** 2, 8)), 48000)
        a = convert_convention(buf.with_samples(buf.samples * g), FUMA).samples
        b = convert_convention(buf, FUMA).samples * g
        np.testing.assert_allclose(a, b, atol=1e-12)


class TestContainers:
    @pytest.mark.parametrize("build, parse", [(build_wav, parse_wav), (build_caf, parse_caf)])
    def test_float32_bit_exact(self, rng, build, parse):
        x = f32(rng.uniform(-1, 1, (9, 257)))
        back, info = parse(build(x, 44100.0))
        assert np.array_equal(back, x)
        assert info.sample_rate == 44100 and info.channels == 9

    @pytest.mark.parametrize("fmt, step", [("pcm16", 2.0 ** -15), ("pcm24", 2.0 ** -23)])
    @pytest.mark.parametrize("build, parse", [(build_wav, parse_wav), (build_caf, parse_caf)])
    def test_integer_pcm(self, rng, fmt, step, build, parse):
        x = rng.uniform(-0.99, 0.99, (4, 100))
        back, info = parse(build(x, 48000.0, fmt))
        assert np.abs(back - x).max() <= step
        assert not info.is_float

    def test_caf_magic(self, tmp_path, order1):
        path = tmp_path / "scene.caf"
        write_audio(order1, path)
        assert path.read_bytes()[:4] == b"caff"

    def test_caf_unknown_data_size(self, order1):
        blob = bytearray(build_caf(order1.samples, 48000.0))
        pos = blob.index(b"data")
        blob[pos + 4:pos + 12] = struct.pack(">q", -1)
        back, _ = parse_caf(bytes(blob))
        assert np.array_equal(back, order1.samples)

    def test_extensible_for_multichannel(self):
        blob = build_wav(np.zeros((16, 4)), 48000.0)
        (code,) = struct.unpack_from("<H", blob, 20)
        assert code == 0xFFFE

    def test_bad_magic_offset(self):
        with pytest.raises(ParseError, match="offset 0"):
            parse_wav(b"RIFX" + b"\0" * 40)
        with pytest.raises(ParseError) as err:
            parse_wav(b"RIFF\0\0\0\0WAVX")
        assert err.value.offset == 8

    def test_truncated_data_chunk(self, order1):
        blob = build_wav(order1.samples, 48000.0)
        pos = blob.index(b"data")
        with pytest.raises(ParseError) as err:
            parse_wav(blob[:-10])
        assert err.value.offset == pos

    def test_bad_block_align(self, order1):
        blob = bytearray(build_wav(order1.samples[:2], 48000.0))
        fmt = blob.index(b"fmt ")
        struct.pack_into("<H", blob, fmt + 8 + 12, 3)
        with pytest.raises(ParseError) as err:
            parse_wav(bytes(blob))
        assert err.value.offset == fmt + 8 + 12

    def test_unknown_container(self, tmp_path):
        p = tmp_path / "x.wav"
        p.write_bytes(b"OggS" + b"\0" * 20)
        with pytest.raises(ParseError):
            read_pcm(p)

    def test_unsupported_format_code(self, order1):
        blob = bytearray(build_wav(order1.samples[:2], 48000.0))
        fmt = blob.index(b"fmt ")
        struct.pack_into("<H", blob, fmt + 8, 0x55)
        with pytest.raises(UnsupportedFormatError):
            parse_wav(bytes(blob))

    @given(st.binary(max_size=200))
    def test_garbage_never_crashes(self, blob):
        for parse in (parse_wav, parse_caf):
            try:
                parse(blob)
            except (ParseError, UnsupportedFormatError):
                pass


class TestAudioFiles:
    def test_wav_roundtrip_with_sidecar(self, tmp_path, order1):
        path = tmp_path / "a.wav"
        write_audio(order1, path)
        meta = json.loads(sidecar_path(path).read_text())
        assert meta == {"order": 1, "ordering": "acn", "normalization": "sn3d"}
        back = read_audio(path)
        assert np.array_equal(back.samples, order1.samples)
        assert back.convention == CANONICAL

    def test_caf_roundtrip(self, tmp_path, order1):
        write_audio(order1, tmp_path / "a.caf")
        assert np.array_equal(read_audio(tmp_path / "a.caf").samples, order1.samples)

    def test_order7_wav(self, tmp_path, rng):
        buf = AmbisonicBuffer(f32(rng.normal(size=(64, 20)) * 0.1), 48000)
        write_audio(buf, tmp_path / "o7.wav")
        _, info = read_pcm(tmp_path / "o7.wav")
        assert info.channels == 64

    def test_amb_is_fuma(self, tmp_path, order1):
        path = tmp_path / "a.amb"
        write_audio(order1, path)
        raw, info = read_pcm(path)
        assert info.ambisonic_guid
        np.testing.assert_allclose(raw[0], f32(order1.samples[0] / math.sqrt(2)), atol=1e-7)
        back = read_audio(path)
        assert back.convention == FUMA
        np.testing.assert_allclose(convert_convention(back, CANONICAL).samples, order1.samples, atol=1e-7)

    def test_amb_refuses_order_four(self, tmp_path):
        with pytest.raises(UnsupportedFormatError):
            write_audio(AmbisonicBuffer(np.zeros((25, 4)), 48000), tmp_path / "a.amb")

    def test_plain_wav_without_metadata(self, tmp_path):
        write_pcm(tmp_path / "bare.wav", np.zeros((4, 5)), 48000)
        with pytest.raises(InvalidArgumentError):
            read_audio(tmp_path / "bare.wav")
        buf = read_audio(tmp_path / "bare.wav", FormatMeta(Container.WAV, CANONICAL))
        assert buf.order == 1

    def test_five_channels_with_hint(self, tmp_path):
        write_pcm(tmp_path / "five.wav", np.zeros((5, 5)), 48000)
        with pytest.raises(MalformedSignalError, match="channel count 5"):
            read_audio(tmp_path / "five.wav", FormatMeta(Container.WAV, CANONICAL))

    def test_sidecar_order_mismatch(self, tmp_path, order1):
        path = tmp_path / "a.wav"
        write_audio(order1, path)
        sidecar_path(path).write_text(json.dumps({"order": 2, "ordering": "acn", "normalization": "sn3d"}))
        with pytest.raises(MalformedSignalError):
            read_audio(path)

    def test_bad_sidecar_json(self, tmp_path, order1):
        path = tmp_path / "a.wav"
        write_audio(order1, path)
        sidecar_path(path).write_text("{nope")
        with pytest.raises(ParseError):
            read_audio(path)

    def test_n3d_target(self, tmp_path, order1):
        path = tmp_path / "n.wav"
        write_audio(order1, path, FormatMeta(Container.WAV, N3D))
        back = read_audio(path)
        assert back.convention == N3D
        np.testing.assert_allclose(convert_convention(back, CANONICAL).samples, order1.samples, atol=1e-6)

    def test_horizontal_roundtrip(self, tmp_path, rng):
        buf = AmbisonicBuffer(f32(rng.normal(size=(16, 10)) * 0.1), 48000)
        h = horizontal_subset(buf)
        write_audio(h, tmp_path / "h.wav")
        back = read_audio(tmp_path / "h.wav")
        assert isinstance(back, HorizontalBuffer)
        assert np.array_equal(back.samples, h.samples)

    def test_unknown_extension(self, tmp_path, order1):
        with pytest.raises(UnsupportedFormatError):
            write_audio(order1, tmp_path / "a.flac")

    def test_read_mono(self, tmp_path):
        write_pcm(tmp_path / "m.wav", np.full((1, 8), 0.25), 22050)
        x, fs = read_mono(tmp_path / "m.wav")
        assert fs == 22050 and np.all(x == 0.25)
        write_pcm(tmp_path / "s.wav", np.zeros((2, 8)), 22050)
        with pytest.raises(InvalidArgumentError):
            read_mono(tmp_path / "s.wav")
