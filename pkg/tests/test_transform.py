import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from ambikit.buffer import AmbisonicBuffer
from ambikit.decode import energy_vector
from ambikit.encode import encode_source
from ambikit.errors import InvalidArgumentError
from ambikit.rotation import RotationSpec, sh_rotation_matrix
from ambikit.sh import Direction, channel_count, sh_matrix
from ambikit.transform import (
    CompressorParams,
    MirrorPlane,
    SpatialWindow,
    compress,
    compressor_gain,
    default_grid,
    directional_gain,
    directional_warp,
    elevation_squash,
    extract_segment,
    horizontal_subset,
    mirror,
    rotate,
    uniform_process,
)

from conftest import random_directions

FS = 48000.0
angles = st.floats(-math.pi, math.pi, allow_nan=False)
MIRRORED = {
    MirrorPlane.LEFT_RIGHT: np.array([1, -1, 1]),
    MirrorPlane.FRONT_BACK: np.array([-1, 1, 1]),
    MirrorPlane.TOP_BOTTOM: np.array([1, 1, -1]),
}


def elevation_of(v):
    return math.degrees(math.asin(v[2] / np.linalg.norm(v)))


def random_buffer(rng, order, frames=32):
    return AmbisonicBuffer(rng.normal(size=(channel_count(order), frames)), FS)


class TestRotation:
    def test_identity_is_copy(self, rng):
        x = random_buffer(rng, 3)
        y = rotate(x, RotationSpec())
        assert np.array_equal(x.samples, y.samples) and y.samples is not x.samples

    def test_yaw_quarter_turn(self):
        s = np.array([1.0, -0.5])
        for order in range(8):
            got = rotate(encode_source(s, Direction(0, 0), order), RotationSpec(yaw=math.pi / 2))
            expect = encode_source(s, Direction(math.pi / 2, 0), order)
            assert np.abs(got.samples - expect.samples).max() <= 1e-10

    def test_matrix_is_proper(self):
        R = RotationSpec(0.3, -0.8, 2.0).matrix()
        assert np.linalg.det(R) == pytest.approx(1.0)
        np.testing.assert_allclose(R, Rotation.from_euler("ZYX", [0.3, -0.8, 2.0]).as_matrix())

    def test_pitch_sign(self):
        # positive pitch tilts the front direction downward under the ZYX right-hand convention
        v = RotationSpec(pitch=0.3).matrix() @ np.array([1.0, 0, 0])
        assert v[2] < 0

    @given(angles, angles, angles)
    def test_roundtrip(self, yaw, pitch, roll):
        x = random_buffer(np.random.default_rng(0), 5)
        rot = RotationSpec(yaw, pitch, roll)
        back = rotate(rotate(x, rot), rot.inverse())
        assert np.abs(back.samples - x.samples).max() <= 1e-10 * np.abs(x.samples).max()

    @given(angles, angles, angles, angles, angles, angles)
    def test_composition(self, a, b, c, d, e, f):
        r1, r2 = RotationSpec(a, b, c), RotationSpec(d, e, f)
        order = 4
        lhs = sh_rotation_matrix(r2.matrix() @ r1.matrix(), order)
        rhs = sh_rotation_matrix(r2.matrix(), order) @ sh_rotation_matrix(r1.matrix(), order)
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)

    @given(angles, angles, angles)
    def test_energy_per_order_preserved(self, yaw, pitch, roll):
        x = random_buffer(np.random.default_rng(1), 6)
        y = rotate(x, RotationSpec(yaw, pitch, roll))
        for n in range(7):
            sl = slice(n * n, (n + 1) ** 2)
            np.testing.assert_allclose((y.samples[sl] ** 2).sum(), (x.samples[sl] ** 2).sum(), rtol=1e-10)

    def test_from_matrix(self):
        spec = RotationSpec(0.4, 0.2, -1.0)
        np.testing.assert_allclose(RotationSpec.from_matrix(spec.matrix()).matrix(), spec.matrix(), atol=1e-12)


class TestMirror:
    @pytest.mark.parametrize("plane", list(MirrorPlane))
    def test_reencode_oracle(self, rng, plane):
        az, el = random_directions(rng, 50)
        s = np.array([1.0, 0.25])
        for a, e in zip(az, el):
            d = Direction(a, e)
            m = Direction.from_vector(d.unit_vector() * MIRRORED[plane])
            got = mirror(encode_source(s, d, 7), plane)
            assert np.abs(got.samples - encode_source(s, m, 7).samples).max() <= 1e-12

    @pytest.mark.parametrize("plane", list(MirrorPlane))
    def test_involution(self, rng, plane):
        x = random_buffer(rng, 4)
        assert np.array_equal(mirror(mirror(x, plane), plane).samples, x.samples)

    def test_left_right_example(self):
        s = np.ones(3)
        got = mirror(encode_source(s, Direction(math.pi / 4, 0), 3), MirrorPlane.LEFT_RIGHT)
        np.testing.assert_allclose(got.samples, encode_source(s, Direction(-math.pi / 4, 0), 3).samples,
                                   atol=1e-12)

    def test_top_bottom_fixes_horizon(self, rng):
        x = encode_source(rng.normal(size=8), Direction(0.9, 0), 5)
        np.testing.assert_allclose(mirror(x, MirrorPlane.TOP_BOTTOM).samples, x.samples, atol=1e-15)

    @given(angles)
    def test_commutes_with_normal_axis_rotation(self, theta):
        # each plane's normal: y for left-right (pitch), x for front-back (roll), z for top-bottom (yaw)
        x = random_buffer(np.random.default_rng(2), 5)
        for plane, rot in [(MirrorPlane.LEFT_RIGHT, RotationSpec(pitch=theta)),
                           (MirrorPlane.FRONT_BACK, RotationSpec(roll=theta)),
                           (MirrorPlane.TOP_BOTTOM, RotationSpec(yaw=theta))]:
            a = mirror(rotate(x, rot), plane).samples
            b = rotate(mirror(x, plane), rot).samples
            assert np.abs(a - b).max() <= 1e-10

    @given(angles)
    def test_in_plane_rotation_is_reversed(self, theta):
        # roll turns about x, which lies in the left-right plane: the mirror reverses it
        x = random_buffer(np.random.default_rng(3), 4)
        a = mirror(rotate(x, RotationSpec(roll=theta)), MirrorPlane.LEFT_RIGHT).samples
        b = rotate(mirror(x, MirrorPlane.LEFT_RIGHT), RotationSpec(roll=-theta)).samples
        assert np.abs(a - b).max() <= 1e-10


def dense_grid(steps=720):
    el = (np.arange(steps // 2) + 0.5) * math.pi / (steps // 2) - math.pi / 2
    az = (np.arange(steps) + 0.5) * 2 * math.pi / steps - math.pi
    A, E = np.meshgrid(az, el)
    w = np.cos(E) * (math.pi / (steps // 2)) * (2 * math.pi / steps)
    return A.ravel(), E.ravel(), w.ravel()


def brute_force_resample(coeffs, order, weight_fn, src_el_fn=None):
    """Riemann-sum version of synthesize-weight-reanalyze, independent of the library grids."""
    az, el, w = dense_grid()
    src_el = el if src_el_fn is None else src_el_fn(el)
    valid = np.isfinite(src_el)
    density = np.repeat(2 * np.arange(order + 1) + 1, 2 * np.arange(order + 1) + 1)
    f = np.zeros_like(el)
    f[valid] = sh_matrix(az[valid], src_el[valid], order) @ (coeffs * density)
    g = f * weight_fn(az, el)
    return sh_matrix(az, el, order).T @ (g * w) / (4 * math.pi)


class TestDirectionalGain:
    def test_unit_weight(self, rng):
        x = random_buffer(rng, 4)
        g = default_grid(4)
        assert np.abs(directional_gain(x, np.ones(len(g))).samples - x.samples).max() <= 1e-10

    def test_zero_weight(self, rng):
        x = random_buffer(rng, 4)
        assert not directional_gain(x, np.zeros(len(default_grid(4)))).samples.any()

    def test_matches_brute_force(self):
        window = SpatialWindow(Direction(0, 0), math.pi / 4, 3 * math.pi / 4)
        src = encode_source(np.ones(1), Direction(2.0, 0.3), 3)
        g = default_grid(3)
        got = directional_gain(src, window.gain(g.azimuth, g.elevation)).samples[:, 0]
        oracle = brute_force_resample(src.samples[:, 0], 3, window.gain)
        np.testing.assert_allclose(got, oracle, atol=2e-3)

    def test_front_hemisphere_window(self):
        # measured: front -0.34 dB, rear -28.1 dB for a 45..135 deg raised-cosine edge
        window = SpatialWindow(Direction(0, 0), math.pi / 4, 3 * math.pi / 4)
        g = default_grid(3)
        w = window.gain(g.azimuth, g.elevation)
        front = directional_gain(encode_source(np.ones(1), Direction(0, 0), 3), w).samples[0, 0]
        rear = directional_gain(encode_source(np.ones(1), Direction(math.pi, 0), 3), w).samples[0, 0]
        assert abs(20 * math.log10(abs(front))) <= 1.0
        assert 20 * math.log10(abs(rear)) <= -6.0

    def test_wrong_weight_count(self, rng):
        with pytest.raises(InvalidArgumentError):
            directional_gain(random_buffer(rng, 2), np.ones(7))

    def test_linear_in_signal(self, rng):
        x, y = random_buffer(rng, 3), random_buffer(rng, 3)
        w = rng.uniform(0, 1, len(default_grid(3)))
        lhs = directional_gain(x.with_samples(x.samples + 2 * y.samples), w).samples
        rhs = directional_gain(x, w).samples + 2 * directional_gain(y, w).samples
        np.testing.assert_allclose(lhs, rhs, atol=1e-10)


class TestWarp:
    def test_identity(self, rng):
        x = random_buffer(rng, 5)
        assert np.abs(directional_warp(x, lambda e: e).samples - x.samples).max() <= 1e-10

    def test_squash_zero_is_identity(self, rng):
        x = random_buffer(rng, 3)
        assert np.abs(directional_warp(x, elevation_squash(0.0)).samples - x.samples).max() <= 1e-10

    def test_non_monotone(self, rng):
        with pytest.raises(InvalidArgumentError):
            directional_warp(random_buffer(rng, 2), lambda e: np.cos(e))

    def test_halving_matches_brute_force(self):
        src = encode_source(np.ones(1), Direction(0.3, math.pi / 3), 5)
        got = directional_warp(src, lambda e: e / 2).samples[:, 0]
        inverse = lambda el: np.where(np.abs(el) <= math.pi / 4, 2 * el, np.nan)
        oracle = brute_force_resample(src.samples[:, 0], 5, lambda a, e: 1.0, inverse)
        np.testing.assert_allclose(got, oracle, atol=2e-3)
        assert abs(elevation_of(energy_vector(got)) - elevation_of(energy_vector(oracle))) < 0.5

    def test_halving_moves_source_down(self):
        src = encode_source(np.ones(1), Direction(0.3, math.pi / 3), 5)
        v = energy_vector(directional_warp(src, lambda e: e / 2))
        assert 25 < elevation_of(v) < 45
        assert math.degrees(math.atan2(v[1], v[0])) == pytest.approx(math.degrees(0.3), abs=1e-6)

    @pytest.mark.xfail(strict=True, reason="uncompensated warp biases rE upward: measured 34.8 deg")
    def test_halving_lands_at_thirty_degrees(self):
        src = encode_source(np.ones(1), Direction(0.3, math.pi / 3), 5)
        v = energy_vector(directional_warp(src, lambda e: e / 2))
        assert abs(elevation_of(v) - 30) <= 3

    @pytest.mark.parametrize("warp", [lambda e: e / 2, lambda e: e + 0.1 * np.sin(2 * e),
                                      lambda e: e ** 3 / 3 + e, elevation_squash(-0.0)])
    def test_horizontal_source_stays(self, warp):
        src = encode_source(np.ones(1), Direction(0.8, 0), 5)
        v = energy_vector(directional_warp(src, warp))
        assert abs(elevation_of(v)) < 1
        assert math.degrees(math.atan2(v[1], v[0])) == pytest.approx(math.degrees(0.8), abs=1)


class TestUniform:
    def test_unit_gain(self, rng):
        x = random_buffer(rng, 2)
        assert np.array_equal(uniform_process(x, 1.0).samples, x.samples)

    def test_commutes_with_encoding(self, rng):
        s = rng.normal(size=100)
        env = np.linspace(1, 0, 100)
        d = Direction(0.4, -0.2)
        a = uniform_process(encode_source(s, d, 3), env).samples
        b = encode_source(s * env, d, 3).samples
        assert np.abs(a - b).max() <= 1e-12
        taps = rng.normal(size=9)
        a = uniform_process(encode_source(s, d, 3), taps, "fir").samples
        b = encode_source(np.convolve(s, taps)[:100], d, 3).samples
        assert np.abs(a - b).max() <= 1e-12

    def test_commutes_with_rotation(self, rng):
        x = random_buffer(rng, 4, 200)
        taps = rng.normal(size=17)
        rot = RotationSpec(0.3, 1.1, -0.4)
        a = rotate(uniform_process(x, taps, "fir"), rot).samples
        b = uniform_process(rotate(x, rot), taps, "fir").samples
        assert np.abs(a - b).max() <= 1e-10

    def test_shape_preserved(self, rng):
        x = random_buffer(rng, 3, 50)
        for y in (uniform_process(x, rng.normal(size=5), "fir"), rotate(x, RotationSpec(1, 2, 3)),
                  mirror(x, MirrorPlane.FRONT_BACK), compress(x, CompressorParams())):
            assert (y.order, y.frames, y.sample_rate) == (3, 50, FS)

    def test_bad_kernel(self, rng):
        with pytest.raises(InvalidArgumentError):
            uniform_process(random_buffer(rng, 1), np.array([np.nan]))
        with pytest.raises(InvalidArgumentError):
            uniform_process(random_buffer(rng, 1, 10), np.ones(3))


class TestCompressor:
    @staticmethod
    def sine_scene(level_db, seconds=2.0):
        t = np.arange(int(seconds * FS)) / FS
        s = 10 ** (level_db / 20) * np.sin(2 * math.pi * 1000 * t)
        return encode_source(s, Direction(0.5, 0.2), 3, FS)

    def test_ratio_one_identity(self, rng):
        x = random_buffer(rng, 3, 500)
        y = compress(x, CompressorParams(ratio=1.0))
        assert np.array_equal(x.samples, y.samples)

    def test_static_curve_peak(self):
        out = compress(self.sine_scene(-8), CompressorParams(threshold_db=-20, ratio=4))
        tail = out.samples[0, -int(FS // 2):]
        assert 20 * math.log10(np.abs(tail).max()) == pytest.approx(-17.0, abs=0.1)

    def test_static_curve_rms(self):
        # an RMS detector sees the sine 3 dB lower
        out = compress(self.sine_scene(-8), CompressorParams(threshold_db=-20, ratio=4, detector="rms"))
        tail = out.samples[0, -int(FS // 2):]
        level = -8 - 10 * math.log10(2)
        expect = -8 + (-20 - level) * 0.75
        assert 20 * math.log10(np.abs(tail).max()) == pytest.approx(expect, abs=0.1)

    def test_below_threshold_untouched(self):
        x = self.sine_scene(-30, 0.2)
        g = compressor_gain(x.samples[0], FS, CompressorParams())
        np.testing.assert_allclose(g, 1.0)

    def test_channel_ratios_preserved(self, rng):
        x = self.sine_scene(-3, 0.3)
        x = x.with_samples(x.samples * rng.uniform(0.5, 1.5, (16, 1)))
        params = CompressorParams(threshold_db=-30, ratio=8, makeup_db=3)
        y = compress(x, params)
        gain = compressor_gain(x.samples[0], FS, params)
        assert np.array_equal(y.samples, x.samples * gain)

    def test_makeup(self):
        x = self.sine_scene(-40, 0.1)
        y = compress(x, CompressorParams(makeup_db=6))
        np.testing.assert_allclose(y.samples, x.samples * 10 ** (6 / 20), rtol=1e-12)

    @pytest.mark.parametrize("kwargs", [{"ratio": 0.5}, {"attack_ms": 0}, {"detector": "lufs"}])
    def test_bad_params(self, kwargs):
        with pytest.raises(InvalidArgumentError):
            CompressorParams(**kwargs)


class TestSegment:
    def test_residual_completes(self, rng):
        x = random_buffer(rng, 3)
        seg, res = extract_segment(x, SpatialWindow(Direction(0.2, 0.1), 0.5, 1.0))
        assert np.abs(seg.samples + res.samples - x.samples).max() <= 1e-12

    def test_lone_source_energy(self):
        # measured omni energy ratio 1.61 (the hard cap also gathers the negative side lobes)
        x = encode_source(np.ones(1), Direction(1.0, 0.4), 3)
        seg, _ = extract_segment(x, SpatialWindow(Direction(1.0, 0.4), math.pi / 4, math.pi / 4))
        assert seg.samples[0, 0] ** 2 / x.samples[0, 0] ** 2 >= 0.9

    def test_full_window_passes_all(self, rng):
        x = random_buffer(rng, 3)
        seg, res = extract_segment(x, SpatialWindow(Direction(0, 0), math.pi, math.pi))
        assert np.abs(seg.samples - x.samples).max() <= 1e-10
        assert np.abs(res.samples).max() <= 1e-10

    def test_bad_window(self):
        with pytest.raises(InvalidArgumentError):
            SpatialWindow(Direction(0, 0), 1.0, 0.5)


class TestHorizontalSubset:
    @pytest.mark.parametrize("order, idx", [(0, [0]), (2, [0, 1, 3, 4, 8])])
    def test_indices(self, order, idx):
        h = horizontal_subset(AmbisonicBuffer.zeros(order, 1, FS))
        assert list(h.acn_channels) == idx

    def test_order7(self, rng):
        h = horizontal_subset(random_buffer(rng, 7))
        assert h.channels == 15 and h.order == 7
