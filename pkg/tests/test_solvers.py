import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wraphdr.codec import CodecParams, SensorImage, encode, to_domain
from wraphdr.metrics import psnr, wrap_count
from wraphdr.scenes import SceneKind, SceneSpec, generate_scene, random_smooth_scene
from wraphdr.solvers import (
    MrfConfig,
    decode,
    detect_wrap_edges,
    edges_from_winding,
    mrf_energy,
    unwrap_floodfill,
    unwrap_mrf,
)

MOD = CodecParams(kind="modulo")
MANT = CodecParams(kind="mantissa")


def peak16_gaussian():
    return generate_scene(SceneSpec(kind=SceneKind.GAUSSIAN, amplitude=16.0, size=(129, 129), sigma=24.0))


def two_gaussians_and_ramp(size=32):
    spec = SceneSpec(kind=SceneKind.GAUSSIAN_MIXTURE, size=(size, size),
                     components=((4.0, 0.3 * size, 0.3 * size, 0.22 * size), (3.0, 0.7 * size, 0.72 * size, 0.2 * size)))
    y, x = np.mgrid[0:size, 0:size]
    return generate_scene(spec) + 0.05 * x + 0.02 * y


class TestEdges:
    def test_constant_image_has_no_edges(self):
        s, _ = encode(np.full((6, 7), 3.3), MOD)
        assert detect_wrap_edges(s).n_marked == 0

    def test_ramp_edges_match_wraps(self):
        ramp = generate_scene(SceneSpec(kind=SceneKind.RAMP2D, size=(4, 20), slope=0.4))
        s, w = encode(ramp, MOD)
        e = detect_wrap_edges(s)
        assert np.array_equal(e.horizontal[:, :, 0], np.diff(w, axis=1))
        assert set(np.unique(e.horizontal)) <= {0, 1}
        assert not e.vertical.any()

    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("params", [MOD, MANT])
    def test_edges_equal_winding_changes(self, seed, params):
        img = random_smooth_scene(np.random.default_rng(seed), (24, 24), max_step=0.45)
        s, w = encode(img, params)
        det = detect_wrap_edges(s)
        gt = edges_from_winding(w)
        assert np.array_equal(det.horizontal, gt.horizontal)
        assert np.array_equal(det.vertical, gt.vertical)

    def test_tau_range(self):
        s, _ = encode(np.ones((3, 3)), MOD)
        with pytest.raises(ValueError):
            detect_wrap_edges(s, tau=1.0)


class TestFloodFill:
    def test_empty_mask_gives_zero(self):
        s, _ = encode(np.random.default_rng(0).uniform(0, 5, (8, 8)), MOD)
        e = detect_wrap_edges(s)
        empty = type(e)(np.zeros_like(e.horizontal), np.zeros_like(e.vertical))
        assert not unwrap_floodfill(s, empty).any()

    def test_linear_ramp_exact(self):
        ramp = generate_scene(SceneSpec(kind=SceneKind.RAMP2D, size=(16, 30), slope=0.4, slope_y=0.25))
        s, w = encode(ramp, MOD)
        out, rep = unwrap_floodfill(s, return_report=True)
        assert np.array_equal(out, w)
        assert rep.conflicts == 0

    @pytest.mark.parametrize("params,peak_winding", [(MOD, 16), (MANT, 5)])
    def test_peak16_gaussian(self, params, peak_winding):
        s, w = encode(peak16_gaussian(), params)
        assert w.max() == peak_winding
        out = unwrap_floodfill(s)
        assert np.array_equal(out, w)

    def test_peak16_mantissa_needs_fewer_wraps(self):
        img = peak16_gaussian()
        assert wrap_count(encode(img, MANT)[1]) < wrap_count(encode(img, MOD)[1])

    def test_seed_in_wrapped_region_is_shifted(self):
        # darkest wrapped value sits in a wrapped layer; labels still start at 0
        img = np.array([[0.5, 0.9, 1.05, 1.4]])
        s, w = encode(img, MOD)
        out, rep = unwrap_floodfill(s, return_report=True)
        assert np.array_equal(out, w)
        assert rep.shifted > 0

    def test_inconsistent_edges_counted(self):
        s, _ = encode(np.full((2, 2), 0.5), MOD)
        edges = detect_wrap_edges(s)
        edges.horizontal[0, 0, 0] = 1  # one wrap with no closing wrap around the loop
        _, rep = unwrap_floodfill(s, edges, return_report=True)
        assert rep.conflicts >= 1

    def test_color_channels_independent(self):
        img = np.stack([peak16_gaussian(), 0.5 * peak16_gaussian(), np.full((129, 129), 0.3)], axis=2)
        s, w = encode(img, MANT)
        assert np.array_equal(unwrap_floodfill(s), w)


class TestMrf:
    def test_constant_image(self):
        s, _ = encode(np.full((6, 6), 0.4), MOD)
        w, rep = unwrap_mrf(s, return_report=True)
        assert not w.any()
        assert rep.energy == 0.0

    @pytest.mark.parametrize("params", [MOD, MANT])
    def test_piecewise_smooth_scene_exact(self, params):
        s, w = encode(two_gaussians_and_ramp(), params)
        assert np.abs(np.diff(to_domain(two_gaussians_and_ramp(), params), axis=0)).max() < 0.5
        out = unwrap_mrf(s, MrfConfig(max_label=16, lam=1.0, trunc=2.0))
        assert np.array_equal(out, w)

    @pytest.mark.parametrize("seed", range(4))
    def test_energy_never_increases(self, seed):
        rng = np.random.default_rng(seed)
        img = random_smooth_scene(rng, (20, 20))
        s, _ = encode(img, MOD.replace(noise_sigma=0.05, seed=seed))
        init = rng.integers(0, 4, s.shape)
        w, rep = unwrap_mrf(s, MrfConfig(max_label=8, trunc=2.0, max_sweeps=4), init=init, return_report=True)
        assert all(b <= a for a, b in zip(rep.energies, rep.energies[1:]))
        assert rep.energy <= rep.initial_energy
        assert rep.energy == pytest.approx(mrf_energy(s, w, MrfConfig(trunc=2.0)))

    def test_expansion_improves_bad_initialisation(self):
        img = two_gaussians_and_ramp(16)
        s, w_true = encode(img, MOD)
        w, rep = unwrap_mrf(s, MrfConfig(max_label=8), init=np.zeros(s.shape, dtype=int), return_report=True)
        assert rep.energy < rep.initial_energy
        assert mrf_energy(s, w_true) <= rep.energy + 1e-9

    def test_ceiling_reported(self):
        s, w = encode(peak16_gaussian()[40:90, 40:90], MOD)
        out, rep = unwrap_mrf(s, MrfConfig(max_label=4, max_sweeps=1), return_report=True)
        assert rep.clipped > 0
        assert rep.capacity_exceeded

    def test_config_validation(self):
        for kw in (dict(max_label=0), dict(lam=0), dict(trunc=-1), dict(max_sweeps=0)):
            with pytest.raises(ValueError):
                MrfConfig(**kw)


class TestDecode:
    @pytest.mark.parametrize("solver", ["floodfill", "mrf"])
    @pytest.mark.parametrize("params", [MOD, MANT])
    def test_noiseless_roundtrip(self, solver, params):
        img = two_gaussians_and_ramp()
        s, _ = encode(img, params)
        assert psnr(img, decode(s, solver)) >= 100

    def test_all_below_saturation(self):
        img = 0.9 * two_gaussians_and_ramp() / two_gaussians_and_ramp().max()
        s, _ = encode(img, MANT)
        assert np.array_equal(decode(s), s.data)

    def test_violation_errors_confined(self):
        img = two_gaussians_and_ramp(40)
        region = np.zeros(img.shape, dtype=bool)
        region[28:36, 2:10] = True
        img = img + 1.3 * region
        s, w = encode(img, MOD)
        out = decode(s)
        err = np.abs(out - img) > 1e-9
        assert err.any()
        assert not (err & ~region).any()


def test_transpose_equivariance_smooth():
    for seed in range(3):
        img = random_smooth_scene(np.random.default_rng(seed), (18, 23))
        for params in (MOD, MANT):
            s, _ = encode(img, params)
            st_ = SensorImage(s.data.T, params)
            for solver in ("floodfill", "mrf"):
                assert np.array_equal(decode(st_, solver), decode(s, solver).T)


@st.composite
def smooth_images(draw):
    h = draw(st.integers(2, 16))
    w = draw(st.integers(2, 16))
    steps_x = draw(arrays(np.float64, (h, w - 1), elements=st.floats(-0.24, 0.24)))
    steps_y = draw(arrays(np.float64, (h - 1,), elements=st.floats(-0.24, 0.24)))
    # separable construction keeps every 4-neighbour step below 0.48
    u = np.zeros((h, w))
    u[1:, 0] = np.cumsum(steps_y)
    u[:, 1:] = u[:, :1] + np.cumsum(steps_x, axis=1)
    u = u - u.min() + draw(st.floats(0, 0.9))
    return u


@settings(max_examples=60, deadline=None)
@given(smooth_images(), st.sampled_from(["modulo", "mantissa"]))
def test_oracle_equivalence_small(u, kind):
    params = CodecParams(kind=kind)
    img = np.where(u < 1, u, 2.0 ** (u - 1)) if kind == "mantissa" else u
    if np.abs(np.diff(u, axis=0)).max(initial=0) >= 0.5 or np.abs(np.diff(u, axis=1)).max(initial=0) >= 0.5:
        return
    s, w = encode(img, params)
    assert np.array_equal(unwrap_floodfill(s), w)
    assert np.array_equal(unwrap_mrf(s, MrfConfig(max_label=max(1, int(w.max()) + 1))), w)
