import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from echolab.acoustics import (
    FS,
    SPEED_OF_SOUND,
    ImageSources,
    RirSet,
    add_noise,
    enumerate_image_sources,
    make_mic_array,
    simulate_room,
    synthesize_rir,
    truncate_first_order,
)
from echolab.errors import ZeroEnergyRir
from echolab.geometry import DevicePose, Polygon2D, RoomSpec
from echolab.materials import MaterialAssignment, SIDEWALL_MATERIALS, assign_materials
from conftest import box_room
from oracles import shoebox_first_order_distances, shoebox_images


def _vertical_split(nz, pz):
    """(floor hits, ceiling hits) for lattice z index (nz, pz)."""
    if pz == 0:
        return abs(nz), abs(nz)
    return (nz - 1, nz) if nz >= 1 else (1 - nz, -nz)


class TestImageSources:
    def test_first_order_box_mirrors(self, room):
        imgs = truncate_first_order(enumerate_image_sources(room))
        x, y, z = room.device.xyz
        expected = sorted([(-x, y, z), (8 - x, y, z), (x, -y, z), (x, 6 - y, z), (x, y, -z), (x, y, 6 - z)])
        got = sorted(map(tuple, imgs.positions))
        np.testing.assert_allclose(got, expected, atol=1e-12)
        assert set(imgs.orders) == {1}

    def test_first_order_distances_closed_form(self, room):
        imgs = truncate_first_order(enumerate_image_sources(room))
        d = sorted(np.linalg.norm(imgs.positions - room.device.xyz, axis=1))
        np.testing.assert_allclose(d, shoebox_first_order_distances(4.0, 3.0, 3.0, room.device.xyz), atol=1e-12)

    @pytest.mark.parametrize("dims,dev", [((4.0, 3.0, 3.0), (1.3, 1.1, 1.2)), ((5.5, 2.5, 4.0), (4.0, 1.9, 1.4))])
    def test_box_matches_lattice_oracle(self, dims, dev):
        lx, ly, lz = dims
        room = box_room(lx, ly, lz, dev)
        max_dist, cap = 25.0, 4
        imgs = enumerate_image_sources(room, max_dist=max_dist, order_cap=cap)
        oracle = [(p, o) for p, o in shoebox_images(lx, ly, lz, dev, cap)
                  if math.dist(p, dev) <= max_dist]
        assert len(imgs) == len(oracle)
        got = sorted((tuple(np.round(p, 9)), o) for p, o in zip(imgs.positions, imgs.orders))
        want = sorted((tuple(np.round(p, 9)), o) for p, o in oracle)
        assert got == want

    def test_box_amplitudes(self):
        mats = MaterialAssignment("carpet", "metal_panel", "plasterboard")
        lx, ly, lz, dev = 4.0, 3.0, 3.0, (1.3, 1.1, 1.2)
        room = box_room(lx, ly, lz, dev, materials=mats)
        imgs = enumerate_image_sources(room, max_dist=20.0, order_cap=3)
        lookup = {tuple(np.round(p, 9)): a for p, a in zip(imgs.positions, imgs.amplitudes)}
        rng = range(-3, 4)
        for nx in rng:
            for ny in rng:
                for nz in rng:
                    for px in (0, 1):
                        for py in (0, 1):
                            for pz in (0, 1):
                                kw = abs(2 * nx - px) + abs(2 * ny - py)
                                nf, nc = _vertical_split(nz, pz)
                                if kw + nf + nc == 0 or kw + nf + nc > 3:
                                    continue
                                pos = ((1 - 2 * px) * dev[0] + 2 * nx * lx, (1 - 2 * py) * dev[1] + 2 * ny * ly,
                                       (1 - 2 * pz) * dev[2] + 2 * nz * lz)
                                if math.dist(pos, dev) > 20.0:
                                    continue
                                amp = math.sqrt(1 - 0.12) ** kw * math.sqrt(1 - 0.30) ** nf * math.sqrt(1 - 0.15) ** nc
                                assert lookup[tuple(np.round(pos, 9))] == pytest.approx(amp, rel=1e-12)

    def test_order_cap_and_distance_respected(self):
        from echolab.geometry import sample_standard_room
        room = sample_standard_room("T", 3)
        imgs = enumerate_image_sources(room, max_dist=30.0, order_cap=5)
        assert imgs.orders.min() >= 1 and imgs.orders.max() <= 5
        assert np.linalg.norm(imgs.positions - room.device.xyz, axis=1).max() <= 30.0

    def test_occluded_first_order_excluded(self):
        # deep in the lower arm of an L, the far wall of the upper arm has no
        # valid first-order image
        poly = Polygon2D([(0, 0), (10, 0), (10, 1), (1, 1), (1, 10), (0, 10)])
        mats = MaterialAssignment("carpet", "metal_panel", "plasterboard")
        room = RoomSpec(poly, 3.0, mats, DevicePose(9.5, 0.5, 1.2), "L", "NLOS")
        first = truncate_first_order(enumerate_image_sources(room, max_dist=60.0))
        planar = first.positions[np.abs(first.positions[:, 2] - 1.2) < 1e-9]
        # walls y=0, x=10, y=1 (the arm's ceiling side) are visible; x=0 is
        # at the end of the lower arm and also visible; y=10 and x=1 are not
        mirrored_y10 = np.array([9.5, 19.5])
        assert not np.any(np.all(np.isclose(planar[:, :2], mirrored_y10), axis=1))
        assert len(planar) == 4


class TestSynthesis:
    def test_two_tap_fractional_delay(self):
        array = make_mic_array(DevicePose(0, 0, 0), M=1, radius=0.0)
        d = 1.234
        imgs = ImageSources(np.array([[d, 0, 0]]), np.array([1]), np.array([1.0]))
        rir = synthesize_rir(imgs, array, N=64).samples[0]
        t = d * FS / SPEED_OF_SOUND
        i0 = int(t)
        assert rir[i0] == pytest.approx((1 - (t - i0)) / d)
        assert rir[i0 + 1] == pytest.approx((t - i0) / d)
        assert np.count_nonzero(rir) == 2

    def test_order_zero_rejected(self):
        array = make_mic_array(DevicePose(0, 0, 0))
        with pytest.raises(ValueError):
            synthesize_rir(ImageSources(np.zeros((1, 3)), np.array([0]), np.array([1.0])), array)

    def test_taps_beyond_n_dropped(self):
        array = make_mic_array(DevicePose(0, 0, 0), M=1, radius=0.0)
        imgs = ImageSources(np.array([[100.0, 0, 0]]), np.array([1]), np.array([1.0]))
        assert not synthesize_rir(imgs, array, N=64).samples.any()

    def test_no_energy_before_direct_path_bound(self, room):
        rir = simulate_room(room, noise=False).samples
        d_min = min(shoebox_first_order_distances(4.0, 3.0, 3.0, room.device.xyz))
        first = math.floor((d_min - 0.05) * FS / SPEED_OF_SOUND)
        assert not rir[:, :first].any()
        assert rir[:, first:first + 3].any()

    def test_first_order_support_bounded(self, room):
        rir = simulate_room(room, first_order_only=True, noise=False).samples
        d_max = max(shoebox_first_order_distances(4.0, 3.0, 3.0, room.device.xyz))
        last = math.floor((d_max + 0.05) * FS / SPEED_OF_SOUND) + 1
        assert not rir[:, last + 1:].any()

    def test_mic_ring(self):
        arr = make_mic_array(DevicePose(1, 2, 1.5))
        assert arr.M == 6
        np.testing.assert_allclose(np.linalg.norm(arr.mic_positions - arr.source, axis=1), 0.05)
        np.testing.assert_allclose(arr.mic_positions[:, 2], 1.5)


class TestNoise:
    @given(st.floats(10.0, 20.0), st.integers(0, 1000))
    def test_snr_realized(self, snr, seed):
        rng = np.random.default_rng(seed)
        clean = RirSet(rng.normal(size=(6, 1024)))
        noisy = add_noise(clean, rng, snr_db=snr)
        noise = noisy.samples - clean.samples
        realized = 10 * np.log10(clean.energy() / np.sum(noise ** 2))
        assert abs(realized - snr) < 0.5

    def test_snr_drawn_in_range(self, room, rng):
        for _ in range(20):
            rir = simulate_room(room, rng)
            assert 10.0 <= rir.snr_db <= 20.0

    def test_infinite_snr_is_identity(self, rng):
        clean = RirSet(np.ones((2, 4)))
        np.testing.assert_array_equal(add_noise(clean, rng, snr_db=math.inf).samples, clean.samples)

    def test_zero_energy(self, rng):
        with pytest.raises(ZeroEnergyRir):
            add_noise(RirSet(np.zeros((2, 4))), rng)

    def test_deterministic(self, room):
        a = simulate_room(room, np.random.default_rng(5)).samples
        b = simulate_room(room, np.random.default_rng(5)).samples
        np.testing.assert_array_equal(a, b)


class TestMaterials:
    def test_assignment_from_tables(self, rng):
        for _ in range(50):
            m = assign_materials(rng)
            assert m.sidewall in SIDEWALL_MATERIALS
            assert 0 < m.alpha_floor < 1 and 0 < m.alpha_ceiling < 1
