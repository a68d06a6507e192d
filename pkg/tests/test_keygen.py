import math

import numpy as np
import pytest

from beamkey._linalg import crandn
from beamkey.channel import estimate_covariances, random_scenario
from beamkey.design import allocate_nonoverlapping
from beamkey.experiments import bdr_point
from beamkey.keygen.pipeline import link_entries, probe_rounds, quantize_links, split_keys
from beamkey.keygen.quantize import (
    KeyMaterial,
    bdr,
    cqa_quantize,
    gray_code,
    informative_entries,
    labels_to_bits,
    quantize_phase,
)
from beamkey.probing import PilotConfig, make_pilots


class TestBDR:
    def test_identical(self):
        assert bdr([0, 1, 1], [0, 1, 1]) == 0.0

    def test_complementary(self):
        assert bdr([0, 1, 1, 0], [1, 0, 0, 1]) == 1.0

    def test_one_flip(self):
        a = np.zeros(256, dtype=int)
        b = a.copy()
        b[17] = 1
        assert bdr(a, b) == 1 / 256

    def test_mismatch(self):
        with pytest.raises(ValueError):
            bdr([0, 1], [0])


class TestGray:
    def test_adjacent_labels_differ_in_one_bit(self):
        g = gray_code(np.arange(16))
        for a, b in zip(g, np.roll(g, -1)):
            assert bin(int(a) ^ int(b)).count("1") == 1

    def test_msb_first(self):
        np.testing.assert_array_equal(labels_to_bits(np.array([2, 1]), 2), [1, 0, 0, 1])


class TestCQA:
    def test_noiseless(self, rng):
        z = crandn(rng, 5000)
        km = cqa_quantize(z, z, 2)
        assert km.bdr() == 0.0 and km.bits_bs[0].size == 10_000

    def test_independent(self, rng):
        km = cqa_quantize(crandn(rng, 10_000), crandn(rng, 10_000), 2)
        assert km.bdr() == pytest.approx(0.5, abs=0.03)

    def test_highly_correlated(self, rng):
        n, rho = 5000, 0.99
        a = crandn(rng, n)
        b = rho * a + math.sqrt(1 - rho**2) * crandn(rng, n)
        assert cqa_quantize(a, b, 2).bdr() <= 0.05

    def test_centering_beats_plain_quantization(self, rng):
        n, rho = 20_000, 0.95
        a = crandn(rng, n)
        b = rho * a + math.sqrt(1 - rho**2) * crandn(rng, n)
        plain = bdr(quantize_phase(a, 2), quantize_phase(b, 2))
        assert cqa_quantize(a, b, 2).bdr() < plain

    def test_helper_reveals_nothing(self, rng):
        km = cqa_quantize(crandn(rng, 10_000), crandn(rng, 10_000), 2)
        guess = quantize_phase(np.exp(1j * km.public_helper[0]), 2)
        assert bdr(guess, km.bits_bs[0]) == pytest.approx(0.5, abs=0.03)
        w = 2 * np.pi / 4
        assert np.all(np.abs(km.public_helper[0]) <= w / 2 + 1e-12)

    @pytest.mark.parametrize("b", [1, 3])
    def test_other_depths(self, rng, b):
        z = crandn(rng, 100)
        km = cqa_quantize(z, z, b)
        assert km.bits_bs[0].size == 100 * b and km.bdr() == 0

    def test_errors(self):
        with pytest.raises(ValueError):
            cqa_quantize([], [], 2)
        with pytest.raises(ValueError):
            cqa_quantize([1j], [1j], 0)
        with pytest.raises(ValueError):
            cqa_quantize([1j, 1], [1j], 2)

    def test_key_material_lengths(self):
        with pytest.raises(ValueError):
            KeyMaterial([np.zeros(3)], [np.zeros(4)], [np.zeros(2)])


def test_informative_entries():
    L = np.diag([1.0, 0.0, 0.5, 0.001])
    np.testing.assert_array_equal(informative_entries(L, np.eye(4)), [0, 2])
    assert informative_entries(np.zeros((2, 2)), np.eye(2)).size == 0


def test_split_keys():
    keys = split_keys(np.arange(600) % 2, 256)
    assert len(keys) == 2 and all(k.size == 256 for k in keys)


@pytest.fixture(scope="module")
def multiuser():
    s = random_scenario(32, 3, 4, 3, layout="clustered", on_grid=True, seed=21)
    covs = estimate_covariances(s, mode="analytic")
    D = allocate_nonoverlapping(covs, 3, 2)
    pilots = make_pilots(PilotConfig.minimal("reused", 3, 3, 2), 3)
    return s, D, pilots, link_entries(D, covs.Lambda)


class TestPipeline:
    def test_zero_noise_agreement(self, multiuser):
        s, D, pilots, entries = multiuser
        km = quantize_links(probe_rounds(s, D, pilots, 0.0, 500, np.random.default_rng(1), entries))
        for k in range(s.K):
            assert km.bdr(k) == 0.0

    def test_entries_match_paths(self, multiuser):
        s, D, pilots, entries = multiuser
        assert all(len(e) == 3 for e in entries)

    def test_cross_user_separation(self, multiuser):
        s, D, pilots, entries = multiuser
        _, _, cross = bdr_point(s, D, pilots, entries, 0.01, 2000, np.random.default_rng(2))
        assert 0.45 <= cross <= 0.55

    @pytest.mark.parametrize("nv", [1.0, 0.1, 0.01])
    def test_legitimate_close_to_single_user(self, multiuser, nv):
        s, D, pilots, entries = multiuser
        legit, single, _ = bdr_point(s, D, pilots, entries, nv, 2000, np.random.default_rng(3))
        assert legit <= single + 0.02
