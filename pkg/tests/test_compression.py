import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gossipsim.compression import (
    Compressor,
    CompressorBank,
    CompressionError,
    UniformStream,
    make_compressor,
    parse_compressor_spec,
)


class TestSpecParsing:
    @pytest.mark.parametrize(
        "spec,expected",
        [
            ("identity", ("identity", 0)),
            ("rand_5", ("rand_k", 5)),
            ("top_10", ("top_k", 10)),
            ("qsgd_3", ("qsgd_k", 3)),
        ],
    )
    def test_valid(self, spec, expected):
        assert parse_compressor_spec(spec) == expected

    @pytest.mark.parametrize("spec", ["qsgd", "rand", "identity_3", "foo_2", "top_x"])
    def test_invalid(self, spec):
        with pytest.raises(CompressionError):
            parse_compressor_spec(spec)


class TestValidation:
    def test_rand_k_bounds(self):
        with pytest.raises(CompressionError):
            Compressor("rand_k", 0, 10)
        with pytest.raises(CompressionError):
            Compressor("rand_k", 11, 10)

    def test_qsgd_needs_two_bits(self):
        with pytest.raises(CompressionError):
            Compressor("qsgd_k", 1, 10)

    def test_dimension_positive(self):
        with pytest.raises(CompressionError):
            Compressor("identity", 0, 0)

    def test_wrong_length_input(self):
        c = Compressor("top_k", 2, 4)
        with pytest.raises(CompressionError):
            c.compress(np.zeros(5))


class TestOmega:
    def test_identity_zero(self):
        assert make_compressor("identity", 150).omega() == 0.0

    def test_rand_full_keep(self):
        assert make_compressor("rand_7", 7).omega() == 0.0

    def test_top_half(self):
        # omega^2 = 1 - 75/150 = 1/2
        assert abs(make_compressor("top_75", 150).omega() - math.sqrt(0.5)) <= 1e-15

    def test_qsgd5_d150(self):
        # u = 15, tau = 1 + min(150/225, sqrt(150)/15) = 5/3, omega^2 = 0.4
        c = make_compressor("qsgd_5", 150)
        assert abs(c.omega_squared() - 0.4) <= 1e-12
        assert abs(c.omega() - math.sqrt(0.4)) <= 1e-12

    def test_all_configs_below_one(self):
        for d in (1, 2, 17, 150):
            for k in range(1, d + 1):
                assert 0.0 <= Compressor("rand_k", k, d).omega() < 1.0
            for k in (2, 3, 8):
                assert 0.0 < Compressor("qsgd_k", k, d).omega() < 1.0


class TestMessageBits:
    def test_identity_dense(self):
        assert make_compressor("identity", 150).message_bits() == 4800

    def test_qsgd_payload_plus_norm(self):
        assert make_compressor("qsgd_5", 150).message_bits() == 150 * 5 + 32

    def test_sparsifier_values_plus_indices(self):
        # ceil(log2 150) = 8 index bits
        assert make_compressor("rand_10", 150).message_bits() == 10 * (32 + 8)
        assert make_compressor("top_10", 150).message_bits() == 400

    def test_single_coordinate_no_index_bits(self):
        assert make_compressor("top_1", 1).message_bits() == 32


class TestCompressOutputs:
    def test_top_1_largest_magnitude(self):
        c = make_compressor("top_1", 3)
        np.testing.assert_array_equal(c.compress(np.array([3.0, -1.0, 2.0])), [3.0, 0.0, 0.0])

    def test_top_k_tie_lowest_index(self):
        c = make_compressor("top_2", 3)
        np.testing.assert_array_equal(c.compress(np.array([1.0, -1.0, 1.0])), [1.0, -1.0, 0.0])

    def test_rand_full_dimension_is_identity(self):
        c = make_compressor("rand_6", 6, seed=5)
        x = np.arange(6.0) - 2.5
        np.testing.assert_array_equal(c.compress(x), x)

    def test_qsgd_zero_vector(self):
        c = make_compressor("qsgd_5", 8, seed=3)
        np.testing.assert_array_equal(c.compress(np.zeros(8)), np.zeros(8))

    def test_support_bounded_by_k(self):
        rng = np.random.default_rng(0)
        for spec in ("rand_3", "top_3"):
            c = make_compressor(spec, 12, seed=9)
            for _ in range(50):
                q = c.compress(rng.standard_normal(12))
                assert np.count_nonzero(q) <= 3

    @settings(max_examples=60, deadline=None)
    @given(st.integers(min_value=1, max_value=12), st.integers(min_value=0, max_value=10**6))
    def test_rand_k_keeps_original_values(self, k, seed):
        d = 12
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(d)
        q = make_compressor(f"rand_{k}", d, seed=seed).compress(x)
        kept = q != 0
        np.testing.assert_array_equal(q[kept], x[kept])
        assert np.count_nonzero(kept) <= k


class TestContract:
    def test_rand_k_exact_expectation_brute_force(self):
        # oracle: enumerate all C(d, k) subsets; the mean relative error is 1 - k/d
        rng = np.random.default_rng(21)
        d = 5
        for k in (1, 2, 4):
            x = rng.standard_normal(d)
            nx2 = float(x @ x)
            errs = []
            for subset in itertools.combinations(range(d), k):
                q = np.zeros(d)
                q[list(subset)] = x[list(subset)]
                errs.append(float(np.sum((q - x) ** 2)) / nx2)
            oracle = float(np.mean(errs))
            assert abs(oracle - (1 - k / d)) <= 1e-12
            comp = make_compressor(f"rand_{k}", d, seed=100 + k)
            mc = np.mean(
                [float(np.sum((comp.compress(x) - x) ** 2)) / nx2 for _ in range(20000)]
            )
            assert abs(mc - oracle) <= 0.05 * oracle if oracle > 0 else mc == 0

    @pytest.mark.parametrize("spec,d", [("rand_10", 50), ("qsgd_5", 150), ("qsgd_3", 100)])
    def test_monte_carlo_below_omega2(self, spec, d):
        comp = make_compressor(spec, d, seed=42)
        rng = np.random.default_rng(7)
        ratios = []
        for _ in range(20):
            x = rng.standard_normal(d)
            nx2 = float(x @ x)
            ratios.extend(
                float(np.sum((comp.compress(x) - x) ** 2)) / nx2 for _ in range(500)
            )
        assert np.mean(ratios) <= comp.omega_squared() * 1.05

    def test_top_k_deterministic_inequality(self):
        comp = make_compressor("top_10", 50)
        rng = np.random.default_rng(31)
        for _ in range(1000):
            x = rng.standard_normal(50)
            assert np.sum((comp.compress(x) - x) ** 2) <= (1 - 10 / 50) * np.sum(x**2) + 1e-12


class TestDeterminism:
    @pytest.mark.parametrize("spec", ["rand_4", "qsgd_3", "top_4", "identity"])
    def test_same_seed_same_sequence(self, spec):
        rng = np.random.default_rng(77)
        xs = [rng.standard_normal(9) for _ in range(12)]
        a = make_compressor(spec, 9, seed=123)
        b = make_compressor(spec, 9, seed=123)
        for x in xs:
            np.testing.assert_array_equal(a.compress(x), b.compress(x))

    def test_different_seed_differs(self):
        x = np.arange(1.0, 10.0)
        a = make_compressor("rand_3", 9, seed=1)
        b = make_compressor("rand_3", 9, seed=2)
        outs_a = np.stack([a.compress(x) for _ in range(8)])
        outs_b = np.stack([b.compress(x) for _ in range(8)])
        assert not np.array_equal(outs_a, outs_b)


class TestUniformStream:
    def test_take_sizes_do_not_matter(self):
        s1 = UniformStream(99, block=16)
        s2 = UniformStream(99, block=4096)
        a = np.concatenate([s1.take(5), s1.take(1), s1.take(40), s1.take(3)])
        b = s2.take(49)
        np.testing.assert_array_equal(a, b)

    def test_matches_raw_generator(self):
        s = UniformStream(4, block=8)
        raw = np.random.default_rng(4).random(30)
        np.testing.assert_array_equal(np.concatenate([s.take(13), s.take(17)]), raw)


class TestBankEquivalence:
    @pytest.mark.parametrize("spec", ["identity", "top_3", "rand_3", "qsgd_4"])
    def test_bank_matches_standalone_agents(self, spec):
        n, d, rounds = 7, 11, 6
        seeds = [1000 + 7 * i for i in range(n)]
        kind, k = parse_compressor_spec(spec)
        bank = CompressorBank(kind, k, d, seeds)
        solos = [Compressor(kind, k, d, seed=s) for s in seeds]
        rng = np.random.default_rng(55)
        for r in range(rounds):
            x = rng.standard_normal((n, d))
            if r == 3:
                x[2] = 0.0  # zero row must not desync the streams
            got = bank.compress_rows(x)
            want = np.stack([solo.compress(x[i]) for i, solo in enumerate(solos)])
            np.testing.assert_array_equal(got, want)

    def test_bank_shape_check(self):
        bank = CompressorBank("top_k", 2, 5, [1, 2, 3])
        with pytest.raises(CompressionError):
            bank.compress_rows(np.zeros((2, 5)))
