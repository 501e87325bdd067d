import math

import numpy as np
import pandas as pd
import pytest
from scipy.stats import linregress

from codec import (
    CccPrototype, CodecParams, FixedKeyCode, NestedCodec, NestedLinearCode, RmCode, RmKey,
    SortingPrototype, build_stacked_codebook,
)
from channels import Pmf
from typestat import Sequence
from wardensim import (
    AttackSpec, apply_attack, empirical_exponent, error_sweep, estimate_error_prob,
    exact_error_probability, exact_stego_distribution, fit_exponent, rm_equivalence_check,
    sampled_stego_distribution, wilson_interval,
)


def repetition_codec(N):
    return NestedCodec(NestedLinearCode.repetition(N))


def majority_error(N, p):
    return sum(math.comb(N, k) * p ** k * (1 - p) ** (N - k) for k in range(N // 2 + 1, N + 1))


class TestAttacks:
    def test_passive_is_identity(self, rng):
        x = Sequence.from_string('0110')
        assert apply_attack(x, AttackSpec.passive(), rng) is x

    def test_noiseless_bsc(self, rng):
        x = Sequence.from_string('011010')
        assert apply_attack(x, AttackSpec.bsc(0.0), rng) == x

    def test_bsc_flip_fraction(self, rng):
        x = Sequence(tuple(np.zeros(100_000, dtype=int)), 2)
        y = apply_attack(x, AttackSpec.bsc(0.2), rng)
        assert np.mean(y.array()) == pytest.approx(0.2, abs=0.005)

    def test_declared_budget_is_checked(self, hamming2):
        AttackSpec.bsc(0.2, D2=0.2).validate(Pmf.uniform(2), hamming2)
        with pytest.raises(ValueError):
            AttackSpec.bsc(0.3, D2=0.2).validate(Pmf.uniform(2), hamming2)

    def test_memoryless_needs_a_channel(self):
        with pytest.raises(ValueError):
            AttackSpec('memoryless')
        with pytest.raises(ValueError):
            AttackSpec('adaptive')


def test_wilson_interval_brackets_estimate():
    lo, hi = wilson_interval(30, 100)
    assert lo < 0.3 < hi
    assert wilson_interval(0, 0) == (0.0, 1.0)


class TestErrorProbability:
    def test_repetition_passive_is_error_free(self):
        report = estimate_error_prob(repetition_codec(3), AttackSpec.passive(), 0, exhaustive=True)
        assert report.p_e_hat == 0.0
        assert report.method == 'exact'

    def test_repetition_bsc_exact(self):
        pe = exact_error_probability(repetition_codec(3), AttackSpec.bsc(0.4))
        assert pe == pytest.approx(0.352, abs=1e-12)

    def test_monte_carlo_is_reproducible(self):
        codec, spec = repetition_codec(3), AttackSpec.bsc(0.4)
        a = estimate_error_prob(codec, spec, 2000, seed=9)
        b = estimate_error_prob(codec, spec, 2000, seed=9, threads=4)
        assert a == b
        assert a.wilson_ci_95[0] <= a.p_e_hat <= a.wilson_ci_95[1]
        assert a.p_e_hat == pytest.approx(0.352, abs=0.05)

    def test_monte_carlo_covers_the_binomial_tail(self):
        report = estimate_error_prob(repetition_codec(3), AttackSpec.bsc(0.4), 10_000, seed=5)
        assert report.wilson_ci_95[0] <= 0.352 <= report.wilson_ci_95[1]

    def test_single_message_never_errs(self, bern_half, hamming2):
        params = CodecParams(N=4, R=0.0, L=2, epsilon=0.05, D1=0.25, d=hamming2, p_S=bern_half)
        codec = CccPrototype(build_stacked_codebook(params))
        report = estimate_error_prob(codec, AttackSpec.bsc(0.3), 200, seed=1)
        assert report.errors == 0

    def test_rejects_empty_run(self):
        with pytest.raises(ValueError):
            estimate_error_prob(repetition_codec(3), AttackSpec.passive(), 0)


class TestSecurity:
    def test_rm_code_is_perfectly_secure(self, small_codebook):
        report = exact_stego_distribution(RmCode(CccPrototype(small_codebook)))
        assert report.passed
        assert report.tv_distance == 0.0

    def test_nested_code_is_perfectly_secure(self):
        report = exact_stego_distribution(repetition_codec(3))
        assert report.passed

    def test_sorting_control_is_detected(self, bern_half):
        control = FixedKeyCode(RmCode(SortingPrototype(4, bern_half)), RmKey.identity(4))
        report = exact_stego_distribution(control)
        assert not report.passed
        assert report.tv_distance > 0.1

    @pytest.mark.parametrize('code', [
        NestedLinearCode.repetition(4),
        NestedLinearCode.from_generators([[1, 1, 0, 0], [0, 0, 1, 1]], [[1, 1, 1, 1]]),
    ])
    def test_nested_code_at_four_symbols(self, code):
        report = exact_stego_distribution(NestedCodec(code))
        assert report.passed
        assert report.tv_distance <= 1e-12

    def test_sampled_report_is_not_a_proof(self):
        report = sampled_stego_distribution(repetition_codec(3), 400, seed=2)
        assert report.method == 'sampled'
        assert report.note == 'sampled, not a proof'
        assert not report.passed

    def test_block_length_mismatch(self):
        with pytest.raises(ValueError):
            exact_stego_distribution(repetition_codec(3), N=4)


def test_rm_matches_prototype_for_every_permutation(small_codebook):
    rng = np.random.default_rng(4)
    perms = [RmKey.random(4, rng) for _ in range(10)]
    report = rm_equivalence_check(CccPrototype(small_codebook), AttackSpec.bsc(0.25), perms)
    assert report.passed
    assert len(report.pes) == 10
    assert report.max_deviation < 1e-12


class TestExponentFit:
    def test_repetition_slope_matches_closed_form(self):
        family = {N: repetition_codec(N) for N in (3, 5, 7)}
        estimate = empirical_exponent(family, AttackSpec.bsc(0.1), 0, exhaustive=True)
        Ns = np.array([3, 5, 7])
        exact = [majority_error(N, 0.1) for N in Ns]
        assert exact[0] == pytest.approx(0.028)
        expected = linregress(Ns, -np.log2(exact)).slope
        assert not estimate.degenerate
        assert estimate.slope == pytest.approx(expected, abs=1e-9)
        assert estimate.slope == pytest.approx(0.84, abs=0.02)

    def test_zero_error_points_are_excluded(self):
        frame = pd.DataFrame({'N': [3, 5, 7], 'trials': 100, 'errors': [5, 1, 0],
                              'pe': [0.05, 0.01, 0.0], 'ci_lo': [0.02, 0.001, 0.0],
                              'ci_hi': [0.1, 0.05, 0.04]})
        estimate = fit_exponent(frame)
        assert estimate.excluded_N == [7]
        assert estimate.degenerate

    def test_single_message_family_is_degenerate(self):
        # C1 = C2 leaves a single message
        family = {N: NestedCodec(NestedLinearCode.from_generators(np.ones((1, N)), np.ones((1, N))))
                  for N in (3, 5)}
        estimate = empirical_exponent(family, AttackSpec.bsc(0.1), 10)
        assert estimate.degenerate
        assert np.isnan(estimate.slope)

    def test_sweep_columns(self):
        frame = error_sweep({3: repetition_codec(3)}, AttackSpec.bsc(0.2), 50, seed=3)
        assert list(frame.columns) == ['N', 'trials', 'errors', 'pe', 'ci_lo', 'ci_hi']
        assert frame['trials'].iloc[0] == 50
