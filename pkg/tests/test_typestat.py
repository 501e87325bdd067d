import itertools
from collections import Counter

import numpy as np
import pytest
from scipy.stats import chisquare

from typestat import (
    ConditionalType, EmpiricalPmf, Sequence, apply_permutation, compose_permutations,
    conditional_type_class_size, empirical_entropy, empirical_mutual_information,
    enumerate_types, invert_permutation, iter_conditional_type_class, joint_and_conditional_type,
    joint_counts, multinomial, pair_sequences, sample_conditional_type_class, type_class_size,
    type_of,
)


def test_type_of_counts_symbols():
    s = Sequence.from_string('0120')
    assert s.alphabet_size == 3
    assert type_of(s) == EmpiricalPmf((2, 1, 1))


def test_sequence_rejects_out_of_range_symbols():
    with pytest.raises(ValueError):
        Sequence((0, 2), 2)


def test_sequence_index_matches_from_index():
    s = Sequence.from_string('1021', 3)
    assert Sequence.from_index(s.index(), 4, 3) == s
    assert Sequence.from_string('011', 2).index() == 3


def test_joint_counts_length_mismatch():
    with pytest.raises(ValueError):
        joint_counts(Sequence.from_string('01'), Sequence.from_string('011'))


def test_joint_and_conditional_type():
    joint, cond = joint_and_conditional_type(Sequence.from_string('0011'), Sequence.from_string('0101'))
    assert np.array_equal(joint.counts, [[1, 1], [1, 1]])
    assert np.allclose(cond.probabilities(), 0.5)
    a, b = joint.marginals()
    assert a.counts == (2, 2) and b.counts == (2, 2)


def test_type_class_size_is_exact_multinomial():
    assert type_class_size(EmpiricalPmf((2, 2))) == 6
    assert multinomial((1, 1, 1)) == 6
    # 40! / (20! 20!) does not fit in a float mantissa
    assert type_class_size(EmpiricalPmf((20, 20))) == 137846528820


def test_enumerate_types_colex_order():
    assert [t.counts for t in enumerate_types(2, 2)] == [(2, 0), (1, 1), (0, 2)]
    assert len(enumerate_types(4, 3)) == 15


def test_enumerate_types_rejects_empty_block():
    with pytest.raises(ValueError):
        enumerate_types(0, 2)


def test_empirical_information():
    s = Sequence.from_string('0101')
    assert empirical_entropy(s) == pytest.approx(1.0)
    assert empirical_mutual_information(s, s) == pytest.approx(1.0)
    assert empirical_mutual_information(s, Sequence.from_string('0011')) == pytest.approx(0.0, abs=1e-12)


def test_pair_sequences_flattening():
    paired = pair_sequences(Sequence.from_string('012', 3), Sequence.from_string('101', 2))
    assert paired.alphabet_size == 6
    assert paired.symbols == (1, 2, 5)


def test_sample_conditional_type_class_hits_target(rng):
    given = Sequence.from_string('001101')
    target = ConditionalType([[2, 1], [1, 2]])
    for _ in range(20):
        y = sample_conditional_type_class(target, given, rng)
        assert np.array_equal(joint_counts(given, y), target.counts)


def test_sample_conditional_type_class_incompatible_counts(rng):
    with pytest.raises(ValueError):
        sample_conditional_type_class(ConditionalType([[1, 1], [1, 1]]), Sequence.from_string('000'), rng)


def test_fiber_enumeration_matches_size():
    given = Sequence.from_string('00111')
    target = ConditionalType([[1, 1], [2, 1]])
    members = list(iter_conditional_type_class(target, given))
    assert len(members) == conditional_type_class_size(target) == 6
    assert len(set(members)) == len(members)
    assert all(np.array_equal(joint_counts(given, y), target.counts) for y in members)


def test_fiber_sampling_is_uniform():
    given = Sequence.from_string('0000')
    target = ConditionalType([[2, 2], [0, 0]])
    rng = np.random.default_rng(7)
    counts = Counter(sample_conditional_type_class(target, given, rng) for _ in range(6000))
    assert len(counts) == 6
    assert all(abs(c - 1000) < 150 for c in counts.values())


def test_apply_permutation_convention():
    s = Sequence.from_string('012', 3)
    assert apply_permutation(s, [2, 0, 1]).symbols == (2, 0, 1)


def test_permutation_group_operations():
    s = Sequence.from_string('0112', 3)
    outer, inner = np.array([3, 1, 0, 2]), np.array([1, 2, 3, 0])
    assert apply_permutation(apply_permutation(s, inner), outer) == apply_permutation(s, compose_permutations(outer, inner))
    assert apply_permutation(apply_permutation(s, outer), invert_permutation(outer)) == s


def test_apply_permutation_rejects_bad_permutation():
    s = Sequence.from_string('01')
    with pytest.raises(ValueError):
        apply_permutation(s, [0, 0])
    with pytest.raises(ValueError):
        apply_permutation(s, [0, 1, 2])


@pytest.mark.parametrize('q, max_N', [(2, 8), (3, 8)])
def test_type_class_size_matches_enumeration(q, max_N):
    for N in range(1, max_N + 1):
        counted = Counter(type_of(Sequence(symbols, q)).counts
                          for symbols in itertools.product(range(q), repeat=N))
        for t in enumerate_types(N, q):
            assert type_class_size(t) == counted[t.counts]


@pytest.mark.parametrize('q', [2, 3])
def test_type_classes_partition_the_space(q):
    for N in range(1, 11):
        assert sum(type_class_size(t) for t in enumerate_types(N, q)) == q ** N


@pytest.mark.parametrize('q', [2, 3])
def test_mutual_information_from_entropies(q):
    rng = np.random.default_rng(q)
    for _ in range(10):
        a = Sequence(tuple(rng.integers(0, q, size=30)), q)
        b = Sequence(tuple(rng.integers(0, q, size=30)), q)
        joint = empirical_entropy(pair_sequences(a, b))
        identity = empirical_entropy(a) + empirical_entropy(b) - joint
        assert empirical_mutual_information(a, b) == pytest.approx(identity, abs=1e-12)


def test_fiber_sampling_passes_chi_square():
    given = Sequence.from_string('00111')
    target = ConditionalType([[1, 1], [2, 1]])
    members = list(iter_conditional_type_class(target, given))
    rng = np.random.default_rng(12)
    counts = Counter(sample_conditional_type_class(target, given, rng) for _ in range(12_000))
    assert set(counts) == set(members)
    assert chisquare([counts[y] for y in members]).pvalue > 1e-3
