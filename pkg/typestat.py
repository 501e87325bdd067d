"""
Method-of-types machinery over small finite alphabets.

Types are kept as exact integer counts so that type equality (used to index
codebook arrays) never depends on float comparison. Information quantities
are in bits.
"""

import math
import itertools
import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, List, Sequence as SequenceLike, Tuple

import numpy as np
from scipy.stats import entropy

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Sequence:
    """A length-N sequence of symbol indices over {0, ..., alphabet_size - 1}."""
    symbols: Tuple[int, ...]
    alphabet_size: int

    def __post_init__(self):
        symbols = tuple(int(s) for s in np.asarray(self.symbols).ravel())
        object.__setattr__(self, 'symbols', symbols)
        if self.alphabet_size < 1:
            raise ValueError(f"alphabet_size must be positive, got {self.alphabet_size}")
        if len(symbols) < 1:
            raise ValueError("a sequence needs at least one symbol")
        if min(symbols) < 0 or max(symbols) >= self.alphabet_size:
            raise ValueError(f"symbols must lie in [0, {self.alphabet_size}), got {symbols}")

    @classmethod
    def from_string(cls, text: str, alphabet_size: int = None) -> 'Sequence':
        """Parse a digit string such as "01220"; alphabet defaults to max symbol + 1 (at least 2)."""
        symbols = [int(ch) for ch in text.strip()]
        if alphabet_size is None:
            alphabet_size = max(2, max(symbols) + 1) if symbols else 2
        return cls(tuple(symbols), alphabet_size)

    @classmethod
    def from_index(cls, index: int, N: int, alphabet_size: int) -> 'Sequence':
        """Inverse of index(): base-q digits, first symbol most significant."""
        digits = []
        for _ in range(N):
            index, r = divmod(index, alphabet_size)
            digits.append(r)
        return cls(tuple(reversed(digits)), alphabet_size)

    @property
    def N(self) -> int:
        return len(self.symbols)

    def __len__(self) -> int:
        return len(self.symbols)

    def array(self) -> np.ndarray:
        return np.asarray(self.symbols, dtype=np.int64)

    def index(self) -> int:
        value = 0
        for s in self.symbols:
            value = value * self.alphabet_size + s
        return value

    def __str__(self) -> str:
        if self.alphabet_size <= 10:
            return ''.join(str(s) for s in self.symbols)
        return ','.join(str(s) for s in self.symbols)


@dataclass(frozen=True)
class EmpiricalPmf:
    """Type of a sequence as exact per-symbol counts."""
    counts: Tuple[int, ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if any(c < 0 for c in counts):
            raise ValueError(f"type counts must be nonnegative, got {counts}")
        object.__setattr__(self, 'counts', counts)

    @property
    def N(self) -> int:
        return sum(self.counts)

    @property
    def alphabet_size(self) -> int:
        return len(self.counts)

    def fractions(self) -> Tuple[Fraction, ...]:
        if self.N == 0:
            raise ValueError("empty type has no probabilities")
        return tuple(Fraction(c, self.N) for c in self.counts)

    def probs(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / self.N


class JointType:
    """Pair-occurrence counts over X x Y."""

    def __init__(self, counts):
        self.counts = np.asarray(counts, dtype=np.int64)
        if self.counts.ndim != 2 or (self.counts < 0).any():
            raise ValueError("joint type counts must be a nonnegative matrix")

    @property
    def N(self) -> int:
        return int(self.counts.sum())

    def marginals(self) -> Tuple[EmpiricalPmf, EmpiricalPmf]:
        return (EmpiricalPmf(tuple(self.counts.sum(axis=1))),
                EmpiricalPmf(tuple(self.counts.sum(axis=0))))

    def __eq__(self, other):
        return isinstance(other, JointType) and np.array_equal(self.counts, other.counts)


class ConditionalType:
    """Conditional type p_{y|x}: pair counts plus per-conditioning-symbol totals."""

    def __init__(self, counts):
        self.counts = np.asarray(counts, dtype=np.int64)
        if self.counts.ndim != 2 or (self.counts < 0).any():
            raise ValueError("conditional type counts must be a nonnegative matrix")

    @property
    def conditioning_counts(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def probabilities(self) -> np.ndarray:
        # rows with zero conditioning count stay zero: undefined there
        totals = self.conditioning_counts
        out = np.zeros(self.counts.shape, dtype=float)
        mask = totals > 0
        out[mask] = self.counts[mask] / totals[mask, None]
        return out

    def __eq__(self, other):
        return isinstance(other, ConditionalType) and np.array_equal(self.counts, other.counts)


def type_of(seq: Sequence) -> EmpiricalPmf:
    counts = np.bincount(seq.array(), minlength=seq.alphabet_size)
    return EmpiricalPmf(tuple(counts))


def joint_counts(x: Sequence, y: Sequence) -> np.ndarray:
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    counts = np.zeros((x.alphabet_size, y.alphabet_size), dtype=np.int64)
    np.add.at(counts, (x.array(), y.array()), 1)
    return counts


def joint_and_conditional_type(x: Sequence, y: Sequence) -> Tuple[JointType, ConditionalType]:
    counts = joint_counts(x, y)
    return JointType(counts), ConditionalType(counts.copy())


def multinomial(counts: SequenceLike[int]) -> int:
    total = 0
    result = 1
    for c in counts:
        total += int(c)
        result *= math.comb(total, int(c))
    return result


def type_class_size(t: EmpiricalPmf) -> int:
    """N! / prod(counts!) computed exactly."""
    return multinomial(t.counts)


def conditional_type_class_size(target: ConditionalType) -> int:
    """Size of a conditional type class (the fiber) given a fixed conditioning sequence."""
    return math.prod(multinomial(row) for row in target.counts)


def _compositions(n: int, parts: int) -> Iterator[Tuple[int, ...]]:
    if parts == 1:
        yield (n,)
        return
    for first in range(n, -1, -1):
        for rest in _compositions(n - first, parts - 1):
            yield (first,) + rest


def compositions(n: int, parts: int) -> List[Tuple[int, ...]]:
    """All ways to write n as an ordered sum of `parts` nonnegative integers, colex order."""
    return sorted(_compositions(n, parts), key=lambda c: tuple(reversed(c)))


def enumerate_types(N: int, alphabet_size: int) -> List[EmpiricalPmf]:
    """
    All types of length-N sequences, in colexicographic order of the count
    vectors (compare the last count first). Codebook array indexing relies
    on this order being fixed.
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    if alphabet_size < 1:
        raise ValueError(f"alphabet_size must be >= 1, got {alphabet_size}")
    return [EmpiricalPmf(c) for c in compositions(N, alphabet_size)]


def entropy_of_counts(counts) -> float:
    counts = np.asarray(counts, dtype=float).ravel()
    if counts.sum() <= 0:
        return 0.0
    return max(0.0, float(entropy(counts, base=2)))


def empirical_entropy(seq: Sequence) -> float:
    return entropy_of_counts(type_of(seq).counts)


def mutual_information_of_counts(counts) -> float:
    counts = np.asarray(counts, dtype=float)
    value = (entropy_of_counts(counts.sum(axis=1)) + entropy_of_counts(counts.sum(axis=0))
             - entropy_of_counts(counts))
    return max(0.0, value)


def empirical_mutual_information(u: Sequence, y: Sequence) -> float:
    return mutual_information_of_counts(joint_counts(u, y))


def pair_sequences(a: Sequence, b: Sequence) -> Sequence:
    """Flatten (a_i, b_i) pairs to the product alphabet: symbol a_i * |B| + b_i."""
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} vs {len(b)}")
    return Sequence(tuple(a.array() * b.alphabet_size + b.array()),
                    a.alphabet_size * b.alphabet_size)


def _check_conditioning(target: ConditionalType, given: Sequence):
    if target.counts.shape[0] != given.alphabet_size:
        raise ValueError(
            f"conditional type has {target.counts.shape[0]} conditioning symbols, "
            f"sequence alphabet is {given.alphabet_size}")
    given_counts = np.bincount(given.array(), minlength=given.alphabet_size)
    if not np.array_equal(given_counts, target.conditioning_counts):
        raise ValueError(
            f"incompatible conditioning counts: type {tuple(target.conditioning_counts)} "
            f"vs sequence {tuple(given_counts)}")


def sample_conditional_type_class(target: ConditionalType, given: Sequence,
                                  rng: np.random.Generator) -> Sequence:
    """
    Draw uniformly from {y : conditional type of y given `given` equals target}.

    Within each position set {i : given_i = a} a canonical assignment with the
    prescribed counts is shuffled uniformly and independently.
    """
    _check_conditioning(target, given)
    g = given.array()
    out_alphabet = target.counts.shape[1]
    out = np.empty(len(given), dtype=np.int64)
    for a in range(target.counts.shape[0]):
        positions = np.flatnonzero(g == a)
        if positions.size == 0:
            continue
        canonical = np.repeat(np.arange(out_alphabet), target.counts[a])
        out[positions] = rng.permutation(canonical)
    return Sequence(tuple(out), out_alphabet)


def _arrangements(positions: Tuple[int, ...], counts,
                  first_symbol: int = 0) -> Iterator[List[Tuple[int, int]]]:
    # place first_symbol on a subset, then recurse on the remaining positions
    if len(counts) == 1:
        yield [(p, first_symbol) for p in positions]
        return
    for chosen in itertools.combinations(positions, int(counts[0])):
        chosen_set = set(chosen)
        rest = tuple(p for p in positions if p not in chosen_set)
        for tail in _arrangements(rest, counts[1:], first_symbol + 1):
            yield [(p, first_symbol) for p in chosen] + tail


def iter_conditional_type_class(target: ConditionalType, given: Sequence) -> Iterator[Sequence]:
    """Every member of the fiber, in a fixed order."""
    _check_conditioning(target, given)
    g = given.array()
    out_alphabet = target.counts.shape[1]
    per_symbol = []
    for a in range(target.counts.shape[0]):
        positions = tuple(int(p) for p in np.flatnonzero(g == a))
        if positions:
            per_symbol.append(list(_arrangements(positions, tuple(target.counts[a]))))
    for combo in itertools.product(*per_symbol):
        out = np.empty(len(given), dtype=np.int64)
        for assignment in combo:
            for p, symbol in assignment:
                out[p] = symbol
        yield Sequence(tuple(out), out_alphabet)


def _check_permutation(perm, N: int) -> np.ndarray:
    perm = np.asarray(perm, dtype=np.int64)
    if perm.shape != (N,):
        raise ValueError(f"permutation size {perm.size} does not match sequence length {N}")
    if not np.array_equal(np.sort(perm), np.arange(N)):
        raise ValueError(f"not a permutation of 0..{N - 1}: {perm.tolist()}")
    return perm


def apply_permutation(seq: Sequence, perm) -> Sequence:
    """Output i-th symbol is the input symbol at perm[i] (0-based)."""
    p = _check_permutation(perm, len(seq))
    return Sequence(tuple(seq.array()[p]), seq.alphabet_size)


def compose_permutations(outer, inner) -> np.ndarray:
    """Permutation equivalent to applying `inner` first, then `outer`."""
    inner = np.asarray(inner, dtype=np.int64)
    outer = _check_permutation(outer, inner.size)
    return inner[outer]


def invert_permutation(perm) -> np.ndarray:
    perm = np.asarray(perm, dtype=np.int64)
    _check_permutation(perm, perm.size)
    return np.argsort(perm)
