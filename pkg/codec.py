"""
Code constructions: the stacked-binning conditionally-constant-composition
(CCC) code with penalized-MI decoding, its randomly modulated (RM) version, and
randomized nested linear codes over GF(2). Codec handles wrap them behind one
interface so that the warden simulator can run any of them.
"""

import io
import math
import json
import struct
import logging
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.special import gammaln, rel_entr

from config import (
    DEFAULT_SEED, MAX_CODEBOOK_N, MAX_CODEBOOK_N_OTHER, MAX_CODEBOOK_SYMBOLS,
    MAX_CONDITIONAL_CANDIDATES, MAX_EXACT_PERMUTATIONS, MAX_NESTED_N,
)
from channels import CondPmf, DistortionMatrix, Pmf
from gamesolver import best_attack
from typestat import (
    ConditionalType, EmpiricalPmf, Sequence, apply_permutation, compositions, enumerate_types,
    invert_permutation, iter_conditional_type_class, pair_sequences,
    sample_conditional_type_class, type_class_size, type_of,
)

logger = logging.getLogger(__name__)

LN2 = np.log(2.0)
SBCB_MAGIC = b'SBCB'
SBCB_VERSION = 1
_SCORE_TIE = 1e-12
_CANDIDATE_CHUNK = 200_000


class DecodeError(Exception):
    """Decoder could not pick a unique message."""

    def __init__(self, reason: str = 'tie', detail: str = ''):
        self.reason = reason
        super().__init__(f"decode error ({reason}){': ' + detail if detail else ''}")


class CodebookMismatch(ValueError):
    """Input does not fit the codebook (length, alphabet or container format)."""


# ---------------------------------------------------------------------------
# stacked CCC codebook

@dataclass
class CodecParams:
    N: int
    R: float
    L: int
    epsilon: float
    D1: float
    d: DistortionMatrix
    p_S: Pmf
    seed: int = DEFAULT_SEED
    D2: float = 0.0
    design_attack: Optional[CondPmf] = None

    def __post_init__(self):
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if self.R < 0:
            raise ValueError(f"R must be >= 0, got {self.R}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.L < 1:
            raise ValueError(f"L must be >= 1, got {self.L}")
        if self.D1 < 0:
            raise ValueError(f"D1 must be >= 0, got {self.D1}")
        if self.D2 < 0:
            raise ValueError(f"D2 must be >= 0, got {self.D2}")
        if self.p_S.alphabet_size != self.d.q:
            raise ValueError(f"source alphabet {self.p_S.alphabet_size} does not match distortion {self.d.q}")
        cap = MAX_CODEBOOK_N.get(self.q, MAX_CODEBOOK_N_OTHER)
        if self.N > cap:
            raise ValueError(f"N={self.N} exceeds the codebook cap of {cap} for |S|={self.q}")
        if self.design_attack is not None and self.design_attack.matrix.shape[0] != self.q:
            raise ValueError("design attack input alphabet does not match the source")

    @property
    def q(self) -> int:
        return self.p_S.alphabet_size

    @property
    def message_count(self) -> int:
        return max(1, math.ceil(2.0 ** (self.N * self.R) - 1e-9))

    def to_dict(self) -> dict:
        return {
            'N': self.N, 'R': self.R, 'L': self.L, 'epsilon': self.epsilon, 'D1': self.D1,
            'distortion': self.d.to_json(), 'source': self.p_S.to_json(), 'seed': self.seed,
            'D2': self.D2,
            'design_attack': self.design_attack.to_json() if self.design_attack is not None else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'CodecParams':
        p_S = Pmf.from_json(data['source'])
        d = (DistortionMatrix.from_json(data['distortion']) if data.get('distortion')
             else DistortionMatrix.hamming(p_S.alphabet_size))
        attack = CondPmf.from_json(data['design_attack']) if data.get('design_attack') else None
        return cls(N=int(data['N']), R=float(data['R']), L=int(data.get('L', 2)),
                   epsilon=float(data.get('epsilon', 0.05)), D1=float(data['D1']), d=d, p_S=p_S,
                   seed=int(data.get('seed', DEFAULT_SEED)), D2=float(data.get('D2', 0.0)),
                   design_attack=attack)


@dataclass
class TypeArray:
    """Codeword array for one covertext type plus its optimized joint type."""
    type_counts: Tuple[int, ...]
    joint: np.ndarray       # counts[s, x, u]
    codewords: np.ndarray   # uint8 [rows, columns, N]
    rho: float
    i_us: float
    j_value: float = 0.0

    @property
    def rows(self) -> int:
        return self.codewords.shape[0]

    @property
    def u_counts(self) -> np.ndarray:
        return self.joint.sum(axis=(0, 1))

    @property
    def u_given_s(self) -> np.ndarray:
        return self.joint.sum(axis=1)

    @property
    def x_given_us(self) -> np.ndarray:
        # row u * |S| + s, matching pair_sequences(u, s)
        L, q = self.joint.shape[2], self.joint.shape[0]
        return self.joint.transpose(2, 0, 1).reshape(L * q, q)


@dataclass
class StackedCodebook:
    params: CodecParams
    arrays: Dict[Tuple[int, ...], TypeArray] = field(default_factory=dict)

    @property
    def N(self) -> int:
        return self.params.N

    @property
    def q(self) -> int:
        return self.params.q

    @property
    def L(self) -> int:
        return self.params.L

    @property
    def message_count(self) -> int:
        return self.params.message_count

    def array_for(self, counts) -> TypeArray:
        key = tuple(int(c) for c in counts)
        if key not in self.arrays:
            raise CodebookMismatch(f"no codeword array for covertext type {key}")
        return self.arrays[key]

    def check_sequence(self, seq: Sequence, what: str):
        if len(seq) != self.N or seq.alphabet_size != self.q:
            raise CodebookMismatch(
                f"{what} has length {len(seq)} over alphabet {seq.alphabet_size}; "
                f"codebook expects N={self.N}, |S|={self.q}")


def _information_of_counts(counts, N):
    P = counts / float(N)
    pa = P.sum(axis=-1, keepdims=True)
    pb = P.sum(axis=-2, keepdims=True)
    return np.maximum(rel_entr(P, pa * pb).sum(axis=(-1, -2)) / LN2, 0.0)


def conditional_type_candidates(type_counts, params: CodecParams) -> np.ndarray:
    """
    Joint counts[s, x, u] of every conditional type given covertext type
    `type_counts` with x-type equal to the covertext type and total distortion
    at most N * D1. Returned with shape (K, |S|, |S|, L).
    """
    q, L, N = params.q, params.L, params.N
    per_symbol = [np.asarray(compositions(int(n), q * L), dtype=np.int16) for n in type_counts]
    sizes = [len(c) for c in per_symbol]
    total = math.prod(sizes)
    if total > MAX_CONDITIONAL_CANDIDATES:
        raise ValueError(f"{total} conditional types for covertext type {tuple(type_counts)} "
                         f"exceed the cap of {MAX_CONDITIONAL_CANDIDATES}")

    index = np.indices(sizes).reshape(q, -1).T
    stacked = np.stack([per_symbol[s][index[:, s]] for s in range(q)], axis=1)
    candidates = stacked.reshape(-1, q, q, L)

    target = np.asarray(type_counts, dtype=np.int16)
    keep = (candidates.sum(axis=(1, 3)) == target[None, :]).all(axis=1)
    distortion = np.einsum('ksxu,sx->k', candidates.astype(float), params.d.d)
    keep &= distortion <= params.D1 * N + 1e-9
    return candidates[keep]


def _scores_under_attack(candidates, A, N):
    j_all, ius_all = [], []
    for start in range(0, len(candidates), _CANDIDATE_CHUNK):
        chunk = candidates[start:start + _CANDIDATE_CHUNK].astype(float)
        P_uy = np.einsum('ksxu,xy->kuy', chunk, A)
        i_uy = _information_of_counts(P_uy, N)
        i_us = _information_of_counts(chunk.sum(axis=2), N)
        j_all.append(i_uy - i_us)
        ius_all.append(i_us)
    return np.concatenate(j_all), np.concatenate(ius_all)


def worst_case_j(joint, params: CodecParams) -> float:
    """Empirical I(u;y) - I(u;s) of joint counts[s, x, u] under the warden's best attack in A(p_x, D2)."""
    P = np.asarray(joint, dtype=float) / params.N
    p_X = P.sum(axis=(0, 2))
    _, i_uy = best_attack(P.sum(axis=0).T, p_X, params.d.d, params.D2)
    i_us = float(_information_of_counts(P.sum(axis=1), 1))
    return i_uy - i_us


def _select_conditional_type(candidates, params: CodecParams):
    """
    Max empirical J, ties to smaller I(U;S), then first index. J is taken under
    the fixed design attack when one is given, otherwise under the worst attack
    in A(p_x, D2).
    """
    N = params.N
    if params.design_attack is not None:
        j, i_us = _scores_under_attack(candidates, params.design_attack.matrix, N)
    else:
        # identity is always affordable, so its J bounds the worst-case J from above
        upper, i_us = _scores_under_attack(candidates, np.eye(params.q), N)
        j = np.full(len(candidates), -np.inf)
        best = -np.inf
        for k in np.lexsort((np.arange(len(candidates)), i_us, -upper)):
            if upper[k] < best - _SCORE_TIE:
                break
            j[k] = worst_case_j(candidates[k], params)
            best = max(best, j[k])
    near_best = np.flatnonzero(j >= j.max() - _SCORE_TIE)
    k = near_best[np.lexsort((near_best, i_us[near_best]))[0]]
    return candidates[k].astype(np.int64), float(j[k]), float(i_us[k])


def build_stacked_codebook(params: CodecParams, rng: np.random.Generator = None) -> StackedCodebook:
    """
    One array per covertext type: the best feasible conditional type at type
    resolution, depth rho = I*(U;S) + epsilon, and ceil(2^{N rho}) x |M|
    codewords drawn i.i.d. uniform from the optimal U type class.
    """
    rng = np.random.default_rng(params.seed) if rng is None else rng
    cb = StackedCodebook(params)
    columns = params.message_count
    stored = 0
    for t in enumerate_types(params.N, params.q):
        candidates = conditional_type_candidates(t.counts, params)
        joint, j_value, i_us = _select_conditional_type(candidates, params)
        rho = i_us + params.epsilon
        rows = max(1, math.ceil(2.0 ** (params.N * rho) - 1e-9))
        stored += rows * columns * params.N
        if stored > MAX_CODEBOOK_SYMBOLS:
            raise ValueError(f"codebook needs more than {MAX_CODEBOOK_SYMBOLS} stored symbols; "
                             f"reduce N, R or epsilon")
        canonical = np.repeat(np.arange(params.L, dtype=np.uint8), joint.sum(axis=(0, 1)))
        words = rng.permuted(np.tile(canonical, (rows * columns, 1)), axis=1)
        cb.arrays[t.counts] = TypeArray(t.counts, joint, words.reshape(rows, columns, params.N),
                                        rho, i_us, j_value)
        logger.debug(f"type {t.counts}: {len(candidates)} candidates, J={j_value:.4f}, "
                     f"rho={rho:.4f}, rows={rows}")
    logger.info(f"✅ Built stacked codebook: N={params.N}, |M|={columns}, {len(cb.arrays)} arrays, "
                f"{stored} symbols")
    return cb


def _su_counts(s_arr, words, q, L):
    """Joint (s, u) counts for each row of `words` (shape rows x N)."""
    rows = words.shape[0]
    flat = (np.arange(rows)[:, None] * (q * L) + s_arr[None, :] * L + words).ravel()
    return np.bincount(flat, minlength=rows * q * L).reshape(rows, q, L)


def _matching_rows(s: Sequence, arr: TypeArray, m: int, q: int, L: int) -> np.ndarray:
    column = arr.codewords[:, m, :].astype(np.int64)
    counts = _su_counts(s.array(), column, q, L)
    return np.flatnonzero((counts == arr.u_given_s[None]).all(axis=(1, 2)))


def _check_message(m: int, count: int):
    if not 0 <= int(m) < count:
        raise ValueError(f"message {m} out of range [0, {count})")


def ccc_encode(s: Sequence, m: int, cb: StackedCodebook,
               rng: np.random.Generator) -> Tuple[Sequence, bool]:
    """Binning encoder; returns (stegotext, encoder_error)."""
    cb.check_sequence(s, 'covertext')
    _check_message(m, cb.message_count)
    arr = cb.array_for(type_of(s).counts)
    q, L = cb.q, cb.L

    matches = _matching_rows(s, arr, m, q, L)
    encoder_error = matches.size == 0
    if encoder_error:
        logger.debug(f"no row of column {m} matches the covertext; drawing from the U|S fiber")
        u = sample_conditional_type_class(ConditionalType(arr.u_given_s), s, rng)
    else:
        l = int(rng.choice(matches))
        u = Sequence(tuple(arr.codewords[l, m]), L)

    x = sample_conditional_type_class(ConditionalType(arr.x_given_us), pair_sequences(u, s), rng)
    return Sequence(x.symbols, q), encoder_error


def ccc_encoder_law(s: Sequence, m: int, cb: StackedCodebook) -> Dict[int, Fraction]:
    """Exact stegotext law of ccc_encode(s, m) keyed by Sequence.index()."""
    cb.check_sequence(s, 'covertext')
    _check_message(m, cb.message_count)
    arr = cb.array_for(type_of(s).counts)
    q, L = cb.q, cb.L

    matches = _matching_rows(s, arr, m, q, L)
    if matches.size:
        u_weights = [(Sequence(tuple(arr.codewords[l, m]), L), Fraction(1, matches.size)) for l in matches]
    else:
        members = list(iter_conditional_type_class(ConditionalType(arr.u_given_s), s))
        u_weights = [(u, Fraction(1, len(members))) for u in members]

    law: Dict[int, Fraction] = {}
    x_type = ConditionalType(arr.x_given_us)
    for u, weight in u_weights:
        members = list(iter_conditional_type_class(x_type, pair_sequences(u, s)))
        share = weight / len(members)
        for x in members:
            key = Sequence(x.symbols, q).index()
            law[key] = law.get(key, Fraction(0)) + share
    return law


def mpmi_decode(y: Sequence, cb: StackedCodebook) -> int:
    """Column of the codeword maximizing I(u;y) - rho over every array."""
    cb.check_sequence(y, 'received sequence')
    q, L, N = cb.q, cb.L, cb.N
    y_arr = y.array()
    scored = []
    for arr in cb.arrays.values():
        rows, cols, _ = arr.codewords.shape
        words = arr.codewords.reshape(rows * cols, N).astype(np.int64)
        flat = (np.arange(rows * cols)[:, None] * (L * q) + words * q + y_arr[None, :]).ravel()
        counts = np.bincount(flat, minlength=rows * cols * L * q).reshape(rows * cols, L, q)
        scored.append((_information_of_counts(counts, N) - arr.rho, cols))

    best_score = max(float(scores.max()) for scores, _ in scored)
    best_columns = set()
    for scores, cols in scored:
        winners = np.flatnonzero(scores >= best_score - _SCORE_TIE)
        best_columns.update(int(w % cols) for w in winners)
    if len(best_columns) != 1:
        raise DecodeError('tie', f"{len(best_columns)} columns reach score {best_score:.6f}")
    return best_columns.pop()


# ---------------------------------------------------------------------------
# random modulation

@dataclass(frozen=True)
class RmKey:
    """Secret permutation; 0-based, acting as output[i] = input[perm[i]]."""
    perm: Tuple[int, ...]

    def __post_init__(self):
        perm = tuple(int(p) for p in self.perm)
        if sorted(perm) != list(range(len(perm))):
            raise ValueError(f"not a permutation of 0..{len(perm) - 1}: {perm}")
        object.__setattr__(self, 'perm', perm)

    @classmethod
    def random(cls, N: int, rng: np.random.Generator) -> 'RmKey':
        return cls(tuple(rng.permutation(N)))

    @classmethod
    def identity(cls, N: int) -> 'RmKey':
        return cls(tuple(range(N)))

    @property
    def N(self) -> int:
        return len(self.perm)

    def inverse(self) -> 'RmKey':
        return RmKey(tuple(invert_permutation(self.perm)))

    def apply(self, seq: Sequence) -> Sequence:
        return apply_permutation(seq, self.perm)

    def to_list(self) -> List[int]:
        return list(self.perm)


def rm_encode(s: Sequence, m: int, cb: StackedCodebook, key: RmKey, rng: np.random.Generator) -> Sequence:
    x, _ = ccc_encode(key.apply(s), m, cb, rng)
    return key.inverse().apply(x)


def rm_decode(y: Sequence, cb: StackedCodebook, key: RmKey) -> int:
    return mpmi_decode(key.apply(y), cb)


def rm_key_entropy_rate(N: int) -> float:
    """(1/N) log2 N! bits per symbol."""
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    return float(gammaln(N + 1) / LN2 / N)


# ---------------------------------------------------------------------------
# nested linear codes over GF(2)

def _gf2_rref(M):
    M = np.asarray(M, dtype=np.uint8).copy() % 2
    pivots = []
    row = 0
    for col in range(M.shape[1]):
        hits = np.flatnonzero(M[row:, col]) + row
        if hits.size == 0:
            continue
        M[[row, hits[0]]] = M[[hits[0], row]]
        others = np.flatnonzero(M[:, col])
        others = others[others != row]
        M[others] ^= M[row]
        pivots.append(col)
        row += 1
        if row == M.shape[0]:
            break
    return M[:row], pivots


def _gf2_rank(M) -> int:
    M = np.atleast_2d(np.asarray(M, dtype=np.uint8))
    if M.size == 0:
        return 0
    return len(_gf2_rref(M)[1])


def _gf2_nullspace(G, N: int) -> np.ndarray:
    """Rows spanning {h : G h = 0}, shape (N - rank, N)."""
    if G.shape[0] == 0:
        return np.eye(N, dtype=np.uint8)
    R, pivots = _gf2_rref(G)
    free = [c for c in range(N) if c not in pivots]
    H = np.zeros((len(free), N), dtype=np.uint8)
    for i, f in enumerate(free):
        H[i, f] = 1
        for r, p in enumerate(pivots):
            H[i, p] = R[r, f]
    return H


def _bits_to_int(bits) -> np.ndarray:
    bits = np.atleast_2d(np.asarray(bits, dtype=np.int64))
    powers = 1 << np.arange(bits.shape[1] - 1, -1, -1, dtype=np.int64)
    return bits @ powers


def _int_to_bits(value: int, N: int) -> np.ndarray:
    return np.array([(int(value) >> (N - 1 - i)) & 1 for i in range(N)], dtype=np.uint8)


def _span(G) -> np.ndarray:
    """All codewords as integers; entry i is the combination with coefficient bits of i."""
    k = G.shape[0]
    if k == 0:
        return np.zeros(1, dtype=np.int64)
    coeffs = ((np.arange(2 ** k)[:, None] >> np.arange(k - 1, -1, -1)[None, :]) & 1).astype(np.int64)
    return _bits_to_int((coeffs @ G.astype(np.int64)) % 2)


def _all_vectors(N: int) -> np.ndarray:
    v = np.arange(2 ** N, dtype=np.int64)
    return ((v[:, None] >> np.arange(N - 1, -1, -1)[None, :]) & 1).astype(np.int64)


def _coset_leaders(H, N: int) -> np.ndarray:
    """Minimum-weight (then smallest) vector of every coset, indexed by syndrome."""
    vectors = np.arange(2 ** N, dtype=np.int64)
    if H.shape[0] == 0:
        return np.zeros(1, dtype=np.int64)
    syndromes = _bits_to_int((_all_vectors(N) @ H.T.astype(np.int64)) % 2)
    weights = np.bitwise_count(vectors)
    order = np.lexsort((vectors, weights, syndromes))
    first = np.r_[True, syndromes[order][1:] != syndromes[order][:-1]]
    leaders = np.empty(2 ** H.shape[0], dtype=np.int64)
    leaders[syndromes[order][first]] = vectors[order][first]
    return leaders


class NestedLinearCode:
    """
    Source code C1 nested in channel code C2, both linear over GF(2). Messages
    index the C1-cosets inside C2; keys are the coset leaders of C2.
    """

    def __init__(self, N: int, G2, G1):
        if not 1 <= N <= MAX_NESTED_N:
            raise ValueError(f"N must be in [1, {MAX_NESTED_N}], got {N}")
        self.N = N
        self.G2 = np.asarray(G2, dtype=np.uint8).reshape(-1, N) % 2
        self.G1 = np.asarray(G1, dtype=np.uint8).reshape(-1, N) % 2
        self.k2 = _gf2_rank(self.G2)
        self.k1 = _gf2_rank(self.G1)
        if self.k2 != self.G2.shape[0] or self.k1 != self.G1.shape[0]:
            raise ValueError("generator rows must be linearly independent")
        if _gf2_rank(np.vstack([self.G2, self.G1])) != self.k2:
            raise ValueError("C1 is not a subcode of C2")

        basis = self.G1.copy()
        extra = []
        for row in self.G2:
            trial = np.vstack([basis, row[None, :]])
            if _gf2_rank(trial) > basis.shape[0]:
                basis = trial
                extra.append(row)
        self.Gm = np.array(extra, dtype=np.uint8).reshape(-1, N)

        self.H = _gf2_nullspace(self.G2, N)
        self.c1 = np.sort(_span(self.G1))
        self.c2 = np.sort(_span(self.G2))
        self.coset_reps = _span(self.Gm)
        self.message_of = {}
        for m, rep in enumerate(self.coset_reps):
            for c in self.c1:
                self.message_of[int(c ^ rep)] = m
        self.leaders = _coset_leaders(self.H, N)
        self._leader_set = set(int(v) for v in self.leaders)
        logger.debug(f"nested code N={N}: k2={self.k2}, k1={self.k1}, {len(self.leaders)} coset leaders")

    @classmethod
    def from_generators(cls, G2, G1=None) -> 'NestedLinearCode':
        G2 = np.atleast_2d(np.asarray(G2, dtype=np.uint8))
        N = G2.shape[1]
        G1 = np.zeros((0, N), dtype=np.uint8) if G1 is None else np.asarray(G1, dtype=np.uint8)
        return cls(N, G2, G1)

    @classmethod
    def repetition(cls, N: int) -> 'NestedLinearCode':
        """C2 = {0^N, 1^N}, C1 = {0^N}: two messages, 2^{N-1} keys."""
        return cls(N, np.ones((1, N), dtype=np.uint8), np.zeros((0, N), dtype=np.uint8))

    @classmethod
    def full_space(cls, N: int, source_generator=None) -> 'NestedLinearCode':
        """C2 = F_2^N, so the only coset leader is 0; C1 defaults to the repetition code."""
        G1 = np.ones((1, N), dtype=np.uint8) if source_generator is None else source_generator
        return cls(N, np.eye(N, dtype=np.uint8), G1)

    @property
    def message_count(self) -> int:
        return 2 ** (self.k2 - self.k1)

    @property
    def channel_code_rate(self) -> Fraction:
        return Fraction(self.k2, self.N)

    @property
    def message_rate(self) -> Fraction:
        return Fraction(self.k2 - self.k1, self.N)

    @property
    def key_entropy_rate(self) -> Fraction:
        """log2 |Omega_2| / N = 1 - rate(C2)."""
        return Fraction(self.N - self.k2, self.N)

    def covering_radius(self) -> int:
        H1 = _gf2_nullspace(self.G1, self.N)
        return int(np.bitwise_count(_coset_leaders(H1, self.N)).max())

    def leader_sequences(self) -> List[Sequence]:
        return [Sequence(tuple(_int_to_bits(v, self.N)), 2) for v in self.leaders]

    def check_key(self, key: Sequence) -> int:
        value = self.vector_of(key, 'key')
        if value not in self._leader_set:
            raise ValueError(f"{key} is not a coset leader of C2")
        return value

    def vector_of(self, seq: Sequence, what: str) -> int:
        if len(seq) != self.N or seq.alphabet_size != 2:
            raise ValueError(f"{what} must be a binary sequence of length {self.N}")
        return int(_bits_to_int(seq.array())[0])


def nested_encode(s: Sequence, m: int, code: NestedLinearCode, key: Sequence,
                  rng: np.random.Generator = None) -> Sequence:
    """x = f0(m, s xor k) xor k, f0 quantizing onto the m-th C1-coset of C2."""
    k = code.check_key(key)
    v = code.vector_of(s, 'covertext') ^ k
    _check_message(m, code.message_count)
    coset = code.c1 ^ code.coset_reps[m]
    errors = coset ^ v
    best = np.lexsort((errors, np.bitwise_count(errors)))[0]
    return Sequence(tuple(_int_to_bits(int(coset[best]) ^ k, code.N)), 2)


def nested_decode(y: Sequence, code: NestedLinearCode, key: Sequence) -> int:
    """Nearest C2 codeword to y xor k (ties to the smallest), then its C1-coset index."""
    k = code.check_key(key)
    z = code.vector_of(y, 'received sequence') ^ k
    distances = np.bitwise_count(code.c2 ^ z)
    nearest = int(code.c2[np.lexsort((code.c2, distances))[0]])
    return code.message_of[nearest]


# ---------------------------------------------------------------------------
# codec handles

class CccPrototype:
    """Unkeyed CCC code over a stacked codebook."""
    keyed = False

    def __init__(self, codebook: StackedCodebook):
        self.codebook = codebook

    @property
    def block_length(self) -> int:
        return self.codebook.N

    @property
    def alphabet_size(self) -> int:
        return self.codebook.q

    @property
    def message_count(self) -> int:
        return self.codebook.message_count

    @property
    def source(self) -> Pmf:
        return self.codebook.params.p_S

    def keys(self):
        return [None]

    def random_key(self, rng):
        return None

    def encode(self, s, m, key, rng):
        return ccc_encode(s, m, self.codebook, rng)[0]

    def decode(self, y, key):
        return mpmi_decode(y, self.codebook)

    def encoder_law(self, s, m, key):
        return ccc_encoder_law(s, m, self.codebook)


class SortingPrototype:
    """Type-preserving but insecure control: outputs the sorted covertext, one message."""
    keyed = False
    message_count = 1

    def __init__(self, N: int, source: Pmf):
        self.block_length = N
        self.alphabet_size = source.alphabet_size
        self.source = source

    def keys(self):
        return [None]

    def random_key(self, rng):
        return None

    def encode(self, s, m, key, rng):
        return Sequence(tuple(sorted(s.symbols)), s.alphabet_size)

    def decode(self, y, key):
        return 0

    def encoder_law(self, s, m, key):
        return {self.encode(s, m, key, None).index(): Fraction(1)}


class RmCode:
    """Randomly modulated code: x = pi^-1 f(pi s, m), decoded as phi(pi y)."""
    keyed = True

    def __init__(self, prototype):
        self.prototype = prototype

    @property
    def block_length(self) -> int:
        return self.prototype.block_length

    @property
    def alphabet_size(self) -> int:
        return self.prototype.alphabet_size

    @property
    def message_count(self) -> int:
        return self.prototype.message_count

    @property
    def source(self) -> Pmf:
        return self.prototype.source

    @property
    def key_entropy_rate(self) -> float:
        return rm_key_entropy_rate(self.block_length)

    def keys(self) -> List[RmKey]:
        N = self.block_length
        if math.factorial(N) > MAX_EXACT_PERMUTATIONS:
            raise ValueError(f"{N}! permutations exceed the enumeration cap of {MAX_EXACT_PERMUTATIONS}")
        return [RmKey(p) for p in itertools.permutations(range(N))]

    def random_key(self, rng) -> RmKey:
        return RmKey.random(self.block_length, rng)

    def encode(self, s, m, key: RmKey, rng):
        if isinstance(self.prototype, CccPrototype):
            return rm_encode(s, m, self.prototype.codebook, key, rng)
        return key.inverse().apply(self.prototype.encode(key.apply(s), m, None, rng))

    def decode(self, y, key: RmKey):
        if isinstance(self.prototype, CccPrototype):
            return rm_decode(y, self.prototype.codebook, key)
        return self.prototype.decode(key.apply(y), None)

    def encoder_law(self, s, m, key: RmKey):
        inverse = key.inverse()
        q, N = self.alphabet_size, self.block_length
        law = {}
        for index, weight in self.prototype.encoder_law(key.apply(s), m, None).items():
            x = inverse.apply(Sequence.from_index(index, N, q)).index()
            law[x] = law.get(x, Fraction(0)) + weight
        return law


class NestedCodec:
    keyed = True
    alphabet_size = 2

    def __init__(self, code: NestedLinearCode, source: Pmf = None):
        self.code = code
        self.source = Pmf.uniform(2) if source is None else source
        if self.source.alphabet_size != 2:
            raise ValueError("nested linear codes need a binary source")

    @property
    def block_length(self) -> int:
        return self.code.N

    @property
    def message_count(self) -> int:
        return self.code.message_count

    def keys(self) -> List[Sequence]:
        return self.code.leader_sequences()

    def random_key(self, rng) -> Sequence:
        keys = self.keys()
        return keys[int(rng.integers(len(keys)))]

    def encode(self, s, m, key, rng):
        return nested_encode(s, m, self.code, key, rng)

    def decode(self, y, key):
        return nested_decode(y, self.code, key)

    def encoder_law(self, s, m, key):
        return {nested_encode(s, m, self.code, key).index(): Fraction(1)}


class FixedKeyCode:
    """A keyed codec pinned to one key (no key secrecy)."""

    def __init__(self, codec, key):
        self.codec = codec
        self.key = key
        self.keyed = False

    def __getattr__(self, name):
        return getattr(self.codec, name)

    def keys(self):
        return [self.key]

    def random_key(self, rng):
        return self.key

    def encode(self, s, m, key, rng):
        return self.codec.encode(s, m, self.key, rng)

    def decode(self, y, key):
        return self.codec.decode(y, self.key)

    def encoder_law(self, s, m, key):
        return self.codec.encoder_law(s, m, self.key)


# ---------------------------------------------------------------------------
# SBCB container

def _write_codebook(cb: StackedCodebook, f):
    params = json.dumps(cb.params.to_dict()).encode('utf-8')
    f.write(SBCB_MAGIC)
    f.write(struct.pack('<HI', SBCB_VERSION, len(params)))
    f.write(params)
    f.write(struct.pack('<I', len(cb.arrays)))
    for counts, arr in cb.arrays.items():
        q, _, L = arr.joint.shape
        f.write(struct.pack('<H', q))
        f.write(struct.pack(f'<{q}I', *counts))
        f.write(struct.pack(f'<{arr.joint.size}I', *arr.joint.ravel().tolist()))
        f.write(struct.pack('<dd', arr.rho, arr.i_us))
        rows, cols, N = arr.codewords.shape
        f.write(struct.pack('<III', rows, cols, N))
        payload = np.ascontiguousarray(arr.codewords, dtype=np.uint8).tobytes()
        f.write(struct.pack('<I', len(payload)))
        f.write(payload)


def _read_exact(f, n: int) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise CodebookMismatch("truncated codebook container")
    return data


def _read_codebook(f) -> StackedCodebook:
    if _read_exact(f, 4) != SBCB_MAGIC:
        raise CodebookMismatch("not an SBCB codebook container")
    version, params_len = struct.unpack('<HI', _read_exact(f, 6))
    if version != SBCB_VERSION:
        raise CodebookMismatch(f"unsupported SBCB version {version}")
    params = CodecParams.from_dict(json.loads(_read_exact(f, params_len).decode('utf-8')))
    cb = StackedCodebook(params)
    (count,) = struct.unpack('<I', _read_exact(f, 4))
    for _ in range(count):
        (q,) = struct.unpack('<H', _read_exact(f, 2))
        counts = struct.unpack(f'<{q}I', _read_exact(f, 4 * q))
        size = q * q * params.L
        joint = np.array(struct.unpack(f'<{size}I', _read_exact(f, 4 * size)), dtype=np.int64)
        rho, i_us = struct.unpack('<dd', _read_exact(f, 16))
        rows, cols, N = struct.unpack('<III', _read_exact(f, 12))
        (nbytes,) = struct.unpack('<I', _read_exact(f, 4))
        if nbytes != rows * cols * N:
            raise CodebookMismatch("codeword payload size does not match its header")
        words = np.frombuffer(_read_exact(f, nbytes), dtype=np.uint8).reshape(rows, cols, N).copy()
        cb.arrays[tuple(counts)] = TypeArray(tuple(counts), joint.reshape(q, q, params.L), words, rho, i_us)
    return cb


def save_codebook(cb: StackedCodebook, path) -> None:
    with open(path, 'wb') as f:
        _write_codebook(cb, f)
    logger.info(f"✅ Saved codebook to {path}")


def load_codebook(path) -> StackedCodebook:
    with open(path, 'rb') as f:
        cb = _read_codebook(f)
    logger.info(f"✅ Loaded codebook from {path} ({len(cb.arrays)} arrays)")
    return cb


def codebook_to_bytes(cb: StackedCodebook) -> bytes:
    buffer = io.BytesIO()
    _write_codebook(cb, buffer)
    return buffer.getvalue()


def codebook_from_bytes(data: bytes) -> StackedCodebook:
    return _read_codebook(io.BytesIO(data))


def codebook_to_dict(cb: StackedCodebook) -> dict:
    """JSON debug dump; codewords as digit strings."""
    return {
        'params': cb.params.to_dict(),
        'arrays': [
            {
                'type': list(counts),
                'joint': arr.joint.tolist(),
                'rho': arr.rho,
                'i_us': arr.i_us,
                'type_class_size': type_class_size(EmpiricalPmf(tuple(arr.u_counts))),
                'codewords': [[''.join(str(int(v)) for v in arr.codewords[r, c])
                               for c in range(arr.codewords.shape[1])]
                              for r in range(arr.codewords.shape[0])],
            }
            for counts, arr in cb.arrays.items()
        ],
    }
