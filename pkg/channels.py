"""
PMFs, conditional PMFs, distortion, the covert/attack feasible sets and the
J functional I(U;Y) - I(U;S).
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import entr, rel_entr

from config import PMF_TOL, FEASIBILITY_TOL

logger = logging.getLogger(__name__)

LN2 = np.log(2.0)


def binary_entropy(p: float) -> float:
    """h(p) in bits."""
    return float((entr(p) + entr(1.0 - p)) / LN2)


def mutual_information(joint) -> float:
    """I between the two axes of a joint PMF matrix, in bits."""
    joint = np.asarray(joint, dtype=float)
    product = np.outer(joint.sum(axis=1), joint.sum(axis=0))
    return max(0.0, float(rel_entr(joint, product).sum() / LN2))


def kl_divergence(p, q) -> float:
    return float(rel_entr(np.asarray(p, dtype=float), np.asarray(q, dtype=float)).sum() / LN2)


@dataclass(frozen=True, eq=False)
class Pmf:
    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size < 1:
            raise ValueError("a PMF needs a nonempty probability vector")
        if (probs < -PMF_TOL).any():
            raise ValueError(f"negative probability in {probs.tolist()}")
        if abs(probs.sum() - 1.0) > PMF_TOL:
            raise ValueError(f"probabilities sum to {probs.sum():.15g}, not 1")
        probs = np.clip(probs, 0.0, None)
        probs.setflags(write=False)
        object.__setattr__(self, 'probs', probs)

    @classmethod
    def uniform(cls, q: int) -> 'Pmf':
        return cls(np.full(q, 1.0 / q))

    @classmethod
    def bernoulli(cls, p: float) -> 'Pmf':
        """Bern(p) as the PMF (1 - p, p)."""
        return cls(np.array([1.0 - p, p]))

    @property
    def alphabet_size(self) -> int:
        return self.probs.size

    def is_uniform(self, tol: float = FEASIBILITY_TOL) -> bool:
        return bool(np.all(np.abs(self.probs - 1.0 / self.alphabet_size) <= tol))

    def entropy(self) -> float:
        return float(entr(self.probs).sum() / LN2)

    def to_json(self) -> dict:
        return {'alphabet': self.alphabet_size, 'probs': self.probs.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> 'Pmf':
        pmf = cls(np.asarray(data['probs'], dtype=float))
        if 'alphabet' in data and int(data['alphabet']) != pmf.alphabet_size:
            raise ValueError(f"alphabet {data['alphabet']} does not match {pmf.alphabet_size} probabilities")
        return pmf

    def __eq__(self, other):
        return isinstance(other, Pmf) and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash(self.probs.tobytes())


@dataclass(frozen=True, eq=False)
class CondPmf:
    """Row-stochastic matrix: matrix[i, j] = p(j | i)."""
    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=float)
        if matrix.ndim != 2 or matrix.size == 0:
            raise ValueError("a conditional PMF needs a nonempty matrix")
        if (matrix < -PMF_TOL).any():
            raise ValueError("negative entry in conditional PMF")
        row_sums = matrix.sum(axis=1)
        if np.any(np.abs(row_sums - 1.0) > PMF_TOL):
            raise ValueError(f"rows sum to {row_sums.tolist()}, not 1")
        matrix = np.clip(matrix, 0.0, None)
        matrix.setflags(write=False)
        object.__setattr__(self, 'matrix', matrix)

    @classmethod
    def identity(cls, q: int) -> 'CondPmf':
        return cls(np.eye(q))

    @classmethod
    def bsc(cls, p: float) -> 'CondPmf':
        return cls(np.array([[1.0 - p, p], [p, 1.0 - p]]))

    @classmethod
    def uniform(cls, n_in: int, n_out: int) -> 'CondPmf':
        return cls(np.full((n_in, n_out), 1.0 / n_out))

    @classmethod
    def cyclic(cls, first_row) -> 'CondPmf':
        """Toeplitz channel p(y|x) = r[(y - x) mod q]."""
        r = np.asarray(first_row, dtype=float)
        return cls(np.array([np.roll(r, x) for x in range(r.size)]))

    @property
    def input_alphabet(self) -> int:
        return self.matrix.shape[0]

    @property
    def output_alphabet(self) -> int:
        return self.matrix.shape[1]

    @property
    def rows(self):
        return [Pmf(row) for row in self.matrix]

    def marginal(self, p_in: Pmf) -> Pmf:
        if p_in.alphabet_size != self.input_alphabet:
            raise ValueError(f"input PMF over {p_in.alphabet_size} symbols, channel expects {self.input_alphabet}")
        out = p_in.probs @ self.matrix
        return Pmf(out / out.sum())

    def is_cyclic_toeplitz(self, tol: float = FEASIBILITY_TOL) -> bool:
        q = self.input_alphabet
        if self.output_alphabet != q:
            return False
        x, y = np.meshgrid(np.arange(q), np.arange(q), indexing='ij')
        return bool(np.all(np.abs(self.matrix - self.matrix[0, (y - x) % q]) <= tol))

    def to_json(self) -> dict:
        return {'rows': self.matrix.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> 'CondPmf':
        return cls(np.asarray(data['rows'], dtype=float))

    def __eq__(self, other):
        return isinstance(other, CondPmf) and np.array_equal(self.matrix, other.matrix)

    def __hash__(self):
        return hash(self.matrix.tobytes())


@dataclass(frozen=True, eq=False)
class DistortionMatrix:
    d: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError("distortion matrix must be square")
        if (d < 0).any():
            raise ValueError("distortion must be nonnegative")
        if np.any(np.diag(d) != 0):
            raise ValueError("distortion must vanish on the diagonal")
        d.setflags(write=False)
        object.__setattr__(self, 'd', d)

    @classmethod
    def hamming(cls, q: int) -> 'DistortionMatrix':
        return cls(1.0 - np.eye(q))

    @classmethod
    def cyclic(cls, first_row) -> 'DistortionMatrix':
        """d(i, j) = first_row[(j - i) mod q]."""
        r = np.asarray(first_row, dtype=float)
        return cls(np.array([np.roll(r, i) for i in range(r.size)]))

    @property
    def q(self) -> int:
        return self.d.shape[0]

    @property
    def d_max(self) -> float:
        return float(self.d.max())

    @property
    def is_cyclic(self) -> bool:
        i, j = np.meshgrid(np.arange(self.q), np.arange(self.q), indexing='ij')
        return bool(np.array_equal(self.d, self.d[0, (j - i) % self.q]))

    def to_json(self) -> dict:
        return {'d': self.d.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> 'DistortionMatrix':
        return cls(np.asarray(data['d'], dtype=float))


class CovertChannel:
    """
    Joint conditional law p_{XU|S}, stored as law[s, x, u].
    """

    def __init__(self, law):
        law = np.asarray(law, dtype=float)
        if law.ndim != 3:
            raise ValueError("covert channel law must be indexed [s, x, u]")
        if (law < -PMF_TOL).any():
            raise ValueError("negative entry in covert channel")
        sums = law.sum(axis=(1, 2))
        if np.any(np.abs(sums - 1.0) > PMF_TOL):
            raise ValueError(f"covert channel rows sum to {sums.tolist()}, not 1")
        self.law = np.clip(law, 0.0, None)

    @classmethod
    def from_x_given_s(cls, p_X_given_S: CondPmf) -> 'CovertChannel':
        """U = X embedding."""
        m = p_X_given_S.matrix
        return cls(m[:, :, None] * np.eye(m.shape[1])[None, :, :])

    @classmethod
    def trivial(cls, q: int, L: int = 1) -> 'CovertChannel':
        """X = S with a constant auxiliary symbol."""
        law = np.zeros((q, q, L))
        law[np.arange(q), np.arange(q), 0] = 1.0
        return cls(law)

    @property
    def L(self) -> int:
        return self.law.shape[2]

    @property
    def source_alphabet(self) -> int:
        return self.law.shape[0]

    @property
    def x_given_s(self) -> CondPmf:
        return CondPmf(self.law.sum(axis=2))

    @property
    def u_given_s(self) -> CondPmf:
        return CondPmf(self.law.sum(axis=1))

    def joint(self, p_S: Pmf) -> np.ndarray:
        return p_S.probs[:, None, None] * self.law

    def to_json(self) -> dict:
        return {'law': self.law.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> 'CovertChannel':
        return cls(np.asarray(data['law'], dtype=float))


def _check_square(p_S: Pmf, ch: CondPmf, d: DistortionMatrix):
    if not (p_S.alphabet_size == ch.input_alphabet == d.q and ch.output_alphabet == d.q):
        raise ValueError(
            f"alphabet mismatch: pmf {p_S.alphabet_size}, channel "
            f"{ch.input_alphabet}x{ch.output_alphabet}, distortion {d.q}x{d.q}")


def expected_distortion(p_S: Pmf, p_X_given_S: CondPmf, d: DistortionMatrix) -> float:
    _check_square(p_S, p_X_given_S, d)
    return float((p_S.probs[:, None] * p_X_given_S.matrix * d.d).sum())


def sequence_distortion(s, x, d: DistortionMatrix) -> float:
    """Per-symbol distortion d^N(s, x)."""
    s_arr, x_arr = np.asarray(s.array()), np.asarray(x.array())
    if s_arr.shape != x_arr.shape:
        raise ValueError(f"length mismatch: {s_arr.size} vs {x_arr.size}")
    return float(d.d[s_arr, x_arr].sum() / s_arr.size)


def steg_feasible(p_X_given_S: CondPmf, p_S: Pmf, d: DistortionMatrix, D1: float) -> bool:
    try:
        distortion = expected_distortion(p_S, p_X_given_S, d)
    except ValueError:
        return False
    p_X = p_S.probs @ p_X_given_S.matrix
    return bool(distortion <= D1 + FEASIBILITY_TOL
                and np.all(np.abs(p_X - p_S.probs) <= FEASIBILITY_TOL))


def attack_feasible(p_Y_given_X: CondPmf, p_X: Pmf, d: DistortionMatrix, D2: float) -> bool:
    try:
        distortion = expected_distortion(p_X, p_Y_given_X, d)
    except ValueError:
        return False
    return bool(distortion <= D2 + FEASIBILITY_TOL)


def _information(joint2d: np.ndarray) -> float:
    product = joint2d.sum(axis=1)[:, None] * joint2d.sum(axis=0)[None, :]
    return float(rel_entr(joint2d, product).sum() / LN2)


def j_terms(p_S, law, attack):
    """
    (I(U;Y), I(U;S)) for arrays: p_S[s], law[s, x, u] and an attack given either
    as p(y|x) with shape (X, Y) or as p(y|x,u,s) with shape (S, X, U, Y).
    """
    p_S = np.asarray(p_S, dtype=float)
    law = np.asarray(law, dtype=float)
    attack = np.asarray(attack, dtype=float)
    P = p_S[:, None, None] * law
    if attack.ndim == 2:
        P_uy = np.einsum('sxu,xy->uy', P, attack)
    else:
        P_uy = np.einsum('sxu,sxuy->uy', P, attack)
    P_su = P.sum(axis=1)
    return max(0.0, _information(P_uy)), max(0.0, _information(P_su))


def j_functional(p_S: Pmf, cc: CovertChannel, p_Y_given_X) -> float:
    """J = I(U;Y) - I(U;S) under the Markov chain (U,S) -> X -> Y."""
    attack = p_Y_given_X.matrix if isinstance(p_Y_given_X, CondPmf) else np.asarray(p_Y_given_X, dtype=float)
    if cc.source_alphabet != p_S.alphabet_size:
        raise ValueError(f"alphabet mismatch: source {p_S.alphabet_size}, channel {cc.source_alphabet}")
    if attack.ndim == 2 and attack.shape[0] != cc.law.shape[1]:
        raise ValueError(f"alphabet mismatch: attack input {attack.shape[0]}, stegotext {cc.law.shape[1]}")
    if attack.ndim == 4 and attack.shape[:3] != cc.law.shape:
        raise ValueError(f"attack shape {attack.shape} does not match covert channel {cc.law.shape}")
    i_uy, i_us = j_terms(p_S.probs, cc.law, attack)
    return i_uy - i_us


def lift_law(law: np.ndarray, q: int) -> np.ndarray:
    """law_out[s, x, q*v + i] = law[(s - i) % q, (x - i) % q, v] / q."""
    L = law.shape[2]
    out = np.zeros((q, q, q * L))
    for i in range(q):
        out[:, :, i::q] = np.roll(law, (i, i), axis=(0, 1)) / q
    return out


def lift_adjoint(grad_out: np.ndarray, q: int) -> np.ndarray:
    """Adjoint of lift_law: pulls a gradient on the lifted law back to the base law."""
    out = np.zeros((q, q, grad_out.shape[2] // q))
    for i in range(q):
        out += np.roll(grad_out[:, :, i::q], (-i, -i), axis=(0, 1)) / q
    return out


def cyclic_lift(p_XV_given_S: CovertChannel, q: int, p_S: Pmf = None) -> CovertChannel:
    """Lift a covert channel with auxiliary size L to one with size q*L and uniform stegotext marginal."""
    if p_S is not None and (p_S.alphabet_size != q or not p_S.is_uniform()):
        raise ValueError("cyclic lift requires a uniform source over Z_q")
    if p_XV_given_S.law.shape[:2] != (q, q):
        raise ValueError(f"covert channel is over {p_XV_given_S.law.shape[:2]}, expected ({q}, {q})")

    lifted = CovertChannel(lift_law(p_XV_given_S.law, q))

    uniform = np.full(q, 1.0 / q)
    p_V = uniform @ p_XV_given_S.law.sum(axis=1)
    p_U = uniform @ lifted.law.sum(axis=1)
    p_X = uniform @ lifted.law.sum(axis=2)
    if not (np.allclose(p_U, np.repeat(p_V, q) / q, atol=FEASIBILITY_TOL)
            and np.allclose(p_X, uniform, atol=FEASIBILITY_TOL)):
        logger.warning("⚠️ Lifted channel failed its marginal checks")
    return lifted


def cyclic_attack_feasible(p_Y_given_X: CondPmf, d: DistortionMatrix, D2: float) -> bool:
    """
    Membership in the cyclic attack class: Toeplitz p(y|x) = p((y-x) mod q | 0)
    with distortion sum_y p(y|0) d(0,y) <= D2, which is the expected
    distortion under any input PMF. The bound is on that row sum itself, with
    no 1/q factor in front.
    """
    if not d.is_cyclic:
        raise ValueError("cyclic attack class needs a cyclic distortion matrix")
    if p_Y_given_X.input_alphabet != d.q or p_Y_given_X.output_alphabet != d.q:
        return False
    if not p_Y_given_X.is_cyclic_toeplitz():
        return False
    return bool(p_Y_given_X.matrix[0] @ d.d[0] <= D2 + FEASIBILITY_TOL)


def shift_average_attack(p_Y_given_X: CondPmf, q: int) -> CondPmf:
    """Average of the q cyclic shifts p^m(y|x) = p((y-m) mod q | (x-m) mod q)."""
    m = p_Y_given_X.matrix
    if m.shape != (q, q):
        raise ValueError(f"expected a {q}x{q} channel, got {m.shape}")
    avg = sum(np.roll(m, (k, k), axis=(0, 1)) for k in range(q)) / q
    return CondPmf(avg / avg.sum(axis=1, keepdims=True))
