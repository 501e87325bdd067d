"""
Numerical solvers for steganographic capacity and random-coding error exponents.

The capacity game is max over covert channels p_{XU|S} of min over memoryless
attacks p_{Y|X} of J = I(U;Y) - I(U;S). The inner problem is convex in the
attack and is solved exactly for binary alphabets (line search on the active
distortion face) and by SLSQP otherwise. The outer problem is not concave in
general, so it is solved by multistart SLSQP with Danskin gradients, and each
result carries a certificate gap from a best-response check.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.optimize import minimize, minimize_scalar
from scipy.special import entr, logsumexp, rel_entr

from config import (
    ATTACK_GRID_POINTS, DEFAULT_MAX_ITERS, DEFAULT_MULTISTARTS, DEFAULT_SEED,
    DEFAULT_THREADS, DEFAULT_TOL, EXPONENT_MAX_AUX, EXPONENT_SOURCE_ALPHABET,
    EXPONENT_SOURCE_GRID, FEASIBILITY_TOL, MAX_AUX_ALPHABET, MAX_SOURCE_ALPHABET,
    PASSIVE_EXPONENT_GRID, SUBGRADIENT_STEPS,
)
from channels import (
    CondPmf, CovertChannel, DistortionMatrix, Pmf, binary_entropy, kl_divergence,
    lift_adjoint, lift_law,
)

logger = logging.getLogger(__name__)

LN2 = np.log(2.0)
_FLOOR = 1e-15


@dataclass
class GameConfig:
    p_S: Pmf
    d: DistortionMatrix
    D1: float
    D2: float = 0.0
    L: int = 2
    tol: float = DEFAULT_TOL
    max_iters: int = DEFAULT_MAX_ITERS
    multistarts: int = DEFAULT_MULTISTARTS
    seed: int = DEFAULT_SEED
    threads: int = DEFAULT_THREADS

    def __post_init__(self):
        if self.D1 < 0 or self.D2 < 0:
            raise ValueError(f"distortion budgets must be nonnegative, got D1={self.D1}, D2={self.D2}")
        if self.L < 1:
            raise ValueError(f"auxiliary alphabet size must be >= 1, got {self.L}")
        if self.tol <= 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iters < 1 or self.multistarts < 0 or self.threads < 1:
            raise ValueError("max_iters and threads must be >= 1, multistarts >= 0")
        if self.p_S.alphabet_size != self.d.q:
            raise ValueError(f"source alphabet {self.p_S.alphabet_size} does not match distortion {self.d.q}")
        if self.q > MAX_SOURCE_ALPHABET:
            raise ValueError(f"|S| = {self.q} exceeds the cap of {MAX_SOURCE_ALPHABET}")
        if self.L > MAX_AUX_ALPHABET:
            raise ValueError(f"L = {self.L} exceeds the cap of {MAX_AUX_ALPHABET}")

    @property
    def q(self) -> int:
        return self.p_S.alphabet_size

    def to_dict(self) -> dict:
        return {
            'source': self.p_S.to_json(),
            'distortion': self.d.to_json(),
            'D1': self.D1, 'D2': self.D2, 'L': self.L, 'tol': self.tol,
            'max_iters': self.max_iters, 'multistarts': self.multistarts,
            'seed': self.seed, 'threads': self.threads,
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'GameConfig':
        p_S = Pmf.from_json(data['source'])
        d = (DistortionMatrix.from_json(data['distortion']) if data.get('distortion')
             else DistortionMatrix.hamming(p_S.alphabet_size))
        keys = ('D1', 'D2', 'L', 'tol', 'max_iters', 'multistarts', 'seed', 'threads')
        return cls(p_S=p_S, d=d, **{k: data[k] for k in keys if k in data})


@dataclass
class GameResult:
    value: float
    best_covert: CovertChannel
    worst_attack: CondPmf
    iterations: int
    converged: bool
    certificate_gap: float
    multiplicity: int = 1

    def to_dict(self) -> dict:
        return {
            'value': self.value,
            'best_covert': self.best_covert.to_json(),
            'worst_attack': self.worst_attack.to_json(),
            'iterations': self.iterations,
            'converged': self.converged,
            'certificate_gap': self.certificate_gap,
            'multiplicity': self.multiplicity,
        }


@dataclass
class ExponentCurve:
    rates: np.ndarray
    exponents: np.ndarray
    config: GameConfig
    raw_exponents: np.ndarray = None
    mode: str = 'active'

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({'R': self.rates, 'E_r': self.exponents})


@dataclass
class NoLossReport:
    q: int
    pubwm: GameResult
    steg: GameResult
    restricted: GameResult
    tol: float
    passed_pubwm_steg: bool = field(init=False)
    passed_steg_restricted: bool = field(init=False)
    ordered: bool = field(init=False)

    def __post_init__(self):
        self.passed_pubwm_steg = bool(abs(self.pubwm.value - self.steg.value) <= 2 * self.tol)
        self.passed_steg_restricted = bool(abs(self.steg.value - self.restricted.value) <= 2 * self.tol)
        self.ordered = bool(self.pubwm.value <= self.restricted.value + self.tol
                            and self.restricted.value <= self.steg.value + self.tol)

    @property
    def passed(self) -> bool:
        return self.passed_pubwm_steg and self.passed_steg_restricted

    def to_dict(self) -> dict:
        return {
            'q': self.q,
            'pubwm': self.pubwm.value,
            'steg': self.steg.value,
            'restricted': self.restricted.value,
            'passed_pubwm_steg': self.passed_pubwm_steg,
            'passed_steg_restricted': self.passed_steg_restricted,
            'ordered': self.ordered,
            'converged': self.pubwm.converged and self.steg.converged and self.restricted.converged,
        }


# ---------------------------------------------------------------------------
# information quantities on arrays

def _safe_log2(x):
    return np.log2(np.maximum(x, _FLOOR))


def _information(joint) -> float:
    product = joint.sum(axis=1)[:, None] * joint.sum(axis=0)[None, :]
    return max(0.0, float(rel_entr(joint, product).sum() / LN2))


def _information_batch(joint) -> np.ndarray:
    pa = joint.sum(axis=-1, keepdims=True)
    pb = joint.sum(axis=-2, keepdims=True)
    return np.maximum(rel_entr(joint, pa * pb).sum(axis=(-1, -2)) / LN2, 0.0)


def _mi_uy_and_grad(P_ux, A):
    """I(U;Y) with P_uy = P_ux @ A, and its gradient with respect to A."""
    P_uy = P_ux @ A
    log_ratio = (_safe_log2(P_uy) - _safe_log2(P_uy.sum(axis=1))[:, None]
                 - _safe_log2(P_uy.sum(axis=0))[None, :])
    value = float(np.where(P_uy > 0, P_uy * log_ratio, 0.0).sum())
    return max(0.0, value), P_ux.T @ log_ratio


def _j_value_and_grad(p, law, attack):
    """
    J(p, law, attack) and its gradient with respect to law[s, x, u]. The attack
    is p(y|x) of shape (X, Y) or p(y|x,u,s) of shape (S, X, U, Y).
    """
    S, X, U = law.shape
    if attack.ndim == 2:
        A4 = np.broadcast_to(attack[None, :, None, :], (S, X, U, attack.shape[1]))
    else:
        A4 = attack
    P = p[:, None, None] * law
    P_uy = np.einsum('sxu,sxuy->uy', P, A4)
    P_su = P.sum(axis=1)
    P_u = P_su.sum(axis=0)
    log_uy = _safe_log2(P_uy) - _safe_log2(P_u)[:, None] - _safe_log2(P_uy.sum(axis=0))[None, :]
    log_su = _safe_log2(P_su) - _safe_log2(p)[:, None] - _safe_log2(P_u)[None, :]
    i_uy = float(np.where(P_uy > 0, P_uy * log_uy, 0.0).sum())
    i_us = float(np.where(P_su > 0, P_su * log_su, 0.0).sum())
    grad = p[:, None, None] * (np.einsum('sxuy,uy->sxu', A4, log_uy) - log_su[:, None, :])
    return i_uy - i_us, grad


# ---------------------------------------------------------------------------
# inner problem: the warden's best response

def _repair_attack(A, p_X, d, D2):
    q = d.shape[0]
    A = np.clip(A, 0.0, None)
    sums = A.sum(axis=1, keepdims=True)
    A = np.where(sums > 0, A / np.where(sums > 0, sums, 1.0), np.eye(q))
    dist = float(p_X @ (A * d).sum(axis=1))
    if dist > D2 and dist > 0:
        lam = D2 / dist
        A = lam * A + (1.0 - lam) * np.eye(q)
    return A


def _toeplitz(r):
    q = r.size
    x, y = np.meshgrid(np.arange(q), np.arange(q), indexing='ij')
    return r[(y - x) % q]


def _binary_face_attack(P_ux, p_X, d, D2):
    c0, c1 = p_X[0] * d[0, 1], p_X[1] * d[1, 0]
    a_lo = max(0.0, (D2 - c1) / c0)
    a_hi = min(1.0, D2 / c0)

    def family(a):
        a = np.atleast_1d(a)
        b = np.clip((D2 - c0 * a) / c1, 0.0, 1.0)
        A = np.empty((a.size, 2, 2))
        A[:, 0, 0], A[:, 0, 1] = 1.0 - a, a
        A[:, 1, 0], A[:, 1, 1] = b, 1.0 - b
        return A

    grid = np.linspace(a_lo, a_hi, ATTACK_GRID_POINTS)
    values = _information_batch(np.einsum('ux,gxy->guy', P_ux, family(grid)))
    k = int(np.argmin(values))
    best_a, best_value = grid[k], float(values[k])
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    if hi > lo:
        res = minimize_scalar(lambda a: _information(P_ux @ family(a)[0]), bounds=(lo, hi),
                              method='bounded', options={'xatol': 1e-12})
        if res.fun < best_value:
            best_a, best_value = float(res.x), float(res.fun)
    return family(best_a)[0], max(0.0, best_value)


def _cyclic_attack(P_ux, d, D2):
    q = d.shape[0]
    cost = d[0]

    def value_and_grad(r):
        A = _toeplitz(r)
        value, gA = _mi_uy_and_grad(P_ux, A)
        x, y = np.meshgrid(np.arange(q), np.arange(q), indexing='ij')
        g = np.bincount(((y - x) % q).ravel(), weights=gA.ravel(), minlength=q)
        return value, g

    if q == 2:
        p_max = min(1.0, D2 / cost[1]) if cost[1] > 0 else 1.0
        res = minimize_scalar(lambda p: value_and_grad(np.array([1 - p, p]))[0],
                              bounds=(0.0, p_max), method='bounded', options={'xatol': 1e-12})
        candidates = [0.0, p_max, float(res.x)]
        values = [value_and_grad(np.array([1 - p, p]))[0] for p in candidates]
        k = int(np.argmin(values))
        r = np.array([1 - candidates[k], candidates[k]])
        return _toeplitz(r), values[k]

    e0 = np.zeros(q)
    e0[0] = 1.0
    uniform_cost = cost.mean()
    lam = min(1.0, D2 / uniform_cost) if uniform_cost > 0 else 1.0
    best_r, best_value = e0, value_and_grad(e0)[0]
    for r0 in (e0, (1 - lam) * e0 + lam / q):
        res = minimize(value_and_grad, r0, jac=True, method='SLSQP', bounds=[(0.0, 1.0)] * q,
                       constraints=[{'type': 'eq', 'fun': lambda r: np.array([r.sum() - 1.0]),
                                     'jac': lambda r: np.ones((1, q))},
                                    {'type': 'ineq', 'fun': lambda r: np.array([D2 - cost @ r]),
                                     'jac': lambda r: -cost[None, :]}],
                       options={'maxiter': 200, 'ftol': 1e-12})
        r = np.clip(res.x, 0.0, None)
        r /= r.sum()
        if cost @ r > D2 and cost @ r > 0:
            mix = D2 / (cost @ r)
            r = mix * r + (1 - mix) * e0
        value = value_and_grad(r)[0]
        if value < best_value:
            best_r, best_value = r, value
    return _toeplitz(best_r), best_value


def _general_attack(P_ux, p_X, d, D2):
    q = d.shape[0]
    cost = (p_X[:, None] * d).ravel()
    rows = np.kron(np.eye(q), np.ones(q))
    constraints = [
        {'type': 'eq', 'fun': lambda v: rows @ v - 1.0, 'jac': lambda v: rows},
        {'type': 'ineq', 'fun': lambda v: np.array([D2 - cost @ v]), 'jac': lambda v: -cost[None, :]},
    ]

    def fun(v):
        value, grad = _mi_uy_and_grad(P_ux, v.reshape(q, q))
        return value, grad.ravel()

    uniform_cost = float(p_X @ d.mean(axis=1))
    lam = min(1.0, D2 / uniform_cost) if uniform_cost > 0 else 1.0
    best_A, best_value = np.eye(q), _information(P_ux)
    for A0 in (np.eye(q), (1 - lam) * np.eye(q) + lam / q):
        res = minimize(fun, A0.ravel(), jac=True, method='SLSQP', bounds=[(0.0, 1.0)] * (q * q),
                       constraints=constraints, options={'maxiter': 200, 'ftol': 1e-12})
        A = _repair_attack(res.x.reshape(q, q), p_X, d, D2)
        value = _information(P_ux @ A)
        if value < best_value:
            best_A, best_value = A, value
    return best_A, best_value


def best_attack(P_ux, p_X, d, D2, cyclic: bool = False):
    """
    Warden's best response: min over A(p_X, D2), or the cyclic class, of I(U;Y).

    P_ux[u, x] is the joint law of the auxiliary and the stegotext. Returns the
    attack matrix A[x, y] and the attained I(U;Y) in bits.
    """
    P_ux = np.asarray(P_ux, dtype=float)
    p_X = np.asarray(p_X, dtype=float)
    d = np.asarray(d, dtype=float)
    q = d.shape[0]

    # plateau: an attack with Y independent of X is affordable
    if cyclic:
        if d[0].mean() <= D2 + FEASIBILITY_TOL:
            return np.full((q, q), 1.0 / q), 0.0
    else:
        costs = p_X @ d
        y = int(np.argmin(costs))
        if costs[y] <= D2 + FEASIBILITY_TOL:
            A = np.zeros((q, q))
            A[:, y] = 1.0
            return A, 0.0

    off_diagonal = d[~np.eye(q, dtype=bool)]
    if D2 <= 0 and np.all(off_diagonal > 0):
        return np.eye(q), _information(P_ux)

    if cyclic:
        return _cyclic_attack(P_ux, d, D2)
    if q == 2 and d[0, 1] > 0 and d[1, 0] > 0 and np.all(p_X > 0):
        return _binary_face_attack(P_ux, p_X, d, D2)
    return _general_attack(P_ux, p_X, d, D2)


# ---------------------------------------------------------------------------
# outer problem

@dataclass
class _StartResult:
    value: float
    law: np.ndarray
    attack: np.ndarray
    iterations: int
    index: int


class _MaxMinGame:
    """
    Decision variable W[s, x, u] over the polytope {rows stochastic, E d <= D1}
    (plus p_X = p_S when steg). With lift_q set, the played covert law is the
    cyclic lift of W and the warden is restricted to cyclic attacks.
    """

    def __init__(self, p, d, D1, D2, L, steg=True, max_iters=DEFAULT_MAX_ITERS, lift_q=None):
        self.p = np.asarray(p, dtype=float)
        self.d = np.asarray(d, dtype=float)
        self.q = self.p.size
        self.D1, self.D2, self.L = float(D1), float(D2), int(L)
        self.steg, self.max_iters, self.lift_q = steg, max_iters, lift_q
        self.shape = (self.q, self.q, self.L)

        q, n = self.q, self.q * self.q * self.L
        rows = np.kron(np.eye(q), np.ones(q * self.L))
        blocks, rhs = [rows], [np.ones(q)]
        if steg:
            x_index = np.broadcast_to(np.arange(q)[None, :, None], self.shape).ravel()
            weights = np.broadcast_to(self.p[:, None, None], self.shape).ravel()
            marg = np.array([np.where(x_index == x, weights, 0.0) for x in range(q - 1)])
            blocks.append(marg.reshape(q - 1, n))
            rhs.append(self.p[:q - 1])
        self.E = np.vstack(blocks)
        self.e = np.concatenate(rhs)
        self.E_pinv = np.linalg.pinv(self.E)
        self.cost = np.broadcast_to((self.p[:, None] * self.d)[:, :, None], self.shape).ravel().copy()
        self.bounds = [(0.0, 1.0)] * n
        self.constraints = [
            {'type': 'eq', 'fun': lambda v: self.E @ v - self.e, 'jac': lambda v: self.E},
            {'type': 'ineq', 'fun': lambda v: np.array([self.D1 - self.cost @ v]),
             'jac': lambda v: -self.cost[None, :]},
        ]
        self.trivial = CovertChannel.trivial(q, self.L).law

    def law(self, W):
        return lift_law(W, self.lift_q) if self.lift_q else W

    def attack(self, law):
        P = self.p[:, None, None] * law
        p_X = P.sum(axis=(0, 2))
        return best_attack(P.sum(axis=0).T, p_X / p_X.sum(), self.d, self.D2,
                           cyclic=self.lift_q is not None)

    def evaluate(self, W):
        law = self.law(W)
        A, _ = self.attack(law)
        value, grad = _j_value_and_grad(self.p if not self.lift_q else np.full(self.q, 1.0 / self.q),
                                        law, A)
        if self.lift_q:
            grad = lift_adjoint(grad, self.lift_q)
        return value, grad, A

    def _negative(self, v):
        value, grad, _ = self.evaluate(np.clip(v.reshape(self.shape), 0.0, None))
        return -value, -grad.ravel()

    def repair(self, W):
        v = np.clip(np.asarray(W, dtype=float).ravel(), 0.0, None)
        for _ in range(5):
            resid = self.E @ v - self.e
            if np.abs(resid).max() <= 1e-14:
                break
            v = np.clip(v - self.E_pinv @ resid, 0.0, None)
        W = v.reshape(self.shape)
        sums = W.sum(axis=(1, 2), keepdims=True)
        W = np.where(sums > 0, W / np.where(sums > 0, sums, 1.0), self.trivial)
        dist = float(self.cost @ W.ravel())
        if dist > self.D1:
            lam = self.D1 / dist
            W = lam * W + (1.0 - lam) * self.trivial
        return W

    def feasible(self, W) -> bool:
        v = W.ravel()
        if (v < -FEASIBILITY_TOL).any():
            return False
        if np.abs(self.E @ v - self.e).max() > FEASIBILITY_TOL:
            return False
        return bool(self.cost @ v <= self.D1 + FEASIBILITY_TOL)

    def random_start(self, rng, alpha):
        W = rng.dirichlet(np.full(self.q * self.L, alpha), size=self.q).reshape(self.shape)
        return self.repair(W)

    def ascend(self, W0, index) -> Optional[_StartResult]:
        start = self.repair(W0)
        res = minimize(self._negative, start.ravel(), jac=True, method='SLSQP',
                       bounds=self.bounds, constraints=self.constraints,
                       options={'maxiter': self.max_iters, 'ftol': 1e-10})
        best = None
        for W in (start, self.repair(res.x)):
            if not self.feasible(W):
                continue
            value, _, A = self.evaluate(W)
            if best is None or value > best.value:
                best = _StartResult(value, W, A, int(res.nit), index)
        if best is None:
            logger.debug(f"start {index}: no feasible iterate")
        else:
            logger.debug(f"start {index}: value={best.value:.6f} nit={res.nit}")
        return best

    def best_response_value(self, A, starts) -> float:
        """max over W of J(law(W), A) for a fixed attack."""
        p_play = self.p if not self.lift_q else np.full(self.q, 1.0 / self.q)

        def negative(v):
            W = np.clip(v.reshape(self.shape), 0.0, None)
            value, grad = _j_value_and_grad(p_play, self.law(W), A)
            if self.lift_q:
                grad = lift_adjoint(grad, self.lift_q)
            return -value, -grad.ravel()

        best = -np.inf
        for W0 in starts:
            res = minimize(negative, self.repair(W0).ravel(), jac=True, method='SLSQP',
                           bounds=self.bounds, constraints=self.constraints,
                           options={'maxiter': self.max_iters, 'ftol': 1e-10})
            for W in (self.repair(W0), self.repair(res.x)):
                if self.feasible(W):
                    best = max(best, _j_value_and_grad(p_play, self.law(W), A)[0])
        return best

    def project(self, V):
        """Euclidean projection onto the constraint polytope."""
        V = np.asarray(V, dtype=float).ravel()
        start = self.repair(V.reshape(self.shape)).ravel()
        res = minimize(lambda w: (0.5 * np.sum((w - V) ** 2), w - V), start, jac=True,
                       method='SLSQP', bounds=self.bounds, constraints=self.constraints,
                       options={'maxiter': 100, 'ftol': 1e-12})
        W = self.repair(res.x)
        return W if self.feasible(W) else start.reshape(self.shape)


def _embed_x_given_s(Wx, L):
    """U = X covert law padded to L auxiliary symbols (needs L >= |X|)."""
    q = Wx.shape[0]
    law = np.zeros((q, q, L))
    law[:, np.arange(q), np.arange(q)] = Wx
    return law


def _time_sharing_law(Wx, L, theta):
    """Mix U = X embedding (weight theta) with X = S under a spare auxiliary symbol."""
    q = Wx.shape[0]
    law = theta * _embed_x_given_s(Wx, L)
    law[np.arange(q), np.arange(q), q] += 1.0 - theta
    return law


def _structured_seeds(cfg: GameConfig) -> List[np.ndarray]:
    if cfg.L < cfg.q:
        return []
    seeds = []
    passive = _passive_x_given_s(cfg.p_S.probs, cfg.d.d, cfg.D1)[1]
    seeds.append(_embed_x_given_s(passive, cfg.L))
    if cfg.L > cfg.q:
        for theta in (0.25, 0.5, 0.75):
            D = min(cfg.D1 / theta, cfg.d.d_max)
            Wx = _passive_x_given_s(cfg.p_S.probs, cfg.d.d, D)[1]
            seeds.append(_time_sharing_law(Wx, cfg.L, theta))
    return seeds


def _run_starts(game: _MaxMinGame, starts, threads: int) -> List[_StartResult]:
    jobs = list(enumerate(starts))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda job: game.ascend(job[1], job[0]), jobs))
    else:
        results = [game.ascend(W, i) for i, W in jobs]
    return [r for r in results if r is not None]


def _certificate_gap(game: _MaxMinGame, cfg: GameConfig, best: _StartResult, check_starts) -> float:
    """Best response to the reported attack, over check_starts plus fresh random starts, minus the value."""
    starts = list(check_starts)
    for i in range(max(4, cfg.multistarts // 2)):
        rng = np.random.default_rng([cfg.seed, 10_000 + i])
        starts.append(game.random_start(rng, 1.0 if i % 2 == 0 else 0.2))
    response = game.best_response_value(best.attack, starts)
    return max(0.0, response - best.value)


def _solve_game(game: _MaxMinGame, cfg: GameConfig, seeds, label: str) -> GameResult:
    q, L = game.q, game.L
    if game.D1 <= 0:
        A, _ = game.attack(game.law(game.trivial))
        logger.info(f"✅ {label}: D1=0, only the identity embedding is feasible")
        return GameResult(0.0, CovertChannel(game.law(game.trivial)), CondPmf(A), 0, True, 0.0)

    starts = [game.trivial] + [np.asarray(s, dtype=float) for s in seeds]
    for i in range(cfg.multistarts):
        rng = np.random.default_rng([cfg.seed, i])
        starts.append(game.random_start(rng, 1.0 if i % 2 == 0 else 0.2))

    logger.info(f"🔍 {label}: {len(starts)} starts, |S|={q}, L={L}, D1={game.D1}, D2={game.D2}")
    results = _run_starts(game, starts, cfg.threads)

    best = results[0]
    for r in results[1:]:
        if r.value > best.value + 1e-12:
            best = r
    iterations = sum(r.iterations for r in results)

    distinct = []
    for r in results:
        if r.value >= best.value - cfg.tol and all(np.abs(r.law - o).max() > 1e-2 for o in distinct):
            distinct.append(r.law)
    if len(distinct) > 1:
        logger.info(f"📊 {label}: {len(distinct)} distinct maximizers within tol, reporting start {best.index}")

    gap = _certificate_gap(game, cfg, best, starts + [r.law for r in results])
    converged = bool(gap <= cfg.tol)
    value = max(best.value, 0.0)

    if converged:
        logger.info(f"✅ {label}: value={value:.6f} gap={gap:.2e} iterations={iterations}")
    else:
        logger.warning(f"⚠️ {label} did not converge: value={value:.6f} gap={gap:.2e}")
    return GameResult(value, CovertChannel(game.law(best.law)), CondPmf(best.attack), iterations,
                      converged, gap, multiplicity=len(distinct))


def capacity_active(cfg: GameConfig, seeds: Sequence = ()) -> GameResult:
    """C_L: max over steganographic covert channels of min over attacks of J."""
    game = _MaxMinGame(cfg.p_S.probs, cfg.d.d, cfg.D1, cfg.D2, cfg.L, steg=True, max_iters=cfg.max_iters)
    seeds = list(seeds) + (_structured_seeds(cfg) if cfg.D1 > 0 else [])
    return _solve_game(game, cfg, seeds, 'capacity_active')


def capacity_pubwm(cfg: GameConfig, seeds: Sequence = ()) -> GameResult:
    """Public-watermarking game: same as capacity_active without p_X = p_S."""
    game = _MaxMinGame(cfg.p_S.probs, cfg.d.d, cfg.D1, cfg.D2, cfg.L, steg=False, max_iters=cfg.max_iters)
    seeds = list(seeds) + (_structured_seeds(cfg) if cfg.D1 > 0 else [])
    return _solve_game(game, cfg, seeds, 'capacity_pubwm')


# ---------------------------------------------------------------------------
# passive warden

def _binary_passive(p, d, D1):
    p0, p1 = p
    if p0 <= 0 or p1 <= 0:
        return 0.0, np.eye(2)
    spread = p0 * (d[0, 1] + d[1, 0])
    a_max = min(1.0, p1 / p0, D1 / spread if spread > 0 else 1.0)

    def conditional_entropy(a):
        b = min(1.0, p0 * a / p1)
        return p0 * binary_entropy(a) + p1 * binary_entropy(b)

    if a_max <= 0:
        return 0.0, np.eye(2)
    res = minimize_scalar(lambda a: -conditional_entropy(a), bounds=(0.0, a_max),
                          method='bounded', options={'xatol': 1e-12})
    a = max((float(res.x), a_max), key=conditional_entropy)
    b = min(1.0, p0 * a / p1)
    return conditional_entropy(a), np.array([[1.0 - a, a], [b, 1.0 - b]])


def _passive_x_given_s(p, d, D1, multistarts=4, seed=DEFAULT_SEED, max_iters=DEFAULT_MAX_ITERS):
    """max H(X|S) over p_X = p_S, E d <= D1. Returns (value, p_{X|S}, iterations, spread)."""
    p = np.asarray(p, dtype=float)
    d = np.asarray(d, dtype=float)
    q = p.size
    if D1 <= 0:
        return 0.0, np.eye(q), 0, 0.0
    if q == 2:
        value, Wx = _binary_passive(p, d, D1)
        return value, Wx, 1, 0.0

    game = _MaxMinGame(p, d, D1, 0.0, 1, steg=True, max_iters=max_iters)
    rows = np.kron(np.eye(q), np.ones(q))
    x_index = np.tile(np.arange(q), q)
    weights = np.repeat(p, q)
    marg = np.array([np.where(x_index == x, weights, 0.0) for x in range(q - 1)])
    E = np.vstack([rows, marg])
    e = np.concatenate([np.ones(q), p[:q - 1]])
    cost = (p[:, None] * d).ravel()

    def negative(v):
        W = np.clip(v.reshape(q, q), 0.0, None)
        value = float((p[:, None] * entr(W)).sum() / LN2)
        grad = -p[:, None] * (-_safe_log2(W) - 1.0 / LN2)
        return -value, grad.ravel()

    independent = np.tile(p, (q, 1))
    d_ind = float(cost @ independent.ravel())
    lam = min(1.0, D1 / d_ind) if d_ind > 0 else 1.0
    starts = [lam * independent + (1 - lam) * np.eye(q)]
    for i in range(multistarts):
        rng = np.random.default_rng([seed, i])
        starts.append(game.repair(rng.dirichlet(np.ones(q), size=q)[:, :, None])[:, :, 0])

    values, laws, iterations = [], [], 0
    for W0 in starts:
        res = minimize(negative, W0.ravel(), jac=True, method='SLSQP', bounds=[(0.0, 1.0)] * (q * q),
                       constraints=[{'type': 'eq', 'fun': lambda v: E @ v - e, 'jac': lambda v: E},
                                    {'type': 'ineq', 'fun': lambda v: np.array([D1 - cost @ v]),
                                     'jac': lambda v: -cost[None, :]}],
                       options={'maxiter': max_iters, 'ftol': 1e-12})
        iterations += int(res.nit)
        W = game.repair(res.x.reshape(q, q, 1))
        if game.feasible(W):
            values.append(float((p[:, None] * entr(W[:, :, 0])).sum() / LN2))
            laws.append(W[:, :, 0])
    if not values:
        return 0.0, np.eye(q), iterations, 0.0
    k = int(np.argmax(values))
    return values[k], laws[k], iterations, float(max(values) - min(values))


def capacity_passive(p_S: Pmf, d: DistortionMatrix, D1: float, tol: float = DEFAULT_TOL,
                     multistarts: int = 4, seed: int = DEFAULT_SEED) -> GameResult:
    """max H(X|S) over Q1^Steg(p_S, D1); the auxiliary is U = X."""
    if D1 < 0:
        raise ValueError(f"D1 must be nonnegative, got {D1}")
    value, Wx, iterations, spread = _passive_x_given_s(p_S.probs, d.d, D1, multistarts, seed)
    Wx = Wx / Wx.sum(axis=1, keepdims=True)
    converged = bool(spread <= tol)
    logger.info(f"✅ capacity_passive: value={value:.6f} (D1={D1})")
    return GameResult(value, CovertChannel.from_x_given_s(CondPmf(Wx)), CondPmf.identity(p_S.alphabet_size),
                      iterations, converged, spread)


# ---------------------------------------------------------------------------
# closed forms and bounds

def hamming_threshold(D2: float) -> float:
    """d_{D2} = 1 - 2^{-h(D2)}."""
    return 1.0 - 2.0 ** (-binary_entropy(D2))


def capacity_binary_hamming(D1: float, D2: float) -> float:
    """Binary-Hamming capacity, Bern(1/2) covertext; equal for steganography and public watermarking."""
    if D1 < 0 or D2 < 0 or D2 >= 0.5:
        raise ValueError(f"need D1 >= 0 and 0 <= D2 < 1/2, got D1={D1}, D2={D2}")
    if D2 == 0:
        return binary_entropy(min(D1, 0.5))
    threshold = hamming_threshold(D2)
    if D1 <= threshold:
        return (D1 / threshold) * (binary_entropy(threshold) - binary_entropy(D2))
    if D1 <= 0.5:
        return binary_entropy(D1) - binary_entropy(D2)
    return 1.0 - binary_entropy(D2)


def _blahut_arimoto(p, d, beta, iters=1000, tol=1e-13):
    q_y = np.full(d.shape[1], 1.0 / d.shape[1])
    for _ in range(iters):
        log_Q = -beta * d + np.log(np.maximum(q_y, 1e-300))[None, :]
        log_Q -= logsumexp(log_Q, axis=1, keepdims=True)
        new_q = p @ np.exp(log_Q)
        if np.abs(new_q - q_y).max() < tol:
            q_y = new_q
            break
        q_y = new_q
    log_Q = -beta * d + np.log(np.maximum(q_y, 1e-300))[None, :]
    log_Q -= logsumexp(log_Q, axis=1, keepdims=True)
    distortion = float(p @ (np.exp(log_Q) * d).sum(axis=1))
    return q_y, distortion


def _rate_lower_bound(p, d, beta, q_y, D):
    """Lower bound on R(D) (nats) valid for any slope beta >= 0 and output law q_y."""
    log_q = np.log(np.maximum(q_y, 1e-300))
    lse_x = logsumexp(log_q[None, :] - beta * d, axis=1)
    log_p = np.log(np.where(p > 0, p, 1.0))
    log_c = logsumexp(np.where(p[:, None] > 0, log_p[:, None] - beta * d - lse_x[:, None], -np.inf), axis=0)
    return float(-beta * D - p @ lse_x - log_c.max())


def rd_bound(p_S: Pmf, d: DistortionMatrix, D1: float) -> float:
    """
    H(S) - R_S(D1): upper bound on the passive steganographic capacity.
    R_S is bounded from below with Blahut's dual bound, so the result is an
    upper bound even when the alternating minimization stops early.
    """
    if D1 < 0:
        raise ValueError(f"D1 must be nonnegative, got {D1}")
    p = p_S.probs
    H = p_S.entropy()
    dd = d.d
    if D1 >= float((p @ dd).min()):
        return H
    if D1 <= 0 and np.all(dd[~np.eye(d.q, dtype=bool)] > 0):
        return 0.0

    best = 0.0

    def run(beta):
        nonlocal best
        q_y, distortion = _blahut_arimoto(p, dd, beta)
        best = max(best, _rate_lower_bound(p, dd, beta, q_y, D1))
        return distortion

    beta_hi = 1.0
    while run(beta_hi) > D1 and beta_hi < 1e4:
        beta_hi *= 2.0
    beta_lo = 0.0
    for _ in range(50):
        mid = 0.5 * (beta_lo + beta_hi)
        if run(mid) > D1:
            beta_lo = mid
        else:
            beta_hi = mid
    return max(0.0, H - best / LN2)


def capacity_no_cover(p_S: Pmf, d: DistortionMatrix, D2: float) -> float:
    """Capacity when D1 >= d_max: min over A(p_S, D2) of I(S;Y)."""
    if D2 < 0:
        raise ValueError(f"D2 must be nonnegative, got {D2}")
    p = p_S.probs
    A, value = best_attack(np.diag(p), p, d.d, D2)
    logger.info(f"✅ capacity_no_cover: value={value:.6f}, worst attack rows={np.round(A, 4).tolist()}")
    return value


# ---------------------------------------------------------------------------
# error exponents

def exponent_passive(p_S: Pmf, d: DistortionMatrix, D1: float, R: float) -> float:
    """min over p~ of D(p~ || p_S) + |max H(X|S) - R|^+ with the max over Q1^Steg(p~, D1)."""
    if R < 0:
        raise ValueError(f"rate must be nonnegative, got {R}")
    p = p_S.probs
    cache = {}

    def objective(pt):
        key = tuple(np.round(pt, 13))
        if key not in cache:
            div = kl_divergence(pt, p)
            if not np.isfinite(div):
                cache[key] = np.inf
            else:
                inner = _passive_x_given_s(pt, d.d, D1, multistarts=2)[0]
                cache[key] = div + max(inner - R, 0.0)
        return cache[key]

    if p_S.alphabet_size == 2:
        grid = np.unique(np.concatenate([np.linspace(0.0, 1.0, PASSIVE_EXPONENT_GRID), [p[1]]]))
        values = np.array([objective(np.array([1 - t, t])) for t in grid])
        k = int(np.argmin(values))
        value = float(values[k])
        lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
        if hi > lo:
            res = minimize_scalar(lambda t: objective(np.array([1 - t, t])), bounds=(lo, hi),
                                  method='bounded', options={'xatol': 1e-9})
            value = min(value, float(res.fun))
        return value

    q = p_S.alphabet_size
    starts = [p, np.full(q, 1.0 / q)]
    rng = np.random.default_rng(DEFAULT_SEED)
    starts += list(rng.dirichlet(np.ones(q), size=3))

    def simplex(v):
        v = np.clip(v, 0, None)
        return v / max(v.sum(), 1e-300)

    value = np.inf
    for x0 in starts:
        res = minimize(lambda v: objective(simplex(v)), x0, method='SLSQP', bounds=[(0.0, 1.0)] * q,
                       constraints=[{'type': 'eq', 'fun': lambda v: np.array([v.sum() - 1.0])}],
                       options={'maxiter': 100})
        value = min(value, objective(x0), objective(simplex(res.x)))
    return float(value)


@dataclass
class _InnerSolution:
    value: float
    Y: np.ndarray
    A: np.ndarray
    below_rate: bool


def _inner_exponent(p_t, law, d, D2, R) -> _InnerSolution:
    """min over p~_{Y|XUS} and A in A(p_X, D2) of D(p~ law Y~ || p~ law A) + |J(Y~) - R|^+."""
    q, _, L = law.shape
    P = p_t[:, None, None] * law
    p_X = P.sum(axis=(0, 2))
    A0, iuy0 = best_attack(P.sum(axis=0).T, p_X / p_X.sum(), d, D2)
    i_us = _information(P.sum(axis=1))
    J0 = iuy0 - i_us
    Y0 = np.broadcast_to(A0[None, :, None, :], (q, q, L, q)).copy()
    if J0 <= R:
        return _InnerSolution(0.0, Y0, A0, True)
    if D2 <= 0 and np.all(d[~np.eye(q, dtype=bool)] > 0):
        return _InnerSolution(J0 - R, Y0, A0, False)

    ny, na = q * q * L * q, q * q
    cost_a = (p_X[:, None] * d).ravel()
    rows_y = np.kron(np.eye(q * q * L), np.ones(q))
    rows_a = np.kron(np.eye(q), np.ones(q))
    E = np.zeros((q * q * L + q, ny + na + 1))
    E[:q * q * L, :ny] = rows_y
    E[q * q * L:, ny:ny + na] = rows_a

    def unpack(z):
        return z[:ny].reshape(q, q, L, q), z[ny:ny + na].reshape(q, q), z[-1]

    def kl(Y, A):
        Y = np.clip(Y, 0.0, None)
        A = np.maximum(A, _FLOOR)
        return float((P[..., None] * rel_entr(Y, A[None, :, None, :])).sum() / LN2)

    def j_and_grad(Y):
        P_uy = np.einsum('sxu,sxuy->uy', P, Y)
        log_uy = (_safe_log2(P_uy) - _safe_log2(P_uy.sum(axis=1))[:, None]
                  - _safe_log2(P_uy.sum(axis=0))[None, :])
        value = float(np.where(P_uy > 0, P_uy * log_uy, 0.0).sum()) - i_us
        return value, P[..., None] * log_uy[None, None, :, :]

    def objective(z):
        Y, A, t = unpack(z)
        Yc = np.clip(Y, 0.0, None)
        Ac = np.maximum(A, _FLOOR)
        gY = P[..., None] * ((_safe_log2(Yc) - np.log2(Ac)[None, :, None, :]) + 1.0 / LN2)
        gA = -np.einsum('sxu,sxuy->xy', P, Yc) / Ac / LN2
        return kl(Y, A) + t, np.concatenate([gY.ravel(), gA.ravel(), [1.0]])

    def rate_gap(z):
        Y, _, t = unpack(z)
        return np.array([t - (j_and_grad(Y)[0] - R)])

    def rate_gap_jac(z):
        Y, _, _ = unpack(z)
        _, gJ = j_and_grad(Y)
        return np.concatenate([-gJ.ravel(), np.zeros(na), [1.0]])[None, :]

    z0 = np.concatenate([Y0.ravel(), A0.ravel(), [J0 - R]])
    res = minimize(objective, z0, jac=True, method='SLSQP',
                   bounds=[(0.0, 1.0)] * (ny + na) + [(0.0, None)],
                   constraints=[{'type': 'eq', 'fun': lambda z: E @ z - 1.0, 'jac': lambda z: E},
                                {'type': 'ineq', 'fun': lambda z: np.array([D2 - cost_a @ z[ny:ny + na]]),
                                 'jac': lambda z: np.concatenate([np.zeros(ny), -cost_a, [0.0]])[None, :]},
                                {'type': 'ineq', 'fun': rate_gap, 'jac': rate_gap_jac}],
                   options={'maxiter': 200, 'ftol': 1e-12})
    Y, A, _ = unpack(res.x)
    Y = np.clip(Y, 0.0, None)
    Y = Y / np.maximum(Y.sum(axis=-1, keepdims=True), _FLOOR)
    A = _repair_attack(A, p_X / p_X.sum(), d, D2)
    value = kl(Y, A) + max(j_and_grad(Y)[0] - R, 0.0)
    if not np.isfinite(value) or value >= J0 - R:
        return _InnerSolution(J0 - R, Y0, A0, False)
    return _InnerSolution(value, Y, A, False)


def _exponent_supergradient(p_t, law, sol: _InnerSolution, R):
    if sol.below_rate:
        # push toward J > R
        return _j_value_and_grad(p_t, law, sol.A)[1]
    A = np.maximum(sol.A, _FLOOR)
    kl_rows = rel_entr(sol.Y, A[None, :, None, :]).sum(axis=-1) / LN2
    grad = p_t[:, None, None] * kl_rows
    j_value, j_grad = _j_value_and_grad(p_t, law, sol.Y)
    if j_value > R:
        grad = grad + j_grad
    return grad


def _max_exponent_over_covert(p_t, cfg: GameConfig, R, steg, seeds, rng):
    game = _MaxMinGame(p_t, cfg.d.d, cfg.D1, cfg.D2, cfg.L, steg=steg, max_iters=cfg.max_iters)
    starts = [game.project(s) for s in seeds]
    starts += [game.project(game.random_start(rng, 1.0)) for _ in range(max(1, min(cfg.multistarts, 2)))]
    steps = min(cfg.max_iters, SUBGRADIENT_STEPS)
    best_value, best_law = -np.inf, game.trivial
    for W in starts:
        for k in range(1, steps + 1):
            sol = _inner_exponent(p_t, W, cfg.d.d, cfg.D2, R)
            if sol.value > best_value:
                best_value, best_law = sol.value, W
            g = _exponent_supergradient(p_t, W, sol, R)
            norm = float(np.linalg.norm(g))
            if norm < 1e-12:
                break
            W = game.project(W + (0.5 / k) * g / norm)
    return max(best_value, 0.0), best_law


def _exponent_game(cfg: GameConfig, R: float, steg: bool, seeds) -> float:
    if cfg.q != EXPONENT_SOURCE_ALPHABET:
        raise ValueError(f"exponent solver supports |S| = {EXPONENT_SOURCE_ALPHABET} only, got {cfg.q}")
    if cfg.L > EXPONENT_MAX_AUX:
        raise ValueError(f"exponent solver supports L <= {EXPONENT_MAX_AUX}, got {cfg.L}")
    if R < 0:
        raise ValueError(f"rate must be nonnegative, got {R}")
    p = cfg.p_S.probs
    label = 'exponent_active' if steg else 'exponent_pubwm'
    if cfg.D1 <= 0:
        logger.info(f"✅ {label}: D1=0, exponent is 0")
        return 0.0

    cache = {}

    def phi(t):
        t = float(np.clip(t, 0.0, 1.0))
        key = round(t, 12)
        if key in cache:
            return cache[key]
        p_t = np.array([1.0 - t, t])
        div = kl_divergence(p_t, p)
        if not np.isfinite(div):
            cache[key] = np.inf
            return np.inf
        local_seeds = list(seeds)
        if cfg.L >= cfg.q:
            local_seeds.append(_embed_x_given_s(_passive_x_given_s(p_t, cfg.d.d, cfg.D1)[1], cfg.L))
        rng = np.random.default_rng([cfg.seed, int(round(t * 1e6))])
        inner, _ = _max_exponent_over_covert(p_t, cfg, R, steg, local_seeds, rng)
        cache[key] = div + inner
        logger.debug(f"{label}: p~={t:.4f} value={cache[key]:.6f}")
        return cache[key]

    at_source = phi(p[1])
    if at_source <= cfg.tol:
        logger.info(f"✅ {label}: R={R} at or above capacity, exponent={at_source:.2e}")
        return at_source

    grid = np.unique(np.concatenate([np.linspace(0.0, 1.0, EXPONENT_SOURCE_GRID), [p[1]]]))
    values = np.array([phi(t) for t in grid])
    k = int(np.argmin(values))
    value = float(values[k])
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    if hi > lo:
        res = minimize_scalar(phi, bounds=(lo, hi), method='bounded', options={'xatol': 1e-3, 'maxiter': 12})
        value = min(value, float(res.fun))
    logger.info(f"✅ {label}: R={R} exponent={value:.6f}")
    return value


def _exponent_seeds(cfg: GameConfig, steg: bool) -> List[np.ndarray]:
    seed_cfg = replace(cfg, multistarts=min(cfg.multistarts, 4))
    result = capacity_active(seed_cfg) if steg else capacity_pubwm(seed_cfg)
    return [result.best_covert.law]


def exponent_active(cfg: GameConfig, R: float, seeds: Optional[Sequence] = None) -> float:
    """Random-coding exponent E_{r,L}(R) of the steganographic game (binary covertext)."""
    if seeds is None:
        seeds = _exponent_seeds(cfg, steg=True) if cfg.D1 > 0 else []
    return _exponent_game(cfg, R, True, seeds)


def exponent_pubwm(cfg: GameConfig, R: float, seeds: Optional[Sequence] = None) -> float:
    """Public-watermarking exponent; upper-bounds exponent_active."""
    if seeds is None:
        seeds = _exponent_seeds(cfg, steg=False) if cfg.D1 > 0 else []
    return _exponent_game(cfg, R, False, seeds)


def exponent_curve(cfg: GameConfig, rates, mode: str = 'active') -> ExponentCurve:
    """Exponent on a rate grid with a nonincreasing envelope applied."""
    rates = np.sort(np.asarray(rates, dtype=float))
    if mode == 'passive':
        raw = [exponent_passive(cfg.p_S, cfg.d, cfg.D1, R) for R in rates]
    elif mode in ('active', 'pubwm'):
        steg = mode == 'active'
        seeds = _exponent_seeds(cfg, steg) if cfg.D1 > 0 else []
        solver = exponent_active if steg else exponent_pubwm
        raw = [solver(cfg, R, seeds=seeds) for R in rates]
    else:
        raise ValueError(f"unknown exponent mode {mode!r}")
    raw = np.maximum(np.asarray(raw, dtype=float), 0.0)
    envelope = np.minimum.accumulate(raw)
    return ExponentCurve(rates, envelope, cfg, raw_exponents=raw, mode=mode)


def zero_crossing(curve: ExponentCurve, tol: float = None) -> Optional[float]:
    """Smallest grid rate where the exponent is within tol of zero."""
    tol = curve.config.tol if tol is None else tol
    hits = np.flatnonzero(curve.exponents <= tol)
    return float(curve.rates[hits[0]]) if hits.size else None


# ---------------------------------------------------------------------------
# cyclic no-loss check and sweeps

def _unlift(lifted: np.ndarray, q: int) -> np.ndarray:
    """Base law W of a lifted law, read off the zero-shift slice."""
    return q * lifted[:, :, 0::q]


def verify_no_loss_cyclic(q: int, d: DistortionMatrix, D1: float, D2: float, L: int,
                          tol: float = DEFAULT_TOL, multistarts: int = DEFAULT_MULTISTARTS,
                          seed: int = DEFAULT_SEED, threads: int = DEFAULT_THREADS,
                          max_iters: int = DEFAULT_MAX_ITERS) -> NoLossReport:
    """
    PubWM capacity at L, steganographic capacity at qL, and the game restricted
    to lifted covert channels and cyclic attacks. At finite L the optima satisfy
    pubwm <= restricted <= steg, with equality in the limit of large L and
    whenever the attack is the identity.
    """
    if d.q != q:
        raise ValueError(f"distortion is {d.q}x{d.q}, expected {q}x{q}")
    if not d.is_cyclic:
        raise ValueError("no-loss check needs a cyclic distortion matrix")
    if q * L > MAX_AUX_ALPHABET:
        raise ValueError(f"lifted auxiliary size {q * L} exceeds the cap of {MAX_AUX_ALPHABET}")

    p_S = Pmf.uniform(q)
    base = GameConfig(p_S, d, D1, D2, L, tol, max_iters, multistarts, seed, threads)
    game = _MaxMinGame(p_S.probs, d.d, D1, D2, L, steg=False, max_iters=max_iters, lift_q=q)
    seeds = _structured_seeds(base) if D1 > 0 else []

    # restricted(W) >= pubwm(W) for any W in Q(L), and steg(lift W) = restricted(W) at qL
    restricted = _solve_game(game, base, seeds, 'restricted_cyclic')
    pubwm = capacity_pubwm(base, seeds=[_unlift(restricted.best_covert.law, q)])
    if pubwm.value > restricted.value + tol:
        restricted = _solve_game(game, base, seeds + [pubwm.best_covert.law], 'restricted_cyclic')

    lifted = [restricted.best_covert.law, lift_law(pubwm.best_covert.law, q)]
    steg = capacity_active(replace(base, L=q * L), seeds=lifted)

    report = NoLossReport(q, pubwm, steg, restricted, tol)
    marker = '✅' if report.passed else '⚠️'
    logger.info(f"{marker} no-loss check q={q}: pubwm={pubwm.value:.6f} steg={steg.value:.6f} "
                f"restricted={restricted.value:.6f} ordered={report.ordered}")
    return report


def capacity_sweep(mode: str, cfg: GameConfig, param: str, values) -> pd.DataFrame:
    """Capacity as a function of D1 or D2; columns (param, C)."""
    if param not in ('D1', 'D2'):
        raise ValueError(f"sweep parameter must be D1 or D2, got {param!r}")
    out = []
    for v in values:
        point = replace(cfg, **{param: float(v)})
        if mode == 'active':
            c = capacity_active(point).value
        elif mode == 'pubwm':
            c = capacity_pubwm(point).value
        elif mode == 'passive':
            c = capacity_passive(point.p_S, point.d, point.D1, point.tol).value
        elif mode == 'binary':
            c = capacity_binary_hamming(point.D1, point.D2)
        elif mode == 'no_cover':
            c = capacity_no_cover(point.p_S, point.d, point.D2)
        else:
            raise ValueError(f"unknown capacity mode {mode!r}")
        out.append(c)
        logger.info(f"📊 sweep {mode} {param}={v:.4f}: C={c:.6f}")
    return pd.DataFrame({param: np.asarray(values, dtype=float), 'C': out})
