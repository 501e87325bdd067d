"""
Warden simulation: attack channels, error-probability estimation (Monte-Carlo
and exact enumeration) and the stegotext-law security check.
"""

import math
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.special import rel_entr
from scipy.stats import binomtest, linregress

from config import DEFAULT_SEED, DEFAULT_THREADS, SECURITY_TV_TOL
from channels import CondPmf, DistortionMatrix, Pmf, attack_feasible
from codec import DecodeError, RmCode, RmKey
from typestat import Sequence

logger = logging.getLogger(__name__)

MAX_EXACT_SPACE = 4096
MAX_SAMPLED_SPACE = 2 ** 20
EQUIVALENCE_TOL = 1e-12


@dataclass
class AttackSpec:
    kind: str = 'passive'
    channel: Optional[CondPmf] = None
    D2_declared: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ('passive', 'memoryless'):
            raise ValueError(f"attack kind must be 'passive' or 'memoryless', got {self.kind!r}")
        if self.kind == 'memoryless':
            if self.channel is None:
                raise ValueError("memoryless attack needs a channel matrix")
            if self.channel.input_alphabet != self.channel.output_alphabet:
                raise ValueError("attack channel must map the stegotext alphabet to itself")

    @classmethod
    def passive(cls) -> 'AttackSpec':
        return cls('passive')

    @classmethod
    def memoryless(cls, channel: CondPmf, D2: float = None) -> 'AttackSpec':
        return cls('memoryless', channel, D2)

    @classmethod
    def bsc(cls, p: float, D2: float = None) -> 'AttackSpec':
        return cls('memoryless', CondPmf.bsc(p), D2)

    def matrix(self, q: int) -> np.ndarray:
        if self.kind == 'passive':
            return np.eye(q)
        if self.channel.input_alphabet != q:
            raise ValueError(f"attack channel is over {self.channel.input_alphabet} symbols, expected {q}")
        return self.channel.matrix

    def validate(self, p_X: Pmf, d: DistortionMatrix):
        """Raise if a declared D2 is violated under stegotext marginal p_X."""
        if self.kind == 'passive' or self.D2_declared is None:
            return
        if not attack_feasible(self.channel, p_X, d, self.D2_declared):
            raise ValueError(f"attack channel exceeds its declared distortion D2={self.D2_declared}")

    def to_dict(self) -> dict:
        return {
            'kind': self.kind,
            'channel': self.channel.to_json() if self.channel is not None else None,
            'D2_declared': self.D2_declared,
        }


@dataclass
class TrialReport:
    trials: int
    errors: int
    p_e_hat: float
    wilson_ci_95: Tuple[float, float]
    seed: int
    method: str = 'monte_carlo'
    decode_ties: int = 0

    def to_dict(self) -> dict:
        out = asdict(self)
        out['wilson_ci_95'] = list(self.wilson_ci_95)
        return out


@dataclass
class SecurityReport:
    N: int
    tv_distance: float
    max_abs_gap: float
    method: str
    samples: Optional[int] = None
    kl: float = 0.0
    note: str = ''

    @property
    def passed(self) -> bool:
        return self.method == 'exact' and self.tv_distance <= SECURITY_TV_TOL

    def to_dict(self) -> dict:
        out = asdict(self)
        out['passed'] = self.passed
        return out


@dataclass
class RmEquivalenceReport:
    base_pe: float
    pes: List[float]
    max_deviation: float
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = self.max_deviation <= EQUIVALENCE_TOL

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class ExponentEstimate:
    slope: float
    slope_ci: Tuple[float, float]
    intercept: float
    used_N: List[int]
    excluded_N: List[int]
    degenerate: bool
    frame: pd.DataFrame = None


def apply_attack(x: Sequence, spec: AttackSpec, rng: np.random.Generator) -> Sequence:
    """Passive: y = x. Memoryless: y_i drawn independently from row x_i."""
    if spec.kind == 'passive':
        return x
    W = spec.matrix(x.alphabet_size)
    cdf = np.cumsum(W, axis=1)
    cdf[:, -1] = 1.0
    draws = rng.random(len(x))
    y = (cdf[x.array()] < draws[:, None]).sum(axis=1)
    return Sequence(tuple(np.minimum(y, W.shape[1] - 1)), W.shape[1])


def wilson_interval(errors: int, trials: int) -> Tuple[float, float]:
    if trials == 0:
        return (0.0, 1.0)
    ci = binomtest(int(errors), int(trials)).proportion_ci(confidence_level=0.95, method='wilson')
    return (float(ci.low), float(ci.high))


def _draw_covertext(codec, rng) -> Sequence:
    p = codec.source.probs
    return Sequence(tuple(rng.choice(p.size, size=codec.block_length, p=p)), p.size)


def _run_trial(codec, spec: AttackSpec, seed: int, index: int) -> Tuple[bool, bool]:
    rng = np.random.default_rng([seed, index])
    s = _draw_covertext(codec, rng)
    m = int(rng.integers(codec.message_count))
    key = codec.random_key(rng)
    x = codec.encode(s, m, key, rng)
    y = apply_attack(x, spec, rng)
    try:
        return codec.decode(y, key) != m, False
    except DecodeError:
        return True, True


def estimate_error_prob(codec, spec: AttackSpec, trials: int, seed: int = DEFAULT_SEED,
                        exhaustive: bool = False, threads: int = DEFAULT_THREADS) -> TrialReport:
    """
    Monte-Carlo loopback: draw covertext, message and key, encode, attack,
    decode. Trial i uses its own generator seeded with (seed, i), so results
    do not depend on thread scheduling. exhaustive=True returns the exact value.
    """
    if exhaustive:
        pe = exact_error_probability(codec, spec)
        logger.info(f"✅ Exact error probability: {pe:.6g}")
        return TrialReport(0, 0, pe, (pe, pe), seed, method='exact')
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(lambda i: _run_trial(codec, spec, seed, i), range(trials)))
    else:
        outcomes = [_run_trial(codec, spec, seed, i) for i in range(trials)]

    errors = sum(1 for wrong, _ in outcomes if wrong)
    ties = sum(1 for _, tie in outcomes if tie)
    p_hat = errors / trials
    ci = wilson_interval(errors, trials)
    logger.info(f"📊 {trials} trials: {errors} errors, p_e={p_hat:.4g}, CI=[{ci[0]:.4g}, {ci[1]:.4g}]")
    if ties:
        logger.info(f"{ties} trials ended in a decoder tie")
    return TrialReport(trials, errors, p_hat, ci, seed, decode_ties=ties)


def _space(codec) -> Tuple[int, int, int]:
    q, N = codec.alphabet_size, codec.block_length
    size = q ** N
    if size > MAX_EXACT_SPACE:
        raise ValueError(f"{q}^{N} sequences exceed the exact enumeration cap of {MAX_EXACT_SPACE}")
    return q, N, size


def _sequences(q: int, N: int, size: int) -> List[Sequence]:
    return [Sequence.from_index(i, N, q) for i in range(size)]


def _product_law(p, seqs) -> List[Fraction]:
    probs = [Fraction(float(v)) for v in p]
    return [math.prod((probs[a] for a in s.symbols), start=Fraction(1)) for s in seqs]


def _output_matrix(W: np.ndarray, N: int) -> np.ndarray:
    """P(y^N | x^N) for a memoryless channel, rows and columns in Sequence.index() order."""
    out = np.ones((1, 1))
    for _ in range(N):
        out = np.kron(out, W)
    return out


def exact_error_probability(codec, spec: AttackSpec, keys=None) -> float:
    """
    Error probability summed over covertexts, messages, keys, encoder fibers and
    channel outputs. A decoder tie counts as an error.
    """
    q, N, size = _space(codec)
    keys = codec.keys() if keys is None else list(keys)
    seqs = _sequences(q, N, size)
    source = [float(w) for w in _product_law(codec.source.probs, seqs)]
    channel = _output_matrix(spec.matrix(q), N)
    M = codec.message_count

    terms = []
    for key in keys:
        decoded = np.empty(size, dtype=np.int64)
        for j, y in enumerate(seqs):
            try:
                decoded[j] = codec.decode(y, key)
            except DecodeError:
                decoded[j] = -1
        for i, s in enumerate(seqs):
            if source[i] == 0.0:
                continue
            for m in range(M):
                for x, weight in codec.encoder_law(s, m, key).items():
                    miss = float(channel[x][decoded != m].sum())
                    terms.append(source[i] * float(weight) * miss / (M * len(keys)))
    return math.fsum(terms)


def _compare_to_source(counts: Dict[int, Fraction], target: List[Fraction]):
    gaps = [abs(counts.get(i, Fraction(0)) - t) for i, t in enumerate(target)]
    tv = float(sum(gaps, Fraction(0)) / 2)
    max_gap = float(max(gaps))
    p = np.array([float(counts.get(i, 0)) for i in range(len(target))])
    ref = np.array([float(t) for t in target])
    kl = float(rel_entr(p, ref).sum() / np.log(2.0))
    return tv, max_gap, kl


def exact_stego_distribution(codec, N: int = None) -> SecurityReport:
    """
    Exact stegotext law over uniform keys, source covertexts, uniform messages
    and every internal encoder draw, compared with p_S^N in rational arithmetic.
    """
    q, block, size = _space(codec)
    if N is not None and N != block:
        raise ValueError(f"codec block length is {block}, not {N}")
    keys = codec.keys()
    seqs = _sequences(q, block, size)
    target = _product_law(codec.source.probs, seqs)
    M = codec.message_count
    scale = Fraction(1, M * len(keys))

    law: Dict[int, Fraction] = {}
    for key in keys:
        for i, s in enumerate(seqs):
            if target[i] == 0:
                continue
            for m in range(M):
                for x, weight in codec.encoder_law(s, m, key).items():
                    law[x] = law.get(x, Fraction(0)) + target[i] * weight * scale

    tv, max_gap, kl = _compare_to_source(law, target)
    report = SecurityReport(block, tv, max_gap, 'exact', kl=kl)
    if report.passed:
        logger.info(f"✅ Stegotext law equals p_S^N exactly (N={block}, {len(keys)} keys)")
    else:
        logger.warning(f"⚠️ Stegotext law differs from p_S^N: tv={tv:.3g}")
    return report


def sampled_stego_distribution(codec, samples: int, seed: int = DEFAULT_SEED) -> SecurityReport:
    """Histogram estimate of the stegotext law; evidence only."""
    q, N = codec.alphabet_size, codec.block_length
    size = q ** N
    if size > MAX_SAMPLED_SPACE:
        raise ValueError(f"{q}^{N} sequences exceed the sampling cap of {MAX_SAMPLED_SPACE}")
    if samples < 1:
        raise ValueError(f"samples must be >= 1, got {samples}")
    rng = np.random.default_rng(seed)
    hist = np.zeros(size)
    for _ in range(samples):
        s = _draw_covertext(codec, rng)
        m = int(rng.integers(codec.message_count))
        x = codec.encode(s, m, codec.random_key(rng), rng)
        hist[x.index()] += 1
    p_hat = hist / samples

    p = codec.source.probs
    digits = (np.arange(size)[:, None] // q ** np.arange(N - 1, -1, -1)[None, :]) % q
    target = p[digits].prod(axis=1)
    gaps = np.abs(p_hat - target)
    kl = float(rel_entr(p_hat, target).sum() / np.log(2.0))
    logger.info(f"📊 Sampled stegotext law: tv={gaps.sum() / 2:.4g} over {samples} samples")
    return SecurityReport(N, float(gaps.sum() / 2), float(gaps.max()), 'sampled', samples=samples,
                          kl=kl, note='sampled, not a proof')


def rm_equivalence_check(prototype, spec: AttackSpec, perms, N: int = None) -> RmEquivalenceReport:
    """Exact P_e of the RM code with each fixed permutation against the prototype's."""
    if N is not None and N != prototype.block_length:
        raise ValueError(f"prototype block length is {prototype.block_length}, not {N}")
    base = exact_error_probability(prototype, spec)
    rm = RmCode(prototype)
    pes = [exact_error_probability(rm, spec, keys=[p if isinstance(p, RmKey) else RmKey(tuple(p))])
           for p in perms]
    deviation = max((abs(pe - base) for pe in pes), default=0.0)
    report = RmEquivalenceReport(base, pes, deviation)
    marker = '✅' if report.passed else '❌'
    logger.info(f"{marker} RM error equivalence over {len(pes)} permutations: max deviation {deviation:.3g}")
    return report


def error_sweep(family: Dict[int, object], spec: AttackSpec, trials: int, seed: int = DEFAULT_SEED,
                exhaustive: bool = False, threads: int = DEFAULT_THREADS) -> pd.DataFrame:
    """Error probability per block length; columns N,trials,errors,pe,ci_lo,ci_hi."""
    rows = []
    for N in sorted(family):
        report = estimate_error_prob(family[N], spec, trials, seed, exhaustive, threads)
        rows.append({'N': N, 'trials': report.trials, 'errors': report.errors, 'pe': report.p_e_hat,
                     'ci_lo': report.wilson_ci_95[0], 'ci_hi': report.wilson_ci_95[1]})
    return pd.DataFrame(rows, columns=['N', 'trials', 'errors', 'pe', 'ci_lo', 'ci_hi'])


def fit_exponent(frame: pd.DataFrame) -> ExponentEstimate:
    """Least-squares slope of -log2 p_e against N; zero-error points are excluded."""
    usable = frame[frame['pe'] > 0]
    excluded = [int(n) for n in frame.loc[frame['pe'] <= 0, 'N']]
    if excluded:
        logger.warning(f"⚠️ Excluded block lengths with zero observed errors: {excluded}")
    if len(usable) < 3:
        logger.warning(f"⚠️ Only {len(usable)} block lengths with errors; exponent fit is degenerate")
        return ExponentEstimate(float('nan'), (float('nan'), float('nan')), float('nan'),
                                [int(n) for n in usable['N']], excluded, True, frame)

    N = usable['N'].to_numpy(dtype=float)
    fit = linregress(N, -np.log2(usable['pe'].to_numpy()))
    # the upper CI endpoint of p_e gives the flattest curve
    low = linregress(N, -np.log2(usable['ci_hi'].to_numpy())).slope
    high = linregress(N, -np.log2(np.maximum(usable['ci_lo'].to_numpy(), 1e-300))).slope
    ci = (float(min(low, high)), float(max(low, high)))
    logger.info(f"📊 Empirical exponent: slope={fit.slope:.4f}, CI=[{ci[0]:.4f}, {ci[1]:.4f}]")
    return ExponentEstimate(float(fit.slope), ci, float(fit.intercept),
                            [int(n) for n in usable['N']], excluded, False, frame)


def empirical_exponent(family: Dict[int, object], spec: AttackSpec, trials: int,
                       seed: int = DEFAULT_SEED, exhaustive: bool = False,
                       threads: int = DEFAULT_THREADS) -> ExponentEstimate:
    if any(codec.message_count == 1 for codec in family.values()):
        logger.warning("⚠️ Codec family has a single message; error probability is identically 0")
        frame = pd.DataFrame({'N': sorted(family), 'trials': 0, 'errors': 0, 'pe': 0.0,
                              'ci_lo': 0.0, 'ci_hi': 0.0})
        return ExponentEstimate(float('nan'), (float('nan'), float('nan')), float('nan'),
                                [], sorted(family), True, frame)
    return fit_exponent(error_sweep(family, spec, trials, seed, exhaustive, threads))
