"""
stegcap command line: capacity, exponent, codec and verify.

Every command validates its whole configuration before touching the output
directory; a config error exits with status 2 and writes nothing. Otherwise
the command writes its outputs plus manifest.json, and a ledger row when
STEGCAP_DATABASE_URL is set.
"""

import os
import math
import sys
import json
import time
import logging
import argparse
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Tuple

import numpy as np

import database
from config import (
    EXIT_CODEC_MISMATCH, EXIT_CONFIG, EXIT_NONCONVERGENCE, EXIT_OK, EXIT_SECURITY,
    LOG_FORMAT, LOG_LEVEL, TOOL_VERSION, ConfigError, load_run_config, resolve_seed,
)
from channels import CondPmf, DistortionMatrix, Pmf
from codec import (
    CccPrototype, CodebookMismatch, CodecParams, DecodeError, FixedKeyCode, NestedCodec,
    NestedLinearCode, RmCode, RmKey, SortingPrototype, build_stacked_codebook,
    codebook_to_dict, load_codebook, nested_decode, nested_encode, rm_decode, rm_encode,
    save_codebook,
)
from gamesolver import (
    GameConfig, capacity_active, capacity_binary_hamming, capacity_no_cover, capacity_passive,
    capacity_pubwm, capacity_sweep, exponent_curve, rd_bound, verify_no_loss_cyclic, zero_crossing,
)
from keystore import KeyStore
from typestat import Sequence
from wardensim import AttackSpec, estimate_error_prob, exact_stego_distribution, sampled_stego_distribution

logger = logging.getLogger(__name__)

Runner = Callable[[str], Tuple[int, List[str]]]


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    tool_version: str = TOOL_VERSION
    wall_time: float = 0.0
    output_paths: List[str] = field(default_factory=list)
    exit_code: int = EXIT_OK


# ---------------------------------------------------------------------------
# parsing helpers

def _pick(flag, section: dict, key: str, default=None, cast=float):
    if flag is not None:
        return cast(flag)
    if key in section and section[key] is not None:
        try:
            return cast(section[key])
        except (TypeError, ValueError):
            raise ConfigError(f"'{key}' has an invalid value: {section[key]!r}")
    return default


def parse_grid(text) -> np.ndarray:
    """'start:stop:count' or a comma list (or a JSON list from a config file)."""
    if isinstance(text, (list, tuple)):
        return np.asarray(text, dtype=float)
    try:
        if ':' in text:
            start, stop, count = text.split(':')
            return np.linspace(float(start), float(stop), int(count))
        return np.asarray([float(v) for v in text.split(',') if v.strip()], dtype=float)
    except ValueError:
        raise ConfigError(f"cannot parse grid {text!r}; use start:stop:count or a comma list")


def parse_attack(text) -> AttackSpec:
    """'passive', 'bsc:p', or a config object {kind, channel, D2_declared}."""
    try:
        if isinstance(text, dict):
            channel = CondPmf.from_json(text['channel']) if text.get('channel') else None
            return AttackSpec(text.get('kind', 'passive'), channel, text.get('D2_declared'))
        if text in (None, 'passive'):
            return AttackSpec.passive()
        if text.startswith('bsc:'):
            return AttackSpec.bsc(float(text.split(':', 1)[1]))
    except (KeyError, ValueError) as e:
        raise ConfigError(f"invalid attack {text!r}: {e}")
    raise ConfigError(f"unknown attack {text!r}; use passive or bsc:p")


def _source_and_distortion(run_config: dict) -> Tuple[Pmf, DistortionMatrix]:
    try:
        p_S = Pmf.from_json(run_config['source']) if 'source' in run_config else Pmf.uniform(2)
        d = (DistortionMatrix.from_json(run_config['distortion']) if 'distortion' in run_config
             else DistortionMatrix.hamming(p_S.alphabet_size))
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"invalid source or distortion: {e}")
    return p_S, d


def _game_config(args, run_config: dict, seed: int, require_d1: bool = True) -> GameConfig:
    section = run_config.get('game', {})
    p_S, d = _source_and_distortion(run_config)
    D1 = _pick(args.D1, section, 'D1')
    if D1 is None:
        if require_d1:
            raise ConfigError("D1 is required (flag --D1 or game.D1)")
        D1 = d.d_max
    values = {
        'D1': D1,
        'D2': _pick(args.D2, section, 'D2', 0.0),
        'L': _pick(args.L, section, 'L', 2, int),
        'tol': _pick(args.tol, section, 'tol', None),
        'max_iters': _pick(args.max_iters, section, 'max_iters', None, int),
        'multistarts': _pick(args.multistarts, section, 'multistarts', None, int),
        'threads': _pick(args.threads, section, 'threads', None, int),
    }
    try:
        return GameConfig(p_S, d, seed=seed, **{k: v for k, v in values.items() if v is not None})
    except ValueError as e:
        raise ConfigError(str(e))


def _codec_params(args, run_config: dict, seed: int) -> CodecParams:
    section = run_config.get('codec', {})
    p_S, d = _source_and_distortion(run_config)
    try:
        return CodecParams(
            N=_pick(args.N, section, 'N', 4, int),
            R=_pick(args.R, section, 'R', 0.25),
            L=_pick(args.L, section, 'L', 2, int),
            epsilon=_pick(args.epsilon, section, 'epsilon', 0.05),
            D1=_pick(args.D1, section, 'D1', 0.5),
            D2=_pick(args.D2, section, 'D2', 0.0),
            d=d, p_S=p_S, seed=seed,
        )
    except ValueError as e:
        raise ConfigError(str(e))


def _nested_code(args, run_config: dict) -> NestedLinearCode:
    section = run_config.get('codec', {})
    try:
        if 'generators' in section:
            gens = section['generators']
            return NestedLinearCode.from_generators(gens['G2'], gens.get('G1'))
        return NestedLinearCode.repetition(_pick(args.N, section, 'N', 3, int))
    except (KeyError, ValueError) as e:
        raise ConfigError(f"invalid nested code: {e}")


def _rounded(payload, digits: int):
    if isinstance(payload, dict):
        return {k: _rounded(v, digits) for k, v in payload.items()}
    if isinstance(payload, (list, tuple)):
        return [_rounded(v, digits) for v in payload]
    if isinstance(payload, (float, np.floating)) and math.isfinite(payload):
        return round(float(payload), digits)
    return payload


def _write_json(out_dir: str, name: str, payload, tol: float = None) -> str:
    """Write payload as JSON; with tol set, floats are rounded to the decimals tol resolves."""
    if tol is not None and tol > 0:
        payload = _rounded(payload, max(0, math.ceil(-math.log10(tol))))
    path = os.path.join(out_dir, name)
    with open(path, 'w') as f:
        json.dump(payload, f, indent=2, default=float)
    return path


def _read_symbols(path: str, q: int) -> Sequence:
    try:
        with open(path, 'r') as f:
            return Sequence.from_string(f.read(), q)
    except FileNotFoundError:
        raise ConfigError(f"symbol file not found: {path}")
    except ValueError as e:
        raise ConfigError(f"{path}: {e}")


# ---------------------------------------------------------------------------
# capacity

CAPACITY_MODES = ('active', 'passive', 'pubwm', 'binary_closed_form', 'no_cover', 'verify_cyclic')


def prepare_capacity(args, run_config: dict, seed: int) -> Tuple[dict, Runner]:
    mode = args.mode or run_config.get('game', {}).get('mode', 'active')
    if mode not in CAPACITY_MODES:
        raise ConfigError(f"unknown capacity mode {mode!r}")
    sweep_section = run_config.get('sweep', {})
    sweep_param = args.sweep or sweep_section.get('param')
    cfg = _game_config(args, run_config, seed, require_d1=mode != 'no_cover' and sweep_param != 'D1')
    if mode == 'binary_closed_form' and not (cfg.D2 < 0.5):
        raise ConfigError(f"closed form needs D2 < 1/2, got {cfg.D2}")

    grid = None
    if sweep_param:
        if sweep_param not in ('D1', 'D2'):
            raise ConfigError(f"sweep parameter must be D1 or D2, got {sweep_param!r}")
        if mode == 'verify_cyclic':
            raise ConfigError("--verify-cyclic cannot be swept")
        grid = parse_grid(args.grid or sweep_section.get('values') or '0:0.5:11')
        if mode == 'binary_closed_form' and sweep_param == 'D2' and (grid >= 0.5).any():
            raise ConfigError("closed-form sweep needs D2 < 1/2")
    if mode == 'verify_cyclic' and not cfg.d.is_cyclic:
        raise ConfigError("--verify-cyclic needs a cyclic distortion matrix")

    echo = {'mode': mode, 'game': cfg.to_dict(), 'sweep': {'param': sweep_param,
            'values': grid.tolist() if grid is not None else None}}

    def run(out_dir: str):
        outputs, exit_code = [], EXIT_OK
        if grid is not None:
            sweep_mode = {'binary_closed_form': 'binary'}.get(mode, mode)
            frame = capacity_sweep(sweep_mode, cfg, sweep_param, grid)
            path = os.path.join(out_dir, 'capacity_sweep.csv')
            frame.to_csv(path, index=False)
            outputs.append(path)
            summary = {'mode': mode, 'sweep': sweep_param, 'values': frame[sweep_param].tolist(),
                       'capacity': frame['C'].tolist()}
        elif mode in ('active', 'pubwm'):
            result = capacity_active(cfg) if mode == 'active' else capacity_pubwm(cfg)
            summary = {'mode': mode, **result.to_dict()}
            if not result.converged:
                exit_code = EXIT_NONCONVERGENCE
        elif mode == 'passive':
            result = capacity_passive(cfg.p_S, cfg.d, cfg.D1, cfg.tol)
            summary = {'mode': mode, **result.to_dict(), 'rd_upper_bound': rd_bound(cfg.p_S, cfg.d, cfg.D1)}
            if not result.converged:
                exit_code = EXIT_NONCONVERGENCE
        elif mode == 'binary_closed_form':
            summary = {'mode': mode, 'value': capacity_binary_hamming(cfg.D1, cfg.D2)}
        elif mode == 'no_cover':
            summary = {'mode': mode, 'value': capacity_no_cover(cfg.p_S, cfg.d, cfg.D2)}
        else:
            report = verify_no_loss_cyclic(cfg.q, cfg.d, cfg.D1, cfg.D2, cfg.L, cfg.tol,
                                           cfg.multistarts, cfg.seed, cfg.threads, cfg.max_iters)
            summary = {'mode': mode, **report.to_dict()}
            if not report.to_dict()['converged']:
                exit_code = EXIT_NONCONVERGENCE
        outputs.append(_write_json(out_dir, 'capacity.json', summary, cfg.tol))
        return exit_code, outputs

    return echo, run


# ---------------------------------------------------------------------------
# exponent

def prepare_exponent(args, run_config: dict, seed: int) -> Tuple[dict, Runner]:
    section = run_config.get('exponent', {})
    mode = args.mode or section.get('mode', 'active')
    if mode not in ('active', 'passive', 'pubwm'):
        raise ConfigError(f"unknown exponent mode {mode!r}")
    cfg = _game_config(args, run_config, seed)
    if mode != 'passive' and (cfg.q != 2 or cfg.L > 4):
        raise ConfigError("active and pubwm exponents need a binary source and L <= 4")
    rates = parse_grid(args.rates or section.get('rates') or '0:1:11')
    if rates.size == 0 or (rates < 0).any():
        raise ConfigError("rate grid must be nonempty and nonnegative")

    echo = {'mode': mode, 'game': cfg.to_dict(), 'rates': rates.tolist()}

    def run(out_dir: str):
        curve = exponent_curve(cfg, rates, mode)
        path = os.path.join(out_dir, 'exponent.csv')
        curve.to_frame().to_csv(path, index=False)
        summary = {
            'mode': mode,
            'rates': curve.rates.tolist(),
            'exponents': curve.exponents.tolist(),
            'raw_exponents': curve.raw_exponents.tolist(),
            'zero_crossing': zero_crossing(curve),
        }
        return EXIT_OK, [path, _write_json(out_dir, 'exponent.json', summary, cfg.tol)]

    return echo, run


# ---------------------------------------------------------------------------
# codec

def _resolve_key(args, scheme: str, N: int, codec=None):
    """Key from --key-seed (optionally stored under --key-name) or from the key store."""
    if scheme == 'ccc':
        return None
    store = KeyStore(args.key_file) if args.key_file else None
    if args.key_seed is not None:
        rng = np.random.default_rng(args.key_seed)
        key = RmKey.random(N, rng) if scheme == 'rm' else codec.random_key(rng)
        if store is not None and args.key_name:
            if scheme == 'rm':
                store.put_rm_key(args.key_name, key.perm)
            else:
                store.put_coset_leader(args.key_name, key)
        return key
    if store is not None and args.key_name:
        if scheme == 'rm':
            perm = store.get_rm_key(args.key_name)
            if perm is None:
                raise ConfigError(f"no RM key named '{args.key_name}' in {args.key_file}")
            return RmKey(tuple(perm))
        leader = store.get_coset_leader(args.key_name)
        if leader is None:
            raise ConfigError(f"no coset leader named '{args.key_name}' in {args.key_file}")
        return leader
    raise ConfigError("a key is required: --key-seed, or --key-file with --key-name")


def prepare_codec(args, run_config: dict, seed: int) -> Tuple[dict, Runner]:
    section = run_config.get('codec', {})
    action = args.action
    scheme = args.scheme or section.get('scheme', 'rm')
    if scheme not in ('ccc', 'rm', 'nested'):
        raise ConfigError(f"unknown codec scheme {scheme!r}")
    echo = {'action': action, 'scheme': scheme}

    if scheme == 'nested':
        if action == 'build':
            raise ConfigError("nested codes have no codebook to build")
        code = _nested_code(args, run_config)
        handle = NestedCodec(code)
        echo['nested'] = {'N': code.N, 'G2': code.G2.tolist(), 'G1': code.G1.tolist()}
    elif action == 'build' or (action == 'loopback' and not args.codebook):
        params = _codec_params(args, run_config, seed)
        echo['params'] = params.to_dict()
        handle = None
    else:
        if not args.codebook:
            raise ConfigError(f"codec {action} needs --codebook")
        if not os.path.exists(args.codebook):
            raise ConfigError(f"codebook not found: {args.codebook}")
        params = None
        handle = None
        echo['codebook'] = args.codebook

    attack = parse_attack(args.attack or section.get('attack'))
    trials = _pick(args.trials, section, 'trials', 1000, int)
    echo['attack'] = attack.to_dict()

    if action in ('encode', 'decode'):
        symbols = args.covertext if action == 'encode' else args.stegotext
        if symbols is None:
            raise ConfigError(f"codec {action} needs --{'covertext' if action == 'encode' else 'stegotext'}")
        if not os.path.exists(symbols):
            raise ConfigError(f"symbol file not found: {symbols}")
        if scheme != 'ccc' and args.key_seed is None:
            if not (args.key_file and args.key_name):
                raise ConfigError("a key is required: --key-seed, or --key-file with --key-name")
            store = KeyStore(args.key_file)
            found = store.get_rm_key(args.key_name) if scheme == 'rm' else store.get_coset_leader(args.key_name)
            if found is None:
                raise ConfigError(f"no {scheme} key named '{args.key_name}' in {args.key_file}")
        message = _pick(args.message, section, 'message', 0, int)
        echo.update({'message': message, 'key_seed': args.key_seed, 'key_name': args.key_name})

    def codebook():
        return build_stacked_codebook(params) if params is not None else load_codebook(args.codebook)

    def run(out_dir: str):
        if action == 'build':
            cb = build_stacked_codebook(params)
            path = os.path.join(out_dir, 'codebook.sbcb')
            save_codebook(cb, path)
            outputs = [path]
            if args.dump:
                outputs.append(_write_json(out_dir, 'codebook.json', codebook_to_dict(cb)))
            return EXIT_OK, outputs

        if action == 'loopback':
            if scheme == 'nested':
                codec = handle
            else:
                proto = CccPrototype(codebook())
                codec = proto if scheme == 'ccc' else RmCode(proto)
            report = estimate_error_prob(codec, attack, trials, seed, exhaustive=args.exhaustive,
                                         threads=args.threads or 1)
            return EXIT_OK, [_write_json(out_dir, 'trial_report.json', report.to_dict())]

        if scheme == 'nested':
            code, N, q = handle.code, handle.block_length, 2
        else:
            cb = codebook()
            N, q = cb.N, cb.q
        key = _resolve_key(args, scheme, N, handle)
        if isinstance(key, RmKey) and key.N != N:
            raise CodebookMismatch(f"key permutes {key.N} positions, codebook has N={N}")
        if scheme == 'nested' and len(key) != N:
            raise CodebookMismatch(f"coset leader has length {len(key)}, code has N={N}")
        rng = np.random.default_rng(seed)

        if action == 'encode':
            s = _read_symbols(args.covertext, q)
            if scheme == 'nested':
                if len(s) != N:
                    raise CodebookMismatch(f"covertext length {len(s)} does not match N={N}")
                x = nested_encode(s, message, code, key, rng)
            elif scheme == 'rm':
                if len(s) != N:
                    raise CodebookMismatch(f"covertext length {len(s)} does not match N={N}")
                x = rm_encode(s, message, cb, key, rng)
            else:
                x = CccPrototype(cb).encode(s, message, None, rng)
            path = os.path.join(out_dir, 'stegotext.txt')
            with open(path, 'w') as f:
                f.write(str(x) + '\n')
            return EXIT_OK, [path]

        y = _read_symbols(args.stegotext, q)
        result = {'message': None, 'error': None}
        try:
            if scheme == 'nested':
                if len(y) != N:
                    raise CodebookMismatch(f"stegotext length {len(y)} does not match N={N}")
                result['message'] = nested_decode(y, code, key)
            elif scheme == 'rm':
                if len(y) != N:
                    raise CodebookMismatch(f"stegotext length {len(y)} does not match N={N}")
                result['message'] = rm_decode(y, cb, key)
            else:
                result['message'] = CccPrototype(cb).decode(y, None)
        except DecodeError as e:
            result['error'] = e.reason
            logger.warning(f"⚠️ Decoder declared an error: {e}")
        return EXIT_OK, [_write_json(out_dir, 'decoded.json', result)]

    return echo, run


# ---------------------------------------------------------------------------
# verify

def prepare_verify(args, run_config: dict, seed: int) -> Tuple[dict, Runner]:
    section = run_config.get('verify', {})
    scheme = args.scheme or section.get('scheme', 'rm')
    if args.control:
        scheme = 'control'
    if scheme not in ('rm', 'nested', 'control'):
        raise ConfigError(f"unknown verify scheme {scheme!r}")
    sampled = args.sampled or bool(section.get('sampled', False))
    samples = _pick(args.samples, section, 'samples', 100_000, int)
    p_S, _ = _source_and_distortion(run_config)
    echo = {'scheme': scheme, 'sampled': sampled, 'samples': samples if sampled else None}

    if scheme == 'nested':
        code = _nested_code(args, run_config)
        echo['nested'] = {'N': code.N}
        make = lambda: NestedCodec(code, p_S)
    elif scheme == 'control':
        N = _pick(args.N, section, 'N', 4, int)
        echo['N'] = N
        make = lambda: FixedKeyCode(RmCode(SortingPrototype(N, p_S)), RmKey.identity(N))
    else:
        params = _codec_params(args, run_config, seed)
        echo['params'] = params.to_dict()
        make = lambda: RmCode(CccPrototype(build_stacked_codebook(params)))

    def run(out_dir: str):
        codec = make()
        if sampled:
            report = sampled_stego_distribution(codec, samples, seed)
            exit_code = EXIT_OK
        else:
            report = exact_stego_distribution(codec)
            exit_code = EXIT_OK if report.passed else EXIT_SECURITY
        return exit_code, [_write_json(out_dir, 'security_report.json', report.to_dict())]

    return echo, run


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', dest='config', type=str, default=None, help='JSON run config')
    common.add_argument('--seed', dest='seed', type=int, default=None)
    common.add_argument('--threads', dest='threads', type=int, default=None)
    common.add_argument('--out-dir', dest='out_dir', type=str, default='.')
    common.add_argument('--tol', dest='tol', type=float, default=None)
    common.add_argument('--max-iters', dest='max_iters', type=int, default=None)
    common.add_argument('--multistarts', dest='multistarts', type=int, default=None)
    common.add_argument('--L', dest='L', type=int, default=None, help='auxiliary alphabet size')
    common.add_argument('--D1', dest='D1', type=float, default=None, help='embedding distortion')
    common.add_argument('--D2', dest='D2', type=float, default=None, help='attack distortion')

    parser = argparse.ArgumentParser(prog='stegcap', description='Perfectly secure steganography toolkit')
    sub = parser.add_subparsers(dest='command', required=True)

    cap = sub.add_parser('capacity', parents=[common], help='capacity of the steganography game')
    modes = cap.add_mutually_exclusive_group()
    for flag, mode in (('--active', 'active'), ('--passive', 'passive'), ('--pubwm', 'pubwm'),
                       ('--binary-closed-form', 'binary_closed_form'), ('--no-cover', 'no_cover'),
                       ('--verify-cyclic', 'verify_cyclic')):
        modes.add_argument(flag, dest='mode', action='store_const', const=mode)
    cap.add_argument('--sweep', dest='sweep', choices=('D1', 'D2'), default=None)
    cap.add_argument('--grid', dest='grid', type=str, default=None, help='start:stop:count or a comma list')

    exp = sub.add_parser('exponent', parents=[common], help='random-coding error exponent')
    exp_modes = exp.add_mutually_exclusive_group()
    for flag, mode in (('--active', 'active'), ('--passive', 'passive'), ('--pubwm', 'pubwm')):
        exp_modes.add_argument(flag, dest='mode', action='store_const', const=mode)
    exp.add_argument('--rates', dest='rates', type=str, default=None, help='start:stop:count or a comma list')

    cod = sub.add_parser('codec', parents=[common], help='build, encode, decode, loopback')
    cod.add_argument('action', choices=('build', 'encode', 'decode', 'loopback'))
    cod.add_argument('--scheme', dest='scheme', choices=('ccc', 'rm', 'nested'), default=None)
    cod.add_argument('--codebook', dest='codebook', type=str, default=None)
    cod.add_argument('--covertext', dest='covertext', type=str, default=None)
    cod.add_argument('--stegotext', dest='stegotext', type=str, default=None)
    cod.add_argument('--message', dest='message', type=int, default=None)
    cod.add_argument('--key-seed', dest='key_seed', type=int, default=None)
    cod.add_argument('--key-file', dest='key_file', type=str, default=None)
    cod.add_argument('--key-name', dest='key_name', type=str, default=None)
    cod.add_argument('--attack', dest='attack', type=str, default=None, help='passive or bsc:p')
    cod.add_argument('--trials', dest='trials', type=int, default=None)
    cod.add_argument('--exhaustive', dest='exhaustive', action='store_true')
    cod.add_argument('--dump', dest='dump', action='store_true', help='also write codebook.json')
    cod.add_argument('--N', dest='N', type=int, default=None)
    cod.add_argument('--R', dest='R', type=float, default=None)
    cod.add_argument('--epsilon', dest='epsilon', type=float, default=None)

    ver = sub.add_parser('verify', parents=[common], help='exact perfect-security check')
    ver.add_argument('--scheme', dest='scheme', choices=('rm', 'nested', 'control'), default=None)
    ver.add_argument('--control', dest='control', action='store_true',
                     help='fixed identity key over the sorting prototype')
    ver.add_argument('--sampled', dest='sampled', action='store_true')
    ver.add_argument('--samples', dest='samples', type=int, default=None)
    ver.add_argument('--N', dest='N', type=int, default=None)
    ver.add_argument('--R', dest='R', type=float, default=None)
    ver.add_argument('--epsilon', dest='epsilon', type=float, default=None)
    return parser


PREPARERS = {
    'capacity': prepare_capacity,
    'exponent': prepare_exponent,
    'codec': prepare_codec,
    'verify': prepare_verify,
}


def _record_run(manifest: RunManifest, out_dir: str):
    path = _write_json(out_dir, 'manifest.json', asdict(manifest))
    if database.configure_engine() is not None and database.init_db():
        database.add_run_to_db({
            'command': manifest.command, 'seed': manifest.seed, 'config': manifest.config,
            'tool_version': manifest.tool_version, 'wall_time': manifest.wall_time,
            'output_paths': manifest.output_paths + [path], 'exit_code': manifest.exit_code,
        })
    return path


def main(argv=None) -> int:
    logging.basicConfig(format=LOG_FORMAT, level=getattr(logging, LOG_LEVEL.upper(), logging.INFO))
    args = build_parser().parse_args(argv)
    started = time.perf_counter()

    try:
        run_config = load_run_config(args.config)
        seed = resolve_seed(args.seed, run_config)
        echo, run = PREPARERS[args.command](args, run_config, seed)
    except ConfigError as e:
        logger.error(f"❌ Config error: {e}")
        return EXIT_CONFIG

    os.makedirs(args.out_dir, exist_ok=True)
    try:
        exit_code, outputs = run(args.out_dir)
    except CodebookMismatch as e:
        logger.error(f"❌ Codebook mismatch: {e}")
        exit_code, outputs = EXIT_CODEC_MISMATCH, []
    except ConfigError as e:
        logger.error(f"❌ Config error: {e}")
        exit_code, outputs = EXIT_CONFIG, []
    except Exception as e:
        logger.error(f"❌ {args.command} failed: {e}", exc_info=True)
        exit_code, outputs = 1, []

    manifest = RunManifest(args.command, echo, seed, wall_time=time.perf_counter() - started,
                           output_paths=outputs, exit_code=exit_code)
    _record_run(manifest, args.out_dir)
    marker = '✅' if exit_code == EXIT_OK else '⚠️'
    logger.info(f"{marker} {args.command} finished with exit code {exit_code} in {manifest.wall_time:.2f}s")
    return exit_code


if __name__ == '__main__':
    sys.exit(main())
