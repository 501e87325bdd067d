import os
import json
import logging
from dotenv import load_dotenv

load_dotenv()

logger = logging.getLogger(__name__)

TOOL_VERSION = '0.1.0'

DATABASE_URL = os.getenv('STEGCAP_DATABASE_URL')
LOG_LEVEL = os.getenv('STEGCAP_LOG_LEVEL', 'INFO')
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# Probability / feasibility tolerances
PMF_TOL = 1e-12
FEASIBILITY_TOL = 1e-9
SECURITY_TV_TOL = 1e-12

# Desk-scale caps
MAX_SOURCE_ALPHABET = 8
MAX_AUX_ALPHABET = 16
EXPONENT_SOURCE_ALPHABET = 2
EXPONENT_MAX_AUX = 4
MAX_CODEBOOK_N = {
    2: 20,
    3: 12,
}
MAX_CODEBOOK_N_OTHER = 8
MAX_CONDITIONAL_CANDIDATES = 2_000_000
MAX_CODEBOOK_SYMBOLS = 200_000_000
MAX_EXACT_PERMUTATIONS = 720
MAX_NESTED_N = 20

# Solver defaults
DEFAULT_TOL = 1e-3
DEFAULT_MAX_ITERS = 200
DEFAULT_MULTISTARTS = 16
DEFAULT_SEED = 0
DEFAULT_THREADS = 1
ATTACK_GRID_POINTS = 401
EXPONENT_SOURCE_GRID = 11
PASSIVE_EXPONENT_GRID = 201
SUBGRADIENT_STEPS = 40

# CLI exit codes
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGENCE = 3
EXIT_CODEC_MISMATCH = 4
EXIT_SECURITY = 5

CONFIG_SECTIONS = ('game', 'sweep', 'exponent', 'codec', 'verify')


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


def resolve_seed(explicit=None, config=None) -> int:
    """--seed flag, then the config file, then STEGCAP_SEED, then DEFAULT_SEED."""
    if explicit is not None:
        return int(explicit)
    if config and config.get('seed') is not None:
        return int(config['seed'])
    env_seed = os.getenv('STEGCAP_SEED')
    if env_seed:
        try:
            return int(env_seed)
        except ValueError:
            raise ConfigError(f"STEGCAP_SEED must be an integer, got {env_seed!r}")
    return DEFAULT_SEED


def load_run_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path, 'r') as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config file {path} is not valid JSON: {e}")

    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    for section in CONFIG_SECTIONS:
        if section in data and not isinstance(data[section], dict):
            raise ConfigError(f"config section '{section}' must be an object")
    if 'seed' in data and data['seed'] is not None and not isinstance(data['seed'], int):
        raise ConfigError("seed must be an integer")

    logger.info(f"✅ Loaded run config from {path}")
    return data
