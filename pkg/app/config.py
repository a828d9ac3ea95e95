import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()


def _env_float(name: str, default: float) -> float:
    value = os.getenv(name)
    return float(value) if value not in (None, '') else default


def _env_int(name: str, default: int) -> int:
    value = os.getenv(name)
    return int(value) if value not in (None, '') else default


def _env_bool(name: str, default: bool) -> bool:
    value = os.getenv(name)
    if value in (None, ''):
        return default
    return value.strip().lower() in ('1', 'true', 'yes', 'on')


class Config:
    VERSION = '1.0.0'
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'WARNING')

    # Polynomial / rational arithmetic
    POLE_SEPARATION_TOL = _env_float('POLE_SEPARATION_TOL', 1e-8)
    ROOT_TOL = _env_float('ROOT_TOL', 1e-12)
    ROOT_MAX_ITER = _env_int('ROOT_MAX_ITER', 100)

    # Representation oracle
    REP_MAX_DIM = _env_int('REP_MAX_DIM', 4096)

    # Bethe solver
    BETHE_TOL = _env_float('BETHE_TOL', 1e-11)
    NEWTON_MAX_STEPS = _env_int('NEWTON_MAX_STEPS', 60)
    NEWTON_MAX_HALVINGS = _env_int('NEWTON_MAX_HALVINGS', 20)
    BETHE_NUM_STARTS = _env_int('BETHE_NUM_STARTS', 64)
    BETHE_DEDUP_TOL = _env_float('BETHE_DEDUP_TOL', 1e-7)
    BETHE_SEED = _env_int('BETHE_SEED', 0)

    # Pull-back
    PULLBACK_BETHE_TOL = _env_float('PULLBACK_BETHE_TOL', 1e-8)
    PULLBACK_STRICT = _env_bool('PULLBACK_STRICT', True)

    # Monodromy
    INTEGRATOR_TOL = _env_float('INTEGRATOR_TOL', 1e-10)
    CLASSIFY_TOL = _env_float('CLASSIFY_TOL', 1e-6)
    MONODROMY_CLEARANCE = _env_float('MONODROMY_CLEARANCE', 1e-6)
    MONODROMY_REFINEMENTS = _env_int('MONODROMY_REFINEMENTS', 3)

    # Schlesinger
    RESIDUE_TOL = _env_float('RESIDUE_TOL', 1e-8)

    # Parallelism cap for multi-start search and per-loop transport
    JOBS = _env_int('GAUDIN_JOBS', 1)


class DevelopmentConfig(Config):
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')


class ProductionConfig(Config):
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'WARNING')


class TestingConfig(Config):
    TESTING = True
    LOG_LEVEL = 'DEBUG'
    BETHE_NUM_STARTS = 32
    JOBS = 1


# Configuration dictionary
config_by_name = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
    'default': ProductionConfig
}


def get_config():
    env = os.getenv('GAUDIN_ENV', 'default')
    return config_by_name.get(env, ProductionConfig)
