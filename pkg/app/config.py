import os

from dotenv import load_dotenv

load_dotenv()


class Config:
    # State engine
    MAX_STATE_DIM: int = int(os.getenv('SQKD_MAX_STATE_DIM', str(2 ** 24)))
    NORM_TOLERANCE: float = 1e-9
    UNITARITY_TOLERANCE: float = 1e-10
    HERMITIAN_TOLERANCE: float = 1e-10
    PSD_TOLERANCE: float = -1e-9
    IMPOSSIBLE_OUTCOME: float = 1e-15
    DUMP_AMPLITUDE_CUTOFF: float = 1e-12

    # Protocol defaults (strict robustness setting)
    DEFAULT_P_CTRL: float = 0.0
    DEFAULT_P_TEST: float = 0.0

    # Analysis
    ENUMERATION_CAP: int = int(os.getenv('SQKD_ENUMERATION_CAP', str(10 ** 7)))
    BOOTSTRAP_RESAMPLES: int = int(os.getenv('SQKD_BOOTSTRAP_RESAMPLES', '1000'))
    CONFIDENCE: float = float(os.getenv('SQKD_CONFIDENCE', '0.99'))
    MIN_MI_SAMPLES: int = int(os.getenv('SQKD_MIN_MI_SAMPLES', '1000'))

    # Harness
    WORKERS: int = int(os.getenv('SQKD_WORKERS', '1'))
    OUTPUT_DIR: str = os.getenv('SQKD_OUTPUT_DIR', 'runs')

    # Application
    API_HOST: str = os.getenv('API_HOST', '127.0.0.1')
    API_PORT: int = int(os.getenv('API_PORT', '8000'))
    MAX_JOBS: int = int(os.getenv('SQKD_MAX_JOBS', '100'))

    # Logging
    LOG_LEVEL: str = os.getenv('LOG_LEVEL', 'INFO')
    LOG_FORMAT: str = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
