"""
Config Module - Settings and Logging
Reads defaults from the .env file (python-dotenv) or the environment
CLI flags and the dashboard override whatever is returned here
"""
import logging
import os
import sys

from dotenv import load_dotenv

# Load environment variables from .env file (for local runs)
load_dotenv()

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

DEFAULTS = {
    'interval_seconds': 300,
    'launch_latency': 1,
    'min_rental': None,  # None = one billing quantum
    'kf_q': None,        # None = derived from the trace
    'kf_r': None,
    'headroom': 1.0,
    'seed': 0,
    'log_level': 'WARNING',
    'out_dir': None,
}

_CASTS = {
    'interval_seconds': int,
    'launch_latency': int,
    'min_rental': int,
    'kf_q': float,
    'kf_r': float,
    'headroom': float,
    'seed': int,
    'log_level': str,
    'out_dir': str,
}


def _lookup(name, secrets):
    key = f"PLANNER_{name.upper()}"
    if secrets is not None:
        try:
            return secrets[key]
        except (KeyError, FileNotFoundError, AttributeError):
            pass
    return os.getenv(key)


def get_settings(secrets=None):
    """
    Get planner settings

    How it works:
    1. Checks the optional secrets mapping (st.secrets on Streamlit Cloud)
    2. Falls back to PLANNER_* environment variables (.env for local)
    3. Uses the built-in default when neither is set

    Args:
        secrets: Optional mapping consulted before the environment

    Returns:
        dict: Settings keyed by name (interval_seconds, launch_latency, ...)
    """
    settings = {}
    for name, default in DEFAULTS.items():
        raw = _lookup(name, secrets)
        # Empty strings in .env mean "not set"
        if raw is None or str(raw).strip() == '':
            settings[name] = default
            continue
        try:
            settings[name] = _CASTS[name](raw)
        except ValueError:
            logging.getLogger(__name__).warning(
                "Ignoring PLANNER_%s=%r (not a valid %s)", name.upper(), raw, _CASTS[name].__name__)
            settings[name] = default
    return settings


def setup_logging(level='WARNING'):
    """Send log records to stderr; stdout is reserved for results"""
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.WARNING),
        format=LOG_FORMAT,
        stream=sys.stderr,
        force=True,
    )
