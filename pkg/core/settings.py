"""
Environment-driven runtime settings
"""

import logging
import os
from dataclasses import dataclass

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RuntimeSettings:
    threads: int = 1
    log_level: str = "INFO"


def _int_env(name: str, default: int) -> int:
    raw = os.getenv(name, str(default)) or str(default)
    try:
        return int(raw)
    except ValueError:
        logger.warning(f"Ignoring non-integer {name}={raw!r}, using {default}")
        return default


def load_settings() -> RuntimeSettings:
    """Read FURTHLAB_* variables; called per run so tests can monkeypatch the environment."""
    threads = max(1, _int_env("FURTHLAB_THREADS", 1))
    level = str(os.getenv("FURTHLAB_LOG_LEVEL", "INFO")).upper()
    return RuntimeSettings(threads=threads, log_level=level)
