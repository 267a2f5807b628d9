"""Defaults read from the environment (and a ``.env`` file, when present)."""

from __future__ import annotations

import logging
import os
from pathlib import Path

from dotenv import load_dotenv

logger = logging.getLogger(__name__)

if not load_dotenv():
    logger.debug("No .env file found")

SEED_VAR = "ADAPTEST_SEED"
WORKERS_VAR = "ADAPTEST_WORKERS"
OUT_VAR = "ADAPTEST_OUT"
FULL_VAR = "ADAPTEST_FULL"


def _int_setting(name: str, default: int, minimum: int) -> int:
    raw = os.environ.get(name)
    if raw is None or not raw.strip():
        return default
    try:
        value = int(raw)
    except ValueError as exc:
        raise EnvironmentError(f"{name} must be an integer, got {raw!r}") from exc
    if value < minimum:
        raise EnvironmentError(f"{name} must be at least {minimum}, got {value}")
    return value


def default_seed() -> int:
    return _int_setting(SEED_VAR, 0, 0)


def default_workers() -> int:
    return _int_setting(WORKERS_VAR, 1, 1)


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_VAR) or "results").expanduser()


def full_trials() -> bool:
    return os.environ.get(FULL_VAR, "").strip() in {"1", "true", "yes"}


__all__ = ["default_out_dir", "default_seed", "default_workers", "full_trials"]
