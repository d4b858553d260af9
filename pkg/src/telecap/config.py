"""Numerical tolerances and guardrails shared by every module."""

from __future__ import annotations

import os
from dataclasses import dataclass

DEFAULT_MAX_DIM = 6561  # 3**8
MAX_DIM_ENV = "TELECAP_MAX_DIM"


@dataclass(frozen=True)
class Tolerances:
    hermiticity: float = 1e-10
    trace: float = 1e-10
    psd_slack: float = -1e-9
    norm: float = 1e-10
    unitarity: float = 1e-10
    probability_floor: float = 1e-14
    # A usefulness verdict needs min fidelity above the threshold by this margin.
    verdict_margin: float = 1e-9


DEFAULT_TOLERANCES = Tolerances()


class DimensionError(ValueError):
    """Total Hilbert-space dimension exceeds the configured guardrail."""


def max_dim() -> int:
    """Current dimension cap, honouring ``TELECAP_MAX_DIM`` when set."""
    raw = os.environ.get(MAX_DIM_ENV)
    if raw is None or raw.strip() == "":
        return DEFAULT_MAX_DIM
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValueError(f"{MAX_DIM_ENV} must be an integer, got {raw!r}") from exc
    if value < 1:
        raise ValueError(f"{MAX_DIM_ENV} must be positive, got {value}")
    return value


def check_dim(total: int, limit: int | None = None) -> None:
    cap = max_dim() if limit is None else limit
    if total > cap:
        raise DimensionError(
            f"total dimension {total} exceeds guardrail {cap} (set {MAX_DIM_ENV} to override)"
        )
