import hashlib
import uuid
from datetime import datetime, timezone
from fractions import Fraction
from typing import Iterable

import numpy as np


def config_hash(text: str) -> str:
    """
    SHA-256 of a configuration document, whitespace-insensitive.

    :param text: Raw configuration text.
    :return: Hex digest.
    """
    canonical = "".join(text.split())
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def make_run_id(command: str) -> str:
    """
    Unique run identifier: command, UTC timestamp and a random suffix.

    :param command: CLI subcommand.
    :return: e.g. 'compare-20260101T120000-1a2b3c'.
    """
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S")
    return f"{command}-{stamp}-{uuid.uuid4().hex[:6]}"


def max_norm(vector: Iterable[float]) -> float:
    """Largest absolute entry, 0 for an empty vector."""
    values = np.asarray(vector if isinstance(vector, np.ndarray) else list(vector), dtype=float)
    return float(np.max(np.abs(values), initial=0.0))


def relative_drift(values: Iterable[float]) -> float:
    """max |H(n) - H(0)| / |H(0)|; 0 for an empty or constant-zero sequence."""
    values = np.asarray(values if isinstance(values, np.ndarray) else list(values), dtype=float)
    if values.size == 0:
        return 0.0
    scale = abs(values[0])
    spread = float(np.max(np.abs(values - values[0])))
    if scale == 0.0:
        return 0.0 if spread == 0.0 else float("inf")
    return spread / scale


def format_stamp(step: int, offset: Fraction) -> str:
    """Readable time level, e.g. 'n=3' or 'n=7/2'."""
    level = Fraction(step) + offset
    return f"n={level.numerator}" if level.denominator == 1 else f"n={level.numerator}/{level.denominator}"
