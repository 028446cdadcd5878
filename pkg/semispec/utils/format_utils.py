"""
Formatting helpers: complex pairs, command-line tokens and CSV rows
"""
import csv
import logging
import os
from typing import Iterable, List, Sequence

from ..models.errors import ConfigError

logger = logging.getLogger(__name__)


def complex_pair(z) -> List[float]:
    """Complex number as [re, im]"""
    z = complex(z)
    return [float(z.real), float(z.imag)]


def complex_pairs(values: Iterable) -> List[List[float]]:
    return [complex_pair(z) for z in values]


def parse_complex_token(token: str) -> complex:
    """Parse a `re[:im]` token"""
    parts = token.strip().split(":")
    if len(parts) > 2 or not parts[0]:
        raise ConfigError(f"cannot parse complex token {token!r}; use re[:im]")
    try:
        re_part = float(parts[0])
        im_part = float(parts[1]) if len(parts) == 2 else 0.0
    except ValueError:
        raise ConfigError(f"cannot parse complex token {token!r}; use re[:im]")
    return complex(re_part, im_part)


def parse_complex_list(text: str) -> List[complex]:
    """Parse comma-separated `re[:im]` tokens"""
    if text is None or not text.strip():
        return []
    return [parse_complex_token(tok) for tok in text.split(",")]


def fmt17(value: float) -> str:
    """17 significant digits, lossless for doubles"""
    return f"{float(value):.17g}"


def format_points(points: Iterable) -> str:
    """Human readable point set for stdout summaries"""
    items = []
    for z in points:
        z = complex(z)
        if abs(z.imag) < 1e-15:
            items.append(f"{z.real:.6g}")
        else:
            items.append(f"{z.real:.6g}{z.imag:+.6g}i")
    return "{" + ", ".join(items) + "}" if items else "∅"


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[float]]) -> str:
    """Write numeric rows with 17 significant digits"""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt17(v) for v in row])
    logger.info(f"Wrote CSV: {path}")
    return path
