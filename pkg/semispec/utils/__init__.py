"""
Utility helpers for semispec
"""
from .format_utils import (
    complex_pair, complex_pairs, parse_complex_token, parse_complex_list,
    fmt17, format_points, write_csv,
)
from .sweep_utils import ordered_map

__all__ = [
    'complex_pair', 'complex_pairs', 'parse_complex_token',
    'parse_complex_list', 'fmt17', 'format_points', 'write_csv', 'ordered_map',
]
