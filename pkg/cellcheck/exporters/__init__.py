"""
Export modules for writing partitions, fields, tables and comparisons.
"""

from .csv import compare_frame, mc_frame, read_frame, save_frame, tau_curve_frame
from .jsonl import (
    FORMAT_VERSION,
    ExportFormatError,
    FieldExporter,
    read_header,
    read_partition,
    read_table,
    write_table,
)

__all__ = [
    'ExportFormatError',
    'FORMAT_VERSION',
    'FieldExporter',
    'compare_frame',
    'mc_frame',
    'read_frame',
    'read_header',
    'read_partition',
    'read_table',
    'save_frame',
    'tau_curve_frame',
    'write_table',
]
