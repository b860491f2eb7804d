"""Analytic resource figures, capacity numbers and measured operation counts."""

from polychron.resources.analytic import (
    AnnTransformerConfig,
    Bandwidth,
    ResourceReport,
    ann_transformer_report,
    combine,
    lut_report,
    model_report,
    snn_head_report,
    snn_rnn_report,
    snn_transformer_report,
    transform_report,
)
from polychron.resources.capacity import (
    CapacityRow,
    binned_capacity,
    capacity,
    capacity_table,
    factorial_capacity,
)
from polychron.resources.counters import counter_mismatches, expected_counts, measure, runtime_counters
from polychron.resources.render import render_csv, render_text


__all__ = [
    "AnnTransformerConfig",
    "Bandwidth",
    "CapacityRow",
    "ResourceReport",
    "ann_transformer_report",
    "binned_capacity",
    "capacity",
    "capacity_table",
    "combine",
    "counter_mismatches",
    "expected_counts",
    "factorial_capacity",
    "lut_report",
    "measure",
    "model_report",
    "render_csv",
    "render_text",
    "runtime_counters",
    "snn_head_report",
    "snn_rnn_report",
    "snn_transformer_report",
    "transform_report",
]
