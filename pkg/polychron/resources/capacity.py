"""Representation capacity of spike-timing codes, in log space."""

from __future__ import annotations

import math
from dataclasses import dataclass


def capacity(n_t: int, n_c: int) -> int:
    """log2 of the number of spiking patterns a transform tells apart (``2^(n_t n_c)``)."""
    if n_t < 0 or n_c < 0:
        raise ValueError("n_t and n_c must be non-negative")
    return n_t * n_c


def factorial_capacity(n: int) -> float:
    """log10 of ``n!``, the number of firing orders of ``n`` neurons."""
    if n < 0:
        raise ValueError("n must be non-negative")
    return math.lgamma(n + 1) / math.log(10)


def binned_capacity(n: int, m: int) -> float:
    """log10 of ``m^n``, the patterns of ``n`` neurons with ``m`` latency bins each."""
    if n < 0 or m < 1:
        raise ValueError("need n >= 0 and m >= 1")
    return n * math.log10(m)


@dataclass(frozen=True)
class CapacityRow:
    name: str
    formula: str
    log10_patterns: float


def capacity_table(n_t: int, n_c: int, n: int | None = None, m: int | None = None) -> list[CapacityRow]:
    rows = [CapacityRow("lut", "2^(n_t*n_c)", capacity(n_t, n_c) * math.log10(2))]
    if n is not None:
        rows.append(CapacityRow("order", "n!", factorial_capacity(n)))
        if m is not None:
            rows.append(CapacityRow("binned", "m^n", binned_capacity(n, m)))
    return rows
