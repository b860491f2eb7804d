"""Measured operation counts from an instrumented inference pass.

Comparisons and rows loaded must equal the closed forms exactly and no data
value is ever multiplied. Additions are reported but not matched: the
attention figure in the closed form bounds the gathered rows over a full
context, and residual adds are not part of the tables.
"""

from __future__ import annotations

import numpy as np
import structlog
from numpy.typing import NDArray

from polychron.core.instrumentation import OpCounter
from polychron.models.base import LanguageModel, check_tokens, parameter_count
from polychron.models.rnn import SpikingRnn
from polychron.models.transformer import SnnTransformer
from polychron.resources.analytic import Bandwidth, ResourceReport, compute_counts, combine


logger = structlog.get_logger()

MATCHED = ("comparisons", "rows_loaded", "multiplications")


def measure(model: LanguageModel, tokens: NDArray[np.integer]) -> OpCounter:
    counter = OpCounter()
    model.forward(tokens, counter)
    return counter


def _as_report(component: str, counter: OpCounter, tokens: int, footprint: int = 0) -> ResourceReport:
    totals = counter.total()
    return ResourceReport(
        component=component,
        memory_footprint=footprint,
        bandwidth=Bandwidth(totals["values_loaded"] // max(tokens, 1)),
        compute=compute_counts(
            multiplications=totals["multiplications"],
            additions=totals["additions"],
            comparisons=totals["comparisons"],
            concatenations=totals["concatenations"],
        ),
    )


def runtime_counters(model: LanguageModel, tokens: NDArray[np.integer]) -> ResourceReport:
    """Instrumented inference over ``tokens``, one part per counter scope.

    Compute is the total over every position; bandwidth is the mean number
    of values loaded per token.
    """
    counter = measure(model, tokens)
    size = int(check_tokens(tokens).size)
    parts = [_as_report(name, child, size) for name, child in counter.children.items()]
    report = combine("measured", parts)
    return ResourceReport(
        component=report.component,
        memory_footprint=parameter_count(model),
        bandwidth=_as_report("measured", counter, size).bandwidth,
        compute=report.compute,
        parts=report.parts,
    )


def expected_counts(model: LanguageModel, tokens: NDArray[np.integer]) -> dict[str, int]:
    """Closed-form comparisons and rows loaded for one inference pass."""
    batch, steps = check_tokens(tokens).shape
    positions = batch * steps
    if not isinstance(model, (SpikingRnn, SnnTransformer)):
        raise TypeError(f"no closed form for {type(model).__name__}")
    comparisons = sum(t.n_c for t in model.unembedder.tables) * positions
    rows = model.unembedder.n_t * positions
    if isinstance(model, SpikingRnn):
        comparisons += sum(t.n_c for t in model.recurrent.tables) * positions
        rows += model.recurrent.n_t * positions
    else:
        pairs = batch * steps * (steps - 1) // 2
        for block in model.blocks:
            for head in block.heads:
                comparisons += 2 * head.n_t * head.n_c * positions
                rows += head.n_t * pairs
            if block.ffn is not None:
                comparisons += sum(t.n_c for t in block.ffn.tables) * positions
                rows += block.ffn.n_t * positions
    return {"comparisons": comparisons, "rows_loaded": rows, "multiplications": 0}


def counter_mismatches(model: LanguageModel, tokens: NDArray[np.integer]) -> list[str]:
    """Human-readable differences between measured and closed-form counts."""
    measured = measure(model, tokens).total()
    expected = expected_counts(model, tokens)
    problems = [
        f"{key}: measured {measured[key]}, expected {expected[key]}"
        for key in MATCHED
        if measured[key] != expected[key]
    ]
    if problems:
        logger.warning("Counter mismatch", problems=problems)
    return problems
