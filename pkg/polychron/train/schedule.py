from __future__ import annotations

from polychron.core.config import LrMode


def lr_schedule(step: int, warmup: int, scale: float, mode: LrMode = LrMode.WARMUP) -> float:
    """``scale * min(step^-1/2, step * warmup^-3/2)``, or ``scale`` in constant mode."""
    if step < 1:
        raise ValueError(f"step must be at least 1, got {step}")
    if mode is LrMode.CONSTANT:
        return scale
    return scale * min(step**-0.5, step * warmup**-1.5)
