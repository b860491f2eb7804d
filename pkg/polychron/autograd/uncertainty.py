from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike, NDArray


class UncertaintyKind(str, Enum):
    RECIPROCAL_ABS = "reciprocal-abs"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class UncertaintyFunction:
    """Symmetric bump ``U(u)`` with ``U(0) = 0.5`` that vanishes for large ``|u|``.

    Only training uses it; inference never evaluates ``U``.
    """

    kind: UncertaintyKind = UncertaintyKind.RECIPROCAL_ABS
    width: float = 1.0

    def __post_init__(self) -> None:
        if self.width <= 0:
            raise ValueError("uncertainty width must be positive")

    def value(self, u: ArrayLike) -> NDArray[np.floating]:
        u = np.asarray(u)
        if self.kind is UncertaintyKind.GAUSSIAN:
            return 0.5 * np.exp(-0.5 * (u / self.width) ** 2)
        return 0.5 / (1.0 + np.abs(u) / self.width)

    def derivative(self, u: ArrayLike) -> NDArray[np.floating]:
        u = np.asarray(u)
        if self.kind is UncertaintyKind.GAUSSIAN:
            return -(u / self.width**2) * self.value(u)
        # sign(0) is taken as +1
        sign = np.where(u >= 0, 1.0, -1.0)
        return -0.5 * sign / (self.width * (1.0 + np.abs(u) / self.width) ** 2)


DEFAULT_UNCERTAINTY = UncertaintyFunction()


def uncertainty(u: ArrayLike) -> NDArray[np.floating]:
    """``U(u) = 0.5 / (1 + |u|)``."""
    return DEFAULT_UNCERTAINTY.value(u)


def uncertainty_deriv(u: ArrayLike) -> NDArray[np.floating]:
    """``U'(u) = -0.5 sign(u) / (1 + |u|)^2`` with ``sign(0) = +1``."""
    return DEFAULT_UNCERTAINTY.derivative(u)
