from __future__ import annotations

from dataclasses import dataclass, field


_COUNT_FIELDS = (
    "comparisons",
    "sign_tests",
    "concatenations",
    "additions",
    "multiplications",
    "rows_loaded",
    "values_loaded",
    "dot_products",
)


@dataclass
class OpCounter:
    """Per-invocation accumulator of data-level operations.

    Counts are recorded by the operation that performs the work, so a counter
    passed through a forward pass reflects exactly what that pass touched.
    Child scopes keep per-component numbers; ``total()`` folds them together.
    """

    comparisons: int = 0
    sign_tests: int = 0
    concatenations: int = 0
    additions: int = 0
    multiplications: int = 0
    rows_loaded: int = 0
    values_loaded: int = 0
    dot_products: int = 0
    children: dict[str, OpCounter] = field(default_factory=dict)

    def scope(self, name: str) -> OpCounter:
        """Return (creating on first use) the child counter called ``name``."""
        if name not in self.children:
            self.children[name] = OpCounter()
        return self.children[name]

    def add(self, **counts: int) -> None:
        for key, value in counts.items():
            if key not in _COUNT_FIELDS:
                raise KeyError(key)
            setattr(self, key, getattr(self, key) + int(value))

    def own(self) -> dict[str, int]:
        return {name: getattr(self, name) for name in _COUNT_FIELDS}

    def total(self) -> dict[str, int]:
        """Own counts plus those of every descendant scope."""
        totals = self.own()
        for child in self.children.values():
            for key, value in child.total().items():
                totals[key] += value
        return totals

    def find(self, path: str) -> OpCounter:
        """Look up a nested scope by a ``/``-separated path."""
        node = self
        for part in path.split("/"):
            node = node.children[part]
        return node


def count(counter: OpCounter | None, scope: str | None = None, **counts: int) -> None:
    """Record counts when instrumentation is enabled."""
    if counter is None:
        return
    target = counter.scope(scope) if scope else counter
    target.add(**counts)


def scoped(counter: OpCounter | None, name: str) -> OpCounter | None:
    return None if counter is None else counter.scope(name)


__all__ = ["OpCounter", "count", "scoped"]
