"""Closed-form resource figures for LUT networks and the dense transformer baseline.

Every figure is an exact Python integer. Compute is split by kind
(``multiplications``, ``additions``, ``comparisons``, ``concatenations``);
for LUT attention the ``comparisons`` figure covers both the latency
comparisons and the bit concatenations that assemble an index, as one row.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass, field

from pydantic import BaseModel, ConfigDict, Field

from polychron.core.config import RnnCombine
from polychron.lut.transform import LutTransform
from polychron.models.base import VOCAB_SIZE, LanguageModel
from polychron.models.rnn import SpikingRnn
from polychron.models.transformer import SnnTransformer


COMPUTE_KINDS = ("multiplications", "additions", "comparisons", "concatenations")


def compute_counts(**counts: int) -> dict[str, int]:
    unknown = set(counts) - set(COMPUTE_KINDS)
    if unknown:
        raise KeyError(sorted(unknown)[0])
    return {kind: int(counts.get(kind, 0)) for kind in COMPUTE_KINDS}


def _check_non_negative(**values: int) -> None:
    for name, value in values.items():
        if value < 0:
            raise ValueError(f"{name} must be non-negative, got {value}")


@dataclass(frozen=True)
class Bandwidth:
    """Values loaded per new token: ``fixed + per_context * n_inp``."""

    fixed: int = 0
    per_context: int = 0

    def at(self, n_inp: int) -> int:
        return self.fixed + self.per_context * n_inp

    def __add__(self, other: Bandwidth) -> Bandwidth:
        return Bandwidth(self.fixed + other.fixed, self.per_context + other.per_context)

    def scaled(self, factor: int) -> Bandwidth:
        return Bandwidth(self.fixed * factor, self.per_context * factor)

    def __str__(self) -> str:
        if self.per_context == 0:
            return f"{self.fixed}"
        return f"{self.fixed}+{self.per_context}*n_inp"


@dataclass(frozen=True)
class ResourceReport:
    """Footprint, bandwidth and compute of one component.

    A report with ``parts`` is the sum of its parts.
    """

    component: str
    memory_footprint: int
    bandwidth: Bandwidth
    compute: dict[str, int] = field(default_factory=compute_counts)
    parts: tuple[ResourceReport, ...] = ()

    @property
    def compute_total(self) -> int:
        return sum(self.compute.values())

    def part(self, component: str) -> ResourceReport:
        for item in self.parts:
            if item.component == component:
                return item
        raise KeyError(component)

    def scaled(self, factor: int, component: str | None = None) -> ResourceReport:
        """``factor`` identical copies of this component (heads, layers)."""
        return ResourceReport(
            component=component or self.component,
            memory_footprint=self.memory_footprint * factor,
            bandwidth=self.bandwidth.scaled(factor),
            compute={kind: value * factor for kind, value in self.compute.items()},
            parts=tuple(p.scaled(factor) for p in self.parts),
        )


def combine(component: str, parts: Iterable[ResourceReport]) -> ResourceReport:
    items = tuple(parts)
    compute = compute_counts()
    bandwidth = Bandwidth()
    for item in items:
        bandwidth = bandwidth + item.bandwidth
        for kind, value in item.compute.items():
            compute[kind] += value
    return ResourceReport(
        component=component,
        memory_footprint=sum(item.memory_footprint for item in items),
        bandwidth=bandwidth,
        compute=compute,
        parts=items,
    )


class AnnTransformerConfig(BaseModel):
    """Dense transformer used as the comparison baseline."""

    model_config = ConfigDict(frozen=True)

    d_model: int = Field(default=512, ge=0, description="Embedding dimension")
    d_k: int = Field(default=64, ge=0, description="Key dimension per head")
    d_ff: int = Field(default=2048, ge=0, description="FFN hidden dimension")
    n_inp: int = Field(default=32, ge=0, description="Context size")
    N: int = Field(default=6, ge=0, description="Layers")
    h: int = Field(default=8, ge=0, description="Heads")


def lut_report(component: str, n_t: int, n_c: int, n_out: int, tokens: int = 1) -> ResourceReport:
    """One LUT transform with uniform tables applied to ``tokens`` inputs."""
    _check_non_negative(n_t=n_t, n_c=n_c, n_out=n_out, tokens=tokens)
    return ResourceReport(
        component=component,
        memory_footprint=n_t * 2**n_c * n_out,
        bandwidth=Bandwidth(2 * n_t * n_c + n_t * n_out),
        compute=compute_counts(additions=n_t * n_out * tokens, comparisons=n_t * n_c * tokens),
    )


def embedder_report(n: int, additions: int = 0) -> ResourceReport:
    """Byte embedding table; one row is loaded per token."""
    _check_non_negative(n=n)
    return ResourceReport(
        component="embedder",
        memory_footprint=VOCAB_SIZE * n,
        bandwidth=Bandwidth(n),
        compute=compute_counts(additions=additions),
    )


def snn_rnn_report(
    n: int,
    n_t: int,
    n_c: int,
    n_t_u: int | None = None,
    n_c_u: int | None = None,
) -> ResourceReport:
    """Spiking RNN per token: embedder ``E``, recurrent ``S_h`` and unembedder ``U_h``."""
    n_t_u = n_t if n_t_u is None else n_t_u
    n_c_u = n_c if n_c_u is None else n_c_u
    return combine(
        "spiking-rnn",
        [
            embedder_report(n, additions=n),
            lut_report("recurrent", n_t, n_c, n),
            lut_report("unembedder", n_t_u, n_c_u, VOCAB_SIZE),
        ],
    )


def snn_head_report(n: int, n_t: int, n_c: int, p: int, n_inp: int) -> ResourceReport:
    """Inference cost of one attention head in one layer over a full context.

    The ``ffn`` part is always present, even for attention-only
    configurations; the whole-model report decides separately.
    """
    _check_non_negative(n=n, n_t=n_t, n_c=n_c, p=p, n_inp=n_inp)
    value = ResourceReport(
        component="value",
        memory_footprint=n_t * n * 2 ** (2 * n_c + p),
        bandwidth=Bandwidth(fixed=2 * n_t * n_c, per_context=3 * n_t),
        compute=compute_counts(additions=n_t * n * n_inp**2, comparisons=2 * n_t * n_c * n_inp),
    )
    ffn = ResourceReport(
        component="ffn",
        memory_footprint=n_t * n * 2**n_c,
        bandwidth=Bandwidth(),
        compute=compute_counts(additions=n_t * n * n_inp),
    )
    return combine("snn-layer-head", [value, ffn])


def snn_transformer_report(
    n: int,
    n_t: int,
    n_c: int,
    p: int,
    n_inp: int,
    h: int,
    N: int,
    ffn_enabled: bool = True,
    n_t_u: int | None = None,
    n_c_u: int | None = None,
) -> ResourceReport:
    """Whole SNN transformer: compute per forward pass, bandwidth per new token."""
    _check_non_negative(h=h, N=N)
    n_t_u = n_t if n_t_u is None else n_t_u
    n_c_u = n_c if n_c_u is None else n_c_u
    head = snn_head_report(n, n_t, n_c, p, n_inp).part("value")
    parts = [
        embedder_report(n),
        head.scaled(h * N, "attention"),
        ResourceReport(
            component="positional-encoder",
            memory_footprint=max(n_inp - 1, 0) * p * h * N,
            bandwidth=Bandwidth(),
            compute=compute_counts(),
        ),
    ]
    if ffn_enabled:
        parts.append(lut_report("ffn", n_t, n_c, n, n_inp).scaled(N))
    parts.append(lut_report("unembedder", n_t_u, n_c_u, VOCAB_SIZE, n_inp))
    return combine("snn-transformer", parts)


def ann_transformer_report(cfg: AnnTransformerConfig) -> ResourceReport:
    """Dense transformer inference cost per layer over a full context."""
    d, d_k, d_ff, n_inp = cfg.d_model, cfg.d_k, cfg.d_ff, cfg.n_inp
    qk = 2 * d_k * n_inp**2 + 2 * d**2 * n_inp
    vo = 2 * d_k * n_inp**2 + 4 * d**2 * n_inp
    ffn = 2 * d * d_ff * n_inp
    return combine(
        "ann-layer",
        [
            ResourceReport(
                component="attention",
                memory_footprint=4 * d**2,
                bandwidth=Bandwidth(fixed=4 * d**2, per_context=d_k + d),
                compute=compute_counts(multiplications=qk + vo, additions=qk + vo),
            ),
            ResourceReport(
                component="ffn",
                memory_footprint=2 * d * d_ff,
                bandwidth=Bandwidth(),
                compute=compute_counts(multiplications=ffn, additions=ffn),
            ),
        ],
    )


def transform_report(component: str, transform: LutTransform, tokens: int = 1) -> ResourceReport:
    """Exact figures for a built transform, table by table."""
    bits = sum(table.n_c for table in transform.tables)
    return ResourceReport(
        component=component,
        memory_footprint=sum(int(table.rows.size) for table in transform.tables),
        bandwidth=Bandwidth(2 * bits + transform.n_t * transform.n_out),
        compute=compute_counts(
            additions=transform.n_t * transform.n_out * tokens,
            comparisons=bits * tokens,
        ),
    )


def model_report(model: LanguageModel) -> ResourceReport:
    """Analytic report of a built model, read off its tables."""
    if isinstance(model, SpikingRnn):
        additions = model.n if model.combine is RnnCombine.ADD else 0
        return combine(
            "spiking-rnn",
            [
                embedder_report(model.n, additions=additions),
                transform_report("recurrent", model.recurrent),
                transform_report("unembedder", model.unembedder),
            ],
        )
    if isinstance(model, SnnTransformer):
        n, n_inp = model.n, model.n_inp
        attention = []
        positional = 0
        ffns = []
        for block in model.blocks:
            for head in block.heads:
                positional += int(head.pe.size)
                attention.append(
                    ResourceReport(
                        component="value",
                        memory_footprint=sum(int(t.rows.size) for t in head.value.tables),
                        bandwidth=Bandwidth(fixed=2 * head.n_t * head.n_c, per_context=3 * head.n_t),
                        compute=compute_counts(
                            additions=head.n_t * n * n_inp**2,
                            comparisons=2 * head.n_t * head.n_c * n_inp,
                        ),
                    )
                )
            if block.ffn is not None:
                ffns.append(transform_report("ffn", block.ffn, n_inp))
        parts = [
            embedder_report(n),
            combine("attention", attention),
            ResourceReport("positional-encoder", positional, Bandwidth(), compute_counts()),
        ]
        if ffns:
            parts.append(combine("ffn", ffns))
        parts.append(transform_report("unembedder", model.unembedder, n_inp))
        return combine("snn-transformer", parts)
    raise TypeError(f"no resource model for {type(model).__name__}")
