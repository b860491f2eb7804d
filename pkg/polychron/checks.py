"""Self-test suites run by ``polychron selftest``.

Each suite draws its instances from one seeded generator and returns a
:class:`CheckResult`. Finite-difference oracles work in float64 against the
smoothed forward pass with the minimal comparison pinned, and only at points
where every comparison value is at least ``U_THRESHOLD`` away from zero.
"""

from __future__ import annotations

import time
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np
import structlog
from numpy.typing import NDArray

from polychron.autograd.backward import backward_variant
from polychron.autograd.cache import MinPairCache
from polychron.autograd.forward import forward_cached
from polychron.autograd.surrogate import surrogate_forward
from polychron.core.config import LearningRule, ModelConfig, ModelKind
from polychron.core.instrumentation import OpCounter
from polychron.lut.anchors import HashMode
from polychron.lut.hashing import compute_index
from polychron.lut.transform import LutTransform, lut_forward, make_transform
from polychron.models.attention import (
    AttentionHead,
    VIndexCache,
    attention_backward,
    build_v_index_cache,
    init_attention_head,
    pair_cache,
)
from polychron.models.deep import deep_snn_backward, deep_snn_forward, init_deep_snn
from polychron.models.factory import build_model
from polychron.models.finetune import fine_tune_add_table, fine_tune_split_table
from polychron.resources.counters import counter_mismatches


logger = structlog.get_logger()

U_THRESHOLD = 1e-3
FD_STEP = 1e-6
MAX_RELATIVE_ERROR = 1e-4
ZERO_SUM_TOLERANCE = 1e-12
MAX_DRAWS = 50


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status} {self.name}: {self.detail} ({self.seconds:.2f}s)"


def relative_error(analytic: NDArray[np.floating], numeric: NDArray[np.floating]) -> float:
    """Largest deviation scaled by the largest numeric component."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = max(float(np.max(np.abs(numeric), initial=0.0)), U_THRESHOLD)
    return float(np.max(np.abs(analytic - numeric), initial=0.0)) / scale


def central_difference(
    f: Callable[[], float],
    target: NDArray[np.float64],
    step: float = FD_STEP,
) -> NDArray[np.float64]:
    """Numerical gradient of ``f`` with respect to ``target``, perturbed in place."""
    grad = np.zeros(target.shape)
    for idx in np.ndindex(target.shape):
        saved = target[idx]
        target[idx] = saved + step
        plus = f()
        target[idx] = saved - step
        minus = f()
        target[idx] = saved
        grad[idx] = (plus - minus) / (2 * step)
    return grad


def clear_of_ties(u: NDArray[np.floating] | None) -> bool:
    return u is not None and float(np.min(np.abs(u), initial=np.inf)) > U_THRESHOLD


def _cache_clear(cache: MinPairCache) -> bool:
    return all(clear_of_ties(entry.u_all) for entry in cache.entries)


@dataclass(frozen=True)
class LayerCheck:
    error: float
    v_in: NDArray[np.float64]
    imbalance: float


def check_layer_gradient(
    transform: LutTransform,
    x: NDArray[np.float64],
    v_out: NDArray[np.float64],
    rule: LearningRule = LearningRule.MIN_PAIR_FLIP,
) -> LayerCheck | None:
    """Compare one backward pass with finite differences of the smoothed forward.

    Covers the input gradient and, for hyperplane tables, the plane
    gradients. Returns ``None`` when ``x`` lies too close to a tie.
    """
    _, cache = forward_cached(transform, x, keep_all_pairs=True)
    if not _cache_clear(cache):
        return None
    v_in, grads = backward_variant(rule, transform, cache, v_out)
    v_in = np.asarray(v_in, dtype=np.float64)
    point = np.array(x, dtype=np.float64)

    def loss() -> float:
        return float(np.sum(v_out * surrogate_forward(transform, point, rule, frozen=cache)))

    error = relative_error(v_in, central_difference(loss, point))
    for table, plane_grad in grads.planes.items():
        planes = transform.tables[table].anchors.planes
        assert planes is not None
        error = max(error, relative_error(plane_grad, central_difference(loss, planes)))
    imbalance = 0.0
    if all(table.anchors.mode is HashMode.PAIRWISE_SIGN for table in transform.tables):
        # every pairwise term adds +coeff at one anchor and -coeff at the other
        own = v_in - v_out if transform.residual else v_in
        imbalance = abs(float(np.sum(own)))
    return LayerCheck(error=error, v_in=v_in, imbalance=imbalance)


def _deep_instance(rng: np.random.Generator, rule: LearningRule) -> tuple[float, float] | None:
    n = int(rng.integers(4, 9))
    model = init_deep_snn(
        n,
        int(rng.integers(1, 4)),
        int(rng.integers(1, 4)),
        2,
        seed=rng,
        init_scale=1.0,
        dtype=np.float64,
    )
    x0 = rng.standard_normal(n)
    top, caches = deep_snn_forward(model, x0, keep_all_pairs=True)
    if not all(_cache_clear(cache) for cache in caches.layers):
        return None
    activations = [x0]
    for layer in model.layers[:-1]:
        activations.append(lut_forward(layer, activations[-1]))
    grad_top = rng.standard_normal(top.shape)
    v = grad_top
    worst = 0.0
    imbalance = 0.0
    for depth in reversed(range(len(model.layers))):
        layer_check = check_layer_gradient(model.layers[depth], activations[depth], v, rule)
        if layer_check is None:
            return None
        worst = max(worst, layer_check.error)
        imbalance = max(imbalance, layer_check.imbalance)
        v = layer_check.v_in
    chained, _ = deep_snn_backward(model, caches, grad_top, rule)
    worst = max(worst, relative_error(chained, v))
    return worst, imbalance


def _hyperplane_instance(rng: np.random.Generator) -> tuple[float, float] | None:
    n_in = int(rng.integers(3, 7))
    transform = make_transform(
        n_in,
        3,
        int(rng.integers(1, 3)),
        int(rng.integers(1, 4)),
        mode=HashMode.HYPERPLANE_SIGN,
        seed=rng,
        init_scale=1.0,
        dtype=np.float64,
    )
    layer_check = check_layer_gradient(
        transform, rng.standard_normal(n_in), rng.standard_normal(3),
    )
    return None if layer_check is None else (layer_check.error, 0.0)


def attention_pair_inputs(
    head: AttentionHead, z: NDArray[np.float64], pe: NDArray[np.float64],
) -> NDArray[np.float64]:
    """``[z_i, z_j, PE_{i-j}]`` for every causal pair, shaped ``(B, P, 2n + p)``."""
    later, earlier = np.tril_indices(z.shape[1], k=-1)
    offsets = np.broadcast_to(pe[later - earlier - 1][None], (z.shape[0], later.size, head.p))
    return np.concatenate([z[:, later], z[:, earlier], offsets], axis=-1)


def _attention_instance(rng: np.random.Generator) -> tuple[float, float] | None:
    n, steps = int(rng.integers(3, 6)), 3
    head = init_attention_head(
        n, int(rng.integers(1, 3)), int(rng.integers(1, 3)), 2, steps, rng,
        init_scale=1.0, dtype=np.float64,
    )
    z = rng.standard_normal((1, steps, n))
    cache = build_v_index_cache(head, z, keep_differences=True)
    if not (clear_of_ties(cache.q_u) and clear_of_ties(cache.k_u) and clear_of_ties(cache.pe_u)):
        return None
    frozen, later, _ = pair_cache(head, cache)
    dx = rng.standard_normal(z.shape)
    dz, _, (offsets, dpe) = attention_backward(head, cache, dx)
    point = z.copy()
    pe = head.pe.copy()

    def loss() -> float:
        y = surrogate_forward(head.value, attention_pair_inputs(head, point, pe), frozen=frozen)
        return float(np.sum(dx[:, later] * y))

    error = relative_error(dz, central_difference(loss, point))
    dpe_dense = np.zeros(pe.shape)
    np.add.at(dpe_dense, offsets, dpe)
    error = max(error, relative_error(dpe_dense, central_difference(loss, pe)))
    return error, 0.0


def gradient_check(rng: np.random.Generator, instances: int = 100) -> CheckResult:
    """Backward rules against finite differences, plus per-table zero sums."""
    worst = 0.0
    imbalance = 0.0
    done = 0
    cases: list[tuple[str, Callable[[], tuple[float, float] | None], int]] = [
        ("deep", lambda: _deep_instance(rng, LearningRule.MIN_PAIR_FLIP), instances),
    ]
    for rule in LearningRule:
        if rule is not LearningRule.MIN_PAIR_FLIP:
            cases.append((rule.value, lambda r=rule: _deep_instance(rng, r), max(instances // 5, 1)))
    cases.append(("hyperplane", lambda: _hyperplane_instance(rng), max(instances // 5, 1)))
    cases.append(("attention", lambda: _attention_instance(rng), max(instances // 5, 1)))

    for label, draw, wanted in cases:
        accepted = 0
        for _ in range(wanted * MAX_DRAWS):
            if accepted == wanted:
                break
            outcome = draw()
            if outcome is None:
                continue
            accepted += 1
            worst = max(worst, outcome[0])
            imbalance = max(imbalance, outcome[1])
        if accepted < wanted:
            return CheckResult("gradient-check", False, f"{label}: only {accepted} usable instances")
        done += accepted
    passed = worst < MAX_RELATIVE_ERROR and imbalance < ZERO_SUM_TOLERANCE
    detail = f"{done} instances, max relative error {worst:.2e}, max table sum {imbalance:.1e}"
    return CheckResult("gradient-check", passed, detail)


def _direct_indices(head: AttentionHead, z: NDArray[np.floating], i: int, j: int) -> NDArray[np.int64]:
    x = np.concatenate([z[i], z[j], head.pe[i - j - 1]])
    return np.array([int(compute_index(table, x)) for table in head.value.tables], dtype=np.int64)


def _cache_matches(head: AttentionHead, z: NDArray[np.floating], cache: VIndexCache) -> int:
    """Number of pairs whose cached index matches direct hashing of the concatenation."""
    later, earlier, index = cache.pair_indices()
    matched = 0
    for pair, (i, j) in enumerate(zip(later, earlier, strict=True)):
        direct = _direct_indices(head, z, int(i), int(j))
        if np.array_equal(direct, cache.combined(int(i), int(j))[0]) and np.array_equal(
            direct, index[0, pair],
        ):
            matched += 1
    return matched


def cache_equivalence(rng: np.random.Generator, instances: int = 1000) -> CheckResult:
    """V-index cache indices equal direct hashing of ``[z_i, z_j, PE_{i-j}]``."""
    steps = 6
    per_head = steps * (steps - 1) // 2
    pairs = matched = 0
    while pairs < instances:
        n = int(rng.integers(2, 7))
        head = init_attention_head(
            n, int(rng.integers(1, 4)), int(rng.integers(1, 4)), int(rng.integers(1, 5)), steps, rng,
        )
        z = rng.standard_normal((steps, n)).astype(np.float32)
        cache = build_v_index_cache(head, z)
        matched += _cache_matches(head, z, cache)
        pairs += per_head
    return CheckResult("cache-equivalence", matched == pairs, f"{matched}/{pairs} pairs identical")


def fine_tune_no_op(rng: np.random.Generator, instances: int = 50) -> CheckResult:
    """Adding or splitting a table leaves every forward output bit-identical."""
    failures = 0
    for _ in range(instances):
        n_in = int(rng.integers(2, 9))
        mode = HashMode.PAIRWISE_SIGN if rng.random() < 0.5 else HashMode.COMPONENT_SIGN
        transform = make_transform(
            n_in,
            int(rng.integers(1, 6)),
            int(rng.integers(1, 4)),
            int(rng.integers(1, 5)),
            mode=mode,
            seed=rng,
            init_scale=1.0,
        )
        x = rng.standard_normal((16, n_in)).astype(np.float32)
        before = lut_forward(transform, x)
        added = fine_tune_add_table(transform, rng)
        table = int(rng.integers(0, transform.n_t))
        if mode is HashMode.PAIRWISE_SIGN:
            first, second = rng.choice(n_in, size=2, replace=False)
            split = fine_tune_split_table(transform, table, (int(first), int(second)))
        else:
            split = fine_tune_split_table(transform, table, int(rng.integers(0, n_in)))
        if not np.array_equal(before, lut_forward(added, x)):
            failures += 1
        if not np.array_equal(before, lut_forward(split, x)):
            failures += 1
    total = 2 * instances
    return CheckResult("fine-tune-no-op", failures == 0, f"{total - failures}/{total} outputs identical")


def counter_match(rng: np.random.Generator) -> CheckResult:
    """Measured comparisons and rows loaded equal the closed forms; no multiplies."""
    configs = [
        ModelConfig(kind=ModelKind.RNN, n=16, n_t=4, n_c=4, n_t_u=3, n_c_u=3, n_inp=8),
        ModelConfig(kind=ModelKind.TRANSFORMER, n=8, n_t=2, n_c=2, p=2, n_layers=2, heads=2, n_inp=8),
        ModelConfig(
            kind=ModelKind.TRANSFORMER, n=8, n_t=2, n_c=2, p=2, n_layers=2, n_inp=8, ffn_enabled=False,
        ),
    ]
    problems: list[str] = []
    for config in configs:
        model = build_model(config.model_copy(update={"init_scale": 0.5}), rng)
        tokens = rng.integers(0, 256, size=(2, config.n_inp))
        problems += [f"{config.kind.value}: {p}" for p in counter_mismatches(model, tokens)]

    # spiking scalar backprop: one dot product per example at the top, scalars below
    deep = init_deep_snn(8, 3, 3, 3, seed=rng, init_scale=1.0)
    x = rng.standard_normal((4, 8)).astype(np.float32)
    _, caches = deep_snn_forward(deep, x)
    counter = OpCounter()
    deep_snn_backward(deep, caches, rng.standard_normal((4, 8)), LearningRule.SPIKING_SCALAR, counter)
    top = counter.find("layer2").dot_products
    below = sum(counter.find(f"layer{depth}").dot_products for depth in (0, 1))
    if top != 4 or below:
        problems.append(f"spiking-scalar: {top} dot products at the top, {below} below")
    detail = "all counts match" if not problems else "; ".join(problems)
    return CheckResult("counter-match", not problems, detail)


SUITES: dict[str, Callable[[np.random.Generator], CheckResult]] = {
    "gradient-check": gradient_check,
    "cache-equivalence": cache_equivalence,
    "fine-tune-no-op": fine_tune_no_op,
    "counter-match": counter_match,
}


def run_checks(names: list[str] | None = None, seed: int = 0) -> list[CheckResult]:
    """Run the named suites (all by default), each on its own generator."""
    results = []
    for offset, name in enumerate(names or list(SUITES)):
        if name not in SUITES:
            raise KeyError(name)
        started = time.perf_counter()
        result = SUITES[name](np.random.default_rng(seed + offset))
        elapsed = time.perf_counter() - started
        result = CheckResult(result.name, result.passed, result.detail, elapsed)
        logger.info("Check finished", check=name, passed=result.passed, seconds=round(elapsed, 3))
        results.append(result)
    return results
