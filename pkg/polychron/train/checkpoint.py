"""Binary checkpoint format.

Little-endian layout::

    b"PLYC"  u32 version  u32 value_width (4 = float32, 8 = float64)
    u32 config_length  config (UTF-8 "section.key=value" lines)
    u32 section_count
    per section: u32 name_length, name, u32 kind
      kind 0 (LUT transform): u32 n_t, n_in, n_out, residual
        per table: u32 mode_tag, n_c, bins, f64 lo, f64 hi,
                   f64 planes[n_c * n_in]                     (hyperplane tables)
                   u32 first[n_c], u32 second[n_c]             (index tables, 0xFFFFFFFF = zero)
                   u32 row_count, val rows[row_count * n_out]  (row-major)
      kind 1 (dense table): u32 rows, cols, val data[rows * cols]

``val`` is a little-endian float of ``value_width`` bytes, the model dtype,
so a loaded model reproduces the saved outputs bit for bit.

Attention value indices concatenate ``[query | key | position]`` bits from
most to least significant, which is the comparison order stored above.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import structlog
from numpy.typing import NDArray

from polychron.core.config import ExperimentConfig
from polychron.core.exceptions import (
    BadMagicError,
    CheckpointError,
    ConfigError,
    TruncatedCheckpointError,
    VersionMismatchError,
)
from polychron.lut.anchors import MODE_TAGS, ZERO_REFERENCE, AnchorSet, HashMode
from polychron.lut.transform import LookupTable, LutTransform
from polychron.models.base import LanguageModel, Parameter
from polychron.models.factory import build_model


logger = structlog.get_logger()

MAGIC = b"PLYC"
VERSION = 2
KIND_TRANSFORM = 0
KIND_DENSE = 1
_NO_INDEX = 0xFFFFFFFF
_VALUE_TYPES = {4: "<f4", 8: "<f8"}
_TAG_MODES = {tag: mode for mode, tag in MODE_TAGS.items()}


@dataclass(eq=False)
class Checkpoint:
    config: ExperimentConfig
    model: LanguageModel
    step: int
    seed: int
    rng_state: dict[str, Any] | None = None

    def generator(self) -> np.random.Generator:
        """The training generator, positioned where the run left off."""
        rng = np.random.default_rng(self.seed)
        if self.rng_state is not None:
            rng.bit_generator.state = self.rng_state
        return rng


class _Writer:
    def __init__(self) -> None:
        self.buffer = bytearray()

    def u32(self, value: int) -> None:
        self.buffer += struct.pack("<I", value)

    def f64(self, value: float) -> None:
        self.buffer += struct.pack("<d", value)

    def blob(self, data: bytes) -> None:
        self.u32(len(data))
        self.buffer += data

    def array(self, values: NDArray[Any], dtype: str) -> None:
        self.buffer += np.ascontiguousarray(values, dtype=dtype).tobytes()


class _Reader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise TruncatedCheckpointError(
                f"checkpoint ends at byte {len(self.data)}, needed {self.offset + size}"
            )
        chunk = self.data[self.offset : self.offset + size]
        self.offset += size
        return chunk

    def u32(self) -> int:
        return int(struct.unpack("<I", self.take(4))[0])

    def f64(self) -> float:
        return float(struct.unpack("<d", self.take(8))[0])

    def blob(self) -> bytes:
        return self.take(self.u32())

    def array(self, count: int, dtype: str) -> NDArray[Any]:
        width = np.dtype(dtype).itemsize
        return np.frombuffer(self.take(count * width), dtype=dtype).copy()

    @property
    def exhausted(self) -> bool:
        return self.offset == len(self.data)


def _write_transform(writer: _Writer, transform: LutTransform, value_type: str) -> None:
    writer.u32(KIND_TRANSFORM)
    for value in (transform.n_t, transform.n_in, transform.n_out, int(transform.residual)):
        writer.u32(value)
    for table in transform.tables:
        anchors = table.anchors
        writer.u32(MODE_TAGS[anchors.mode])
        writer.u32(anchors.n_c)
        writer.u32(anchors.bins)
        writer.f64(anchors.bin_range[0])
        writer.f64(anchors.bin_range[1])
        if anchors.mode is HashMode.HYPERPLANE_SIGN:
            assert anchors.planes is not None
            writer.array(anchors.planes, "<f8")
        else:
            writer.array(anchors.first, "<u4")
            second = np.where(anchors.second == ZERO_REFERENCE, _NO_INDEX, anchors.second)
            writer.array(second, "<u4")
        writer.u32(table.row_count)
        writer.array(table.rows, value_type)


def _read_transform(reader: _Reader, value_type: str, dtype: np.dtype[Any]) -> LutTransform:
    n_t, n_in, n_out, residual = (reader.u32() for _ in range(4))
    tables = []
    for _ in range(n_t):
        tag = reader.u32()
        if tag not in _TAG_MODES:
            raise CheckpointError(f"unknown hash mode tag {tag}")
        mode = _TAG_MODES[tag]
        n_c = reader.u32()
        bins = reader.u32()
        bin_range = (reader.f64(), reader.f64())
        if mode is HashMode.HYPERPLANE_SIGN:
            planes = reader.array(n_c * n_in, "<f8").reshape(n_c, n_in).astype(np.float64)
            anchors = AnchorSet(mode=mode, n_in=n_in, planes=planes)
        else:
            first = reader.array(n_c, "<u4").astype(np.int64)
            second = reader.array(n_c, "<u4").astype(np.int64)
            second[second == _NO_INDEX] = ZERO_REFERENCE
            anchors = AnchorSet(
                mode=mode, n_in=n_in, first=first, second=second, bins=bins, bin_range=bin_range,
            )
        row_count = reader.u32()
        rows = reader.array(row_count * n_out, value_type).reshape(row_count, n_out).astype(dtype)
        tables.append(LookupTable(anchors, rows))
    return LutTransform(tables=tables, n_in=n_in, n_out=n_out, residual=bool(residual))


def encode_checkpoint(
    model: LanguageModel,
    config: ExperimentConfig,
    step: int,
    rng: np.random.Generator | None = None,
) -> bytes:
    lines = config.to_lines()
    lines.append(f"meta.step={step}")
    lines.append(f"meta.seed={config.train.seed}")
    if rng is not None:
        lines.append(f"meta.rng_state={json.dumps(rng.bit_generator.state, sort_keys=True)}")
    writer = _Writer()
    writer.buffer += MAGIC
    dtype = np.dtype(config.model.dtype)
    value_type = _VALUE_TYPES[dtype.itemsize]
    writer.u32(VERSION)
    writer.u32(dtype.itemsize)
    writer.blob("\n".join(lines).encode("utf-8"))
    params = model.parameters()
    writer.u32(len(params))
    for name, value in params.items():
        writer.blob(name.encode("utf-8"))
        if isinstance(value, LutTransform):
            _write_transform(writer, value, value_type)
        else:
            writer.u32(KIND_DENSE)
            writer.u32(value.shape[0])
            writer.u32(value.shape[1])
            writer.array(value, value_type)
    return bytes(writer.buffer)


def decode_checkpoint(data: bytes) -> Checkpoint:
    reader = _Reader(data)
    magic = reader.take(len(MAGIC)) if len(data) >= len(MAGIC) else data
    if magic != MAGIC:
        raise BadMagicError("file is not a polychron checkpoint (bad magic)")
    version = reader.u32()
    if version != VERSION:
        raise VersionMismatchError(
            f"checkpoint version {version} is not supported (expected {VERSION})"
        )
    width = reader.u32()
    if width not in _VALUE_TYPES:
        raise CheckpointError(f"unsupported value width {width}")
    value_type = _VALUE_TYPES[width]
    lines = reader.blob().decode("utf-8").splitlines()
    meta = {}
    config_lines = []
    for line in lines:
        key, _, value = line.partition("=")
        if key.startswith("meta."):
            meta[key.removeprefix("meta.")] = value
        else:
            config_lines.append(line)
    try:
        config = ExperimentConfig.from_lines(config_lines)
    except ConfigError as e:
        raise CheckpointError(f"checkpoint config block is invalid: {e}") from e

    # anchors and rows come from the file; the skeleton only fixes the layout
    model = build_model(config.model, np.random.default_rng(0))
    dtype = np.dtype(config.model.dtype)
    if dtype.itemsize != width:
        raise CheckpointError(f"value width {width} does not match model dtype {dtype.name}")
    expected = model.parameters()
    for _ in range(reader.u32()):
        name = reader.blob().decode("utf-8")
        if name not in expected:
            raise CheckpointError(f"checkpoint holds unknown parameter '{name}'")
        kind = reader.u32()
        value: Parameter
        if kind == KIND_TRANSFORM:
            value = _read_transform(reader, value_type, dtype)
        elif kind == KIND_DENSE:
            rows, cols = reader.u32(), reader.u32()
            value = reader.array(rows * cols, value_type).reshape(rows, cols).astype(dtype)
        else:
            raise CheckpointError(f"unknown section kind {kind}")
        model.set_parameter(name, value)
    if not reader.exhausted:
        raise CheckpointError("checkpoint has trailing bytes")

    rng_state = json.loads(meta["rng_state"]) if "rng_state" in meta else None
    return Checkpoint(
        config=config,
        model=model,
        step=int(meta.get("step", 0)),
        seed=int(meta.get("seed", config.train.seed)),
        rng_state=rng_state,
    )


def save_checkpoint(
    path: Path,
    model: LanguageModel,
    config: ExperimentConfig,
    step: int,
    rng: np.random.Generator | None = None,
) -> None:
    data = encode_checkpoint(model, config, step, rng)
    Path(path).write_bytes(data)
    logger.info("Checkpoint saved", path=str(path), step=step, size=len(data))


def load_checkpoint(path: Path) -> Checkpoint:
    try:
        data = Path(path).read_bytes()
    except FileNotFoundError as e:
        raise CheckpointError(f"checkpoint not found: {path}") from e
    checkpoint = decode_checkpoint(data)
    logger.info("Checkpoint loaded", path=str(path), step=checkpoint.step)
    return checkpoint
