from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import structlog
from numpy.typing import NDArray

from polychron.core.exceptions import CorpusError


logger = structlog.get_logger()


@dataclass(frozen=True, eq=False)
class Corpus:
    """Raw bytes split into a training head and a contiguous validation tail."""

    train_bytes: NDArray[np.uint8]
    val_bytes: NDArray[np.uint8]

    def windows(self, split: str, n_inp: int) -> int:
        """Number of window start positions (windows hold ``n_inp + 1`` bytes)."""
        data = self._split(split)
        return max(data.size - n_inp, 0)

    def _split(self, split: str) -> NDArray[np.uint8]:
        if split == "train":
            return self.train_bytes
        if split == "val":
            return self.val_bytes
        raise ValueError(f"unknown split '{split}'")

    def sample_windows(
        self,
        rng: np.random.Generator,
        batch_size: int,
        n_inp: int,
        split: str = "train",
    ) -> NDArray[np.int64]:
        """Uniform windows with replacement, never crossing the split boundary."""
        data = self._split(split)
        starts = self.windows(split, n_inp)
        if starts == 0:
            raise CorpusError(
                f"{split} split has {data.size} bytes, windows need {n_inp + 1}"
            )
        offsets = rng.integers(0, starts, size=batch_size)
        return data[offsets[:, None] + np.arange(n_inp + 1)].astype(np.int64)


def split_bytes(data: bytes, val_fraction: float) -> Corpus:
    if not 0 < val_fraction < 1:
        raise CorpusError("val_fraction must lie strictly between 0 and 1")
    if not data:
        raise CorpusError("corpus is empty")
    array = np.frombuffer(data, dtype=np.uint8)
    n_val = int(round(array.size * val_fraction))
    cut = array.size - n_val
    return Corpus(train_bytes=array[:cut].copy(), val_bytes=array[cut:].copy())


def load_corpus(path: Path, val_fraction: float = 0.1) -> Corpus:
    """Read ``path`` as raw bytes (no decoding) and split off the validation tail."""
    try:
        data = Path(path).read_bytes()
    except FileNotFoundError as e:
        raise CorpusError(f"corpus file not found: {path}") from e
    except IsADirectoryError as e:
        raise CorpusError(f"corpus path is a directory: {path}") from e
    corpus = split_bytes(data, val_fraction)
    logger.info(
        "Corpus loaded",
        path=str(path),
        train_bytes=int(corpus.train_bytes.size),
        val_bytes=int(corpus.val_bytes.size),
    )
    return corpus
