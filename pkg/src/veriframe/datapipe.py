"""Streaming, cached, prefetching batch pipeline over ingested face crops.

Samples are read from disk in a seeded order, mapped (decode, resize to the
backbone input size, scale to [0, 1], optional train-time flip), grouped into
batches, and optionally prefetched by a background thread. The consumer
always sees the same batch order whether or not prefetching is on.
"""

from __future__ import annotations

import queue
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import DataPipeError
from .ingest import CropRecord
from .media import load_image, resize_rgb

LABEL_VALUES = {"REAL": 0.0, "FAKE": 1.0}


@dataclass
class Batch:
    pixels: np.ndarray        # (B, S, S, 3) float64 in [0, 1]
    labels: np.ndarray        # (B,) float64, 0.0 = REAL, 1.0 = FAKE
    source_ids: list[str]

    def __len__(self) -> int:
        return len(self.source_ids)


def preprocess_sample(crop: np.ndarray, target_size: int) -> np.ndarray:
    """Resize a decoded crop to target_size squared and scale to [0, 1]."""
    resized = resize_rgb(crop, target_size, target_size)
    return resized.astype(np.float64) / 255.0


def default_loader(path: str | Path) -> np.ndarray:
    return load_image(path)


class _Prefetcher:
    """Run an iterator on a worker thread, keeping at most ``depth`` items
    ahead of the consumer. Order is whatever the source produced."""

    _DONE = object()

    def __init__(self, source: Iterator, depth: int):
        self._queue: queue.Queue = queue.Queue(maxsize=depth)
        self._thread = threading.Thread(
            target=self._fill, args=(source,), daemon=True
        )
        self._thread.start()

    def _fill(self, source: Iterator) -> None:
        try:
            for item in source:
                self._queue.put(item)
        except BaseException as exc:  # forwarded to the consumer
            self._queue.put(exc)
            return
        self._queue.put(self._DONE)

    def __iter__(self):
        return self

    def __next__(self):
        item = self._queue.get()
        if item is self._DONE:
            raise StopIteration
        if isinstance(item, BaseException):
            raise item
        return item


class BatchStream:
    """Epoch-oriented batch source over one split of the crop index.

    Every underlying sample appears exactly once per epoch; shuffling (when a
    seed is given) permutes but never drops or duplicates. With ``cache=True``
    the decode+preprocess result of each sample is computed at most once
    across epochs; augmentation happens after the cache so flips still vary.
    """

    def __init__(
        self,
        rows: Sequence[CropRecord],
        root: str | Path,
        batch_size: int,
        target_size: int,
        shuffle_seed: int | None = None,
        cache: bool = False,
        prefetch_depth: int = 2,
        augment: bool = False,
        loader: Callable[[str], np.ndarray] | None = None,
    ):
        if not rows:
            raise DataPipeError("no rows for this split")
        if batch_size < 1:
            raise DataPipeError(f"batch size {batch_size} must be positive")
        self.rows = list(rows)
        self.root = Path(root)
        self.batch_size = batch_size
        self.target_size = target_size
        self.shuffle_seed = shuffle_seed
        self.cache_enabled = cache
        self.prefetch_depth = prefetch_depth
        self.augment = augment
        self.loader = loader or default_loader
        self._cache: dict[str, np.ndarray] = {}

    @property
    def epoch_size(self) -> int:
        return len(self.rows)

    @property
    def batches_per_epoch(self) -> int:
        return -(-len(self.rows) // self.batch_size)

    def _epoch_order(self, epoch: int) -> np.ndarray:
        if self.shuffle_seed is None:
            return np.arange(len(self.rows))
        rng = np.random.default_rng(
            np.random.SeedSequence([self.shuffle_seed, epoch])
        )
        return rng.permutation(len(self.rows))

    def _sample_pixels(self, row: CropRecord) -> np.ndarray:
        cached = self._cache.get(row.crop_path)
        if cached is not None:
            return cached
        pixels = preprocess_sample(
            self.loader(str(self.root / row.crop_path)), self.target_size
        )
        if self.cache_enabled:
            self._cache[row.crop_path] = pixels
        return pixels

    def _produce(self, epoch: int) -> Iterator[Batch]:
        order = self._epoch_order(epoch)
        flip_rng = np.random.default_rng(
            np.random.SeedSequence([self.shuffle_seed or 0, epoch, 0xF11B])
        )
        pixels_buf: list[np.ndarray] = []
        labels_buf: list[float] = []
        ids_buf: list[str] = []
        for position in order:
            row = self.rows[position]
            pixels = self._sample_pixels(row)
            if self.augment and flip_rng.random() < 0.5:
                pixels = pixels[:, ::-1, :].copy()
            pixels_buf.append(pixels)
            labels_buf.append(LABEL_VALUES[row.label])
            ids_buf.append(row.crop_path)
            if len(ids_buf) == self.batch_size:
                yield Batch(np.stack(pixels_buf), np.array(labels_buf), ids_buf)
                pixels_buf, labels_buf, ids_buf = [], [], []
        if ids_buf:
            yield Batch(np.stack(pixels_buf), np.array(labels_buf), ids_buf)

    def epoch(self, epoch: int = 0) -> Iterator[Batch]:
        source = self._produce(epoch)
        if self.prefetch_depth > 0:
            return iter(_Prefetcher(source, self.prefetch_depth))
        return source

    def __iter__(self) -> Iterator[Batch]:
        return self.epoch(0)


def build_stream(
    index_rows: Sequence[CropRecord],
    split: str,
    root: str | Path,
    target_size: int,
    batch_size: int = 32,
    shuffle_seed: int | None = None,
    cache: bool = False,
    prefetch_depth: int = 2,
    augment: bool | None = None,
    loader: Callable[[str], np.ndarray] | None = None,
) -> BatchStream:
    """Create a BatchStream over the rows of one split.

    ``augment`` defaults to horizontal flips on the train split only.
    Raises :class:`DataPipeError` when the split has no rows.
    """
    rows = [row for row in index_rows if row.split == split]
    if not rows:
        raise DataPipeError(f"split {split!r} has no rows")
    if augment is None:
        augment = split == "train"
    return BatchStream(
        rows,
        root=root,
        batch_size=batch_size,
        target_size=target_size,
        shuffle_seed=shuffle_seed,
        cache=cache,
        prefetch_depth=prefetch_depth,
        augment=augment,
        loader=loader,
    )
