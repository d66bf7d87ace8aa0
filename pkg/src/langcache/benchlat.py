"""Embedding-generation latency measurement.

Measures single-text calls (batch size 1), strictly sequentially: the
number that matters for a live cache is the per-query critical path, not
throughput. Times come from the provider's own wall-time accounting, which
by definition includes network time for remote endpoints. Warmup calls run
first and are discarded so connection setup and model load don't pollute
the statistics.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from itertools import cycle, islice

import numpy as np

from .provider import ProviderConfig, embed_batch


@dataclass(frozen=True)
class LatencyStats:
    """Per-call wall-time statistics for one model/endpoint."""

    model: str
    n_calls: int
    mean_s: float
    p50_s: float
    p95_s: float
    min_s: float
    max_s: float

    def __post_init__(self):
        if self.n_calls < 1:
            raise ValueError("n_calls must be >= 1")
        if not 0 <= self.min_s <= self.p50_s <= self.p95_s <= self.max_s:
            raise ValueError("latency quantiles out of order")

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "n_calls": self.n_calls,
            "mean_s": self.mean_s,
            "p50_s": self.p50_s,
            "p95_s": self.p95_s,
            "min_s": self.min_s,
            "max_s": self.max_s,
        }


def measure_latency(
    provider_config: ProviderConfig,
    queries: list[str],
    warmup: int = 1,
    repeats: int = 1,
) -> LatencyStats:
    """Time repeats x len(queries) sequential single-text embedding calls.

    Warmup calls (cycling through the queries) are performed first and
    excluded from the statistics. Percentiles are linearly interpolated.

    Raises:
        Provider errors abort the run; partial statistics are discarded.
    """
    if not queries:
        raise ValueError("measure_latency requires at least one query")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    if warmup < 0:
        raise ValueError("warmup must be >= 0")
    for text in islice(cycle(queries), warmup):
        embed_batch(provider_config, [text])
    times = []
    for _ in range(repeats):
        for text in queries:
            result = embed_batch(provider_config, [text])
            times.append(result.wall_time_s)
    arr = np.asarray(times, dtype=np.float64)
    return LatencyStats(
        model=provider_config.model_name,
        n_calls=len(times),
        mean_s=float(arr.mean()),
        p50_s=float(np.percentile(arr, 50)),
        p95_s=float(np.percentile(arr, 95)),
        min_s=float(arr.min()),
        max_s=float(arr.max()),
    )


def emit_scatter_csv(entries: list[tuple[str, float, float]], path: str) -> None:
    """Write latency/precision trade-off points as CSV.

    Each entry is (model, mean_s, avg_precision); the header is ``x,y,Model``
    with x = mean embedding time in seconds and y = average precision in
    [0, 1]. Rows keep input order.
    """
    if not entries:
        raise ValueError("emit_scatter_csv requires at least one entry")
    for model, mean_s, ap in entries:
        if not 0.0 <= ap <= 1.0:
            raise ValueError(f"average precision for {model!r} outside [0, 1]: {ap!r}")
        if mean_s < 0:
            raise ValueError(f"negative mean time for {model!r}: {mean_s!r}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "Model"])
        for model, mean_s, ap in entries:
            writer.writerow([mean_s, ap, model])
