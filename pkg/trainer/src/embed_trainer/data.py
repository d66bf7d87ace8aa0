"""Labeled-pair CSV input.

Shares the (question1, question2, is_duplicate) schema with the cache
toolchain's datasets; headers are matched case-insensitively.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass


@dataclass(frozen=True)
class Pair:
    question1: str
    question2: str
    is_duplicate: int


def load_pairs_csv(path: str) -> list[Pair]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty file")
        columns = {name.strip().lower(): i for i, name in enumerate(header)}
        try:
            q1_col = columns["question1"]
            q2_col = columns["question2"]
            label_col = columns["is_duplicate"]
        except KeyError as exc:
            raise ValueError(f"{path}: missing column {exc}") from exc
        pairs = []
        for row in reader:
            if not row or all(not cell.strip() for cell in row):
                continue
            q1 = row[q1_col].strip()
            q2 = row[q2_col].strip()
            label = row[label_col].strip()
            if not q1 or not q2 or label not in ("0", "1"):
                raise ValueError(f"{path}: bad row at line {reader.line_num}")
            pairs.append(Pair(q1, q2, int(label)))
    if not pairs:
        raise ValueError(f"{path}: no data rows")
    return pairs
