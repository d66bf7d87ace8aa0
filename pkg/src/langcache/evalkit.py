"""Pair-classification evaluation, threshold calibration, and the
cross-domain forgetting harness.

Metric conventions, fixed here because they affect comparability:

* The prediction rule is "duplicate iff score >= threshold"; ties predict
  positive.
* Candidate thresholds are the midpoints between adjacent distinct scores
  plus sentinels below the minimum (-1.0, predict everything) and above the
  maximum (+1.0). Equal objective values resolve toward the larger
  threshold.
* Precision and recall are reported at the F1-optimal threshold; accuracy
  at its own optimal threshold. No single shared threshold is assumed.
* Average precision is the plain step-wise definition — mean of
  precision@rank over the ranks holding positives, sorted by descending
  score with ties kept in original pair order — with no interpolation.

Texts are deduplicated before embedding within a run, so evaluation cost
scales with distinct texts exactly as a live cache's would.
"""

from __future__ import annotations

import bisect
import csv
import json
import math
from dataclasses import dataclass

from .core import LabeledPair, cosine_similarity
from .errors import DegenerateLabels, NoPositives, RowError, SchemaError, UpstreamError
from .provider import ProviderConfig, embed_batch

METRIC_NAMES = ("precision", "recall", "f1", "accuracy", "average_precision")

TABLE_COLUMNS = ("Model", "Source", "Precision", "Recall", "F1", "Accuracy", "Avg. Precision")


@dataclass(frozen=True)
class ScoredPair:
    """A labeled pair plus the cosine similarity of its two questions."""

    pair: LabeledPair
    score: float

    def __post_init__(self):
        if not -1.0 <= self.score <= 1.0:
            raise ValueError(f"similarity score outside [-1, 1]: {self.score!r}")


@dataclass(frozen=True)
class EvalReport:
    """The five metrics plus the calibrated thresholds that produced them."""

    precision: float
    recall: float
    f1: float
    accuracy: float
    average_precision: float
    f1_threshold: float
    accuracy_threshold: float
    n_pairs: int
    positives: int

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "accuracy": self.accuracy,
            "average_precision": self.average_precision,
            "f1_threshold": self.f1_threshold,
            "accuracy_threshold": self.accuracy_threshold,
            "n_pairs": self.n_pairs,
            "positives": self.positives,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvalReport":
        return cls(**{k: data[k] for k in cls.__dataclass_fields__})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


@dataclass(frozen=True)
class ForgettingReport:
    """Tuned vs base model on the fine-tuning domain and an unseen domain."""

    in_domain: EvalReport
    out_domain: EvalReport
    baseline_in_domain: EvalReport
    baseline_out_domain: EvalReport
    deltas: dict

    def to_dict(self) -> dict:
        return {
            "in_domain": self.in_domain.to_dict(),
            "out_domain": self.out_domain.to_dict(),
            "baseline_in_domain": self.baseline_in_domain.to_dict(),
            "baseline_out_domain": self.baseline_out_domain.to_dict(),
            "deltas": self.deltas,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ForgettingReport":
        return cls(
            in_domain=EvalReport.from_dict(data["in_domain"]),
            out_domain=EvalReport.from_dict(data["out_domain"]),
            baseline_in_domain=EvalReport.from_dict(data["baseline_in_domain"]),
            baseline_out_domain=EvalReport.from_dict(data["baseline_out_domain"]),
            deltas=data["deltas"],
        )


# -- dataset loading -----------------------------------------------------


def load_pairs_csv(path: str) -> list[LabeledPair]:
    """Read (question1, question2, is_duplicate) rows from a CSV file.

    Header matching is case-insensitive (Question1/Question2 accepted).
    Rows with labels outside {0, 1} or empty questions are collected and
    reported together with their line numbers.

    Raises:
        SchemaError: a required column is missing.
        RowError: one or more data rows are invalid.
        OSError: unreadable file.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file")
        columns = {name.strip().lower(): i for i, name in enumerate(header)}
        missing = [c for c in ("question1", "question2", "is_duplicate") if c not in columns]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
        q1_col = columns["question1"]
        q2_col = columns["question2"]
        label_col = columns["is_duplicate"]
        pairs: list[LabeledPair] = []
        problems: list[tuple[int, str]] = []
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) <= max(q1_col, q2_col, label_col):
                problems.append((line, "too few columns"))
                continue
            q1 = row[q1_col].strip()
            q2 = row[q2_col].strip()
            raw_label = row[label_col].strip()
            if not q1 or not q2:
                problems.append((line, "empty question"))
                continue
            if raw_label not in ("0", "1"):
                problems.append((line, f"label {raw_label!r} not in {{0,1}}"))
                continue
            pairs.append(LabeledPair(question1=q1, question2=q2, is_duplicate=int(raw_label)))
    if problems:
        raise RowError(problems)
    return pairs


# -- scoring -------------------------------------------------------------


def score_pairs(pairs: list[LabeledPair], provider_config: ProviderConfig) -> list[ScoredPair]:
    """Embed both questions of every pair and attach cosine similarities.

    Each distinct text is embedded exactly once per invocation; provider
    calls are batched up to the configured max_batch.
    """
    if not pairs:
        raise ValueError("score_pairs requires at least one pair")
    distinct: list[str] = []
    seen: set[str] = set()
    for pair in pairs:
        for text in (pair.question1, pair.question2):
            if text not in seen:
                seen.add(text)
                distinct.append(text)
    vectors = {}
    step = provider_config.max_batch
    for start in range(0, len(distinct), step):
        batch = distinct[start : start + step]
        try:
            result = embed_batch(provider_config, batch)
        except UpstreamError as exc:
            exc.batch_index = start // step
            raise
        for text, emb in zip(batch, result.embeddings):
            vectors[text] = emb
    return [
        ScoredPair(pair=p, score=cosine_similarity(vectors[p.question1], vectors[p.question2]))
        for p in pairs
    ]


# -- metrics -------------------------------------------------------------


def _ranked_labels(scored: list[ScoredPair]) -> list[int]:
    # Stable sort on descending score keeps equal-score pairs in original
    # order — tie-breaking must stay label-agnostic.
    order = sorted(range(len(scored)), key=lambda i: -scored[i].score)
    return [scored[i].pair.is_duplicate for i in order]


def average_precision(scored: list[ScoredPair]) -> float:
    """Step-wise average precision of the score ranking, in [0, 1].

    Raises:
        NoPositives: no pair carries label 1.
    """
    labels = _ranked_labels(scored)
    n_pos = sum(labels)
    if n_pos == 0:
        raise NoPositives("average precision needs at least one positive pair")
    precisions = []
    seen_pos = 0
    for rank, label in enumerate(labels, start=1):
        if label == 1:
            seen_pos += 1
            precisions.append(seen_pos / rank)
    return math.fsum(precisions) / n_pos


def _candidate_thresholds(scores: list[float]) -> list[float]:
    # Ascending candidates: below-min sentinel, midpoints between adjacent
    # distinct scores, above-max sentinel. Scores are clamped into [-1, 1],
    # so -1.0 always predicts everything. (+1.0 cannot exclude a pair whose
    # score is exactly 1.0 under the >= rule; thresholds live in [-1, 1].)
    distinct = sorted(set(scores))
    mids = [(a + b) / 2 for a, b in zip(distinct, distinct[1:])]
    return [-1.0] + mids + [1.0]


def _confusion_counts(scored: list[ScoredPair]):
    ordered = sorted(scored, key=lambda sp: sp.score)
    scores_asc = [sp.score for sp in ordered]
    n = len(ordered)
    suffix_pos = [0] * (n + 1)
    for i in range(n - 1, -1, -1):
        suffix_pos[i] = suffix_pos[i + 1] + ordered[i].pair.is_duplicate
    n_pos = suffix_pos[0]

    def at(threshold: float):
        # Predicted positive: every pair whose score >= threshold.
        idx = bisect.bisect_left(scores_asc, threshold)
        k = n - idx
        tp = suffix_pos[idx]
        fp = k - tp
        fn = n_pos - tp
        tn = n - k - fn
        return tp, fp, fn, tn

    return scores_asc, n, n_pos, at


def best_threshold_f1(scored: list[ScoredPair]) -> tuple[float, float, float, float]:
    """Threshold maximizing F1, with precision/recall/F1 at that threshold.

    Ties resolve toward the larger threshold.

    Raises:
        DegenerateLabels: the pairs are single-class.
    """
    scores, n, n_pos, counts_at = _confusion_counts(scored)
    if n_pos == 0 or n_pos == n:
        raise DegenerateLabels("threshold calibration needs both classes")
    best = None
    for theta in _candidate_thresholds(scores):
        tp, fp, fn, _ = counts_at(theta)
        f1 = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
        if best is None or f1 >= best[1]:
            precision = tp / (tp + fp) if tp + fp else 0.0
            recall = tp / n_pos
            best = (theta, f1, precision, recall)
    theta, f1, precision, recall = best
    return theta, precision, recall, f1


def best_threshold_accuracy(scored: list[ScoredPair]) -> tuple[float, float]:
    """Threshold maximizing accuracy, and the accuracy achieved there.

    Same candidate grid and tie rule as best_threshold_f1.

    Raises:
        DegenerateLabels: the pairs are single-class.
    """
    scores, n, n_pos, counts_at = _confusion_counts(scored)
    if n_pos == 0 or n_pos == n:
        raise DegenerateLabels("threshold calibration needs both classes")
    best = None
    for theta in _candidate_thresholds(scores):
        tp, _, _, tn = counts_at(theta)
        accuracy = (tp + tn) / n
        if best is None or accuracy >= best[1]:
            best = (theta, accuracy)
    return best


# -- composite evaluation ------------------------------------------------


def evaluate(pairs: list[LabeledPair], provider_config: ProviderConfig) -> EvalReport:
    """Score pairs with the provider and compute the full metric suite."""
    scored = score_pairs(pairs, provider_config)
    ap = average_precision(scored)
    f1_threshold, precision, recall, f1 = best_threshold_f1(scored)
    accuracy_threshold, accuracy = best_threshold_accuracy(scored)
    return EvalReport(
        precision=precision,
        recall=recall,
        f1=f1,
        accuracy=accuracy,
        average_precision=ap,
        f1_threshold=f1_threshold,
        accuracy_threshold=accuracy_threshold,
        n_pairs=len(pairs),
        positives=sum(p.is_duplicate for p in pairs),
    )


def forgetting_eval(
    in_domain_pairs: list[LabeledPair],
    out_domain_pairs: list[LabeledPair],
    tuned_provider: ProviderConfig,
    base_provider: ProviderConfig,
) -> ForgettingReport:
    """Cross-domain comparison of a tuned model against its base.

    Evaluates both providers on both datasets and reports per-metric
    deltas (tuned minus base) on each domain; a negative out-domain delta
    is the forgetting signal.
    """
    in_domain = evaluate(in_domain_pairs, tuned_provider)
    out_domain = evaluate(out_domain_pairs, tuned_provider)
    baseline_in = evaluate(in_domain_pairs, base_provider)
    baseline_out = evaluate(out_domain_pairs, base_provider)
    deltas = {
        "in_domain": {
            name: getattr(in_domain, name) - getattr(baseline_in, name)
            for name in METRIC_NAMES
        },
        "out_domain": {
            name: getattr(out_domain, name) - getattr(baseline_out, name)
            for name in METRIC_NAMES
        },
    }
    return ForgettingReport(
        in_domain=in_domain,
        out_domain=out_domain,
        baseline_in_domain=baseline_in,
        baseline_out_domain=baseline_out,
        deltas=deltas,
    )


# -- exporters -----------------------------------------------------------


def write_table_row(
    path: str, model: str, source: str, report: EvalReport, append: bool = False
) -> None:
    """Append one comparison-table row (Model, Source, five metrics) as CSV."""
    mode = "a" if append else "w"
    with open(path, mode, encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        if fh.tell() == 0:
            writer.writerow(TABLE_COLUMNS)
        writer.writerow(
            [
                model,
                source,
                report.precision,
                report.recall,
                report.f1,
                report.accuracy,
                report.average_precision,
            ]
        )
