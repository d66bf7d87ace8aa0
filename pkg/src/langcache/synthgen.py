"""Synthetic duplicate/distinct query-pair generation.

Drives a chat-completion LLM with two prompts per seed query — one asking
for two paraphrases (label 1), one asking for two topically related but
semantically distinct queries (label 0) — and validates the JSON the model
returns. Both labels come out of the same pipeline pass, which is what
produces the near-boundary negatives that plain paraphrase augmentation
misses.

Emitted pairs are (seed, generated) only: no paraphrase-paraphrase or
paraphrase-distinct cross products unless ``expand_pairs`` is set, which is
offered as an experiment. Output is JSON Lines with full provenance
(seed id, generation kind, response hash); a CSV exporter produces the
(question1, question2, is_duplicate) schema used for training and
evaluation.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import requests

from .errors import EmptyItem, LlmError, NoJsonFound, WrongArity

logger = logging.getLogger(__name__)

KIND_PARAPHRASE = "paraphrase"
KIND_DISTINCT = "distinct"
_KIND_ORDER = {KIND_PARAPHRASE: 0, KIND_DISTINCT: 1}

DEFAULT_DOMAIN_ROLE = "medical expert"

PARAPHRASE_TEMPLATE = """You are a helpful {role}. Generate 2 unique paraphrases of the given query.
Original Query: '{query}'
Each paraphrase should:
1. Preserve the original meaning but use different wording or sentence structure.
2. Avoid changing medical intent or introducing new information.
3. Be professionally written and clear.
Example:
Original Query: "What are the best ways to reduce stress?"
Paraphrased Queries:
1. "How can a person effectively manage stress?"
2. "What strategies help in reducing stress levels?"
Return JSON with a key 'queries' containing a list of the two paraphrased versions."""

DISTINCT_TEMPLATE = """You are a helpful {role}. Given a medical query, generate two distinct but related queries that explore different aspects of the topic.
Guidelines:
1. The new queries should be related to the original but focus on different subtopics, perspectives, or medical contexts.
2. They should not be simple rewordings or slight variations of the original.
3. Consider different patient populations, alternative diagnostic methods, treatments, or physiological explanations.
Examples:
Original Query:
"How to reduce stress?"
 Distinct Queries:
1. "How can athletes manage stress during high-pressure competitions?" (Context: Sports Psychology)
2. "What are effective stress management strategies for children with ADHD?" (Context: Pediatric Stress Management)
Original Query:
"A 61-year-old woman with a long history of involuntary urine loss during activities like coughing or sneezing but no leakage at night undergoes a gynecological exam and Q-tip test. Based on these findings, what would cystometry most likely reveal about her residual volume and detrusor contractions?"
Distinct Queries:
1. "How does the Q-tip test help differentiate between stress urinary incontinence and urge incontinence?" (Context: Diagnostic Techniques)
2. "What are the treatment options for stress urinary incontinence in postmenopausal women, and how does cystometry aid in management?" (Context: Treatment & Management)

Now, generate two distinct queries for this input:
Original Query: {query}
Return JSON with 'queries' only."""


@dataclass(frozen=True)
class SeedQuery:
    """One unlabeled query from the seed corpus."""

    id: int
    text: str
    domain_tag: str | None = None

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("seed text must be non-empty")


@dataclass(frozen=True)
class SynthRecord:
    """One generated pair with provenance.

    kind and is_duplicate are locked together: paraphrase <=> 1,
    distinct <=> 0. question2 must actually differ from question1 after
    case/whitespace normalization — a "paraphrase" that echoes its seed
    teaches nothing.
    """

    question1: str
    question2: str
    is_duplicate: int
    kind: str
    seed_id: int
    raw_response_hash: str

    def __post_init__(self):
        if self.kind not in _KIND_ORDER:
            raise ValueError(f"unknown kind {self.kind!r}")
        if (self.kind == KIND_PARAPHRASE) != (self.is_duplicate == 1):
            raise ValueError("kind and is_duplicate disagree")
        if _normalize_text(self.question1) == _normalize_text(self.question2):
            raise ValueError("question2 must differ from question1 after normalization")

    def to_dict(self) -> dict:
        return {
            "question1": self.question1,
            "question2": self.question2,
            "is_duplicate": self.is_duplicate,
            "kind": self.kind,
            "seed_id": self.seed_id,
            "raw_response_hash": self.raw_response_hash,
        }


@dataclass(frozen=True)
class GenConfig:
    """Pipeline configuration: which LLM fills the generator role, and how hard to push it."""

    llm_endpoint: str
    llm_model: str
    temperature: float = 0.7
    concurrency: int = 4
    max_retries: int = 3
    domain_role: str = DEFAULT_DOMAIN_ROLE
    timeout_ms: int = 60_000
    expand_pairs: bool = False

    def __post_init__(self):
        if self.concurrency < 1:
            raise ValueError("concurrency must be >= 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass
class PipelineSummary:
    seeds_processed: int
    records_written: int
    failures: int
    dedup_dropped: int

    def to_dict(self) -> dict:
        return {
            "seeds_processed": self.seeds_processed,
            "records_written": self.records_written,
            "failures": self.failures,
            "dedup_dropped": self.dedup_dropped,
        }


def _normalize_text(text: str) -> str:
    return " ".join(text.split()).lower()


# -- prompt rendering ----------------------------------------------------


def render_paraphrase_prompt(query: str, domain_role: str = DEFAULT_DOMAIN_ROLE) -> str:
    """Fill the paraphrase-generation template for one query."""
    if not query.strip():
        raise ValueError("query must be non-empty")
    return PARAPHRASE_TEMPLATE.replace("{role}", domain_role).replace("{query}", query)


def render_distinct_prompt(query: str, domain_role: str = DEFAULT_DOMAIN_ROLE) -> str:
    """Fill the distinct-queries template for one query."""
    if not query.strip():
        raise ValueError("query must be non-empty")
    return DISTINCT_TEMPLATE.replace("{role}", domain_role).replace("{query}", query)


# -- response parsing ----------------------------------------------------


def parse_llm_queries(raw_response: str) -> tuple[str, str]:
    """Extract exactly two non-empty query strings from an LLM response.

    Tolerates surrounding prose and Markdown code fences by scanning for
    the first balanced JSON object that carries a "queries" key.

    Raises:
        NoJsonFound: no such JSON object in the response.
        WrongArity: the queries list does not hold exactly two items.
        EmptyItem: an item is empty (or not a string) after trimming.
    """
    decoder = json.JSONDecoder()
    found = None
    pos = raw_response.find("{")
    while pos != -1:
        try:
            obj, _ = decoder.raw_decode(raw_response[pos:])
        except json.JSONDecodeError:
            obj = None
        if isinstance(obj, dict) and "queries" in obj:
            found = obj
            break
        pos = raw_response.find("{", pos + 1)
    if found is None:
        raise NoJsonFound("no JSON object with a 'queries' key in response")
    queries = found["queries"]
    if not isinstance(queries, list) or len(queries) != 2:
        n = len(queries) if isinstance(queries, list) else "non-list"
        raise WrongArity(f"'queries' must hold exactly 2 items, got {n}")
    cleaned = []
    for item in queries:
        if not isinstance(item, str) or not item.strip():
            raise EmptyItem(f"unusable item in 'queries': {item!r}")
        cleaned.append(item.strip())
    return cleaned[0], cleaned[1]


# -- LLM client ----------------------------------------------------------


class HttpChatClient:
    """Minimal chat-completions client: one prompt in, message text out."""

    def __init__(self, config: GenConfig):
        self.config = config

    def __call__(self, prompt: str) -> str:
        payload = {
            "model": self.config.llm_model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
        }
        try:
            resp = requests.post(
                self.config.llm_endpoint, json=payload, timeout=self.config.timeout_ms / 1000.0
            )
        except requests.RequestException as exc:
            raise LlmError(f"chat request failed: {exc}") from exc
        if resp.status_code != 200:
            raise LlmError(f"chat endpoint returned {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise LlmError(f"malformed chat response: {exc}") from exc


# -- generation ----------------------------------------------------------


def _ask(config: GenConfig, llm_client, prompt: str) -> tuple[tuple[str, str], str]:
    """One prompt with retries; returns ((item1, item2), raw_response).

    Parse failures re-ask immediately (the model is stochastic); transport
    failures back off before retrying.
    """
    attempts = config.max_retries + 1
    last: Exception | None = None
    for attempt in range(attempts):
        try:
            raw = llm_client(prompt)
            return parse_llm_queries(raw), raw
        except (NoJsonFound, WrongArity, EmptyItem) as exc:
            last = exc
        except LlmError as exc:
            last = exc
            if attempt < attempts - 1:
                time.sleep(random.uniform(0, 0.2 * 2**attempt))
    raise LlmError(f"prompt failed after {attempts} attempt(s): {last}") from last


def _records_for_kind(seed: SeedQuery, kind: str, items: tuple[str, str], raw: str):
    label = 1 if kind == KIND_PARAPHRASE else 0
    digest = hashlib.sha256(raw.encode("utf-8")).hexdigest()
    records = []
    for item in items:
        if _normalize_text(item) == _normalize_text(seed.text):
            logger.debug("seed %d: %s item equals seed text, dropped", seed.id, kind)
            continue
        records.append(
            SynthRecord(
                question1=seed.text,
                question2=item,
                is_duplicate=label,
                kind=kind,
                seed_id=seed.id,
                raw_response_hash=digest,
            )
        )
    return records


def _generate_for_seed(seed: SeedQuery, config: GenConfig, llm_client):
    """Returns (ordered records, failure count) for one seed."""
    records: list[SynthRecord] = []
    failures = 0
    outputs: dict[str, tuple[tuple[str, str], str]] = {}
    for kind, prompt in (
        (KIND_PARAPHRASE, render_paraphrase_prompt(seed.text, config.domain_role)),
        (KIND_DISTINCT, render_distinct_prompt(seed.text, config.domain_role)),
    ):
        try:
            items, raw = _ask(config, llm_client, prompt)
        except LlmError as exc:
            logger.warning("seed %d: %s generation failed: %s", seed.id, kind, exc)
            failures += 1
            continue
        outputs[kind] = (items, raw)
        records.extend(_records_for_kind(seed, kind, items, raw))
    if config.expand_pairs and KIND_PARAPHRASE in outputs:
        records.extend(_expanded_records(seed, outputs))
    return records, failures


def _expanded_records(seed: SeedQuery, outputs) -> list[SynthRecord]:
    # Experimental combinatorial expansion: paraphrase-paraphrase positives
    # and paraphrase x distinct negatives. question1 is then a generated
    # text rather than the seed; seed_id still records provenance.
    records = []
    paras, p_raw = outputs[KIND_PARAPHRASE]
    p_hash = hashlib.sha256(p_raw.encode("utf-8")).hexdigest()
    if _normalize_text(paras[0]) != _normalize_text(paras[1]):
        records.append(
            SynthRecord(
                question1=paras[0],
                question2=paras[1],
                is_duplicate=1,
                kind=KIND_PARAPHRASE,
                seed_id=seed.id,
                raw_response_hash=p_hash,
            )
        )
    if KIND_DISTINCT in outputs:
        distincts, d_raw = outputs[KIND_DISTINCT]
        d_hash = hashlib.sha256(d_raw.encode("utf-8")).hexdigest()
        for para in paras:
            for dist in distincts:
                if _normalize_text(para) == _normalize_text(dist):
                    continue
                records.append(
                    SynthRecord(
                        question1=para,
                        question2=dist,
                        is_duplicate=0,
                        kind=KIND_DISTINCT,
                        seed_id=seed.id,
                        raw_response_hash=d_hash,
                    )
                )
    return records


def generate_for_seed(seed: SeedQuery, config: GenConfig, llm_client) -> list[SynthRecord]:
    """Generate this seed's records: up to 2 paraphrase and 2 distinct pairs.

    A prompt that keeps failing after retries contributes zero records of
    its kind; the failure is logged, not raised.
    """
    records, _ = _generate_for_seed(seed, config, llm_client)
    return records


# -- pipeline ------------------------------------------------------------


def run_pipeline(
    seeds: list[SeedQuery], config: GenConfig, output_path: str, llm_client=None
) -> PipelineSummary:
    """Process every seed with bounded concurrency and write JSONL output.

    Records are ordered by (seed_id, kind, item index) and deduplicated on
    the normalized (question1, question2) pair before writing, so the
    output file is byte-identical for any concurrency level given a
    deterministic client.
    """
    if not seeds:
        raise ValueError("run_pipeline requires at least one seed")
    if llm_client is None:
        llm_client = HttpChatClient(config)
    failures = 0
    per_seed: list[tuple[SeedQuery, list[SynthRecord]]] = []
    with ThreadPoolExecutor(max_workers=config.concurrency) as pool:
        futures = [pool.submit(_generate_for_seed, seed, config, llm_client) for seed in seeds]
        for seed, future in zip(seeds, futures):
            records, n_failed = future.result()
            failures += n_failed
            per_seed.append((seed, records))
    ordered: list[SynthRecord] = []
    for seed, records in sorted(per_seed, key=lambda item: item[0].id):
        # Stable sort: kind groups in fixed order, item order preserved within.
        ordered.extend(sorted(records, key=lambda r: _KIND_ORDER[r.kind]))
    seen: set[tuple[str, str]] = set()
    dedup_dropped = 0
    kept: list[SynthRecord] = []
    for record in ordered:
        key = (_normalize_text(record.question1), _normalize_text(record.question2))
        if key in seen:
            dedup_dropped += 1
            continue
        seen.add(key)
        kept.append(record)
    with open(output_path, "w", encoding="utf-8") as fh:
        for record in kept:
            fh.write(json.dumps(record.to_dict(), ensure_ascii=False, separators=(",", ":")))
            fh.write("\n")
    summary = PipelineSummary(
        seeds_processed=len(seeds),
        records_written=len(kept),
        failures=failures,
        dedup_dropped=dedup_dropped,
    )
    logger.info("pipeline done: %s", summary.to_dict())
    return summary


# -- seed and record I/O -------------------------------------------------


def load_seeds(path: str) -> list[SeedQuery]:
    """Load seed queries from JSONL ({"id", "text", "domain_tag"?}) or
    plain text (one query per line; ids are 1-based line numbers)."""
    seeds = []
    with open(path, "r", encoding="utf-8") as fh:
        if path.endswith(".jsonl"):
            for i, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                seeds.append(
                    SeedQuery(
                        id=int(record.get("id", i)),
                        text=record["text"],
                        domain_tag=record.get("domain_tag"),
                    )
                )
        else:
            for i, line in enumerate(fh, start=1):
                text = line.strip()
                if text:
                    seeds.append(SeedQuery(id=i, text=text))
    return seeds


def export_pairs_csv(jsonl_path: str, csv_path: str) -> int:
    """Convert pipeline JSONL output to the labeled-pair CSV schema.

    Returns the number of rows written.
    """
    rows = 0
    with open(jsonl_path, "r", encoding="utf-8") as src:
        with open(csv_path, "w", encoding="utf-8", newline="") as dst:
            writer = csv.writer(dst)
            writer.writerow(["question1", "question2", "is_duplicate"])
            for line in src:
                line = line.strip()
                if not line:
                    continue
                record = json.loads(line)
                writer.writerow(
                    [record["question1"], record["question2"], record["is_duplicate"]]
                )
                rows += 1
    return rows
