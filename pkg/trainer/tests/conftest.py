import csv
import math
import random

import pytest


def make_topic_vocabularies(n_topics=8, words_per_side=5):
    """Each topic gets two disjoint 'synonym' vocabularies: sentences built
    from side A share no tokens with side B, so only training can tie the
    sides together."""
    return [
        (
            [f"w{t}a{i}" for i in range(words_per_side)],
            [f"w{t}b{i}" for i in range(words_per_side)],
        )
        for t in range(n_topics)
    ]


def build_toy_pairs(rng, topics, n_pos_per_topic, n_neg):
    def sentence(vocab):
        return " ".join(rng.sample(vocab, 4))

    pairs = []
    for side_a, side_b in topics:
        for _ in range(n_pos_per_topic):
            pairs.append((sentence(side_a), sentence(side_b), 1))
    for _ in range(n_neg):
        t, u = rng.sample(range(len(topics)), 2)
        pairs.append(
            (sentence(rng.choice(topics[t])), sentence(rng.choice(topics[u])), 0)
        )
    rng.shuffle(pairs)
    return pairs


def write_pairs_csv(path, pairs):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["question1", "question2", "is_duplicate"])
        writer.writerows(pairs)
    return str(path)


@pytest.fixture
def toy_dataset(tmp_path):
    """64 separable training pairs and 32 held-out pairs."""
    rng = random.Random(99)
    topics = make_topic_vocabularies()
    train_csv = write_pairs_csv(tmp_path / "train.csv", build_toy_pairs(rng, topics, 4, 32))
    eval_csv = write_pairs_csv(tmp_path / "eval.csv", build_toy_pairs(rng, topics, 2, 16))
    return train_csv, eval_csv


def scalar_reference_loss(emb1, emb2, labels, margin):
    """Pure-Python reimplementation of the hard-pair mining and loss."""

    def cosine(u, v):
        dot = math.fsum(a * b for a, b in zip(u, v))
        nu = math.sqrt(math.fsum(a * a for a in u))
        nv = math.sqrt(math.fsum(b * b for b in v))
        return dot / (nu * nv)

    distances = [1.0 - cosine(u, v) for u, v in zip(emb1, emb2)]
    pos = [d for d, lab in zip(distances, labels) if lab == 1]
    neg = [d for d, lab in zip(distances, labels) if lab == 0]
    hard_pos = [d for d in pos if d > min(neg)] if neg else list(pos)
    hard_neg = [d for d in neg if d < max(pos)] if pos else list(neg)
    total = math.fsum(d * d for d in hard_pos) + math.fsum(
        max(0.0, margin - d) ** 2 for d in hard_neg
    )
    return total, len(hard_pos), len(hard_neg)
