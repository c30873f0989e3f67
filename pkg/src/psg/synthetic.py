"""Synthetic datasets with known structure, for learnability checks.

Each tag owns a disjoint block of signature tokens; a sample's statement
mixes the signature tokens of its active tags with shared filler words.
The difficulty level is a linear function of the per-tag signature-token
counts plus bounded noise, so a model that reads the text can recover
both tasks almost exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import Dataset, ProblemRecord, TagVocabulary, build_dataset, index_to_difficulty
from .rng import Xoshiro256StarStar, derive_seed


@dataclass(frozen=True)
class SyntheticSpec:
    n_samples: int = 2000
    n_tags: int = 5
    tokens_per_tag: int = 20
    n_filler_types: int = 100
    fillers_per_doc: int = 20
    tag_probability: float = 0.4
    token_probability: float = 0.6
    # difficulty = round(sum_k weight_k * count_k / tokens_per_tag + noise)
    tag_weights: tuple[float, ...] = (4.0, 6.0, 8.0, 10.0, 12.0)
    noise_half_width: float = 0.75
    missing_rating_fraction: float = 0.02


def synthetic_vocabulary(spec: SyntheticSpec = SyntheticSpec()) -> TagVocabulary:
    return TagVocabulary(tuple(f"Tag{k + 1}" for k in range(spec.n_tags)))


def generate_synthetic_dataset(seed: int, spec: SyntheticSpec = SyntheticSpec()) -> Dataset:
    gen = Xoshiro256StarStar(derive_seed(seed, "synthetic"))
    vocab = synthetic_vocabulary(spec)
    records = []
    for i in range(spec.n_samples):
        active = [k for k in range(spec.n_tags) if gen.random() < spec.tag_probability]
        if not active:
            active = [gen.next_below(spec.n_tags)]
        tokens: list[str] = []
        counts = [0] * spec.n_tags
        for k in active:
            for j in range(spec.tokens_per_tag):
                if gen.random() < spec.token_probability:
                    tokens.append(f"sig{k}tok{j}")
                    counts[k] += 1
            if counts[k] == 0:  # keep the tag detectable
                tokens.append(f"sig{k}tok0")
                counts[k] = 1
        for _ in range(spec.fillers_per_doc):
            tokens.append(f"filler{gen.next_below(spec.n_filler_types)}")
        gen.shuffle(tokens)

        signal = sum(
            spec.tag_weights[k] * counts[k] / spec.tokens_per_tag
            for k in range(spec.n_tags)
        )
        noise = (2.0 * gen.random() - 1.0) * spec.noise_half_width
        level = int(round(signal + noise))
        level = min(max(level, 0), 27)
        rating = None
        if gen.random() >= spec.missing_rating_fraction:
            rating = index_to_difficulty(level)
        records.append(ProblemRecord(
            id=f"S{i:05d}",
            title=f"Synthetic problem {i}",
            statement=" ".join(tokens),
            tags=frozenset(vocab.labels[k] for k in active),
            rating=rating,
        ))
    return build_dataset(records, vocab)
