"""Problem datasets: loading, validation, filtering, splitting, summaries.

A dataset is a list of problem records (statement text, tag set, optional
difficulty rating) plus a tag vocabulary and the fixed 28-level difficulty
scale.  All functions here are pure; datasets are never mutated in place.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DataError
from .rng import Xoshiro256StarStar, derive_seed

RATING_MIN = 800
RATING_MAX = 3500
RATING_STEP = 100


@dataclass(frozen=True)
class DifficultyScale:
    """The 28-level ordinal difficulty scale: ratings 800..3500 step 100."""

    min_rating: int = RATING_MIN
    max_rating: int = RATING_MAX
    step: int = RATING_STEP

    @property
    def num_levels(self) -> int:
        return (self.max_rating - self.min_rating) // self.step + 1

    def to_index(self, rating: int) -> int:
        validate_rating(rating)
        return (rating - self.min_rating) // self.step

    def to_rating(self, index: int) -> int:
        if not 0 <= index < self.num_levels:
            raise DataError(f"difficulty index {index} out of range [0, {self.num_levels})")
        return self.min_rating + index * self.step


def validate_rating(rating: int) -> None:
    if not isinstance(rating, int) or isinstance(rating, bool):
        raise DataError(f"rating must be an integer, got {rating!r}")
    if rating < RATING_MIN or rating > RATING_MAX or rating % RATING_STEP != 0:
        raise DataError(
            f"rating {rating} invalid: must be a multiple of {RATING_STEP} "
            f"in [{RATING_MIN}, {RATING_MAX}]"
        )


def difficulty_to_index(rating: int) -> int:
    return DifficultyScale().to_index(rating)


def index_to_difficulty(index: int) -> int:
    return DifficultyScale().to_rating(index)


@dataclass(frozen=True)
class ProblemRecord:
    """One algorithm problem, as stored in the JSONL interchange format."""

    id: str
    title: str
    statement: str
    tags: frozenset[str]
    rating: int | None = None
    contest_id: int | None = None
    index: str | None = None
    source: str = "codeforces"

    def sorted_tags(self) -> list[str]:
        return sorted(self.tags)


@dataclass(frozen=True)
class TagVocabulary:
    """Ordered tag label space; order is fixed and persisted."""

    labels: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise DataError("vocabulary labels must be unique")
        if not self.labels:
            raise DataError("vocabulary must be non-empty")

    def __len__(self) -> int:
        return len(self.labels)

    def index_of(self, label: str) -> int:
        return self.labels.index(label)

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.labels) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "TagVocabulary":
        lines = [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines()]
        return cls(tuple(ln for ln in lines if ln))


def amt_vocabulary() -> TagVocabulary:
    """The shipped 20-tag vocabulary, frequency-ordered."""
    text = resources.files("psg.data").joinpath("amt_tags.txt").read_text(encoding="utf-8")
    return TagVocabulary(tuple(ln.strip() for ln in text.splitlines() if ln.strip()))


@dataclass(frozen=True)
class Dataset:
    """Records filtered against a vocabulary, with materialized labels.

    ``labels`` is an (N, K) 0/1 matrix in vocabulary order;
    ``difficulty_indices`` is (N,) with -1 marking a missing rating.
    """

    records: tuple[ProblemRecord, ...]
    vocab: TagVocabulary
    scale: DifficultyScale = field(default_factory=DifficultyScale)
    labels: np.ndarray = field(default=None, repr=False)
    difficulty_indices: np.ndarray = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.records)

    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    def subset(self, ids: set[str]) -> "Dataset":
        keep = [i for i, r in enumerate(self.records) if r.id in ids]
        return Dataset(
            records=tuple(self.records[i] for i in keep),
            vocab=self.vocab,
            scale=self.scale,
            labels=self.labels[keep],
            difficulty_indices=self.difficulty_indices[keep],
        )


def _parse_record(obj: dict, line_no: int) -> ProblemRecord:
    if not isinstance(obj, dict):
        raise DataError(f"line {line_no}: expected a JSON object")
    rid = obj.get("id")
    if not isinstance(rid, str) or not rid:
        raise DataError(f"line {line_no}: 'id' must be a non-empty string")
    statement = obj.get("statement")
    if not isinstance(statement, str) or not statement.strip():
        raise DataError(f"line {line_no} (id {rid}): 'statement' must be non-empty")
    tags = obj.get("tags")
    if not isinstance(tags, list) or not all(isinstance(t, str) for t in tags):
        raise DataError(f"line {line_no} (id {rid}): 'tags' must be a list of strings")
    rating = obj.get("rating")
    if rating is not None:
        try:
            validate_rating(rating)
        except DataError as e:
            raise DataError(f"line {line_no} (id {rid}): {e}") from None
    contest_id = obj.get("contest_id")
    if contest_id is not None and (not isinstance(contest_id, int) or contest_id < 1):
        raise DataError(f"line {line_no} (id {rid}): 'contest_id' must be an integer >= 1")
    return ProblemRecord(
        id=rid,
        title=obj.get("title", ""),
        statement=statement,
        tags=frozenset(tags),
        rating=rating,
        contest_id=contest_id,
        index=obj.get("index"),
        source=obj.get("source", "codeforces"),
    )


def load_jsonl(path: str | Path) -> list[ProblemRecord]:
    """Load problem records from a JSONL file, validating each line.

    Unknown fields are ignored.  Raises DataError with the offending line
    number on malformed JSON or schema violations, and on duplicate ids.
    """
    records: list[ProblemRecord] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"line {line_no}: malformed JSON ({e.msg})") from None
            rec = _parse_record(obj, line_no)
            if rec.id in seen:
                raise DataError(f"line {line_no}: duplicate id {rec.id!r}")
            seen.add(rec.id)
            records.append(rec)
    return records


def save_jsonl(records: list[ProblemRecord], path: str | Path) -> None:
    """Write records in the JSONL interchange format (canonical key order)."""
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(record_to_json_line(r) + "\n")


def record_to_json_line(r: ProblemRecord) -> str:
    obj = {
        "id": r.id,
        "contest_id": r.contest_id,
        "index": r.index,
        "title": r.title,
        "statement": r.statement,
        "tags": r.sorted_tags(),
        "rating": r.rating,
        "source": r.source,
    }
    return json.dumps(obj, ensure_ascii=False)


def build_dataset(
    records: list[ProblemRecord],
    vocab: TagVocabulary,
    scale: DifficultyScale | None = None,
) -> Dataset:
    """Filter records against a vocabulary and materialize label arrays.

    Tag matching is case-insensitive.  Records whose tag set does not
    intersect the vocabulary are dropped; out-of-vocabulary tags simply do
    not light any label bit.  Records without a rating are kept, with the
    difficulty index masked as -1.
    """
    scale = scale or DifficultyScale()
    folded = {label.casefold(): i for i, label in enumerate(vocab.labels)}
    kept: list[ProblemRecord] = []
    rows: list[np.ndarray] = []
    d_idx: list[int] = []
    for rec in records:
        row = np.zeros(len(vocab), dtype=np.float64)
        hit = False
        for tag in rec.tags:
            j = folded.get(tag.casefold())
            if j is not None:
                row[j] = 1.0
                hit = True
        if not hit:
            continue
        kept.append(rec)
        rows.append(row)
        d_idx.append(scale.to_index(rec.rating) if rec.rating is not None else -1)
    if not kept:
        raise DataError("no records remain after vocabulary filtering")
    return Dataset(
        records=tuple(kept),
        vocab=vocab,
        scale=scale,
        labels=np.vstack(rows),
        difficulty_indices=np.asarray(d_idx, dtype=np.int64),
    )


def tag_histogram(dataset: Dataset) -> dict[str, int]:
    """Per-tag record counts in vocabulary order (multi-label, so the
    counts sum to at least the number of records)."""
    counts = dataset.labels.sum(axis=0).astype(int)
    return {label: int(c) for label, c in zip(dataset.vocab.labels, counts)}


def difficulty_histogram(dataset: Dataset) -> dict[int, int]:
    """Record counts per present rating, ascending by rating."""
    counter = Counter(
        r.rating for r in dataset.records if r.rating is not None
    )
    return {rating: counter[rating] for rating in sorted(counter)}


def missing_rating_count(dataset: Dataset) -> int:
    return int(np.sum(dataset.difficulty_indices < 0))


def restrict_top_k(dataset: Dataset, k: int) -> Dataset:
    """Reduce the vocabulary to the k most frequent tags and re-filter.

    Frequency ties break alphabetically.  The reduced vocabulary is
    ordered by descending count (the same ordering the full vocabulary
    ships with).
    """
    if not 1 <= k <= len(dataset.vocab):
        raise DataError(f"k={k} out of range [1, {len(dataset.vocab)}]")
    hist = tag_histogram(dataset)
    ranked = sorted(hist.items(), key=lambda kv: (-kv[1], kv[0]))
    new_vocab = TagVocabulary(tuple(label for label, _ in ranked[:k]))
    return build_dataset(list(dataset.records), new_vocab, dataset.scale)


@dataclass(frozen=True)
class SplitAssignment:
    seed: int
    test_fraction: float
    train_ids: frozenset[str]
    test_ids: frozenset[str]

    def to_json(self) -> str:
        return json.dumps(
            {
                "seed": self.seed,
                "test_fraction": self.test_fraction,
                "train_ids": sorted(self.train_ids),
                "test_ids": sorted(self.test_ids),
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "SplitAssignment":
        obj = json.loads(text)
        return cls(
            seed=obj["seed"],
            test_fraction=obj["test_fraction"],
            train_ids=frozenset(obj["train_ids"]),
            test_ids=frozenset(obj["test_ids"]),
        )

    @classmethod
    def load(cls, path: str | Path) -> "SplitAssignment":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def split(dataset: Dataset, seed: int, test_fraction: float) -> SplitAssignment:
    """Deterministic train/test partition.

    Ids are sorted lexicographically, shuffled by a seeded xoshiro256**
    generator, and the first ceil(N * test_fraction) go to test.  The
    ceiling is computed over the fraction's decimal value (exact rational
    arithmetic), so 0.1 means exactly 1/10 and float rounding in
    N * fraction can never change the test size.
    """
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction {test_fraction} must be in (0, 1)")
    if len(dataset) < 2:
        raise DataError("need at least 2 records to split")
    ids = sorted(dataset.ids())
    gen = Xoshiro256StarStar(derive_seed(seed, "corpus.split"))
    gen.shuffle(ids)
    n_test = math.ceil(len(ids) * Fraction(str(test_fraction)))
    return SplitAssignment(
        seed=seed,
        test_fraction=test_fraction,
        train_ids=frozenset(ids[n_test:]),
        test_ids=frozenset(ids[:n_test]),
    )
