#!/usr/bin/env python3
"""Regenerate the frozen dataset fixture at data/fixtures/amt_fixture.jsonl.

The fixture is a deterministic 1,200-record snapshot whose per-tag and
per-rating counts are the full dataset's distributions scaled down, with
exact counts enforced by construction (pool dealing, not sampling), so
histogram order matches the full snapshot and tests can assert exact
numbers.  24 records carry no rating to exercise the missing-label path.

Run from the repository root:  python3 scripts/make_fixture.py
"""

from __future__ import annotations

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from psg.corpus import ProblemRecord, save_jsonl
from psg.rng import Xoshiro256StarStar, derive_seed

SEED = 20240901
N_RECORDS = 1200
N_UNRATED = 24

# Full-snapshot per-tag problem counts (most to least frequent).
FULL_TAG_COUNTS = {
    "Implementation": 2394, "Math": 2363, "Greedy": 2302, "DP": 1732,
    "Data Structures": 1429, "Brute Force": 1370, "Graphs": 890,
    "Sortings": 869, "Binary Search": 862, "DFS and Similar": 776,
    "Trees": 663, "Strings": 617, "Number Theory": 613,
    "Combinatorics": 544, "Bitmasks": 459, "Two Pointers": 438,
    "Geometry": 344, "DSU": 292, "Shortest Paths": 231,
    "Divide and Conquer": 227,
}

# Full-snapshot per-rating problem counts.
FULL_RATING_COUNTS = {
    800: 686, 900: 255, 1000: 306, 1100: 305, 1200: 333, 1300: 325,
    1400: 329, 1500: 357, 1600: 397, 1700: 381, 1800: 348, 1900: 371,
    2000: 363, 2100: 330, 2200: 362, 2300: 297, 2400: 347, 2500: 306,
    2600: 242, 2700: 222, 2800: 177, 2900: 165, 3000: 137, 3100: 107,
    3200: 105, 3300: 86, 3400: 63, 3500: 112,
}

THEME_WORDS = {
    "Implementation": ["simulate", "carefully", "steps"],
    "Math": ["modulo", "equation", "integer"],
    "Greedy": ["optimal", "choose", "locally"],
    "DP": ["subproblem", "states", "transition"],
    "Data Structures": ["segment", "queries", "update"],
    "Brute Force": ["enumerate", "all", "candidates"],
    "Graphs": ["vertices", "edges", "connected"],
    "Sortings": ["order", "ascending", "comparator"],
    "Binary Search": ["monotone", "midpoint", "answer"],
    "DFS and Similar": ["traversal", "visit", "recursion"],
    "Trees": ["rooted", "subtree", "parent"],
    "Strings": ["substring", "characters", "pattern"],
    "Number Theory": ["prime", "divisor", "gcd"],
    "Combinatorics": ["count", "ways", "arrangements"],
    "Bitmasks": ["bits", "mask", "subset"],
    "Two Pointers": ["window", "left", "right"],
    "Geometry": ["points", "plane", "distance"],
    "DSU": ["union", "components", "merge"],
    "Shortest Paths": ["weight", "route", "minimum"],
    "Divide and Conquer": ["halves", "merge", "recursively"],
}

FILLER = (
    "you are given a of the and to find for each test case print output "
    "input contains first line second integers numbers array sequence "
    "problem solve determine maximum minimum value values between exactly "
    "such that where it is guaranteed sum over does not exceed"
).split()


FULL_N_PROBLEMS = 7976  # tagged problems in the full snapshot
FULL_N_RATED = 7814     # of which carry a rating


def scaled_counts(full: dict, numerator: int, denominator: int) -> dict:
    return {key: round(c * numerator / denominator) for key, c in full.items()}


def main() -> None:
    out = Path(__file__).resolve().parents[1] / "data" / "fixtures" / "amt_fixture.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    gen = Xoshiro256StarStar(derive_seed(SEED, "fixture"))

    tag_counts = scaled_counts(FULL_TAG_COUNTS, N_RECORDS, FULL_N_PROBLEMS)
    assert len(set(tag_counts.values())) == len(tag_counts), "scaled counts must stay distinct"
    tag_pool = [t for t, c in tag_counts.items() for _ in range(c)]
    gen.shuffle(tag_pool)
    total_slots = len(tag_pool)

    # Per-record tag-set sizes: start at 2 each, upgrade enough records to 3.
    sizes = [2] * N_RECORDS
    for i in range(total_slots - 2 * N_RECORDS):
        sizes[i] = 3
    gen.shuffle(sizes)

    # Deal the pool; resolve duplicate tags within a record by swapping
    # the colliding slot with a random later one.
    tag_sets: list[list[str]] = []
    pos = 0
    for size in sizes:
        chunk = tag_pool[pos : pos + size]
        for j in range(size):
            guard = 0
            while chunk[j] in chunk[:j]:
                swap = pos + size + gen.next_below(max(total_slots - pos - size, 1))
                if swap >= total_slots:
                    break
                tag_pool[pos + j], tag_pool[swap] = tag_pool[swap], tag_pool[pos + j]
                chunk = tag_pool[pos : pos + size]
                guard += 1
                if guard > 200:
                    break
            if chunk[j] in chunk[:j]:  # give up: shrink the record by one tag
                chunk = chunk[:j]
                break
        tag_sets.append(list(dict.fromkeys(chunk)))
        pos += size

    rating_counts = scaled_counts(FULL_RATING_COUNTS, N_RECORDS - N_UNRATED, FULL_N_RATED)
    rating_pool: list[int | None] = [r for r, c in rating_counts.items() for _ in range(c)]
    while len(rating_pool) < N_RECORDS - N_UNRATED:
        rating_pool.append(800)
    rating_pool = rating_pool[: N_RECORDS - N_UNRATED]
    rating_pool += [None] * N_UNRATED
    gen.shuffle(rating_pool)

    records = []
    for i in range(N_RECORDS):
        contest_id = 1 + i // 6
        letter = "ABCDEF"[i % 6]
        tags = tag_sets[i]
        words = []
        for tag in tags:
            words.extend(THEME_WORDS[tag])
        for _ in range(30):
            words.append(FILLER[gen.next_below(len(FILLER))])
        gen.shuffle(words)
        records.append(ProblemRecord(
            id=f"{contest_id}{letter}",
            contest_id=contest_id,
            index=letter,
            title=f"Fixture problem {contest_id}{letter}",
            statement=" ".join(words),
            tags=frozenset(tags),
            rating=rating_pool[i],
        ))
    save_jsonl(records, out)
    n_rated = sum(1 for r in records if r.rating is not None)
    print(f"wrote {len(records)} records ({n_rated} rated) -> {out}")


if __name__ == "__main__":
    main()
