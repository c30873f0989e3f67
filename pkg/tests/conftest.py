import json
from pathlib import Path

import pytest

from psg import corpus

TESTS_DIR = Path(__file__).resolve().parent
REPO_ROOT = TESTS_DIR.parent
FIXTURE_JSONL = REPO_ROOT / "data" / "fixtures" / "amt_fixture.jsonl"


@pytest.fixture(scope="session")
def fixture_records():
    return corpus.load_jsonl(FIXTURE_JSONL)


@pytest.fixture(scope="session")
def fixture_dataset(fixture_records):
    return corpus.build_dataset(fixture_records, corpus.amt_vocabulary())


def write_jsonl(path: Path, rows: list[dict]) -> Path:
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    return path


def make_row(rid="1A", tags=("Math",), rating=800, statement="Given integers, sum them.", **extra):
    row = {
        "id": rid,
        "title": f"Problem {rid}",
        "statement": statement,
        "tags": list(tags),
        "rating": rating,
    }
    row.update(extra)
    return row
