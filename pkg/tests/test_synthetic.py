import numpy as np

from psg import corpus, text
from psg.synthetic import SyntheticSpec, generate_synthetic_dataset, synthetic_vocabulary


def test_deterministic_in_seed():
    a = generate_synthetic_dataset(9, SyntheticSpec(n_samples=50))
    b = generate_synthetic_dataset(9, SyntheticSpec(n_samples=50))
    assert a.records == b.records
    assert generate_synthetic_dataset(10, SyntheticSpec(n_samples=50)).records != a.records


def test_structure_matches_spec():
    spec = SyntheticSpec()
    ds = generate_synthetic_dataset(1, spec)
    assert len(ds) == 2000
    assert len(ds.vocab) == 5
    assert (ds.labels.sum(axis=1) >= 1).all()


def test_signature_tokens_are_disjoint_per_tag():
    spec = SyntheticSpec(n_samples=300)
    ds = generate_synthetic_dataset(2, spec)
    per_tag_tokens = [set() for _ in range(spec.n_tags)]
    for rec in ds.records:
        tokens = set(text.tokenize(rec.statement))
        for k, label in enumerate(synthetic_vocabulary(spec).labels):
            if label in rec.tags:
                per_tag_tokens[k] |= {t for t in tokens if t.startswith(f"sig{k}tok")}
            else:
                assert not any(t.startswith(f"sig{k}tok") for t in tokens)
    for i in range(spec.n_tags):
        for j in range(i + 1, spec.n_tags):
            assert not per_tag_tokens[i] & per_tag_tokens[j]
        assert len(per_tag_tokens[i]) <= spec.tokens_per_tag


def test_difficulty_tracks_signature_counts():
    spec = SyntheticSpec(n_samples=500)
    ds = generate_synthetic_dataset(3, spec)
    levels, signals = [], []
    for rec, d in zip(ds.records, ds.difficulty_indices):
        if d < 0:
            continue
        tokens = text.tokenize(rec.statement)
        signal = sum(
            spec.tag_weights[k] * sum(t.startswith(f"sig{k}tok") for t in tokens)
            / spec.tokens_per_tag
            for k in range(spec.n_tags)
        )
        levels.append(int(d))
        signals.append(signal)
    # linear-plus-bounded-noise: every level within rounding + noise of its signal
    err = np.abs(np.asarray(levels, float) - np.asarray(signals))
    clipped = (np.asarray(signals) > 27) | (np.asarray(signals) < 0)
    assert np.max(err[~clipped]) <= 0.5 + spec.noise_half_width + 1e-9


def test_missing_ratings_present_but_rare():
    ds = generate_synthetic_dataset(4)
    missing = corpus.missing_rating_count(ds)
    assert 0 < missing < 0.06 * len(ds)
