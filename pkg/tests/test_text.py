import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from psg import text
from psg.errors import DataError


class TestTokenize:
    def test_basic(self):
        assert text.tokenize("Given n integers") == ["given", "n", "integers"]

    def test_empty(self):
        assert text.tokenize("") == []

    def test_punctuation_split(self):
        assert text.tokenize("a-b c3") == ["a", "b", "c3"]

    def test_underscore_splits(self):
        assert text.tokenize("a_b") == ["a", "b"]

    def test_truncation(self):
        cfg = text.TokenizerConfig(max_tokens=3)
        assert text.tokenize("one two three four five", cfg) == ["one", "two", "three"]

    def test_no_lowercase(self):
        cfg = text.TokenizerConfig(lowercase=False)
        assert text.tokenize("Hello World", cfg) == ["Hello", "World"]

    def test_unicode_letters_kept(self):
        assert text.tokenize("числа n, и m!") == ["числа", "n", "и", "m"]


class TestFit:
    def test_idf_values(self):
        v = text.fit([["a", "b"], ["a"]], mode="vocabulary")
        assert v.idf[v.vocabulary["a"]] == pytest.approx(1.0, abs=1e-15)
        assert v.idf[v.vocabulary["b"]] == pytest.approx(math.log(3 / 2) + 1, abs=1e-12)

    def test_idf_floor_when_everywhere(self):
        v = text.fit([["t", "x"], ["t"], ["t", "y"]], mode="vocabulary")
        assert v.idf[v.vocabulary["t"]] == 1.0

    def test_empty_corpus(self):
        with pytest.raises(DataError):
            text.fit([], mode="hashed", dimension=16)

    def test_non_power_of_two_rejected(self):
        with pytest.raises(DataError, match="power of two"):
            text.fit([["a"]], mode="hashed", dimension=1000)

    def test_df_counts_documents_not_occurrences(self):
        v = text.fit([["a", "a", "a"], ["a"]], mode="vocabulary")
        assert v.df[v.vocabulary["a"]] == 2

    def test_hashed_df_total_bounded_by_vocab(self):
        docs = [["alpha", "beta", "gamma"], ["alpha", "delta"], ["epsilon"]]
        hashed = text.fit(docs, mode="hashed", dimension=8)  # tiny: force collisions
        vocab = text.fit(docs, mode="vocabulary")
        assert hashed.df.sum() <= vocab.df.sum()
        assert vocab.df.sum() == sum(len(set(d)) for d in docs)


class TestVectorize:
    def test_hand_computed_values(self):
        v = text.fit([["a", "b"], ["a"]], mode="vocabulary")
        dv = text.vectorize(v, ["a", "a", "b"])
        idf_b = math.log(3 / 2) + 1
        pre = np.array([2 * 1.0, 1 * idf_b])
        expected = pre / np.linalg.norm(pre)
        np.testing.assert_allclose(dv.to_dense()[[v.vocabulary["a"], v.vocabulary["b"]]],
                                   expected, atol=1e-12)
        assert dv.norm() == pytest.approx(1.0, abs=1e-12)

    def test_empty_doc_is_zero_vector(self):
        v = text.fit([["a"]], mode="hashed", dimension=16)
        dv = text.vectorize(v, [])
        assert dv.norm() == 0.0
        assert len(dv.indices) == 0

    def test_uniform_when_all_idf_one(self):
        docs = [["a", "b", "c", "d"]]
        v = text.fit(docs, mode="vocabulary")
        dv = text.vectorize(v, ["a", "b", "c", "d"])
        np.testing.assert_allclose(dv.values, 0.5, atol=1e-12)

    def test_unseen_tokens_dropped_in_vocab_mode(self):
        v = text.fit([["a"]], mode="vocabulary")
        dv = text.vectorize(v, ["zzz"])
        assert dv.norm() == 0.0

    def test_indices_strictly_increasing(self):
        v = text.fit([["a", "b", "c"]], mode="hashed", dimension=64)
        dv = text.vectorize(v, ["c", "a", "b", "a"])
        assert (np.diff(dv.indices) > 0).all()


class TestDeterminismProperties:
    @given(st.lists(st.lists(st.text(alphabet="abcdef", min_size=1, max_size=6),
                             min_size=0, max_size=8), min_size=1, max_size=6))
    @settings(max_examples=40, deadline=None)
    def test_fit_vectorize_bit_identical(self, docs):
        v1 = text.fit(docs, mode="hashed", dimension=64)
        v2 = text.fit(docs, mode="hashed", dimension=64)
        assert np.array_equal(v1.df, v2.df)
        for doc in docs:
            a = text.vectorize(v1, doc)
            b = text.vectorize(v2, doc)
            assert np.array_equal(a.indices, b.indices)
            assert np.array_equal(a.values, b.values)

    @given(st.lists(st.text(alphabet="abcxyz", min_size=1, max_size=5),
                    min_size=0, max_size=30))
    @settings(max_examples=60, deadline=None)
    def test_norm_is_zero_or_one(self, doc):
        v = text.fit([["seed", "words"], doc or ["pad"]], mode="hashed", dimension=32)
        n = text.vectorize(v, doc).norm()
        assert n == 0.0 or abs(n - 1.0) <= 1e-12

    def test_truncated_doc_equals_prefix(self):
        cfg = text.TokenizerConfig(max_tokens=5)
        long_text = "one two three four five six seven eight"
        tokens_long = text.tokenize(long_text, cfg)
        tokens_prefix = text.tokenize("one two three four five", cfg)
        assert tokens_long == tokens_prefix
        v = text.fit([tokens_long], mode="hashed", dimension=32)
        a = text.vectorize(v, tokens_long)
        b = text.vectorize(v, tokens_prefix)
        assert np.array_equal(a.values, b.values)

    def test_fnv1a_known_vector(self):
        # standard FNV-1a 64-bit reference value for "a"
        assert text.fnv1a64("a") == 0xAF63DC4C8601EC8C


class TestPersistence:
    def test_hashed_roundtrip(self, tmp_path):
        docs = [["alpha", "beta"], ["alpha"], ["gamma", "beta"]]
        v = text.fit(docs, mode="hashed", dimension=64)
        path = tmp_path / "vec.json"
        v.save(path)
        loaded = text.Vectorizer.load(path)
        assert loaded.mode == v.mode
        assert loaded.dimension == v.dimension
        assert loaded.n_docs == v.n_docs
        assert np.array_equal(loaded.df, v.df)
        for doc in docs:
            assert np.array_equal(
                text.vectorize(loaded, doc).values, text.vectorize(v, doc).values
            )

    def test_vocab_roundtrip(self, tmp_path):
        docs = [["alpha", "beta"], ["alpha"]]
        v = text.fit(docs, mode="vocabulary")
        path = tmp_path / "vec.json"
        v.save(path)
        loaded = text.Vectorizer.load(path)
        assert loaded.vocabulary == v.vocabulary
        assert np.array_equal(loaded.idf, v.idf)


class TestStackVectors:
    def test_shapes_and_content(self):
        v = text.fit([["a", "b"], ["c"]], mode="hashed", dimension=32)
        vecs = [text.vectorize(v, ["a", "b"]), text.vectorize(v, []), text.vectorize(v, ["c"])]
        x = text.stack_vectors(vecs)
        assert x.shape == (3, 32)
        np.testing.assert_allclose(x.toarray()[0], vecs[0].to_dense())
        assert x.toarray()[1].sum() == 0.0
