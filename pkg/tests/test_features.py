import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ctxsens.features import (
    EmptyVocabularyError,
    FeatureConfig,
    FeatureVector,
    Vocabulary,
    fit_vocabulary,
    to_csr,
    tokenize,
    transform,
    transform_many,
)

UNIGRAM = FeatureConfig(min_token_len=1, ngram_max=1, min_df=1, max_features=None)


def test_vocabulary_counts_document_frequency():
    vocab = fit_vocabulary(["a b", "b c"], UNIGRAM)
    assert set(vocab.term_index) == {"a", "b", "c"}
    assert vocab.doc_freq == {"a": 1, "b": 2, "c": 1}
    assert sorted(vocab.term_index.values()) == [0, 1, 2]


def test_min_df_filters_terms():
    config = FeatureConfig(min_token_len=1, ngram_max=1, min_df=2, max_features=None)
    vocab = fit_vocabulary(["a b", "b c"], config)
    assert set(vocab.term_index) == {"b"}


def test_identical_documents_count_once_each():
    vocab = fit_vocabulary(["x y", "x y"], UNIGRAM)
    assert vocab.doc_freq == {"x": 2, "y": 2}


def test_max_features_keeps_highest_df_with_lexicographic_ties():
    config = FeatureConfig(min_token_len=1, ngram_max=1, min_df=1, max_features=2)
    vocab = fit_vocabulary(["b c z", "z"], config)
    # z has df 2; b and c tie at 1 -> b wins lexicographically
    assert set(vocab.term_index) == {"z", "b"}


def test_empty_corpus_after_tokenization_raises():
    with pytest.raises(EmptyVocabularyError):
        fit_vocabulary(["!!!", "..."], UNIGRAM)
    with pytest.raises(EmptyVocabularyError, match="min_df"):
        fit_vocabulary(["a", "b"], FeatureConfig(min_token_len=1, ngram_max=1, min_df=3))


def test_default_tokenizer_drops_short_tokens_and_adds_bigrams():
    terms = tokenize("An API, the API-token!", FeatureConfig())
    assert "an" in terms and "api" in terms
    assert "the api" in terms  # bigram
    assert all(len(t.split()[0]) >= 2 for t in terms)


def test_tokenizer_splits_on_non_alphanumeric_runs():
    assert tokenize("foo_bar 42x,y;z9", FeatureConfig(min_token_len=1, ngram_max=1)) == [
        "foo",
        "bar",
        "42x",
        "y",
        "z9",
    ]


def test_single_term_vector_normalizes_to_one():
    vocab = fit_vocabulary(["solo"], FeatureConfig(min_df=1))
    vec = transform(vocab, "solo")
    assert vec.indices == (0,)
    assert vec.weights == (1.0,)


def test_l2_scale_invariance_for_single_term():
    vocab = fit_vocabulary(["b b", "b"], UNIGRAM)
    assert transform(vocab, "b b") == transform(vocab, "b")


def test_hand_computed_tfidf():
    # corpus ["a b", "b c"]: idf(a) = ln(3/2)+1, idf(b) = ln(3/3)+1 = 1
    # "a b b": unnormalized (1*idf_a, 2*1), then L2-normalized
    vocab = fit_vocabulary(["a b", "b c"], UNIGRAM)
    assert vocab.idf("a") == pytest.approx(1.4054651081081644, abs=1e-15)
    assert vocab.idf("b") == pytest.approx(1.0, abs=1e-15)
    vec = transform(vocab, "a b b")
    by_term = {term: vec.weights[vec.indices.index(idx)] for term, idx in vocab.term_index.items() if idx in vec.indices}
    assert by_term["a"] == pytest.approx(0.5749618667993135, abs=1e-12)
    assert by_term["b"] == pytest.approx(0.8181802073667197, abs=1e-12)


def test_out_of_vocabulary_terms_ignored():
    vocab = fit_vocabulary(["a b", "b c"], UNIGRAM)
    vec = transform(vocab, "zz yy b")
    assert vec.indices == (vocab.term_index["b"],)


def test_zero_vector_for_fully_oov_text():
    vocab = fit_vocabulary(["a b", "b c"], UNIGRAM)
    vec = transform(vocab, "zz yy")
    assert vec.indices == () and vec.norm() == 0.0


def test_vocabulary_json_round_trip():
    vocab = fit_vocabulary(["a b", "b c d", "d"], UNIGRAM)
    clone = Vocabulary.loads(vocab.dumps())
    assert clone.term_index == vocab.term_index
    assert clone.doc_freq == vocab.doc_freq
    assert clone.n_documents == vocab.n_documents
    assert transform(clone, "a b d") == transform(vocab, "a b d")


def test_feature_vector_invariants():
    with pytest.raises(ValueError):
        FeatureVector(indices=(1, 0), weights=(0.5, 0.5), dimension=2)
    with pytest.raises(ValueError):
        FeatureVector(indices=(3,), weights=(1.0,), dimension=2)


def test_to_csr_stacks_in_order():
    vocab = fit_vocabulary(["a b", "b c"], UNIGRAM)
    matrix = to_csr(transform_many(vocab, ["a", "c b"]))
    assert matrix.shape == (2, 3)
    assert matrix[0, vocab.term_index["a"]] == pytest.approx(1.0)


_texts = st.lists(st.text(alphabet="abcd ", min_size=1, max_size=12), min_size=1, max_size=8)


@pytest.mark.property
@given(_texts, st.text(alphabet="abcdez ", max_size=12))
def test_transform_deterministic_and_in_range(corpus, query):
    try:
        vocab = fit_vocabulary(corpus, UNIGRAM)
    except EmptyVocabularyError:
        return
    first = transform(vocab, query)
    second = transform(vocab, query)
    assert first == second
    assert all(i < vocab.dimension for i in first.indices)
    in_vocab = [t for t in tokenize(query, vocab.config) if t in vocab.term_index]
    if in_vocab:
        assert first.norm() == pytest.approx(1.0, abs=1e-12)
    else:
        assert first.indices == ()


@pytest.mark.property
@given(_texts)
def test_fit_transform_indices_within_bounds(corpus):
    try:
        vocab = fit_vocabulary(corpus, UNIGRAM)
    except EmptyVocabularyError:
        return
    for text in corpus:
        vec = transform(vocab, text)
        assert all(i < len(vocab) for i in vec.indices)
        assert list(vec.indices) == sorted(set(vec.indices))
