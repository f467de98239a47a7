import itertools
import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import central_difference, logistic_loss, vote_oracle
from artifact.classify import (
    CentroidModel, ClassifierConfig, EmbeddingConfig, EmbeddingModel, LabelError, LogisticModel, ModelFormatError,
    UndefinedCosine, UnrepresentableDocument, Vote, docov, docov_length, labeled_corpus, load_model,
    majority_vote, predict_centroid, predict_logreg, predict_nb, predict_target, save_model, train_centroid,
    train_logreg, train_nb, train_skipgram, train_target,
)
from artifact.classify.centroid import cosine_scores
from artifact.classify.embeddings import sgns_loss
from artifact.classify.ensemble import train_embeddings
from artifact.classify.logistic import logistic_loss_and_grad
from artifact.classify.serialize import dumps_model, loads_model
from artifact.classify.vote import CSV_HEADER, DocPrediction, PredictionSet, combine, percentiles, tie_break_reachable
from artifact.fixtures import pseudo_words, two_class_corpus

# Naive Bayes


def _nb_hand():
    return train_nb([["a", "a"], ["b"]], ["c1", "c2"])


def test_nb_hand_conditionals():
    m = _nb_hand()
    assert m.vocabulary == ["a", "b"]
    assert math.exp(m.log_cond[0, 0]) == pytest.approx(0.75, abs=1e-15)
    assert math.exp(m.log_cond[1, 0]) == pytest.approx(1 / 3, abs=1e-15)
    assert np.allclose(np.exp(m.log_cond).sum(axis=1), 1.0)
    assert np.allclose(np.exp(m.log_prior), [0.5, 0.5])


def test_nb_hand_prediction():
    label, margin = predict_nb(_nb_hand(), ["a", "a"])
    assert label == "c1"
    assert margin == pytest.approx(2 * math.log(0.75 / (1 / 3)), abs=1e-12)


def test_nb_empty_doc_uses_priors():
    m = train_nb([["a"], ["a"], ["b"]], ["x", "x", "y"])
    assert predict_nb(m, [])[0] == "x"
    assert predict_nb(m, [])[1] == pytest.approx(math.log(2))


def test_nb_tie_goes_to_smallest_modality():
    m = train_nb([["a"], ["a"]], ["zeta", "alpha"])
    assert predict_nb(m, ["a"]) == ("alpha", 0.0)


def test_nb_uniform_corpus_equal_posteriors():
    m = train_nb([["a", "b"], ["a", "b"]], ["x", "y"])
    for doc in (["a"], ["b", "b", "a"], ["zzz"], []):
        jll = m.joint_log_likelihood(doc)
        assert jll[0] == pytest.approx(jll[1], abs=1e-12)


def test_nb_errors():
    with pytest.raises(LabelError):
        train_nb([], [])
    with pytest.raises(LabelError):
        train_nb([["a"]], ["x"], modalities=["x", "y"])
    with pytest.raises(ValueError):
        train_nb([["a"]], ["x"], alpha=0)


docs_st = st.lists(st.lists(st.sampled_from("abcde"), min_size=1, max_size=6), min_size=2, max_size=8)


@settings(max_examples=100, deadline=None)
@given(docs_st, st.lists(st.sampled_from("abcdexyz"), max_size=8), st.integers(0, 3))
def test_nb_oov_and_doubling(docs, query, n_oov):
    labels = ["p" if i % 2 == 0 else "q" for i in range(len(docs))]
    m = train_nb(docs, labels)
    jll = m.joint_log_likelihood(query)
    jll_oov = m.joint_log_likelihood(query + ["oov"] * n_oov)
    assert jll[0] - jll[1] == pytest.approx(jll_oov[0] - jll_oov[1], abs=1e-9)
    doubled = m.joint_log_likelihood(query + query)
    diff, diff2 = jll - m.log_prior, doubled - m.log_prior
    assert np.allclose(diff2, 2 * diff)
    if abs(diff[0] - diff[1]) > 1e-9 and np.allclose(m.log_prior[0], m.log_prior[1]):
        assert np.argmax(doubled) == np.argmax(jll)


# Logistic regression


@pytest.mark.parametrize("n,d,l2", [(5, 3, 0.0), (8, 6, 0.1), (12, 4, 1.0)])
def test_loss_matches_independent_formula(n, d, l2):
    rng = np.random.default_rng(n)
    X, y, w, b = rng.normal(size=(n, d)), (rng.random(n) < 0.5).astype(float), rng.normal(size=d), 0.3
    loss, _, _ = logistic_loss_and_grad(w, b, X, y, l2)
    assert loss == pytest.approx(logistic_loss(w, b, X, y, l2), rel=1e-12)


def _max_relative_error(g, fd):
    return float(np.max(np.abs(g - fd) / np.maximum(np.maximum(np.abs(g), np.abs(fd)), 1e-8)))


@pytest.mark.parametrize("seed", range(5))
def test_gradient_finite_differences(seed):
    rng = np.random.default_rng(100 + seed)
    n, d = rng.integers(3, 15), rng.integers(2, 8)
    X = sp.csr_matrix(rng.poisson(1.0, size=(n, d)).astype(float) + rng.random((n, d)))
    y = (rng.random(n) < 0.5).astype(float)
    w, b, l2 = rng.normal(size=d), float(rng.normal()), float(rng.random())
    _, gw, gb = logistic_loss_and_grad(w, b, X, y, l2)
    Xd = X.toarray()
    theta = np.concatenate([w, [b]])
    fd = central_difference(lambda th: logistic_loss(th[:-1], th[-1], Xd, y, l2), theta)
    assert _max_relative_error(np.concatenate([gw, [gb]]), fd) < 1e-5


def _separable(n=120, seed=0):
    rng = np.random.default_rng(seed)
    docs, labels = [], []
    for i in range(n):
        lab = "neg" if i % 2 else "pos"
        sig = ["p1", "p2", "p3"] if lab == "pos" else ["n1", "n2", "n3"]
        docs.append(list(rng.choice(sig, 3)) + list(rng.choice(["s1", "s2", "s3", "s4"], 4)))
        labels.append(lab)
    return docs, labels


def test_separable_training_accuracy():
    docs, labels = _separable()
    m = train_logreg(docs, labels, seed=1)
    assert m.n_tasks == 1 and m.labels[0] == "neg"  # positive task = smallest modality
    acc = np.mean([predict_logreg(m, d)[0] == lab for d, lab in zip(docs, labels)])
    assert acc >= 0.99


def test_weight_norm_decreases_with_l2():
    docs, labels = _separable(60)
    norms = [np.linalg.norm(train_logreg(docs, labels, l2=lam, seed=0).weights) for lam in (0, 1e-3, 1e-2, 0.1, 1)]
    assert all(b < a for a, b in zip(norms, norms[1:]))


def test_one_against_all_tasks():
    docs = [["a"], ["b"], ["c"]] * 10
    labels = ["x", "y", "z"] * 10
    m = train_logreg(docs, labels, epochs=30, lr=0.5)
    assert m.n_tasks == 3 and m.weights.shape == (3, 3)
    assert [predict_logreg(m, d)[0] for d in (["a"], ["b"], ["c"])] == ["x", "y", "z"]


def test_zero_weights_tie_rule():
    m = LogisticModel(["a", "b"], ["w"], np.zeros((1, 1)), np.zeros(1))
    assert predict_logreg(m, ["w"]) == ("a", 0.5)
    m3 = LogisticModel(["a", "b", "c"], ["w"], np.zeros((3, 1)), np.zeros(3))
    assert predict_logreg(m3, ["w"]) == ("a", 0.5)


def test_hand_weights_sigmoid():
    m = LogisticModel(["a", "b"], ["u", "v"], np.array([[1.0, -2.0]]), np.array([0.5]))
    label, score = predict_logreg(m, ["u", "u", "v", "oov"])
    assert label == "a" and score == pytest.approx(1 / (1 + math.exp(-0.5)), abs=1e-15)
    label, score = predict_logreg(m, ["v"])
    assert label == "b" and score == pytest.approx(1 - 1 / (1 + math.exp(1.5)), abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.integers(0, 2**31))
def test_bias_shift_invariance(c, seed):
    rng = np.random.default_rng(seed)
    W, bias = rng.normal(size=(4, 3)), rng.normal(size=4)
    doc = list(rng.choice(["p", "q", "r"], 5))
    m = LogisticModel(list("abcd"), ["p", "q", "r"], W, bias)
    shifted = LogisticModel(list("abcd"), ["p", "q", "r"], W, bias + c)
    assert predict_logreg(m, doc)[0] == predict_logreg(shifted, doc)[0]


def test_logreg_errors():
    with pytest.raises(LabelError):
        train_logreg([["a"]], ["x"])
    with pytest.raises(FloatingPointError, match="learning rate"):
        train_logreg([["a"] * 50, ["b"] * 50] * 4, ["x", "y"] * 4, lr=1e20, l2=1e3)


def test_logreg_seeded():
    docs, labels = _separable(40)
    a = train_logreg(docs, labels, seed=3)
    b = train_logreg(docs, labels, seed=3)
    assert np.array_equal(a.weights, b.weights)


# Embeddings and DoCoV


def _toy_embeddings(vectors: dict[str, tuple]) -> EmbeddingModel:
    return EmbeddingModel(list(vectors), np.array(list(vectors.values()), dtype=float))


def test_docov_hand_case():
    emb = _toy_embeddings({"x": (1, 0), "y": (0, 1)})
    assert docov(["x", "y"], emb).tolist() == [0.25, -0.25, 0.25]
    assert docov(["x", "y"], emb, include_mean=True).tolist() == [0.5, 0.5, 0.25, -0.25, 0.25]


def test_docov_single_word_and_unrepresentable():
    emb = _toy_embeddings({"x": (1, 2, 3)})
    assert np.all(docov(["x"], emb) == 0)
    assert docov(["x", "x"], emb, include_mean=True)[:3].tolist() == [1, 2, 3]
    with pytest.raises(UnrepresentableDocument, match="unrepresentable document"):
        docov(["nope"], emb)


@pytest.mark.parametrize("d", [2, 10, 50])
def test_docov_length_law(d):
    rng = np.random.default_rng(d)
    emb = EmbeddingModel([f"w{i}" for i in range(5)], rng.normal(size=(5, d)))
    assert len(docov(["w0", "w1", "w3"], emb)) == d * (d + 1) // 2 == docov_length(d)
    assert len(docov(["w0", "w1"], emb, True)) == d * (d + 1) // 2 + d == docov_length(d, True)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from(["w0", "w1", "w2", "w3", "oov"]), min_size=1, max_size=12), st.randoms())
def test_docov_permutation_invariant(forms, rnd):
    emb = EmbeddingModel(["w0", "w1", "w2", "w3"], np.random.default_rng(0).normal(size=(4, 3)))
    if not any(f != "oov" for f in forms):
        return
    shuffled = list(forms)
    rnd.shuffle(shuffled)
    assert np.allclose(docov(forms, emb, True), docov(shuffled, emb, True), rtol=1e-12, atol=1e-14)


def test_docov_matches_numpy_covariance():
    rng = np.random.default_rng(2)
    emb = EmbeddingModel([f"w{i}" for i in range(6)], rng.normal(size=(6, 4)))
    forms = ["w0", "w2", "w2", "w5", "w1"]
    cov = np.cov(emb.vectors[[0, 2, 2, 5, 1]].T, bias=True)
    assert np.allclose(docov(forms, emb), cov[np.triu_indices(4)])


def _topic_sentences(seed, n=300):
    rng = np.random.default_rng(seed)
    topics = [pseudo_words(15, 0), pseudo_words(15, 15)]
    return topics, [list(rng.choice(topics[i % 2], 12)) for i in range(n)]


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_embeddings_separate_topics(seed):
    topics, sents = _topic_sentences(seed)
    emb = train_skipgram(sents, dim=16, window=3, epochs=5, min_count=1, seed=seed)
    U = emb.vectors / np.linalg.norm(emb.vectors, axis=1, keepdims=True)
    idx = [[emb.vocabulary.index(w) for w in t] for t in topics]
    intra = np.mean([(U[i] @ U[i].T)[np.triu_indices(len(i), 1)].mean() for i in idx])
    inter = (U[idx[0]] @ U[idx[1]].T).mean()
    assert intra > inter


def test_embedding_shapes_finite_and_vocabulary():
    _, sents = _topic_sentences(0, 50)
    sents = sents + [["rare"]]
    emb = train_skipgram(sents, dim=8, min_count=2, epochs=2)
    assert emb.vectors.shape == (len(emb.vocabulary), 8) and np.all(np.isfinite(emb.vectors))
    assert "rare" not in emb


def test_loss_decreases_on_frozen_batch():
    # Frozen batch of true neighbour pairs with fixed negatives, scored after every epoch.
    _, sents = _topic_sentences(4, 200)
    vocab = train_skipgram(sents, dim=2, epochs=1, min_count=1).vocabulary
    index = {w: i for i, w in enumerate(vocab)}
    pairs = np.array([(index[s[i]], index[s[i + 1]]) for s in sents[:32] for i in range(2)])
    negatives = np.random.default_rng(99).integers(0, len(vocab), size=(len(pairs), 5))
    losses = []
    train_skipgram(sents, dim=16, window=2, epochs=5, min_count=1, seed=7,
                   callback=lambda e, W_in, W_out: losses.append(
                       sgns_loss(W_in, W_out, pairs[:, 0], pairs[:, 1], negatives)))
    assert len(losses) == 5
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_skipgram_seeded_and_errors():
    _, sents = _topic_sentences(1, 40)
    a = train_skipgram(sents, dim=4, epochs=1, min_count=1, seed=5)
    b = train_skipgram(sents, dim=4, epochs=1, min_count=1, seed=5)
    assert np.array_equal(a.vectors, b.vectors)
    with pytest.raises(ValueError, match="empty vocabulary"):
        train_skipgram([["a"]], min_count=2)
    with pytest.raises(ValueError):
        train_skipgram([])


# Centroids


def test_centroid_one_doc_per_class():
    m = train_centroid([np.array([1.0, 2.0]), np.array([3.0, -1.0])], ["b", "a"])
    assert m.labels == ["a", "b"]
    assert m.centroids.tolist() == [[3.0, -1.0], [1.0, 2.0]]
    assert predict_centroid(m, np.array([1.0, 2.0])) == ("b", pytest.approx(1.0))


def test_centroid_symmetric_pair_is_zero_and_undefined():
    v = np.array([1.0, -2.0, 0.5])
    m = train_centroid([v, -v, v], ["a", "a", "b"])
    assert np.all(m.centroids[0] == 0)
    with pytest.raises(UndefinedCosine, match="undefined cosine"):
        predict_centroid(m, v)
    ok = train_centroid([v, 2 * v], ["a", "b"])
    with pytest.raises(UndefinedCosine):
        predict_centroid(ok, np.zeros(3))


def test_centroid_three_doc_mean():
    m = train_centroid([np.array([1.0, 0.0]), np.array([2.0, 3.0]), np.array([0.0, 3.0]), np.array([5.0, 5.0])],
                       ["a", "a", "a", "b"])
    assert m.centroids[0].tolist() == [1.0, 2.0]
    assert m.dim == 2


def test_centroid_orthogonal_and_aligned():
    m = train_centroid([np.array([1.0, 0.0]), np.array([0.0, 1.0])], ["x", "y"])
    label, cos = predict_centroid(m, np.array([0.0, 4.0]))
    assert label == "y" and cos == pytest.approx(1.0)
    assert cosine_scores(m, np.array([0.0, 4.0]))[0] == 0.0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.01, 100))
def test_centroid_brute_force_and_scaling(seed, scale):
    rng = np.random.default_rng(seed)
    C = rng.normal(size=(3, 5))
    m = CentroidModel(["a", "b", "c"], C)
    q = rng.normal(size=5)
    brute = [sum(C[k, i] * q[i] for i in range(5)) / math.sqrt(sum(C[k] ** 2) * sum(q ** 2)) for k in range(3)]
    assert np.allclose(cosine_scores(m, q), brute, atol=1e-12)
    assert predict_centroid(m, q)[0] == predict_centroid(m, scale * q)[0] == "abc"[int(np.argmax(brute))]


def test_centroid_errors():
    with pytest.raises(LabelError):
        train_centroid([], [])
    with pytest.raises(LabelError):
        train_centroid([np.ones(2)], ["a"], modalities=["a", "b"])


# Vote


def _votes(labels, pcts):
    return [Vote(lab, 0.0, p) for lab, p in zip(labels, pcts)]


@settings(max_examples=100, deadline=None)
@given(st.tuples(*[st.sampled_from([0.2, 0.5, 0.9, 1.0])] * 3))
def test_all_27_outcomes_match_oracle(pcts):
    for labels in itertools.product("ABC", repeat=3):
        assert majority_vote(_votes(labels, pcts)) == vote_oracle(labels, pcts)


def test_vote_simple_cases():
    assert majority_vote(_votes("AAB", (0, 0, 0))) == "A"
    assert majority_vote(_votes("AAA", (0, 0, 0))) == "A"
    assert majority_vote(_votes("ABC", (0.1, 0.2, 0.9))) == "C"
    assert majority_vote(_votes("ABC", (0.5, 0.5, 0.1))) == "A"  # equal percentiles: earlier voter


class _Untouchable:
    def __lt__(self, other):
        raise AssertionError("tie-break consulted")

    __gt__ = __le__ = __ge__ = __lt__


def test_two_modalities_never_reach_tie_break():
    assert not tie_break_reachable(2) and tie_break_reachable(3)
    for labels in itertools.product("AB", repeat=3):
        votes = [Vote(lab, 0.0, _Untouchable()) for lab in labels]
        assert majority_vote(votes) == vote_oracle(labels, (0, 0, 0))


def test_abstention_fallbacks():
    assert majority_vote([Vote("A"), Vote("B"), Vote(None)]) == "A"  # NB breaks the 2-vote tie
    assert majority_vote([Vote("B"), Vote("A"), Vote(None)]) == "B"
    assert majority_vote([Vote("A"), Vote("A"), Vote(None)]) == "A"
    with pytest.raises(ValueError):
        majority_vote([Vote("A"), Vote("B")])


def test_percentiles():
    assert percentiles([3.0, 1.0, 2.0, 2.0, None]).tolist() == [1.0, 0.25, 0.75, 0.75, 0.0]


def test_prediction_csv_round_trip():
    ps = combine("gj", [3, 1], [("a", 1.5), ("b", 0.1)], [("a", 0.7), ("a", 0.6)], [(None, None), ("b", 0.25)])
    text = ps.to_csv()
    assert text.split("\n")[0] == ",".join(CSV_HEADER)
    assert text.split("\n")[1] == "3,gj,a,1.5,a,0.7,,,a"
    assert PredictionSet.from_csv(text) == ps
    assert ps.final_labels() == {"gj": {3: "a", 1: "b"}}
    with pytest.raises(ValueError):
        PredictionSet.from_csv("doc,target\n1,x\n")
    with pytest.raises(ValueError, match="duplicate"):
        ps.merge(ps)


def test_prediction_invariant_final_is_vote():
    ps = combine("x", [0, 1, 2], [("a", 1.0), ("b", 2.0), ("c", 0.5)], [("b", 0.9), ("b", 0.6), ("a", 0.8)],
                 [("c", 0.1), ("a", 0.3), ("b", 0.2)])
    for r, p in zip(ps, [(2 / 3, 1.0, 1 / 3), (1.0, 1 / 3, 1.0), (1 / 3, 2 / 3, 2 / 3)]):
        votes = [Vote(r.nb_label, r.nb_score, p[0]), Vote(r.lr_label, r.lr_score, p[1]),
                 Vote(r.cent_label, r.cent_score, p[2])]
        assert r.vote == majority_vote(votes)
    assert [r.vote for r in ps] == ["b", "b", "a"]  # last: lr beats cent on equal percentile


# Serialization


def _models():
    docs, labels = _separable(30)
    _, sents = _topic_sentences(0, 30)
    emb = train_skipgram(sents, dim=3, epochs=1, min_count=1)
    return [
        train_nb(docs, labels),
        train_logreg(docs, labels, epochs=2),
        train_logreg(docs, labels, epochs=2, tfidf=True),
        train_logreg([["a"], ["b"], ["c"]], ["x", "y", "z"], epochs=2),
        train_centroid([np.ones(3), np.arange(3.0)], ["a", "b"], include_mean=True),
        emb,
    ]


def _same(a, b):
    assert type(a) is type(b)
    for k, v in vars(a).items():
        if k.startswith("_"):
            continue
        w = getattr(b, k)
        if isinstance(v, np.ndarray) or isinstance(w, np.ndarray):
            assert v is not None and w is not None and np.array_equal(v, w)
        else:
            assert v == w


def test_round_trip_all_kinds(tmp_path):
    for i, m in enumerate(_models()):
        path = tmp_path / f"m{i}"
        save_model(m, path)
        _same(m, load_model(path))


def test_corrupted_bytes_always_rejected():
    for m in _models():
        data = dumps_model(m)
        step = max(1, len(data) // 600)
        for pos in range(0, len(data), step):
            bad = bytearray(data)
            bad[pos] ^= 0x01
            with pytest.raises(ModelFormatError):
                loads_model(bytes(bad))


def test_truncation_and_version_rejected():
    for m in _models():
        data = dumps_model(m)
        for cut in (0, 10, len(data) // 2, len(data) - 1):
            with pytest.raises(ModelFormatError):
                loads_model(data[:cut])
        with pytest.raises(ModelFormatError):
            loads_model(data + b"x")
    bumped = dumps_model(_models()[0]).replace(b'"version":1', b'"version":2')
    with pytest.raises(ModelFormatError, match="version"):
        loads_model(bumped)


def test_saved_nb_predicts_like_memory(tmp_path):
    corpus = two_class_corpus(n_docs=80, seed=4)
    lc = labeled_corpus(corpus, "classe")
    m = train_nb(lc.forms, lc.labels)
    save_model(m, tmp_path / "nb.json")
    loaded = load_model(tmp_path / "nb.json")
    assert [predict_nb(m, f) for f in lc.forms] == [predict_nb(loaded, f) for f in lc.forms]


# Ensemble


def _small_setup():
    corpus = two_class_corpus(n_docs=120, seed=2)
    lc = labeled_corpus(corpus, "classe")
    cfg = ClassifierConfig(embedding=EmbeddingConfig(dim=8, epochs=2, min_count=2))
    emb = train_embeddings(lc.forms, cfg.embedding, seed=0)
    return lc, emb, train_target(lc, emb, cfg)


def test_predict_target_independent_of_jobs():
    lc, emb, models = _small_setup()
    a = predict_target(models, emb, lc.doc_ids, lc.forms, jobs=1)
    b = predict_target(models, emb, lc.doc_ids, lc.forms, jobs=4)
    assert a == b and len(a) == len(lc)


def test_unrepresentable_doc_makes_centroid_abstain():
    lc, emb, models = _small_setup()
    ps = predict_target(models, emb, [0, 1], [("zzzz",), ()])
    for r in ps:
        assert r.cent_label is None and r.cent_score is None
        assert r.vote == r.nb_label


def test_config_round_trip():
    cfg = ClassifierConfig(alpha=0.5, embedding=EmbeddingConfig(dim=7))
    assert ClassifierConfig.from_dict(cfg.as_dict()) == cfg
    assert ClassifierConfig.from_dict(None) == ClassifierConfig()
