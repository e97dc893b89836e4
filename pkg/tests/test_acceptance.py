"""Acceptance criteria, one test each.

Every test records a ``PASS``/``FAIL`` line (printed in the terminal
summary by ``conftest.py``) before asserting, so a failing criterion is
still reported with its measured numbers.
"""

from __future__ import annotations

import math
import time
import warnings

import numpy as np
import pytest
import scipy.sparse as sp

from oracles import dense_tfidf, fast_naive_matches, kappa_oracle, knn_exhaustive
from painclf.annotation import adjudicate_all, cohens_kappa, gate_check, round_agreement
from painclf.classifiers import (
    DenseVector,
    knn_distances,
    predict_knn_batch,
    predict_svm,
    svm_objective,
    svm_subgradient,
    train_dense_head,
    train_knn,
    train_svm,
)
from painclf.errors import DegenerateKappaError
from painclf.evaluation import dumps_report, f1_score, kfold_cv, metrics_report, stratified_folds
from painclf.features import SparseVector, fit_tfidf, preprocess, transform
from painclf.lexicon import compile_lexicon, default_lexicon
from painclf.pipeline import LabeledSpan, PipelineConfig
from painclf.synth import FILLER_WORDS, SynthConfig, expected_kappa, generate_corpus, simulate_rounds

RESULTS: list[str] = []


def record(number: int, name: str, ok: bool | None, detail: str) -> None:
    status = "N/A" if ok is None else ("PASS" if ok else "FAIL")
    line = f"criterion {number:>2} {status}: {name} | {detail}"
    RESULTS.append(line)
    print(line)


def test_criterion_01_original_scores_not_reproducible():
    record(1, "original-result reproducibility", None,
           "source corpus is access-restricted and transformer rows are out of scope; criteria 2-11 substitute")


def test_criterion_02_reported_f1_desk_check():
    rows = {"SVM": (0.86, 0.98, 0.91), "KNN": (0.84, 0.91, 0.87), "BERT": (0.96, 0.98, 0.97),
            "SAPBERT": (0.98, 0.99, 0.98)}
    gaps = {name: abs(f1_score(p, r) - f1) for name, (p, r, f1) in rows.items()}
    ok = all(g <= 0.01 for g in gaps.values())
    record(2, "reported P/R/F1 consistency", ok,
           ", ".join(f"{n} f1={f1_score(p, r):.4f} vs {f1}" for n, (p, r, f1) in rows.items()))
    assert ok


@pytest.fixture(scope="module")
def synth_2000():
    corpus = generate_corpus(SynthConfig(n_docs=500, n_spans=2000, annotator_noise=0.05, seed=2024))
    texts = {s.span_id: s.text for s in corpus.spans}
    gold = [g for g in adjudicate_all(corpus.all_annotations()) if g.resolved]
    return [LabeledSpan(g.span_id, texts[g.span_id], g.label2) for g in gold]


def test_criterion_03_synthetic_end_to_end(synth_2000):
    start = time.perf_counter()
    examples = synth_2000
    positive = sum(e.label for e in examples) / len(examples)
    f1 = {}
    for model in ("svm", "baseline", "knn"):
        f1[model] = kfold_cv(PipelineConfig(model=model), examples, k=10, seed=7).mean["f1"]
    elapsed = time.perf_counter() - start
    analytic_baseline = 2 * positive / (1 + positive)
    ok = (f1["svm"] >= 0.90 and f1["svm"] - f1["baseline"] >= 0.05 and f1["knn"] >= 0.80 and elapsed <= 120
          and abs(positive - 0.71) <= 0.03)
    record(3, "synthetic 10-fold CV", ok,
           f"n={len(examples)} pos={positive:.3f} svm={f1['svm']:.4f} baseline={f1['baseline']:.4f} "
           f"(analytic {analytic_baseline:.4f}) knn={f1['knn']:.4f} time={elapsed:.1f}s")
    assert ok


def test_criterion_04_agreement_gate_rounds():
    schedule = (0.25, 0.15, 0.08, 0.04)
    analytic = next((r for r, p in enumerate(schedule, 1) if expected_kappa(p) > 0.80), len(schedule) + 1)
    observed = []
    for seed in range(20):
        rounds = simulate_rounds(schedule, spans_per_round=200, seed=seed)
        crossed = [r for r, recs in enumerate(rounds, 1) if gate_check(round_agreement(recs)).passed]
        # A run that never crosses counts as the round after the last.
        observed.append(crossed[0] if crossed else len(schedule) + 1)
    ok = all(abs(r - analytic) <= 1 for r in observed)
    record(4, "agreement gate crossing", ok,
           f"analytic round {analytic} (kappas {', '.join(f'{expected_kappa(p):.3f}' for p in schedule)}); "
           f"observed {observed}; exact {sum(r == analytic for r in observed)}/20")
    assert ok


def test_criterion_05_kappa_oracle():
    rng = np.random.default_rng(5)
    worst = 0.0
    degenerate = 0
    for _ in range(1000):
        n = int(rng.integers(2, 501))
        classes = int(rng.integers(2, 4))
        a = rng.integers(0, classes, n)
        # Mix of independent and correlated raters for a spread of kappas.
        flip = rng.random(n) < rng.random()
        b = np.where(flip, rng.integers(0, classes, n), a)
        expected = kappa_oracle(a.tolist(), b.tolist())
        if expected is None:
            degenerate += 1
            with pytest.raises(DegenerateKappaError):
                cohens_kappa(a.tolist(), b.tolist())
            continue
        worst = max(worst, abs(cohens_kappa(a.tolist(), b.tolist()) - expected))
    ok = worst <= 1e-12
    record(5, "kappa oracle", ok, f"1000 cases, max |diff| = {worst:.3e}, degenerate cases {degenerate}")
    assert ok


_PLAIN = list("abcde") + [" "] * 3 + [".", "-", "B", "é", "1", "\n"]
_UNICODE = _PLAIN + ["ß", "İ", "ﬁ", "Σ", "ς"]


def _fuzz_case(rng: np.random.Generator, alphabet: list[str]) -> tuple[list[str], str]:
    terms: list[str] = []
    for _ in range(int(rng.integers(1, 51))):
        word = "".join(rng.choice(list("abcdeAB"), int(rng.integers(1, 7))))
        r = rng.random()
        if terms and r < 0.3:
            # Overlapping entries: extend or truncate an earlier term.
            base = terms[int(rng.integers(len(terms)))]
            word = base + " " + word if rng.random() < 0.5 else base[: max(1, len(base) - 1)]
        elif r < 0.5:
            word += " " + "".join(rng.choice(list("abcde"), int(rng.integers(1, 5))))
        terms.append(word)
    if alphabet is _UNICODE and rng.random() < 0.5:
        terms.append("straße")
    n = int(rng.integers(0, 2001))
    pieces: list[str] = []
    size = 0
    while size < n:
        if rng.random() < 0.3:
            piece = terms[int(rng.integers(len(terms)))]
            piece = piece.upper() if rng.random() < 0.2 else piece
        else:
            piece = "".join(rng.choice(alphabet, int(rng.integers(1, 8))))
        pieces.append(piece)
        size += len(piece)
    return terms, "".join(pieces)[:n]


def test_criterion_06_matcher_fuzz():
    rng = np.random.default_rng(6)
    start = time.perf_counter()
    mismatches = []
    hits = 0
    multiword = 0
    for case in range(10_000):
        alphabet = _UNICODE if case % 10 == 0 else _PLAIN
        surfaces, text = _fuzz_case(rng, alphabet)
        lex = compile_lexicon(surfaces)
        # Oracle terms come from the raw surfaces, not from the compiled lexicon.
        norms: dict[int, str] = {}
        for s in surfaces:
            norm = s.strip().casefold().strip()
            if norm and norm not in norms.values():
                norms[len(norms)] = norm
        assert {t.term_id: t.normalized for t in lex.terms} == norms
        multiword += sum(" " in t for t in norms.values())
        for mode in ("word_boundary", "substring"):
            got = [(m.term_id, m.start, m.end) for m in lex.find(text, mode)]
            expected = fast_naive_matches(norms, text, mode)
            hits += len(expected)
            if got != expected:
                mismatches.append((case, mode))
    elapsed = time.perf_counter() - start
    ok = not mismatches
    record(6, "matcher fuzz vs naive oracle", ok,
           f"10000 cases x 2 modes, {hits} oracle hits, {multiword} multiword terms, "
           f"mismatches {len(mismatches)} {mismatches[:3]}, {elapsed:.1f}s")
    assert ok


def test_criterion_07_tfidf():
    model = fit_tfidf([["pain", "pain", "head"], ["head", "calm"]])
    vec = transform(model, ["pain", "pain", "head"]).to_dense()
    # Independent hand computation of the same example.
    idf_pain = math.log(3 / 2) + 1
    w = np.array([2 * idf_pain, 1.0])
    hand = w / math.sqrt(w @ w)
    literal = np.array([0.94217, 0.33517])
    hand_ok = (abs(model.idf[0] - 1.405465) <= 1e-5 and abs(idf_pain - 1.405465) <= 1e-5
               and np.max(np.abs(vec[:2] - hand)) <= 1e-5)

    rng = np.random.default_rng(7)
    vocab_pool = [f"t{i}" for i in range(40)]
    worst = 0.0
    worst_norm = 0.0
    for _ in range(100):
        n_docs = int(rng.integers(1, 51))
        corpus = [list(rng.choice(vocab_pool, int(rng.integers(0, 30)))) for _ in range(n_docs)]
        if not any(corpus):
            corpus[0] = ["t0"]
        fitted = fit_tfidf(corpus)
        terms, rows = dense_tfidf(corpus)
        assert list(fitted.terms) == terms
        for tokens, row in zip(corpus, rows):
            v = transform(fitted, tokens)
            worst = max(worst, float(np.max(np.abs(v.to_dense() - np.array(row)))) if row else 0.0)
            if v.nnz:
                worst_norm = max(worst_norm, abs(v.norm() - 1.0))
    ok = hand_ok and worst <= 1e-9 and worst_norm <= 1e-9
    record(7, "TF-IDF correctness", ok,
           f"idf(pain)={model.idf[0]:.6f}, D1=({vec[0]:.7f}, {vec[1]:.7f}) vs hand ({hand[0]:.7f}, {hand[1]:.7f}); "
           f"printed literal off by {np.max(np.abs(vec[:2] - literal)):.2e}; dense max diff {worst:.1e}, "
           f"norm max diff {worst_norm:.1e}")
    assert ok


def test_criterion_08_svm_numerics():
    rng = np.random.default_rng(8)
    n, d, lam, h = 60, 8, 0.05, 1e-6
    X = rng.normal(size=(n, d))
    y = rng.integers(0, 2, n)
    y[:2] = [0, 1]
    ypm = 2 * y - 1
    worst = 0.0
    points = 0
    while points < 100:
        w, b = rng.normal(size=d), float(rng.normal())
        if np.min(np.abs(ypm * (X @ w + b) - 1.0)) < 1e-3:
            continue
        gw, gb = svm_subgradient(X, y, w, b, lam)
        analytic = np.append(gw, gb)
        theta = np.append(w, b)
        fd = np.empty_like(theta)
        for j in range(len(theta)):
            step = np.zeros_like(theta)
            step[j] = h
            up, dn = theta + step, theta - step
            fd[j] = (svm_objective(X, y, up[:-1], up[-1], lam) - svm_objective(X, y, dn[:-1], dn[-1], lam)) / (2 * h)
        worst = max(worst, float(np.linalg.norm(analytic - fd) / np.linalg.norm(fd)))
        points += 1

    accuracies = []
    toy = [SparseVector.from_dense([1.0, 0.0]), SparseVector.from_dense([-1.0, 0.0])] * 50
    toy_y = [1, 0] * 50
    m = train_svm(toy, toy_y, seed=1)
    accuracies.append(float(np.mean([predict_svm(m, x).label == t for x, t in zip(toy, toy_y)])))
    truth = rng.normal(size=10)
    pts = rng.normal(size=(2000, 10))
    pts = pts[np.abs(pts @ truth) > 0.5][:300]
    labels = (pts @ truth > 0).astype(int)
    m = train_svm(sp.csr_matrix(pts), labels, seed=2)
    accuracies.append(float(np.mean([predict_svm(m, p).label == t for p, t in zip(pts, labels)])))
    dense = [DenseVector(str(i), p) for i, p in enumerate(pts)]
    m = train_dense_head(dense, labels, seed=3)
    accuracies.append(float(np.mean([predict_svm(m, v.vector).label == t for v, t in zip(dense, labels)])))
    ok = worst <= 1e-4 and all(a == 1.0 for a in accuracies)
    record(8, "SVM numerics", ok,
           f"100 off-margin points, max rel err {worst:.2e}; separable training accuracy {accuracies}")
    assert ok


def test_criterion_09_knn():
    rng = np.random.default_rng(9)
    train = rng.normal(size=(200, 6))
    labels = rng.integers(0, 2, 200).tolist()
    queries = rng.normal(size=(200, 6))
    mismatches = 0
    for k in (1, 3, 5, 8):
        model = train_knn(sp.csr_matrix(train), labels, k)
        for q, p in zip(queries, predict_knn_batch(model, sp.csr_matrix(queries))):
            mismatches += (p.label, p.score) != knn_exhaustive(train.tolist(), labels, q.tolist(), k)

    unit = train / np.linalg.norm(train, axis=1, keepdims=True)
    model = train_knn(sp.csr_matrix(unit), labels, 5)
    qs = queries / np.linalg.norm(queries, axis=1, keepdims=True)
    dist = knn_distances(model, sp.csr_matrix(qs))
    order_mismatch = sum(
        np.argsort(row, kind="stable").tolist() != np.argsort(-(unit @ q), kind="stable").tolist()
        for row, q in zip(dist, qs)
    )
    ok = mismatches == 0 and order_mismatch == 0
    record(9, "KNN oracle and ranking", ok,
           f"800 predictions vs exhaustive scan: {mismatches} mismatches; 200 orderings: {order_mismatch} differ")
    assert ok


def test_criterion_10_split_cv_hygiene(synth_2000):
    examples = synth_2000[:800]
    y = [e.label for e in examples]
    folds = stratified_folds(examples, 10, seed=3)
    partition = sorted(i for f in folds for i in f) == list(range(len(examples)))
    balance = all(
        abs(sum(1 for i in f if y[i] == c) - y.count(c) / 10) < 1 for f in folds for c in (0, 1)
    )
    config = PipelineConfig()
    tokens = [set(preprocess(e.text, config.preprocess)) for e in examples]
    leaks = []

    def audit(i, train_idx, test_idx, clf):
        train_vocab = set().union(*(tokens[j] for j in train_idx))
        held_only = set().union(*(tokens[j] for j in test_idx)) - train_vocab
        leaks.extend(held_only & set(clf.tfidf.terms))

    reports = []
    for _ in range(2):
        res = kfold_cv(config, examples, k=10, seed=3, on_fold=audit)
        reports.append(dumps_report(metrics_report(res, config, default_lexicon().version)))
    ok = partition and balance and not leaks and reports[0] == reports[1]
    record(10, "split/CV hygiene", ok,
           f"partition={partition} balance={balance} leaked_terms={len(leaks)} "
           f"byte_identical={reports[0] == reports[1]}")
    assert ok


def test_criterion_11_throughput():
    rng = np.random.default_rng(11)
    base = default_lexicon()
    surfaces = [t.surface for t in base.terms]
    while len(surfaces) < 200:
        word = "".join(rng.choice(list("abcdefghijklmnopqrstuvwxyz"), int(rng.integers(6, 12))))
        if word not in surfaces and word not in FILLER_WORDS:
            surfaces.append(word)
    lex = compile_lexicon(surfaces)
    docs = [d.text for d in generate_corpus(SynthConfig(n_docs=400, seed=11)).documents]
    target = 100 * 10**6
    texts: list[str] = []
    size = 0
    while size < target:
        for t in docs:
            texts.append(t)
            size += len(t.encode("utf-8"))
            if size >= target:
                break
    lex.scan_many(texts[:10])  # compile and warm up
    start = time.perf_counter()
    result = lex.scan_many(texts, "word_boundary")
    elapsed = time.perf_counter() - start
    rate = size / 1e6 / elapsed
    ok = rate >= 50
    record(11, "throughput (soft)", ok,
           f"{size / 1e6:.1f} MB, {len(texts)} docs, 200 terms, {len(result.term_ids)} hits, {elapsed:.2f}s, "
           f"{rate:.1f} MB/s" + ("" if ok else " -- performance regression"))
    if not ok:
        warnings.warn(f"performance regression: matcher ran at {rate:.1f} MB/s, target 50 MB/s")
