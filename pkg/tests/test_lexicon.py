from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import naive_matches
from painclf.corpus_io import Document
from painclf.errors import LexiconError
from painclf.lexicon import (
    Match,
    compile_lexicon,
    default_lexicon,
    filter_documents,
    find_matches,
    load_lexicon,
    parse_lexicon,
)


def _tuples(matches):
    return [(m.term_id, m.start, m.end) for m in matches]


def _oracle(lex, text, mode):
    return naive_matches({t.term_id: t.normalized for t in lex.terms}, text, mode)


def test_load_skips_comments_and_blanks(tmp_path):
    path = tmp_path / "lex.txt"
    path.write_text("pain\n# comment\n\nheadache\n", encoding="utf-8")
    lex = load_lexicon(path)
    assert sorted(t.normalized for t in lex.terms) == ["headache", "pain"]


def test_case_variants_dedup():
    lex = parse_lexicon(["Pain", "pain"])
    assert [t.normalized for t in lex.terms] == ["pain"]
    assert lex.terms[0].surface == "Pain"


def test_version_header_and_hash_default():
    assert parse_lexicon(["# version: v7", "pain"]).version == "v7"
    hashed = parse_lexicon(["pain"]).version
    assert hashed.startswith("sha256:") and hashed == parse_lexicon(["PAIN"]).version


def test_empty_lexicon_is_error(tmp_path):
    path = tmp_path / "lex.txt"
    path.write_text("# nothing\n\n", encoding="utf-8")
    with pytest.raises(LexiconError):
        load_lexicon(path)


def test_multiword_phrase_single_match():
    lex = parse_lexicon(["stomach ache"])
    text = "has stomach ache"
    assert find_matches(lex, text) == [Match(0, 4, 16)]
    assert _tuples(find_matches(lex, text)) == _oracle(lex, text, "word_boundary")


def test_word_boundary_examples():
    lex = parse_lexicon(["pain"])
    text = "no pain today, painting class"
    assert find_matches(lex, text) == [Match(0, 3, 7)]
    assert _tuples(find_matches(lex, text)) == _oracle(lex, text, "word_boundary")
    assert find_matches(lex, "painting") == []
    assert find_matches(lex, "PAIN!") == [Match(0, 0, 4)]


def test_overlapping_terms_all_reported():
    lex = parse_lexicon(["stomach ache", "ache", "aches", "stomach"])
    got = _tuples(find_matches(lex, "stomach aches", "substring"))
    assert got == [(3, 0, 7), (0, 0, 12), (1, 8, 12), (2, 8, 13)]
    assert _tuples(find_matches(lex, "stomach aches")) == [(3, 0, 7), (2, 8, 13)]


def test_unicode_boundaries_and_folding():
    lex = parse_lexicon(["pain", "straße"])
    # Accented letters are alphanumeric, so they block a word-boundary hit.
    assert find_matches(lex, "épain") == []
    assert find_matches(lex, "§pain§") == [Match(0, 1, 5)]
    # German sharp s folds to "ss" in both directions.
    text = "STRASSE and Straße"
    assert _tuples(find_matches(lex, text)) == [(1, 0, 7), (1, 12, 18)]
    assert _tuples(find_matches(lex, text)) == _oracle(lex, text, "word_boundary")


def test_expansion_never_splits_a_character():
    lex = parse_lexicon(["s", "ss"])
    text = "ß s"
    # "ß" folds to "ss": the whole character matches "ss"; a lone "s" inside it does not count.
    assert _tuples(find_matches(lex, text, "substring")) == _oracle(lex, text, "substring")
    assert (0, 0, 1) not in _tuples(find_matches(lex, text, "substring"))


def test_unknown_mode():
    with pytest.raises(ValueError):
        find_matches(parse_lexicon(["pain"]), "pain", "fuzzy")


def test_filter_documents():
    lex = default_lexicon()
    docs = [Document("d1", "sharp pain"), Document("d2", "calm"), Document("d3", "reports dabdominal pain")]
    kept = filter_documents(lex, docs)
    assert [d.doc_id for d, _ in kept] == ["d1", "d3"]
    assert all(matches for _, matches in kept)


def test_conjoined_token_modes():
    lex = parse_lexicon(["pain"])
    docs = [Document("d", "achespainodd sensations")]
    assert [d.doc_id for d, _ in filter_documents(lex, docs, "substring")] == ["d"]
    assert filter_documents(lex, docs, "word_boundary") == []


def test_find_many_equals_find():
    lex = default_lexicon()
    texts = ["pain", "", "no aches", "x" * 10, "headache and migraine pains", "PAINFUL"]
    for mode in ("word_boundary", "substring"):
        assert lex.find_many(texts, mode) == [lex.find(t, mode) for t in texts]
    res = lex.scan_many(texts)
    assert res.counts().tolist() == [len(lex.find(t)) for t in texts]


def test_find_many_across_batches(monkeypatch):
    import painclf.lexicon as mod

    monkeypatch.setattr(mod, "_BATCH_CHARS", 16)
    lex = default_lexicon()
    texts = [f"doc {i} pain and aches" if i % 3 else "quiet" for i in range(40)]
    assert lex.find_many(texts) == [lex.find(t) for t in texts]


def test_small_hit_buffer_resumes(monkeypatch):
    import painclf.lexicon as mod

    monkeypatch.setattr(mod, "_HIT_BUFFER", 3)
    lex = parse_lexicon(["a", "aa", "aaa"])
    text = "a" * 50
    assert _tuples(lex.find(text, "substring")) == _oracle(lex, text, "substring")


def test_nul_in_term_rejected():
    with pytest.raises(LexiconError):
        compile_lexicon(["pa\x00in"])


_alphabet = st.sampled_from(list("ab ab.AB") + ["ß", "İ", "é", "1", "\n"])
_terms = st.lists(st.text(st.sampled_from(list("abAB ß")), min_size=1, max_size=5), min_size=1, max_size=8)


@given(_terms, st.text(_alphabet, max_size=60), st.sampled_from(["word_boundary", "substring"]))
def test_matcher_equals_naive_oracle(surfaces, text, mode):
    surfaces = [s for s in surfaces if s.strip()]
    if not surfaces:
        return
    lex = compile_lexicon(surfaces)
    got = _tuples(lex.find(text, mode))
    assert got == _oracle(lex, text, mode)
    for term_id, start, end in got:
        assert 0 <= start < end <= len(text)
        assert text[start:end].casefold() == lex.term(term_id).normalized


@given(_terms, st.text(_alphabet, max_size=60))
def test_word_boundary_subset_of_substring(surfaces, text):
    surfaces = [s for s in surfaces if s.strip()]
    if not surfaces:
        return
    lex = compile_lexicon(surfaces)
    word = set(_tuples(lex.find(text, "word_boundary")))
    assert word <= set(_tuples(lex.find(text, "substring")))
    assert lex.find(text) == lex.find(text)
