from __future__ import annotations

import math
import re

import pytest
from hypothesis import given, settings, strategies as st

from geoharness.ecosystem import ConditionTag, TemplateGenerator, build_ecosystem
from geoharness.snippet import (
    And,
    CleanText,
    Or,
    PassageIndex,
    Phrase,
    QueryParseError,
    Term,
    clean_text,
    extract_snippet,
    parse_lenient,
    parse_strict,
    snippet_for,
)

from helpers import earbuds


def test_clean_heading_and_link():
    assert clean_text("## Title\n\n[spec](https://x)").text == "Title\n\nspec"


def test_clean_inline_tags():
    assert clean_text("<b>ANC</b> earbuds").text == "ANC earbuds"


def test_clean_misc_markdown():
    raw = ("# Head #\n\n> quoted *emph* and **bold** and `code`\n\n- item one\n- item two\n\n"
           "| a | b |\n|---|---|\n| 1 | 2 |\n\n---\n\n<!-- hidden --><script>x()</script>&amp; done<br>next")
    text = clean_text(raw, "p1")
    assert text.source_page_id == "p1"
    assert text.passages == ["Head", "quoted emph and bold and code", "item one item two", "a b", "1 2", "& done next"]


def test_clean_empty():
    assert clean_text("").text == "" and clean_text("").passages == []


def test_fixture_pages_clean_to_plain_text():
    for cond in ("Trace", "SinglePage"):
        g = build_ecosystem(earbuds(), ConditionTag.parse(cond), TemplateGenerator(), 7)
        for page in g.pages.values():
            text = clean_text(page.body).text
            assert not set("#[<") & set(text), page.page_id
            assert "  " not in text


def test_parse_strict_grammar():
    assert parse_strict('"noise cancelling" AND battery') == And((Phrase(("noise", "cancelling")), Term("battery")))
    assert parse_strict("budget anc") == Or((Term("budget"), Term("anc")))
    assert parse_strict("(a OR b) AND c") == And((Or((Term("a"), Term("b"))), Term("c")))
    assert parse_strict("") is None
    assert parse_strict("and or") == Or((Term("and"), Term("or")))


@pytest.mark.parametrize("query", ['"open', "(a b", "a b)", "a AND", "OR a", "a AND OR b", "title:x", "x^2",
                                   "fuzzy~", "wild*", "{a}", "[a]", "a\\b", "!a", "()"])
def test_parse_strict_rejects(query):
    with pytest.raises(QueryParseError):
        parse_strict(query)


def test_parse_lenient_never_raises():
    assert parse_lenient('"open (AND title:x') == Or((Term("open"), Term("and"), Term("title"), Term("x")))
    assert parse_lenient("AND OR") is None


def test_snippet_from_the_only_matching_paragraph():
    body = ("Intro about headphones in general.\n\nSecond paragraph on comfort and fit.\n\n"
            "Our pick for budget ANC earbuds is solid.\n\nClosing words.")
    snip = snippet_for(body, "budget ANC")
    assert snip.matched and snip.text == "Our pick for budget ANC earbuds is solid."


def test_empty_query_falls_back_to_prefix():
    body = " ".join(f"word{i}" for i in range(60))
    snip = snippet_for(body, "")
    assert not snip.matched and len(snip.text) <= 150
    assert body.startswith(snip.text) and body[len(snip.text)] == " "


def test_short_page_no_match_returns_everything():
    snip = snippet_for("Tiny page.\n\nTwo lines.", "zebra")
    assert snip == type(snip)("Tiny page. Two lines.", False)


def test_strict_parse_failure_uses_lenient():
    snip = snippet_for("Nothing here.\n\nThe battery lasts long.", 'battery AND (')
    assert snip.matched and "battery" in snip.text


def test_strict_and_without_match_retries_as_bag_of_words():
    snip = snippet_for("The battery lasts.\n\nThe case is small.", "battery AND zebra")
    assert snip.matched and snip.text == "The battery lasts."


def test_window_prefers_most_matches_then_earliest():
    filler = " ".join(["lorem"] * 40)
    passage = f"alpha {filler} beta gamma beta {filler}"
    snip = extract_snippet(CleanText(passage), "beta gamma")
    assert snip.matched and snip.text.endswith("beta gamma beta")
    assert not snip.text.startswith("alpha")
    tie = extract_snippet(CleanText(f"delta {filler} delta {filler}"), "delta")
    assert tie.text.startswith("delta lorem")


def test_long_single_word_is_cut():
    word = "x" * 400
    snip = snippet_for(word, "zzz")
    assert snip.text == "x" * 150 and not snip.matched


def bm25_oracle(passages: list[str], terms: list[str]) -> list[float]:
    """Textbook BM25 written independently: k1=1.2, b=0.75, idf = ln(1 + (N - df + 0.5) / (df + 0.5))."""
    docs = [re.findall(r"[a-z0-9]+", p.lower()) for p in passages]
    n = len(docs)
    avg = sum(map(len, docs)) / n
    scores = []
    for d in docs:
        s = 0.0
        for t in set(terms):
            df = sum(1 for x in docs if t in x)
            tf = d.count(t)
            if tf == 0:
                continue
            idf = math.log(1 + (n - df + 0.5) / (df + 0.5))
            s += idf * tf * 2.2 / (tf + 1.2 * (0.25 + 0.75 * len(d) / avg))
        scores.append(s)
    return scores


WORDS = ["battery", "case", "noise", "fit", "price", "sound", "bass", "light", "cheap", "strong", "the", "a"]


@settings(max_examples=150)
@given(st.lists(st.lists(st.sampled_from(WORDS), min_size=1, max_size=30), min_size=1, max_size=8),
       st.lists(st.sampled_from(WORDS), min_size=1, max_size=4))
def test_bm25_matches_independent_oracle(passages_words, query_words):
    passages = [" ".join(p) for p in passages_words]
    index = PassageIndex(passages)
    node = parse_lenient(" ".join(query_words))
    ours = [index.evaluate(node, i)[1] for i in range(len(passages))]
    oracle = bm25_oracle(passages, query_words)
    assert ours == pytest.approx(oracle, rel=1e-12, abs=1e-12)
    best_i, best_s = index.best(node)
    top = max(oracle)
    if top > 0:
        assert best_i == oracle.index(top) or math.isclose(oracle[best_i], top)


def test_idf_reference_values():
    index = PassageIndex(["a b", "a c", "d e"])
    assert index.idf("a") == pytest.approx(math.log(1 + 1.5 / 2.5))
    assert index.idf("zzz") == pytest.approx(math.log(1 + 3.5 / 0.5))


def test_phrase_requires_adjacency():
    index = PassageIndex(["noise cancelling works", "cancelling the noise"])
    node = parse_strict('"noise cancelling"')
    assert index.evaluate(node, 0)[0] and not index.evaluate(node, 1)[0]


text_st = st.text(alphabet=st.characters(codec="utf-8", exclude_categories=("Cs",)), max_size=600)


@settings(max_examples=200)
@given(text_st, st.text(max_size=40))
def test_snippet_properties_arbitrary_input(raw, query):
    clean = clean_text(raw)
    a = extract_snippet(clean, query)
    assert len(a.text) <= 150
    assert a == extract_snippet(clean, query)


@settings(max_examples=200)
@given(st.lists(st.lists(st.sampled_from(WORDS + ["ok", "x" * 30]), min_size=1, max_size=40), min_size=1, max_size=6),
       st.lists(st.sampled_from(WORDS + ["zebra"]), min_size=1, max_size=4))
def test_plain_queries_strict_equals_lenient_and_match_dominates(paras, qwords):
    clean = CleanText("\n\n".join(" ".join(p) for p in paras))
    query = " ".join(qwords)
    snip = extract_snippet(clean, query)
    assert parse_strict(query) == parse_lenient(query)
    present = set(qwords) & set(clean.text.split())
    if present:
        assert snip.matched
        assert set(snip.text.split()) & set(qwords)
    else:
        assert not snip.matched
    if snip.matched:
        assert snip.text in clean.text


def _golden():
    import json

    from helpers import FIXTURES

    pages = FIXTURES / "golden_pages"
    with (FIXTURES / "golden_snippets.jsonl").open() as fh:
        for line in fh:
            rec = json.loads(line)
            yield pytest.param(rec, (pages / f"{rec['page_id']}.md").read_text(), id=f"{rec['page_id']}:{rec['query']}")


@pytest.mark.parametrize("rec,body", list(_golden()))
def test_golden_snippets(rec, body):
    snip = snippet_for(body, rec["query"], rec["page_id"])
    assert (snip.text, snip.matched) == (rec["snippet"], rec["matched"])
