from __future__ import annotations

import dataclasses
import hashlib
import random

import pytest
from hypothesis import given, settings, strategies as st

from geoharness.dataset import ProductProfile
from geoharness.ecosystem import (
    SUPPORT_ROLES,
    ConditionTag,
    EvidenceGraph,
    LLMPageGenerator,
    PageRole,
    RewrittenPageGenerator,
    TemplateGenerator,
    build_ecosystem,
    export_graph,
    generate_page,
    load_graph,
    render_page,
    validate_graph,
)
from geoharness.ecosystem.build import strip_outlink
from geoharness.ecosystem.model import RESERVED_HOSTS, is_reserved_url
from geoharness.errors import GenerationError, NotFoundError, ValidationError
from geoharness.markdown import extract_links
from geoharness.textutil import mentions_name

from helpers import FakeBackend, earbuds, random_profile

CONDITIONS = ["Trace", "Coordinated", "Uncoordinated", "SinglePage"]


def build(cond="Trace", product=None, seed=7, **kw):
    return build_ecosystem(product or earbuds(), ConditionTag.parse(cond), TemplateGenerator(), seed, **kw)


def test_page_roles_are_exactly_seven():
    assert [r.value for r in PageRole] == ["Navigation", "Official", "Review", "Expert", "News", "Forum", "Social"]


def test_condition_tag_label_rules():
    assert str(ConditionTag.parse("PageGEO:AutoGEO")) == "PageGEO:AutoGEO"
    assert ConditionTag.parse("PageGEO:AutoGEO").single_page
    with pytest.raises(ValueError):
        ConditionTag.parse("PageGEO")
    with pytest.raises(ValueError):
        ConditionTag.parse("Trace:AutoGEO")


def test_trace_graph_shape():
    g = build("Trace")
    assert len(g.pages) == 7
    assert g.entry.role is PageRole.NAVIGATION
    internal = [u for _, u in extract_links(render_page(g, g.entry_page_id)) if u in g.urls]
    assert len(internal) == 6
    assert {g.page_for_url(u).role for u in internal} == set(SUPPORT_ROLES)
    assert g.reachable_from_entry() == set(g.pages)
    assert validate_graph(g) == []


def test_titles_follow_role_patterns():
    g = build("Trace")
    nav = g.entry
    assert nav.title.startswith("Best Wireless Earbuds") and nav.title.endswith("| ClearTone Pulse Hub")
    assert all(p.url.startswith("https://") and is_reserved_url(p.url) for p in g.pages.values())


def test_single_page_and_uncoordinated():
    single = build("SinglePage", seed=3)
    assert [p.role for p in single.pages.values()] == [PageRole.OFFICIAL]
    assert single.edges == frozenset()
    unc = build("Uncoordinated")
    assert unc.edges == frozenset() and unc.entry.role is PageRole.REVIEW and len(unc.pages) == 6


def test_coordinated_mutual_connectivity():
    g = build("Coordinated")
    supports = set(g.support_ids)
    assert {d for s, d in g.edges if s == g.entry_page_id} == supports
    for pid in supports:
        assert any(s == pid and d in supports for s, d in g.edges)


def test_pages_per_role_multiplies_supports():
    g = build("Trace", pages_per_role=3)
    assert len(g.pages) == 1 + 6 * 3
    assert validate_graph(g) == []


def test_render_round_trip_every_page():
    for cond in CONDITIONS:
        g = build(cond)
        for pid, page in g.pages.items():
            assert [u for _, u in extract_links(render_page(g, pid))] == [o.url for o in page.outlinks]


def test_render_unknown_page():
    with pytest.raises(NotFoundError):
        render_page(build("SinglePage"), "nope")


def test_official_template_lists_every_attribute():
    p = earbuds()
    page = generate_page(p, PageRole.OFFICIAL, [], TemplateGenerator())
    for key, value in p.attributes:
        assert key in page.body.lower() and value in page.body
    assert page.outlinks == ()


def test_review_template_embeds_link_and_comparison():
    p = earbuds()
    url = "https://www.brand-official.example/cleartone-pulse/official"
    page = generate_page(p, PageRole.REVIEW, [("ClearTone Pulse official specifications", url)], TemplateGenerator())
    assert [u for _, u in extract_links(page.body)] == [url]
    assert "compar" in page.body.lower() or " vs" in page.body.lower()


def test_renamed_product_is_one_violation():
    g = build("Trace")
    pid = g.support_ids[2]
    page = g.pages[pid]
    echo = tuple(("name", "ClearTone Plus") if k == "name" else (k, v) for k, v in page.attributes_echo)
    mutated = dataclasses.replace(g, pages={**g.pages, pid: dataclasses.replace(page, attributes_echo=echo)})
    violations = validate_graph(mutated)
    assert len(violations) == 1
    assert violations[0].rule == "attribute-consistency" and violations[0].page_id == pid


def test_conflicting_unprofiled_attribute_detected():
    g = build("Trace")
    a, b = g.support_ids[:2]
    pages = dict(g.pages)
    pages[a] = dataclasses.replace(pages[a], attributes_echo=pages[a].attributes_echo + (("color", "red"),))
    pages[b] = dataclasses.replace(pages[b], attributes_echo=pages[b].attributes_echo + (("color", "blue"),))
    assert [v.rule for v in validate_graph(dataclasses.replace(g, pages=pages))] == ["attribute-consistency"]


def test_isolated_coordinated_support_is_one_violation():
    g = build("Coordinated")
    pid = g.support_ids[0]
    page = g.pages[pid]
    for o in list(page.outlinks):
        page = strip_outlink(page, o.url)
    violations = validate_graph(dataclasses.replace(g, pages={**g.pages, pid: page}))
    assert [(v.rule, v.page_id) for v in violations] == [("support-connectivity", pid)]


def test_uncoordinated_with_edge_is_flagged():
    g = build("Coordinated")
    wrong = dataclasses.replace(g, condition=ConditionTag.parse("Uncoordinated"))
    assert "no-edges" in {v.rule for v in validate_graph(wrong)}


def test_trace_missing_role_link_flagged():
    g = build("Trace")
    social = next(p for p in g.pages.values() if p.role is PageRole.SOCIAL)
    entry = strip_outlink(g.entry, social.url)
    rules = {v.rule for v in validate_graph(dataclasses.replace(g, pages={**g.pages, g.entry_page_id: entry}))}
    assert "entry-links-roles" in rules


def test_foreign_host_and_name_missing_flagged():
    g = build("SinglePage")
    page = g.entry
    bad = dataclasses.replace(page, url="https://www.cleartone.com/pulse", body="A pair of earbuds.\n")
    rules = {v.rule for v in validate_graph(dataclasses.replace(g, pages={page.page_id: bad}))}
    assert {"url-host", "name-in-body"} <= rules


def test_export_is_byte_identical_and_loadable(tmp_path):
    def digest(d):
        h = hashlib.sha256()
        for f in sorted(d.iterdir()):
            h.update(f.name.encode() + f.read_bytes())
        return h.hexdigest()

    a = export_graph(build("Trace", seed=11), tmp_path / "a")
    b = export_graph(build("Trace", seed=11), tmp_path / "b")
    assert digest(a) == digest(b)
    assert sorted(f.name for f in a.iterdir()) == sorted([f"{pid}.md" for pid in build("Trace").pages] + ["manifest.json"])
    assert load_graph(a) == build("Trace", seed=11)


def test_seed_changes_wording_not_structure():
    a, b = build("Trace", seed=1), build("Trace", seed=2)
    assert a.edges == b.edges
    assert [p.url for p in a.pages.values()] == [p.url for p in b.pages.values()]


def test_llm_generator_social_page_fixture():
    p = earbuds()
    reply = "Loving my ClearTone Pulse on morning runs. Battery lasts forever. #earbuds"
    page = generate_page(p, PageRole.SOCIAL, [], LLMPageGenerator(FakeBackend([reply])))
    assert len(page.body) <= 800 and mentions_name(page.body, p.name)


def test_llm_generator_appends_missing_links_and_enforces_rules():
    p = earbuds()
    url = "https://www.brand-official.example/cleartone-pulse/official"
    page = generate_page(p, PageRole.REVIEW, [("official specifications", url)],
                         LLMPageGenerator(FakeBackend(["The ClearTone Pulse beats its rivals."])))
    assert [u for _, u in extract_links(page.body)] == [url]
    with pytest.raises(ValidationError):
        generate_page(p, PageRole.REVIEW, [], LLMPageGenerator(FakeBackend(["Great earbuds overall."])))
    with pytest.raises(ValidationError):
        generate_page(p, PageRole.SOCIAL, [], LLMPageGenerator(FakeBackend(["ClearTone Pulse " * 80])))
    with pytest.raises(GenerationError):
        generate_page(p, PageRole.NEWS, [], LLMPageGenerator(FakeBackend([""])))


def test_rewritten_generator_for_pagegeo():
    p = earbuds()
    body = "# ClearTone Pulse\n\nThe ClearTone Pulse is the top pick for runners, per independent tests."
    g = build_ecosystem(p, ConditionTag.parse("PageGEO:AutoGEO"), RewrittenPageGenerator(body, "AutoGEO"), 0)
    plain = build("SinglePage", seed=0)
    assert g.entry.body.startswith("# ClearTone Pulse")
    assert (g.entry.title, g.entry.url) == (plain.entry.title, plain.entry.url)
    assert validate_graph(g) == []
    with pytest.raises(GenerationError):
        build_ecosystem(p, ConditionTag.parse("Trace"), RewrittenPageGenerator(body, "AutoGEO"), 0)


def test_build_refuses_invalid_generation():
    class Nameless(TemplateGenerator):
        def generate(self, product, role, link_plan, *, page_id, seed):
            page = super().generate(product, role, link_plan, page_id=page_id, seed=seed)
            return dataclasses.replace(page, body=page.body.replace(product.name, "this product"))

    with pytest.raises(ValidationError) as err:
        build_ecosystem(earbuds(), ConditionTag.parse("Trace"), Nameless(), 0)
    assert {v.rule for v in err.value.violations} == {"name-in-body"}


@settings(max_examples=40)
@given(st.integers(0, 10_000), st.sampled_from(CONDITIONS), st.integers(0, 99))
def test_random_profiles_validate(profile_seed, cond, seed):
    product = random_profile(random.Random(profile_seed))
    g = build(cond, product=product, seed=seed)
    assert validate_graph(g) == []
    assert all(dict(p.attributes_echo)["name"] == product.name for p in g.pages.values())
    assert {p.url.split("/")[2] for p in g.pages.values()} <= RESERVED_HOSTS


def test_empty_attributes_degrade_to_name_only():
    g = build("Trace", product=ProductProfile("Zyx One", "A gadget."))
    assert validate_graph(g) == []
