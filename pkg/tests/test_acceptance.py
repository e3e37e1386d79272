"""Acceptance suite: one block per criterion, each tagged with the ``criterion`` marker.

The terminal summary prints one pass/fail line per criterion.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import random
import re
import time
from pathlib import Path

import pytest
import yaml

from geoharness.config import load_config
from geoharness.ecosystem import ConditionTag, TemplateGenerator, build_ecosystem, validate_graph
from geoharness.metrics import METRICS, MetricsReport, Rate, emit_report, parse_csv_report, read_log_records
from geoharness.organic import FixtureProvider, OrganicResult
from geoharness.runner import load_dataset, metrics_for_log, run_experiment, select_instances, verdict_path
from geoharness.scorer import LexicalScorer
from geoharness.searchenv import FollowupKind, Origin, Routing, followup_round, initial_round, result_doc
from geoharness.snippet import clean_text, extract_snippet, snippet_for
from geoharness.textutil import tokenize

from helpers import FIXTURES, ORGANIC, fixture_instances, random_profile, recount

CONDITIONS = ["SinglePage", "PageGEO:rewrite", "Uncoordinated", "Coordinated", "Trace"]


class ListProvider:
    def __init__(self, results):
        self.results = results

    def search(self, query):
        return list(self.results)


def write_pagegeo(root: Path, label: str = "rewrite") -> Path:
    """Pre-rewritten single pages: the template page with a fact summary moved to the top."""
    for inst in fixture_instances():
        g = build_ecosystem(inst.product, ConditionTag.parse("SinglePage"), TemplateGenerator(), 0)
        facts = "; ".join(f"{k}: {v}" for k, v in inst.product.attributes)
        body = f"# {inst.product.name} at a glance\n\nKey facts about the {inst.product.name}: {facts}.\n\n"
        path = root / label / f"{inst.instance_id}.md"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(body + g.entry.body)
    return root


def write_config(tmp_path: Path, **extra) -> Path:
    cfg = {"dataset": str(FIXTURES / "instances.jsonl"), "output_dir": str(tmp_path / "out"), "seed": 5,
           "provider": {"mode": "synthetic"}, "pagegeo_dir": str(write_pagegeo(tmp_path / "pagegeo"))}
    cfg.update(extra)
    path = tmp_path / "run.yaml"
    path.write_text(yaml.safe_dump(cfg))
    return path


# -- 1. injection protocol ---------------------------------------------------

@pytest.mark.criterion(1, "injection protocol: 10 results, one Synthetic at rank 5, organic order kept")
def test_criterion_1_injection_protocol():
    started = time.perf_counter()
    rng = random.Random(2024)
    instances = fixture_instances()
    pool = FixtureProvider(ORGANIC).pool
    graphs = {}
    violations = []
    cases = 0
    for case in range(500):
        inst = instances[case % len(instances)]
        order = pool[:]
        rng.shuffle(order)
        provider = ListProvider(order[: rng.randint(9, len(order))])
        expected = [r.link for r in provider.results[:9]]
        query = " ".join(rng.sample(inst.query.split() + ["cheap", "durable", "2026"], 3))
        for cond in CONDITIONS:
            key = (inst.instance_id, cond)
            if key not in graphs:
                graphs[key] = build_ecosystem(inst.product, ConditionTag.parse(cond), TemplateGenerator(), 1)
            g = graphs[key]
            rounds = [initial_round(query, g, provider),
                      followup_round(query, g, provider, LexicalScorer(), random.Random(case), FollowupKind.GENERAL)]
            for rnd in rounds:
                cases += 1
                assert rnd.routing in (Routing.INITIAL_CONTROLLED, Routing.FOLLOWUP_GENERAL)
                res = rnd.results
                synth = [r for r in res if r.origin is Origin.SYNTHETIC]
                if (len(res) != 10 or [r.rank for r in res] != list(range(1, 11)) or len(synth) != 1
                        or synth[0].rank != 5 or synth[0].link not in g.urls
                        or [r.link for r in res if r.rank != 5] != expected):
                    violations.append((case, cond, rnd.routing.value))
    elapsed = time.perf_counter() - started
    print(f"criterion 1: {cases} rounds checked, {len(violations)} violations, {elapsed:.2f}s")
    assert not violations
    assert elapsed < 10


# -- 2. snippets -------------------------------------------------------------

VOCAB = ("battery life noise cancelling earbuds price warranty charging case bluetooth fit comfort "
         "sound bass review test hours weight grams running waterproof rating app update firmware").split()


def _random_page(rng: random.Random) -> str:
    blocks = []
    for _ in range(rng.randint(1, 6)):
        words = [rng.choice(VOCAB + ["x" * rng.randint(1, 40)]) for _ in range(rng.randint(1, 60))]
        kind = rng.random()
        if kind < 0.15:
            blocks.append("## " + " ".join(words[:6]))
        elif kind < 0.3:
            blocks.append("\n".join(f"- {w} [{w}](https://e.example/{w})" for w in words[:5]))
        elif kind < 0.4:
            blocks.append("<p>" + " ".join(words) + "</p>")
        else:
            blocks.append(" ".join(words))
    return "\n\n".join(blocks)


def _random_query(rng: random.Random) -> str:
    words = rng.sample(VOCAB + ["zebra", "quasar"], rng.randint(1, 4))
    form = rng.random()
    if form < 0.2:
        return f'"{" ".join(words)}"'
    if form < 0.35 and len(words) > 1:
        return f" {rng.choice(['AND', 'OR'])} ".join(words)
    if form < 0.45:
        return "(" + " ".join(words)
    return " ".join(words)


@pytest.mark.criterion(2, "snippets: <=150 chars, matched contain a query term, deterministic, goldens")
def test_criterion_2_snippets():
    started = time.perf_counter()
    rng = random.Random(99)
    violations = []
    for i in range(1000):
        page, query = _random_page(rng), _random_query(rng)
        clean = clean_text(page, f"p{i}")
        snip = extract_snippet(clean, query)
        again = extract_snippet(clean_text(page, f"p{i}"), query)
        qtokens = {t for t in tokenize(query) if t not in ("and", "or")}
        if len(snip.text) > 150 or snip != again:
            violations.append((i, "length/determinism"))
        if snip.matched and not qtokens & set(tokenize(snip.text)):
            violations.append((i, "matched without query term"))
    pages = FIXTURES / "golden_pages"
    goldens = [json.loads(l) for l in (FIXTURES / "golden_snippets.jsonl").read_text().splitlines()]
    assert len(goldens) == 20
    for rec in goldens:
        snip = snippet_for((pages / f"{rec['page_id']}.md").read_text(), rec["query"], rec["page_id"])
        if (snip.text, snip.matched) != (rec["snippet"], rec["matched"]):
            violations.append((rec["page_id"], rec["query"]))
    elapsed = time.perf_counter() - started
    print(f"criterion 2: 1000 random pairs + 20 goldens, {len(violations)} violations, {elapsed:.2f}s")
    assert not violations
    assert elapsed < 10


# -- 3. retrieval oracle -----------------------------------------------------

def _brute_scores(query, pages):
    scorer = LexicalScorer()
    return {p.page_id: scorer.score(query, result_doc(p, query)) for p in pages}


def _brute_order(scores: dict[str, float]) -> list[str]:
    # selection sort: repeatedly take the highest score, smallest id on ties
    left = dict(scores)
    out = []
    while left:
        best = None
        for pid, s in left.items():
            if best is None or s > left[best] or (s == left[best] and pid < best):
                best = pid
        out.append(best)
        del left[best]
    return out


@pytest.mark.criterion(3, "retrieval oracle: TargetSpecific order and General rank-5 arg-max")
def test_criterion_3_retrieval_oracle():
    rng = random.Random(7)
    product = random_profile(random.Random(5))
    full = build_ecosystem(product, ConditionTag.parse("Trace"), TemplateGenerator(), 3, pages_per_role=9)
    assert len(full.pages) >= 50
    all_ids = sorted(full.pages)
    words = sorted({t for p in full.pages.values() for t in tokenize(p.body)}) + ["unrelatedword"]
    organic = ListProvider([OrganicResult(f"o{i}", f"https://o.example.org/{i}", "s") for i in range(9)])
    mismatches = []
    for q in range(200):
        size = rng.randint(5, 50)
        pool = rng.sample(all_ids, size)
        g = dataclasses.replace(full, pages={pid: full.pages[pid] for pid in pool})
        query = " ".join(rng.sample(words, rng.randint(1, 5)))
        if q % 3 == 0:
            query = f"{product.name} {query}"
        scores = _brute_scores(query, g.pages.values())

        ts = followup_round(query, g, organic, LexicalScorer(), random.Random(q), FollowupKind.TARGET_SPECIFIC)
        if [r.page_id for r in ts.results] != _brute_order(scores)[:10]:
            mismatches.append(("ts", q, size))

        seed = 1000 + q
        ids = sorted(g.pages)
        sample = ids if len(ids) <= 30 else random.Random(seed).sample(ids, 30)
        expected = _brute_order({pid: scores[pid] for pid in sample})[0]
        gen = followup_round(query, g, organic, LexicalScorer(), random.Random(seed), FollowupKind.GENERAL)
        if gen.result_at(5).page_id != expected:
            mismatches.append(("general", q, size))
    print(f"criterion 3: 200 queries x (TargetSpecific, General), {len(mismatches)} mismatches")
    assert not mismatches


# -- 4. trajectory and metrics oracle ----------------------------------------

# Hand-derived signal vectors (recommended, initial, second, followup, internal).
# rank5-crawler: crawls the rank-5 synthetic link before its second search, then searches
#   the product name (target specific), answers naming the product with a recommendation cue.
#   Internal-link crawl happens only where the crawled entry links to other support pages
#   and the first new round-2 result is one of them, i.e. Coordinated and Trace.
# rank5-skipper: crawls organic rank 1, runs a category search (general), then crawls its
#   rank-5 synthetic result: a follow-up target crawl; the answer never names the product.
# immediate-answerer: answers without any tool use, no product mention.
EXPECTED = {
    "rank5-crawler": {"SinglePage": (1, 1, 1, 0, 0), "PageGEO:rewrite": (1, 1, 1, 0, 0),
                      "Uncoordinated": (1, 1, 1, 0, 0), "Coordinated": (1, 1, 1, 0, 1), "Trace": (1, 1, 1, 0, 1)},
    "rank5-skipper": {c: (0, 0, 0, 1, 0) for c in CONDITIONS},
    "immediate": {c: (0, 0, 0, 0, 0) for c in CONDITIONS},
}


@pytest.mark.criterion(4, "trajectory/metrics oracle: scripted policies match hand vectors and raw recount")
def test_criterion_4_trajectory_metrics_oracle(tmp_path):
    from geoharness.metrics import extract_signals, read_trajectories
    from geoharness.judge import Verdict

    started = time.perf_counter()
    path = write_config(tmp_path, conditions=CONDITIONS)
    mismatches = []
    for kind, per_cond in EXPECTED.items():
        cfg = load_config(path, [f"policy.kind={kind}", f"output_dir={tmp_path / kind}"])
        instances = select_instances(load_dataset(cfg), None, 10)
        summary = run_experiment(cfg, instances)
        assert summary.completed == 10 * len(CONDITIONS) and not summary.failures
        for cond, log in zip(CONDITIONS, summary.logs):
            verdicts = {eid: bool(v["recommendation"] and v["recommendation"]["value"])
                        for eid, v in _verdicts(log).items()}
            for traj in read_trajectories(log):
                rec = _verdicts(log)[traj.episode_id]["recommendation"]
                sig = extract_signals(traj, None, Verdict.from_dict(rec) if rec else None)
                if sig.vector() != per_cond[cond]:
                    mismatches.append((kind, cond, traj.instance_id, sig.vector()))
            report = metrics_for_log(log)
            n, nums = recount(read_log_records(log), verdicts)
            if (n, nums) != (report.n_episodes, [report.rates[m].numerator for m in METRICS]):
                mismatches.append((kind, cond, "recount", nums))
            if any(report.rates[m].denominator != 10 for m in METRICS):
                mismatches.append((kind, cond, "denominator"))
            if [report.rate(m) for m in METRICS] != [float(v) for v in per_cond[cond]]:
                mismatches.append((kind, cond, "rates"))
    elapsed = time.perf_counter() - started
    print(f"criterion 4: 3 policies x {len(CONDITIONS)} conditions x 10 instances, "
          f"{len(mismatches)} mismatches, {elapsed:.2f}s")
    assert not mismatches
    assert elapsed < 30


def _verdicts(log: Path) -> dict:
    return {json.loads(l)["episode_id"]: json.loads(l) for l in verdict_path(log).read_text().splitlines()}


# -- 5. ecosystem structure --------------------------------------------------

def _strongly_connected(graph) -> bool:
    nodes = list(graph.pages)
    adj = {n: set() for n in nodes}
    for src, dst in graph.edges:
        adj[src].add(dst)
    for start in nodes:
        seen, stack = {start}, [start]
        while stack:
            for nxt in adj[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        if seen != set(nodes):
            return False
    return True


@pytest.mark.criterion(5, "ecosystem structure: valid graphs, edge rules per condition")
def test_criterion_5_ecosystem_structure():
    rng = random.Random(31)
    violations = []
    for i in range(100):
        product = random_profile(rng)
        for cond in CONDITIONS:
            g = build_ecosystem(product, ConditionTag.parse(cond), TemplateGenerator(), i)
            problems = validate_graph(g)
            if problems:
                violations.append((product.name, cond, [str(p) for p in problems]))
            if cond == "Uncoordinated" and g.edges:
                violations.append((product.name, cond, "internal edges"))
            if cond == "Coordinated" and not _strongly_connected(g):
                violations.append((product.name, cond, "support pages not mutually connected"))
            if cond == "Trace":
                if g.entry.role.value != "Navigation" or g.reachable_from_entry() != set(g.pages):
                    violations.append((product.name, cond, "entry does not reach all support pages"))
    print(f"criterion 5: 100 profiles x {len(CONDITIONS)} conditions, {len(violations)} violations")
    assert not violations


# -- 6. directional behavior -------------------------------------------------

@pytest.mark.criterion(6, "directional: Trace crawls more target pages than SinglePage, internal links only in Trace")
def test_criterion_6_directional_behavior(tmp_path):
    from geoharness.metrics import extract_signals, read_trajectories

    cfg = load_config(write_config(tmp_path, conditions=["SinglePage", "Trace"], policy={"kind": "greedy"}))
    instances = select_instances(load_dataset(cfg), None, None)
    assert len(instances) == 50
    summary = run_experiment(cfg, instances)
    assert not summary.failures
    stats = {}
    for cond, log in zip(["SinglePage", "Trace"], summary.logs):
        signals = [extract_signals(t) for t in read_trajectories(log)]
        assert len(signals) == 50
        mean = sum(s.distinct_target_crawls for s in signals) / len(signals)
        stats[cond] = (mean, metrics_for_log(log).rate("internal_link_crawl"))
    print(f"criterion 6: mean distinct target crawls SinglePage={stats['SinglePage'][0]:.2f} "
          f"Trace={stats['Trace'][0]:.2f}; internal-link rate SinglePage={stats['SinglePage'][1]:.3f} "
          f"Trace={stats['Trace'][1]:.3f}")
    assert stats["Trace"][0] - stats["SinglePage"][0] > 0
    assert stats["Trace"][1] > 0
    assert stats["SinglePage"][1] == 0


# -- 7. replay determinism ---------------------------------------------------

def _log_digest(root: Path) -> dict[str, str]:
    out = {}
    for p in sorted(root.rglob("*.jsonl")):
        lines = []
        for line in p.read_text().splitlines():
            rec = json.loads(line)
            rec.pop("wall_time", None)
            lines.append(json.dumps(rec, sort_keys=True))
        out[str(p.relative_to(root))] = hashlib.sha256("\n".join(lines).encode()).hexdigest()
    return out


@pytest.mark.criterion(7, "replay determinism: identical logs modulo wall_time")
def test_criterion_7_replay_determinism(tmp_path):
    digests = []
    for run in ("a", "b"):
        cfg = load_config(write_config(tmp_path, conditions=CONDITIONS, policy={"kind": "greedy"}),
                          [f"output_dir={tmp_path / run}", "parallelism=4"])
        run_experiment(cfg, select_instances(load_dataset(cfg), None, 12))
        digests.append(_log_digest(tmp_path / run / "logs"))
    print(f"criterion 7: {len(digests[0])} log files compared")
    assert len(digests[0]) == 2 * len(CONDITIONS)
    assert digests[0] == digests[1]


# -- 8. live smoke and report formatting -------------------------------------

@pytest.mark.criterion(8, "report rows render one decimal (live smoke optional)")
def test_criterion_8_report_formatting():
    rates = {m: Rate(0, 125) for m in METRICS}
    rates["recommendation"] = Rate(84, 125)
    report = MetricsReport("Trace", "SafeSearch", 125, rates, "judge-model", "judges.v1")
    text = emit_report([report])
    row = text.splitlines()[-1].split()
    assert row[:4] == ["Trace", "SafeSearch", "125", "67.2"]
    assert all(re.fullmatch(r"\d+\.\d", cell) for cell in row[3:])
    csv_row = parse_csv_report(emit_report([report], "csv"))[0]
    assert csv_row["recommendation_pct"] == "67.2" and csv_row["recommendation_num"] == "84"


LIVE_ENDPOINT = os.environ.get("GEOHARNESS_CHAT_ENDPOINT")


@pytest.mark.criterion(8, "report rows render one decimal (live smoke optional)")
@pytest.mark.skipif(not LIVE_ENDPOINT, reason="GEOHARNESS_CHAT_ENDPOINT not set")
def test_criterion_8_live_smoke(tmp_path):
    model = os.environ.get("GEOHARNESS_CHAT_MODEL", "gpt-4o-mini")
    chat = {"kind": "chat", "endpoint": LIVE_ENDPOINT, "model": model}
    cfg = load_config(write_config(tmp_path, conditions=CONDITIONS, policy=chat,
                                   judge={"kind": "llm", "endpoint": LIVE_ENDPOINT, "model": model},
                                   provider={"mode": "fixture", "root": str(ORGANIC)}))
    summary = run_experiment(cfg, select_instances(load_dataset(cfg), None, 1))
    assert not summary.failures
    for log in summary.logs:
        ends = [r for r in read_log_records(log) if r["event_type"] == "episode_end"]
        assert len(ends) == 1 and (ends[0]["payload"]["final_answer"] or "").strip()
        row = emit_report([metrics_for_log(log)]).splitlines()[-1].split()
        assert all(re.fullmatch(r"\d+\.\d", cell) for cell in row[-5:])
