"""Per-episode influence signals, per-cell rates, and report tables."""

from __future__ import annotations

import csv
import io
import json
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .agent import Trajectory
from .crawlenv import Provenance
from .errors import HarnessError, RecordParseError, ValidationError
from .judge import Verdict
from .searchenv import Origin, Routing

METRICS = (
    "recommendation",
    "initial_target_crawl",
    "target_specific_second_search",
    "followup_target_crawl",
    "internal_link_crawl",
)
SHORT = {
    "recommendation": "TargetRec",
    "initial_target_crawl": "InitCrawl",
    "target_specific_second_search": "TS-2ndSearch",
    "followup_target_crawl": "FollowCrawl",
    "internal_link_crawl": "InternalLink",
}


class CorruptLogError(HarnessError):
    pass


@dataclass(frozen=True)
class EpisodeSignals:
    episode_id: str
    condition: str
    recommended: bool
    initial_target_crawl: bool
    target_specific_second_search: bool
    followup_target_crawl: bool
    internal_link_crawl: bool
    n_searches: int = 0
    distinct_target_crawls: int = 0

    def __post_init__(self):
        if self.initial_target_crawl and self.followup_target_crawl:
            raise ValueError("initial and follow-up target crawls are mutually exclusive")

    def vector(self) -> tuple[int, int, int, int, int]:
        return (int(self.recommended), int(self.initial_target_crawl), int(self.target_specific_second_search),
                int(self.followup_target_crawl), int(self.internal_link_crawl))

    def value(self, metric: str) -> bool:
        return bool(self.vector()[METRICS.index(metric)])


def extract_signals(traj: Trajectory, target_urls: Iterable[str] | None = None,
                    verdict: Verdict | None = None) -> EpisodeSignals:
    """Derive the five signals.

    ``target_urls`` (the evidence graph's urls) decides target relatedness; when
    omitted, the ``is_target_related`` flag recorded at crawl time is used.
    """
    targets = set(target_urls) if target_urls is not None else None

    def is_target(page) -> bool:
        return page.url in targets if targets is not None else page.is_target_related

    synthetic_link = None
    searches_seen = 0
    initial = False
    second_ts = False
    crawled_targets: list[str] = []
    internal = False
    for e in traj.events:
        if e.kind == "search":
            searches_seen += 1
            rnd = e.round
            if rnd.round_index == 1:
                synth = [r for r in rnd.results if r.origin is Origin.SYNTHETIC]
                if len(synth) != 1:
                    raise CorruptLogError(f"{traj.episode_id}: round 1 has {len(synth)} synthetic results")
                synthetic_link = synth[0].link
            elif rnd.round_index == 2:
                second_ts = rnd.routing is Routing.FOLLOWUP_TARGET_SPECIFIC
        elif e.kind == "crawl":
            page = e.page
            if searches_seen == 1 and synthetic_link is not None and page.url == synthetic_link:
                initial = True
            if is_target(page):
                crawled_targets.append(page.url)
            if page.provenance.provenance is Provenance.IN_PAGE:
                internal = True
    recommended = bool(verdict.value) if (verdict is not None and traj.final_answer) else False
    return EpisodeSignals(
        episode_id=traj.episode_id,
        condition=traj.condition,
        recommended=recommended,
        initial_target_crawl=initial,
        target_specific_second_search=second_ts,
        followup_target_crawl=(not initial) and bool(crawled_targets),
        internal_link_crawl=internal,
        n_searches=searches_seen,
        distinct_target_crawls=len(set(crawled_targets)),
    )


@dataclass(frozen=True)
class Rate:
    numerator: int
    denominator: int

    @property
    def value(self) -> float | None:
        return self.numerator / self.denominator if self.denominator else None


@dataclass
class MetricsReport:
    condition: str
    dataset: str
    n_episodes: int
    rates: dict[str, Rate] = field(default_factory=dict)
    judge_model: str = ""
    prompt_version: str = ""
    denominator_mode: str = "all"

    def rate(self, metric: str) -> float | None:
        return self.rates[metric].value


def aggregate(signals: Sequence[EpisodeSignals], *, condition: str | None = None, dataset: str = "",
              judge_model: str = "", prompt_version: str = "", denominator_mode: str = "all") -> MetricsReport:
    """Mean of each boolean signal over the cell.

    ``denominator_mode="conditioned"`` divides the second-search metric by the
    episodes that issued at least two searches; every other rate uses all episodes.
    """
    if denominator_mode not in ("all", "conditioned"):
        raise ValueError(f"unknown denominator mode {denominator_mode!r}")
    conditions = {s.condition for s in signals}
    if len(conditions) > 1:
        raise ValidationError(f"signals mix conditions: {sorted(conditions)}")
    cond = condition if condition is not None else (conditions.pop() if conditions else "")
    n = len(signals)
    rates = {}
    for metric in METRICS:
        den = n
        pool = signals
        if metric == "target_specific_second_search" and denominator_mode == "conditioned":
            pool = [s for s in signals if s.n_searches >= 2]
            den = len(pool)
        rates[metric] = Rate(sum(1 for s in pool if s.value(metric)), den)
    return MetricsReport(cond, dataset, n, rates, judge_model, prompt_version, denominator_mode)


def _pct(rate: float | None) -> str:
    return "-" if rate is None else f"{100.0 * rate:.1f}"


CSV_FIELDS = ["condition", "dataset", "n_episodes"] + [
    f"{m}_{part}" for m in METRICS for part in ("num", "den", "pct")
] + ["judge_model", "prompt_version", "denominator_mode"]


def emit_report(reports: Sequence[MetricsReport], fmt: str = "aligned-text", *, header: dict | None = None) -> str:
    """Aligned text (percent, one decimal) or loss-free CSV. ``header`` becomes ``#`` comment lines."""
    prefix = ""
    if header is not None:
        prefix = "".join(f"# {line}\n" for line in json.dumps(header, sort_keys=True).splitlines())
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        for r in reports:
            row = {"condition": r.condition, "dataset": r.dataset, "n_episodes": r.n_episodes,
                   "judge_model": r.judge_model, "prompt_version": r.prompt_version,
                   "denominator_mode": r.denominator_mode}
            for m in METRICS:
                rate = r.rates[m]
                row[f"{m}_num"] = rate.numerator
                row[f"{m}_den"] = rate.denominator
                row[f"{m}_pct"] = _pct(rate.value)
            writer.writerow(row)
        return prefix + buf.getvalue()
    if fmt != "aligned-text":
        raise ValueError(f"unknown report format {fmt!r}")
    cols = ["Condition", "Dataset", "n"] + [SHORT[m] for m in METRICS]
    rows = [[r.condition, r.dataset, str(r.n_episodes)] + [_pct(r.rate(m)) for m in METRICS] for r in reports]
    widths = [max([len(c)] + [len(row[i]) for row in rows]) for i, c in enumerate(cols)]

    def line(cells):
        return "  ".join(c.ljust(w) if i < 2 else c.rjust(w) for i, (c, w) in enumerate(zip(cells, widths))).rstrip()

    out = [line(cols), line(["-" * w for w in widths])] + [line(r) for r in rows]
    return prefix + "\n".join(out) + "\n"


def parse_csv_report(text: str) -> list[dict]:
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


# -- log IO ------------------------------------------------------------------

def read_log_records(path: str | Path) -> list[dict]:
    """Records of a trajectory log, header lines skipped; corrupt lines raise with file:line."""
    out = []
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                if not isinstance(rec, dict):
                    raise ValueError("not an object")
                if rec.get("record_type") == "header":
                    continue
                for key in ("episode_id", "event_type", "payload", "seq"):
                    if key not in rec:
                        raise ValueError(f"missing {key!r}")
            except ValueError as exc:
                raise RecordParseError(str(exc), line=lineno, path=str(path)) from exc
            out.append(rec)
    return out


def read_trajectories(path: str | Path) -> list[Trajectory]:
    grouped: "OrderedDict[str, list[dict]]" = OrderedDict()
    for rec in read_log_records(path):
        grouped.setdefault(rec["episode_id"], []).append(rec)
    return [Trajectory.from_records(recs) for recs in grouped.values()]


def read_verdicts(path: str | Path) -> dict[str, dict]:
    out = {}
    p = Path(path)
    if not p.exists():
        return out
    with p.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                if rec.get("record_type") == "header":
                    continue
                out[rec["episode_id"]] = rec
            except (ValueError, KeyError) as exc:
                raise RecordParseError(str(exc), line=lineno, path=str(p)) from exc
    return out
