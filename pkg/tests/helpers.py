"""Shared test utilities: fixture paths, product factories and a scripted chat backend."""

from __future__ import annotations

import random
import string
from pathlib import Path

from geoharness.dataset import ExperimentInstance, ProductProfile, Source, load_instances

FIXTURES = Path(__file__).parent / "fixtures"
ORGANIC = FIXTURES / "organic"


def fixture_instances() -> list[ExperimentInstance]:
    return load_instances(FIXTURES / "instances.jsonl")


def earbuds() -> ProductProfile:
    return ProductProfile(
        "ClearTone Pulse",
        "Compact noise-cancelling earbuds with a 30 hour battery.",
        (("category", "wireless earbuds"), ("battery life", "30 hours"), ("price", "$89"), ("weight", "5 g")),
    )


def earbuds_instance() -> ExperimentInstance:
    return ExperimentInstance("custom-0000", Source.CUSTOM, "what are the best wireless earbuds for running", earbuds())


_SYLLABLES = ["ka", "lo", "mi", "ra", "ven", "tor", "zu", "qui", "bel", "dax", "or", "sy", "neo", "pra"]
_CATS = ["wireless earbuds", "robot vacuum", "standing desk", "trail shoes", "air fryer", "e-reader",
         "gaming mouse", "camping stove", "baby monitor", "water filter"]
_KEYS = ["battery life", "weight", "price", "warranty", "capacity", "material", "color", "power", "size"]


def random_profile(rng: random.Random) -> ProductProfile:
    brand = "".join(rng.choice(_SYLLABLES) for _ in range(rng.randint(2, 3))).title()
    model = rng.choice(["X", "Pro", "Air", "Max", "One", "S"]) + str(rng.randint(1, 99))
    name = f"{brand} {model}"
    attrs = [("category", rng.choice(_CATS))]
    for key in rng.sample(_KEYS, rng.randint(0, 5)):
        value = rng.choice([f"{rng.randint(1, 500)} {rng.choice(['g', 'hours', 'W', 'L', 'years'])}",
                            f"${rng.randint(10, 999)}", rng.choice(["aluminium", "black", "recycled plastic"])])
        attrs.append((key, value))
    words = " ".join(rng.choice(string.ascii_lowercase) * rng.randint(1, 3) for _ in range(3))
    return ProductProfile(name, f"The {name} is a {attrs[0][1]} built for daily use ({words}).", tuple(attrs))


class FakeBackend:
    """Chat backend that returns queued assistant messages and records every request."""

    def __init__(self, replies, model: str = "fake-model"):
        self.replies = list(replies)
        self.model = model
        self.calls: list[dict] = []

    def complete(self, messages, *, tools=None, tool_choice=None):
        self.calls.append({"messages": messages, "tools": tools, "tool_choice": tool_choice})
        if not self.replies:
            raise AssertionError("FakeBackend ran out of replies")
        reply = self.replies.pop(0)
        if isinstance(reply, Exception):
            raise reply
        if isinstance(reply, str):
            return {"role": "assistant", "content": reply}
        return reply


def tool_call(name: str, **arguments) -> dict:
    import json

    return {"role": "assistant", "content": None,
            "tool_calls": [{"id": "call_1", "type": "function",
                            "function": {"name": name, "arguments": json.dumps(arguments)}}]}


def recount(records, verdicts=None, targets=None):
    """Independent single-pass recount of the five rates straight from raw log dicts.

    Returns (n_episodes, [numerators]) so callers compare exact integers.
    ``verdicts`` maps episode_id to a bool; ``targets`` overrides the logged target flag.
    """
    verdicts = verdicts or {}
    state = {}
    for rec in sorted(records, key=lambda r: (r["episode_id"], r["seq"])):
        s = state.setdefault(rec["episode_id"], {"searches": 0, "synthetic": None, "initial": False,
                                                 "second": False, "targets": 0, "internal": False, "answer": None})
        p = rec["payload"]
        et = rec["event_type"]
        if et == "search_issued":
            s["searches"] += 1
        elif et == "results_returned":
            if p["round_index"] == 1:
                synth = [r["link"] for r in p["results"] if r["origin"] == "Synthetic"]
                assert len(synth) == 1
                s["synthetic"] = synth[0]
            if p["round_index"] == 2 and p["routing"] == "FollowupTargetSpecific":
                s["second"] = True
        elif et == "page_returned":
            if s["searches"] == 1 and p["url"] == s["synthetic"]:
                s["initial"] = True
            hit = p["url"] in targets if targets is not None else p["is_target_related"]
            s["targets"] += int(hit)
            if p["provenance"]["provenance"] == "InPage":
                s["internal"] = True
        elif et == "episode_end":
            s["answer"] = p["final_answer"]
    nums = [0, 0, 0, 0, 0]
    for eid, s in state.items():
        flags = [bool(s["answer"]) and verdicts.get(eid, False), s["initial"], s["second"],
                 (not s["initial"]) and s["targets"] > 0, s["internal"]]
        for i, f in enumerate(flags):
            nums[i] += int(f)
    return len(state), nums
