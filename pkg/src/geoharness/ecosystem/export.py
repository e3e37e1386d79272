from __future__ import annotations

import json
from pathlib import Path

from ..dataset import ProductProfile
from ..errors import RecordParseError
from .model import ConditionTag, EvidenceGraph, EvidencePage, Outlink, PageRole


def export_graph(graph: EvidenceGraph, directory: str | Path, *, header: dict | None = None) -> Path:
    """Write one ``<page_id>.md`` per page plus ``manifest.json``. Output is byte-stable."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for pid, page in graph.pages.items():
        (directory / f"{pid}.md").write_text(page.body, encoding="utf-8")
    manifest = {
        "condition": str(graph.condition),
        "product": graph.product.to_dict(),
        "entry_page_id": graph.entry_page_id,
        "pages": [graph.pages[pid].manifest_entry() for pid in graph.pages],
    }
    if header is not None:
        manifest["config"] = header
    (directory / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    return directory


def load_graph(directory: str | Path) -> EvidenceGraph:
    """Inverse of :func:`export_graph`."""
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        prod = manifest["product"]
        product = ProductProfile(prod["name"], prod["description"], tuple(tuple(a) for a in prod["attributes"]))
        pages = {}
        for entry in manifest["pages"]:
            pid = entry["page_id"]
            pages[pid] = EvidencePage(
                page_id=pid,
                role=PageRole(entry["role"]),
                title=entry["title"],
                url=entry["url"],
                body=(directory / f"{pid}.md").read_text(encoding="utf-8"),
                outlinks=tuple(Outlink(o["anchor"], o["url"], o["external"]) for o in entry["outlinks"]),
                attributes_echo=tuple(tuple(a) for a in entry["attributes_echo"]),
            )
        return EvidenceGraph(product, ConditionTag.parse(manifest["condition"]), manifest["entry_page_id"], pages)
    except (OSError, KeyError, ValueError, TypeError) as exc:
        raise RecordParseError(f"cannot load ecosystem from {directory}: {exc}", path=str(manifest_path)) from exc
