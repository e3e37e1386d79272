"""Markdown link handling shared by page rendering, crawling and snippet cleaning."""

from __future__ import annotations

import re

# [anchor](url) or [anchor](url "title"); images (![...]) are excluded by the lookbehind.
INLINE_LINK_RE = re.compile(r'(?<!!)\[([^\[\]]*)\]\(\s*<?([^()\s<>]+)>?(?:\s+"[^"]*")?\s*\)')
IMAGE_RE = re.compile(r'!\[([^\[\]]*)\]\(\s*<?[^()\s<>]+>?(?:\s+"[^"]*")?\s*\)')
AUTOLINK_RE = re.compile(r"<(https?://[^>\s]+)>")


def extract_links(content: str) -> list[tuple[str, str]]:
    """Return ``(anchor, url)`` pairs in document order, first occurrence per url."""
    found: list[tuple[int, str, str]] = []
    for m in INLINE_LINK_RE.finditer(content):
        found.append((m.start(), m.group(1).strip(), m.group(2)))
    for m in AUTOLINK_RE.finditer(content):
        found.append((m.start(), m.group(1), m.group(1)))
    found.sort(key=lambda t: t[0])
    seen: set[str] = set()
    out = []
    for _, anchor, url in found:
        if url in seen:
            continue
        seen.add(url)
        out.append((anchor, url))
    return out


def link(anchor: str, url: str) -> str:
    anchor = anchor.replace("[", "(").replace("]", ")")
    return f"[{anchor}]({url})"


def strip_links(content: str) -> str:
    """Replace link syntax by its anchor text."""
    content = IMAGE_RE.sub(lambda m: m.group(1), content)
    content = INLINE_LINK_RE.sub(lambda m: m.group(1), content)
    return AUTOLINK_RE.sub(lambda m: m.group(1), content)
