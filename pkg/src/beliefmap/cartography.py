"""Belief map assembly: the place chain, per-group satellites, snippets, DOT/JSON output."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .alignment import Section
from .corpus import Corpus
from .extraction import TermTable

SNIPPET_LEN = 160
ELLIPSIS = "..."


@dataclass(frozen=True)
class PlaceNode:
    section: int
    label: tuple[str, ...]
    snippet: Optional[str] = None

    @property
    def label_text(self) -> str:
        return "-".join(self.label)


@dataclass(frozen=True)
class Satellite:
    section: int
    group_id: str
    terms: tuple[str, ...]
    snippet: Optional[str] = None


@dataclass(frozen=True)
class BeliefMap:
    places: tuple[PlaceNode, ...] = ()
    satellites: tuple[Satellite, ...] = ()

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(a.section, b.section) for a, b in zip(self.places, self.places[1:])]


def term_pattern(term: str) -> re.Pattern:
    return re.compile(r"(?<![^\W_])" + re.escape(term) + r"(?![^\W_])", re.IGNORECASE)


def find_snippet(
    c: Corpus,
    section: Section,
    group_ids: Iterable[str],
    terms: Sequence[str],
    max_len: int = SNIPPET_LEN,
) -> Optional[str]:
    """First bucket post that mentions every term, cut to ``max_len`` characters.

    Posts are scanned by group id, then seq. Terms must all appear in the part
    of the post that survives truncation.
    """
    if not terms:
        return None
    if max_len <= len(ELLIPSIS):
        raise ValueError("max_len must leave room for the ellipsis")
    patterns = [term_pattern(t) for t in terms]
    for group in sorted(group_ids):
        run = c.runs[group]
        for seq in section.buckets.get(group, ()):
            raw = run.by_seq[seq].raw_text
            kept = raw if len(raw) <= max_len else raw[: max_len - len(ELLIPSIS)]
            if all(p.search(kept) for p in patterns):
                return raw if kept is raw else kept + ELLIPSIS
    return None


def build_map(
    c: Corpus,
    sections: Sequence[Section],
    terms: TermTable,
    snippet_len: int = SNIPPET_LEN,
) -> BeliefMap:
    by_index = {s.index: s for s in sections}
    missing = [p.section for p in terms.places if p.section not in by_index]
    if missing or len(terms.places) != len(sections):
        raise ValueError("term profiles do not cover the sections")
    places, satellites = [], []
    for place in sorted(terms.places, key=lambda p: p.section):
        section = by_index[place.section]
        snippet = find_snippet(c, section, section.buckets, place.label, snippet_len)
        places.append(PlaceNode(place.section, tuple(place.label), snippet))
        for space in sorted(terms.spaces_for(place.section), key=lambda s: s.group_id):
            found = find_snippet(c, section, [space.group_id], space.terms, snippet_len)
            satellites.append(Satellite(place.section, space.group_id, tuple(space.terms), found))
    return BeliefMap(tuple(places), tuple(satellites))


def _quote(text: str) -> str:
    escaped = text.replace("\\", "\\\\").replace('"', '\\"')
    escaped = escaped.replace("\r\n", "\n").replace("\r", "\n").replace("\n", "\\n")
    return f'"{escaped}"'


def emit_dot(m: BeliefMap) -> str:
    """Render the map as a DOT digraph.

    Places are boxes chained with directed edges; satellites are ellipses
    hanging off their place with ``dir=none`` edges.
    """
    header = "// belief map: place chain with per-group space satellites\n"
    if not m.places and not m.satellites:
        return header + "digraph beliefmap { }\n"
    lines = [header + "digraph beliefmap {", "  rankdir=LR;"]
    for place in m.places:
        attrs = ["shape=box", f"label={_quote(place.label_text)}"]
        if place.snippet is not None:
            attrs.append(f"tooltip={_quote(place.snippet)}")
        lines.append(f"  p{place.section} [{', '.join(attrs)}];")
    for sat in m.satellites:
        text = sat.group_id + "\n" + ", ".join(sat.terms)
        attrs = ["shape=ellipse", f"label={_quote(text)}"]
        if sat.snippet is not None:
            attrs.append(f"tooltip={_quote(sat.snippet)}")
        lines.append(f"  {_quote(f's{sat.section}_{sat.group_id}')} [{', '.join(attrs)}];")
    for a, b in m.edges:
        lines.append(f"  p{a} -> p{b};")
    for sat in m.satellites:
        lines.append(f"  p{sat.section} -> {_quote(f's{sat.section}_{sat.group_id}')} [dir=none];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def map_to_dict(m: BeliefMap) -> dict:
    return {
        "places": [
            {"section": p.section, "label": list(p.label), "snippet": p.snippet}
            for p in m.places
        ],
        "satellites": [
            {"section": s.section, "group_id": s.group_id, "terms": list(s.terms),
             "snippet": s.snippet}
            for s in m.satellites
        ],
        "edges": [list(e) for e in m.edges],
    }


def emit_json(m: BeliefMap) -> str:
    return json.dumps(map_to_dict(m), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def load_json(text: str) -> BeliefMap:
    doc = json.loads(text)
    places = tuple(PlaceNode(p["section"], tuple(p["label"]), p["snippet"]) for p in doc["places"])
    sats = tuple(
        Satellite(s["section"], s["group_id"], tuple(s["terms"]), s["snippet"])
        for s in doc["satellites"]
    )
    return BeliefMap(places, sats)
