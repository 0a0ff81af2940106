"""Cross-group marker detection and sectioning of runs between markers."""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .corpus import Corpus, Post, Role
from .lexicon import tokenize

SHINGLE = 5


class AlignmentError(ValueError):
    pass


@dataclass(frozen=True)
class Marker:
    index: int
    anchors: Mapping[str, int]
    canonical_text: str
    min_similarity: float

    def restrict(self, group_ids) -> "Marker":
        keep = set(group_ids)
        anchors = {g: s for g, s in self.anchors.items() if g in keep}
        return Marker(self.index, anchors, self.canonical_text, self.min_similarity)

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "anchors": dict(sorted(self.anchors.items())),
            "canonical_text": self.canonical_text,
            "min_similarity": self.min_similarity,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Marker":
        return cls(int(d["index"]), {g: int(s) for g, s in d["anchors"].items()},
                   d["canonical_text"], float(d["min_similarity"]))


@dataclass(frozen=True)
class Section:
    index: int
    buckets: Mapping[str, tuple[int, ...]]

    def to_dict(self) -> dict:
        return {"index": self.index,
                "buckets": {g: list(s) for g, s in sorted(self.buckets.items())}}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Section":
        return cls(int(d["index"]), {g: tuple(int(x) for x in s) for g, s in d["buckets"].items()})


def shingles(norm_text: str, size: int = SHINGLE) -> frozenset[tuple[str, ...]]:
    tokens = tokenize(norm_text)
    return frozenset(tuple(tokens[i:i + size]) for i in range(len(tokens) - size + 1))


def _similarity(a_text: str, a_sh: frozenset, b_text: str, b_sh: frozenset) -> float:
    if not a_sh or not b_sh:
        return 1.0 if a_text == b_text else 0.0
    return len(a_sh & b_sh) / len(a_sh | b_sh)


def post_similarity(a: Post, b: Post) -> float:
    """Jaccard similarity of the 5-token shingle sets of two posts.

    Posts too short to yield a shingle only match when their normalized text
    is identical.
    """
    return _similarity(a.norm_text, shingles(a.norm_text), b.norm_text, shingles(b.norm_text))


@dataclass(frozen=True)
class _Candidate:
    seq: int
    text: str
    sh: frozenset


def _candidates(c: Corpus, min_tokens: int, dm_only: bool) -> dict[str, list[_Candidate]]:
    found = {}
    for run in c:
        found[run.group_id] = [
            _Candidate(p.seq, p.norm_text, shingles(p.norm_text))
            for p in run.posts
            if (not dm_only or p.role is Role.DM)
            and p.role is not Role.BOT
            and len(tokenize(p.norm_text)) >= min_tokens
        ]
    return found


def _best_match(lead: _Candidate, pool: list[_Candidate], used: set[int], theta: float):
    best, best_sim = None, -1.0
    for cand in pool:
        if cand.seq in used:
            continue
        sim = _similarity(lead.text, lead.sh, cand.text, cand.sh)
        if sim >= theta and sim > best_sim:
            best, best_sim = cand, sim
    return best


def _longest_chain(clusters: list[dict[str, int]], groups: list[str]) -> list[int]:
    """Indices of the longest cluster chain whose anchors increase in every group.

    ``clusters`` arrive sorted by the lead group's anchor. Among chains of equal
    length the one with the smallest lead-group anchors wins; picking the
    earliest viable successor at each step yields exactly that chain.
    """
    n = len(clusters)

    def before(i: int, j: int) -> bool:
        return all(clusters[i][g] < clusters[j][g] for g in groups)

    length = [1] * n
    succ: list[Optional[int]] = [None] * n
    for i in range(n - 1, -1, -1):
        for j in range(i + 1, n):
            if before(i, j) and length[j] + 1 > length[i]:
                length[i], succ[i] = length[j] + 1, j
    if n == 0:
        return []
    best = max(length)
    chain = []
    node: Optional[int] = length.index(best)
    while node is not None:
        chain.append(node)
        node = succ[node]
    return chain


def detect_markers(
    c: Corpus,
    theta: float = 0.8,
    min_tokens: int = 25,
    dm_only: bool = True,
    jobs: int = 1,
) -> list[Marker]:
    """Find posts pasted (near-)verbatim into every group's run.

    Each eligible post of the lexicographically first group pulls its best
    unused match at or above ``theta`` from every other group. Clusters that
    miss a group or contain a pair below ``theta`` are dropped, then the
    longest order-consistent chain of clusters is kept.
    """
    groups = c.group_ids
    if len(groups) < 2:
        raise AlignmentError("marker detection needs at least two groups")
    cands = _candidates(c, min_tokens, dm_only)
    lead, others = groups[0], groups[1:]
    used: dict[str, set[int]] = {g: set() for g in others}

    clusters: list[tuple[dict[str, int], float, str]] = []
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        for head in cands[lead]:
            # Only the search is parallel; `used` is updated after all lookups return.
            matches = list(pool.map(lambda g: _best_match(head, cands[g], used[g], theta), others))
            if any(m is None for m in matches):
                continue
            members = [head, *matches]
            sims = [
                _similarity(a.text, a.sh, b.text, b.sh)
                for i, a in enumerate(members) for b in members[i + 1:]
            ]
            if min(sims) < theta:
                continue
            for g, m in zip(others, matches):
                used[g].add(m.seq)
            anchors = {lead: head.seq, **{g: m.seq for g, m in zip(others, matches)}}
            clusters.append((anchors, min(sims), head.text))

    chain = _longest_chain([a for a, _, _ in clusters], groups)
    if not chain:
        raise AlignmentError("no common markers")
    return [
        Marker(index, clusters[i][0], clusters[i][2], clusters[i][1])
        for index, i in enumerate(chain)
    ]


def section_corpus(c: Corpus, markers: Sequence[Marker]) -> list[Section]:
    """One bucket per group between each pair of consecutive markers; bot posts dropped."""
    if len(markers) < 2:
        raise AlignmentError("sectioning needs at least two markers")
    sections = []
    for i, (start, end) in enumerate(zip(markers, markers[1:])):
        buckets = {}
        for run in c:
            lo, hi = start.anchors[run.group_id], end.anchors[run.group_id]
            buckets[run.group_id] = tuple(
                p.seq for p in run.posts if lo < p.seq < hi and p.role is not Role.BOT
            )
        sections.append(Section(i, buckets))
    return sections


def markers_to_json(markers: Sequence[Marker]) -> str:
    return json.dumps([m.to_dict() for m in markers], indent=2, sort_keys=True,
                      ensure_ascii=False) + "\n"


def markers_from_json(text: str) -> list[Marker]:
    return [Marker.from_dict(d) for d in json.loads(text)]


def sections_to_json(sections: Sequence[Section]) -> str:
    return json.dumps([s.to_dict() for s in sections], indent=2, sort_keys=True) + "\n"


def sections_from_json(text: str) -> list[Section]:
    return [Section.from_dict(d) for d in json.loads(text)]
