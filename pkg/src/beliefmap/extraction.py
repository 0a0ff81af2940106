"""Bag-of-words counting per bucket and the place/space term profiles built on it."""
from __future__ import annotations

import json
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .alignment import Section
from .corpus import Corpus, Role
from .lexicon import StopWordConfig, tokenize

DEPTH = 20
LABEL_K = 3
SPACE_K = 3


def rank(counts: Mapping[str, int], k: Optional[int] = None) -> list[tuple[str, int]]:
    """Terms by descending count, ties broken by ascending token."""
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked if k is None else ranked[:k]


def count_terms(
    c: Corpus,
    group_id: str,
    bucket: Iterable[int],
    cfg: StopWordConfig,
    players_only: bool = False,
) -> Counter:
    run = c.runs[group_id]
    counts: Counter = Counter()
    for seq in bucket:
        post = run.by_seq[seq]
        if post.role is Role.BOT or (players_only and post.role is not Role.PLAYER):
            continue
        counts.update(t for t in tokenize(post.norm_text) if not cfg.is_stopped(t))
    return counts


@dataclass(frozen=True)
class PlaceProfile:
    section: int
    ranked_terms: tuple[str, ...]
    counts: tuple[int, ...]
    label_k: int = LABEL_K

    @property
    def label(self) -> tuple[str, ...]:
        return self.ranked_terms[: self.label_k]

    @property
    def label_text(self) -> str:
        return "-".join(self.label)


@dataclass(frozen=True)
class SpaceProfile:
    section: int
    group_id: str
    terms: tuple[str, ...]
    counts: tuple[int, ...]


class SectionCounts:
    """Term counts for every (section, group) bucket, computed once and shared.

    Per-bucket counting is independent, so it runs on a thread pool when
    ``jobs > 1``; results are keyed, so scheduling cannot change them.
    """

    def __init__(self, c: Corpus, sections: Sequence[Section], cfg: StopWordConfig,
                 players_only: bool = False, jobs: int = 1):
        self.corpus = c
        self.sections = list(sections)
        keys = [(s.index, g) for s in self.sections for g in s.buckets if g in c.runs]
        by_index = {s.index: s for s in self.sections}

        def work(key):
            index, group = key
            return count_terms(c, group, by_index[index].buckets[group], cfg, players_only)

        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(work, keys))
        else:
            results = [work(k) for k in keys]
        self._counts: dict[tuple[int, str], Counter] = dict(zip(keys, results))

    def bucket(self, section: int, group_id: str) -> Counter:
        return self._counts.get((section, group_id), Counter())

    def groups(self, section: int) -> list[str]:
        return sorted(g for (s, g) in self._counts if s == section)

    def merged(self, section: int, group_ids: Optional[Iterable[str]] = None) -> Counter:
        chosen = self.groups(section) if group_ids is None else sorted(group_ids)
        total: Counter = Counter()
        for g in chosen:
            total.update(self.bucket(section, g))
        return total


def place_profile(counts: SectionCounts, section_index: int, depth: int = DEPTH,
                  label_k: int = LABEL_K, group_ids: Optional[Iterable[str]] = None) -> PlaceProfile:
    """Top ``depth`` terms of one section, summed over the chosen groups' buckets."""
    ranked = rank(counts.merged(section_index, group_ids), depth)
    return PlaceProfile(section_index, tuple(t for t, _ in ranked),
                        tuple(n for _, n in ranked), label_k)


def space_profile(counts: SectionCounts, section_index: int, group_id: str,
                  place: PlaceProfile, k: int = SPACE_K) -> SpaceProfile:
    """Top ``k`` terms of one group's bucket once every place term is removed."""
    if place.section != section_index:
        raise ValueError(f"place profile is for section {place.section}, not {section_index}")
    excluded = set(place.ranked_terms)
    bucket = counts.bucket(section_index, group_id)
    ranked = rank({t: n for t, n in bucket.items() if t not in excluded}, k)
    return SpaceProfile(section_index, group_id, tuple(t for t, _ in ranked),
                        tuple(n for _, n in ranked))


@dataclass(frozen=True)
class TermTable:
    places: tuple[PlaceProfile, ...]
    spaces: tuple[SpaceProfile, ...]

    def spaces_for(self, section: int) -> list[SpaceProfile]:
        return [s for s in self.spaces if s.section == section]

    def to_json(self) -> str:
        doc = []
        for place in self.places:
            doc.append({
                "index": place.section,
                "label": list(place.label),
                "label_k": place.label_k,
                "place_terms": [[t, n] for t, n in zip(place.ranked_terms, place.counts)],
                "spaces": {
                    s.group_id: [[t, n] for t, n in zip(s.terms, s.counts)]
                    for s in self.spaces_for(place.section)
                },
            })
        return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "TermTable":
        places, spaces = [], []
        for entry in json.loads(text):
            terms = entry["place_terms"]
            places.append(PlaceProfile(entry["index"], tuple(t for t, _ in terms),
                                       tuple(n for _, n in terms), entry["label_k"]))
            for group, pairs in sorted(entry["spaces"].items()):
                spaces.append(SpaceProfile(entry["index"], group, tuple(t for t, _ in pairs),
                                           tuple(n for _, n in pairs)))
        return cls(tuple(places), tuple(spaces))


def extract_terms(c: Corpus, sections: Sequence[Section], cfg: StopWordConfig,
                  depth: int = DEPTH, label_k: int = LABEL_K, space_k: int = SPACE_K,
                  players_only: bool = False, jobs: int = 1) -> TermTable:
    counts = SectionCounts(c, sections, cfg, players_only, jobs)
    places, spaces = [], []
    for section in sections:
        place = place_profile(counts, section.index, depth, label_k)
        places.append(place)
        for group in sorted(section.buckets):
            spaces.append(space_profile(counts, section.index, group, place, space_k))
    return TermTable(tuple(places), tuple(spaces))
