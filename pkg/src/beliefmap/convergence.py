"""How much the map labels move when only a subset of groups is used."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence, Union

from .alignment import Marker, section_corpus
from .corpus import Corpus
from .extraction import DEPTH, LABEL_K, SectionCounts, place_profile
from .lexicon import StopWordConfig

LabelSets = list[frozenset[str]]


def subset_map_terms(
    c: Corpus,
    markers: Sequence[Marker],
    cfg: StopWordConfig,
    subset: Iterable[str],
    depth: int = DEPTH,
    label_k: int = LABEL_K,
    players_only: bool = False,
) -> LabelSets:
    """Per-section place labels recomputed from the buckets of ``subset`` alone.

    Markers come from the full corpus and are only narrowed to the subset.
    """
    groups = sorted(set(subset))
    if not groups:
        raise ValueError("subset must not be empty")
    sub = c.restrict(groups)
    sections = section_corpus(sub, [m.restrict(groups) for m in markers])
    counts = SectionCounts(sub, sections, cfg, players_only)
    return [frozenset(place_profile(counts, s.index, depth, label_k).label) for s in sections]


def map_difference(a: Sequence[frozenset], b: Sequence[frozenset]) -> int:
    """Term replacements needed to turn one label list into the other.

    Per section this is ceil(|A ^ B| / 2), summed over sections.
    """
    if len(a) != len(b):
        raise ValueError(f"section count mismatch: {len(a)} != {len(b)}")
    return sum(math.ceil(len(set(x) ^ set(y)) / 2) for x, y in zip(a, b))


@dataclass(frozen=True)
class ConvergenceRow:
    k: int
    subset: Union[tuple[str, ...], tuple[tuple[str, ...], tuple[str, ...]]]
    difference: int

    @property
    def subset_text(self) -> str:
        if self.subset and isinstance(self.subset[0], tuple):
            return "|".join("+".join(part) for part in self.subset)
        return "+".join(self.subset)


@dataclass(frozen=True)
class ConvergenceReport:
    rows: tuple[ConvergenceRow, ...]
    pairwise: bool = False
    aggregates: dict = field(init=False, compare=False)

    def __post_init__(self) -> None:
        by_k: dict[int, list[int]] = {}
        for row in self.rows:
            by_k.setdefault(row.k, []).append(row.difference)
        agg = {
            k: {"min": min(v), "mean": sum(v) / len(v), "max": max(v), "count": len(v)}
            for k, v in sorted(by_k.items())
        }
        object.__setattr__(self, "aggregates", agg)

    def mean(self, k: int) -> float:
        return self.aggregates[k]["mean"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["k", "subset", "difference"])
        for row in self.rows:
            writer.writerow([row.k, row.subset_text, row.difference])
        return buf.getvalue()

    def summary_json(self) -> str:
        doc = {
            "reference": "pairwise" if self.pairwise else "full",
            "aggregates": {str(k): v for k, v in self.aggregates.items()},
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def convergence_report(
    c: Corpus,
    markers: Sequence[Marker],
    cfg: StopWordConfig,
    depth: int = DEPTH,
    label_k: int = LABEL_K,
    players_only: bool = False,
    pairwise: bool = False,
    jobs: int = 1,
) -> ConvergenceReport:
    """Compare the labels of every non-empty group subset.

    By default each subset is measured against the full-corpus labels. With
    ``pairwise`` every two distinct subsets of the same size are compared
    instead, and the full set (which has no partner) is omitted.
    """
    groups = c.group_ids
    if len(groups) < 2:
        raise ValueError("convergence needs at least two groups")
    sections = section_corpus(c, markers)
    counts = SectionCounts(c, sections, cfg, players_only, jobs)

    def labels(subset: tuple[str, ...]) -> LabelSets:
        return [frozenset(place_profile(counts, s.index, depth, label_k, subset).label)
                for s in sections]

    subsets = [combo for k in range(1, len(groups) + 1) for combo in combinations(groups, k)]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            table = dict(zip(subsets, pool.map(labels, subsets)))
    else:
        table = {s: labels(s) for s in subsets}

    rows = []
    if pairwise:
        for k in range(1, len(groups)):
            same_size = [s for s in subsets if len(s) == k]
            for a, b in combinations(same_size, 2):
                rows.append(ConvergenceRow(k, (a, b), map_difference(table[a], table[b])))
    else:
        full = table[tuple(groups)]
        for subset in subsets:
            rows.append(ConvergenceRow(len(subset), subset, map_difference(table[subset], full)))
    return ConvergenceReport(tuple(rows), pairwise)
