"""Transcript data model: posts, per-group runs and the corpus that holds them.

Everything here is immutable once built. ``norm_text`` is always derived
from ``raw_text`` so the two can never drift apart.
"""
from __future__ import annotations

import html
import re
import unicodedata
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Optional


class Role(str, Enum):
    DM = "dm"
    PLAYER = "player"
    BOT = "bot"

    @classmethod
    def parse(cls, value: str) -> "Role":
        try:
            return cls(value)
        except ValueError:
            raise ValueError(f"unknown role {value}") from None


# Inline formatting tags vanish without a trace; everything else becomes a space.
_INLINE_TAG = re.compile(
    r"</?(?:a|b|i|u|s|em|strong|span|font|small|big|sub|sup|strike|tt)\b[^>]*>",
    re.IGNORECASE,
)
_ANY_TAG = re.compile(r"<[^<>]*>")
_URL = re.compile(
    r"(?:\b[a-z][a-z0-9+.\-]*://|\bwww\.)\S*"
    r"|\b[a-z0-9\-]+(?:\.[a-z0-9\-]+)*\.[a-z]{2,}/\S*",
    re.IGNORECASE,
)
_OOC_OPEN = re.compile(r"\[\s*ooc\s*[:\-]\s*([^\[\]]*)\]", re.IGNORECASE)
_OOC_TAG = re.compile(r"\[\s*/?\s*ooc\s*\]", re.IGNORECASE)
_DOUBLE_PAREN = re.compile(r"\(\(|\)\)")
_BBCODE = re.compile(
    r"\[/?(?:b|i|u|s|color|size|font|url|quote|code|img)(?:=[^\[\]]*)?\]",
    re.IGNORECASE,
)
# A run of * or _ that is not sandwiched between two word characters.
_WRAPPER = re.compile(r"(?<![^\W_])[*_~]+|[*_~]+(?![^\W_])")
_SPACE = re.compile(r"\s+")


def _normalize_once(text: str) -> str:
    text = unicodedata.normalize("NFC", text)
    text = _INLINE_TAG.sub("", text)
    text = _ANY_TAG.sub(" ", text)
    text = html.unescape(text)
    text = _URL.sub(" ", text)
    text = _OOC_OPEN.sub(r" \1 ", text)
    text = _OOC_TAG.sub(" ", text)
    text = _DOUBLE_PAREN.sub(" ", text)
    text = _BBCODE.sub("", text)
    text = _WRAPPER.sub("", text)
    text = text.lower()
    return _SPACE.sub(" ", text).strip()


def normalize_text(raw: str) -> str:
    """Lowercase ``raw`` and strip HTML, links, OOC brackets and emphasis markup.

    Each pass can expose new markup (``&lt;b&gt;`` unescapes into a tag), so
    passes repeat until the text stops changing. That makes the function
    idempotent by construction.
    """
    text = raw
    while True:
        nxt = _normalize_once(text)
        if nxt == text:
            return text
        text = nxt


@dataclass(frozen=True)
class Post:
    group_id: str
    seq: int
    author: str
    role: Role
    raw_text: str
    timestamp: Optional[str] = None
    norm_text: str = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not isinstance(self.role, Role):
            object.__setattr__(self, "role", Role.parse(self.role))
        object.__setattr__(self, "norm_text", normalize_text(self.raw_text))

    def to_record(self) -> dict:
        record = {
            "group_id": self.group_id,
            "seq": self.seq,
            "author": self.author,
            "role": self.role.value,
            "text": self.raw_text,
        }
        if self.timestamp is not None:
            record["timestamp"] = self.timestamp
        return record


@dataclass(frozen=True)
class GroupRun:
    group_id: str
    posts: tuple[Post, ...]
    dm_name: str
    player_names: frozenset[str]

    @classmethod
    def from_posts(cls, group_id: str, posts: Iterable[Post]) -> "GroupRun":
        """Build a run, sorting by seq and deriving the DM and player names."""
        ordered = tuple(sorted(posts, key=lambda p: p.seq))
        dm_name = next((p.author for p in ordered if p.role is Role.DM), "")
        players = frozenset(p.author for p in ordered if p.role is Role.PLAYER)
        return cls(group_id, ordered, dm_name, players)

    @cached_property
    def by_seq(self) -> dict[int, Post]:
        return {p.seq: p for p in self.posts}

    def __len__(self) -> int:
        return len(self.posts)


@dataclass(frozen=True)
class Corpus:
    runs: Mapping[str, GroupRun]
    meta: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "runs", {g: self.runs[g] for g in sorted(self.runs)})
        object.__setattr__(self, "meta", dict(self.meta))

    @classmethod
    def from_runs(cls, runs: Iterable[GroupRun], meta: Optional[Mapping] = None) -> "Corpus":
        table: dict[str, GroupRun] = {}
        for run in runs:
            if run.group_id in table:
                raise ValueError(f"duplicate group {run.group_id}")
            table[run.group_id] = run
        return cls(table, meta or {})

    @property
    def group_ids(self) -> list[str]:
        return list(self.runs)

    def __iter__(self) -> Iterator[GroupRun]:
        return iter(self.runs.values())

    def __len__(self) -> int:
        return len(self.runs)

    def post_count(self) -> int:
        return sum(len(run) for run in self)

    def restrict(self, group_ids: Iterable[str]) -> "Corpus":
        keep = set(group_ids)
        return Corpus({g: r for g, r in self.runs.items() if g in keep}, self.meta)


@dataclass(frozen=True)
class Violation:
    group_id: Optional[str]
    seq: Optional[int]
    rule: str


def validate_corpus(c: Corpus) -> list[Violation]:
    """Return every broken model invariant; an empty list means the corpus is sound."""
    found: list[Violation] = []
    if len(c.runs) == 0:
        found.append(Violation(None, None, "empty-corpus"))
    for key, run in c.runs.items():
        if key != run.group_id:
            found.append(Violation(key, None, "group-key-mismatch"))
        seen: set[int] = set()
        prev: Optional[int] = None
        for post in run.posts:
            if post.group_id != run.group_id:
                found.append(Violation(run.group_id, post.seq, "group-mismatch"))
            if post.seq < 0:
                found.append(Violation(run.group_id, post.seq, "negative-seq"))
            if post.seq in seen:
                found.append(Violation(run.group_id, post.seq, "duplicate-seq"))
            elif prev is not None and post.seq < prev:
                found.append(Violation(run.group_id, post.seq, "seq-order"))
            seen.add(post.seq)
            prev = post.seq
            if post.norm_text != normalize_text(post.raw_text):
                found.append(Violation(run.group_id, post.seq, "stale-norm-text"))
        dm_authors = {p.author for p in run.posts if p.role is Role.DM}
        if not dm_authors:
            found.append(Violation(run.group_id, None, "no-dm"))
        elif run.dm_name not in dm_authors:
            found.append(Violation(run.group_id, None, "dm-name"))
        for name in sorted(run.player_names):
            if not any(p.author == name and p.role is Role.PLAYER for p in run.posts):
                found.append(Violation(run.group_id, None, f"unknown-player:{name}"))
    return found
