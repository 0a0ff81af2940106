"""Tokenizer and the layered stop-word configuration."""
from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Optional, Union

from .corpus import Corpus, Role, normalize_text

PathLike = Union[str, Path]

_WORD = re.compile(r"[^\W_]+")

DEFAULT_GUID_PATTERNS = (
    r"[0-9a-f]{8,}",
    r"(?=.*[^\W\d_])(?=(?:\D*\d){4}).*",
)


def tokenize(norm_text: str) -> list[str]:
    """Split on anything that is not a letter or digit.

    Single-character tokens and all-digit tokens are dropped; order is kept.
    """
    return [t for t in _WORD.findall(norm_text) if len(t) >= 2 and not t.isdigit()]


def read_word_list(path: PathLike) -> frozenset[str]:
    """One token per line; blank lines and ``#`` comments are skipped."""
    words = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            word = line.split("#", 1)[0].strip().lower()
            if word:
                words.add(word)
    return frozenset(words)


def default_base_path() -> Path:
    return Path(str(resources.files("beliefmap") / "data" / "english_stopwords.txt"))


def default_game_path() -> Path:
    return Path(str(resources.files("beliefmap") / "data" / "game_terms.txt"))


@dataclass(frozen=True)
class StopWordConfig:
    base: frozenset[str] = frozenset()
    game_terms: frozenset[str] = frozenset()
    guid_patterns: tuple[str, ...] = DEFAULT_GUID_PATTERNS
    per_player: Mapping[str, frozenset[str]] = field(default_factory=dict)
    n_per_player: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "base", frozenset(w.lower() for w in self.base))
        object.__setattr__(self, "game_terms", frozenset(w.lower() for w in self.game_terms))
        object.__setattr__(self, "guid_patterns", tuple(self.guid_patterns))
        players = {name: frozenset(w.lower() for w in words)
                   for name, words in sorted(self.per_player.items())}
        object.__setattr__(self, "per_player", players)
        if self.n_per_player < 0:
            raise ValueError("n_per_player must be non-negative")

    @cached_property
    def effective(self) -> frozenset[str]:
        words = set(self.base) | self.game_terms
        for player_words in self.per_player.values():
            words |= player_words
        return frozenset(words)

    @cached_property
    def _compiled(self) -> tuple[re.Pattern, ...]:
        return tuple(re.compile(p) for p in self.guid_patterns)

    def matches_guid(self, token: str) -> bool:
        return any(p.fullmatch(token) for p in self._compiled)

    @cached_property
    def _verdicts(self) -> dict[str, bool]:
        return {}

    def is_stopped(self, token: str) -> bool:
        verdict = self._verdicts.get(token)
        if verdict is None:
            verdict = token in self.effective or self.matches_guid(token)
            self._verdicts[token] = verdict
        return verdict

    def filter(self, tokens: Iterable[str]) -> list[str]:
        return [t for t in tokens if not self.is_stopped(t)]

    def to_json(self) -> str:
        doc = {
            "base": sorted(self.base),
            "game_terms": sorted(self.game_terms),
            "guid_patterns": list(self.guid_patterns),
            "per_player": {name: sorted(words) for name, words in self.per_player.items()},
            "n_per_player": self.n_per_player,
        }
        return json.dumps(doc, indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "StopWordConfig":
        doc = json.loads(text)
        return cls(
            base=frozenset(doc["base"]),
            game_terms=frozenset(doc["game_terms"]),
            guid_patterns=tuple(doc["guid_patterns"]),
            per_player={k: frozenset(v) for k, v in doc["per_player"].items()},
            n_per_player=int(doc["n_per_player"]),
        )


def name_tokens(name: str) -> set[str]:
    return set(tokenize(normalize_text(name)))


def build_player_stopwords(
    c: Corpus, n: int, prefilter: Optional[StopWordConfig] = None
) -> dict[str, frozenset[str]]:
    """Each player's ``n`` most frequent tokens plus the tokens of their display name.

    ``prefilter`` removes base, game and GUID tokens before counting; its own
    ``per_player`` table is ignored.
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if prefilter is None:
        prefilter = StopWordConfig()
    elif prefilter.per_player:
        prefilter = StopWordConfig(prefilter.base, prefilter.game_terms, prefilter.guid_patterns)

    counts: dict[str, Counter] = {}
    for run in c:
        for post in run.posts:
            if post.role is not Role.PLAYER:
                continue
            tally = counts.setdefault(post.author, Counter())
            tally.update(prefilter.filter(tokenize(post.norm_text)))

    result = {}
    for player in sorted(counts):
        ranked = sorted(counts[player].items(), key=lambda kv: (-kv[1], kv[0]))
        result[player] = frozenset(t for t, _ in ranked[:n]) | name_tokens(player)
    return result


def build_stopword_config(
    base_file: PathLike,
    game_file: Optional[PathLike],
    c: Corpus,
    n: int = 1,
    guid_patterns: Iterable[str] = DEFAULT_GUID_PATTERNS,
) -> StopWordConfig:
    try:
        base = read_word_list(base_file)
        game = read_word_list(game_file) if game_file is not None else frozenset()
    except OSError as exc:
        raise OSError(f"cannot read stop-word list: {exc}") from exc
    partial = StopWordConfig(base, game, tuple(guid_patterns), {}, n)
    players = build_player_stopwords(c, n, partial)
    return StopWordConfig(base, game, tuple(guid_patterns), players, n)
