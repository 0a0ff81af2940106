"""Seeded synthetic transcripts with known markers, place terms and space terms.

Randomness comes from SplitMix64 so a (script, seed) pair yields the same
corpus on any platform:

    state = (state + 0x9E3779B97F4A7C15) mod 2**64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2**64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) mod 2**64
    output z ^ (z >> 31)

Group ``i`` (0-based, script order) draws from its own stream seeded with
``seed ^ ((i + 1) * 0xD1B54A32D192ED03 mod 2**64)``. Bounded integers use
rejection sampling, weighted picks walk cumulative integer weights over the
tokens in ascending order.
"""
from __future__ import annotations

import json
from bisect import bisect_right
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta, timezone
from importlib import resources
from itertools import accumulate
from pathlib import Path
from typing import Mapping, Optional, Union

from .alignment import SHINGLE, post_similarity
from .corpus import Corpus, GroupRun, Post, Role, normalize_text
from .lexicon import name_tokens, tokenize

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
STREAM = 0xD1B54A32D192ED03
SENTENCE = 8
EPOCH = datetime(2018, 5, 1, 18, 0, tzinfo=timezone.utc)


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & MASK

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def between(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi]."""
        return lo + self.below(hi - lo + 1)


class WeightedVocab:
    def __init__(self, weights: Mapping[str, int]):
        self.tokens = sorted(t for t, w in weights.items() if w > 0)
        self.cumulative = list(accumulate(weights[t] for t in self.tokens))

    def draw(self, rng: SplitMix64) -> str:
        return self.tokens[bisect_right(self.cumulative, rng.below(self.cumulative[-1]))]


class ScriptError(ValueError):
    """A script that breaks one of the generator's preconditions; ``rule`` names it."""

    def __init__(self, rule: str, detail: str):
        super().__init__(f"{rule}: {detail}")
        self.rule = rule


@dataclass(frozen=True)
class GroupSpec:
    group_id: str
    dm_name: str
    player_names: tuple[str, ...]


@dataclass(frozen=True)
class SectionScript:
    marker_text: str
    place_vocab: Mapping[str, int]
    per_group_space_vocab: Mapping[str, Mapping[str, int]]
    posts_per_bucket: int


@dataclass(frozen=True)
class DungeonScript:
    sections: tuple[SectionScript, ...]
    groups: tuple[GroupSpec, ...]
    filler_vocab: Mapping[str, int]
    final_marker_text: str
    seed: int = 0
    name: str = "script"
    tokens_per_post: tuple[int, int] = (10, 20)
    bot_posts_per_bucket: int = 3
    decoys: bool = True
    decoy_similarity: float = 0.6
    chatter_posts: int = 3
    place_jitter: int = 0
    theta: float = 0.8
    min_tokens: int = 25
    label_k: int = 3
    space_k: int = 3

    @classmethod
    def from_dict(cls, d: Mapping) -> "DungeonScript":
        d = dict(d)
        d["sections"] = tuple(SectionScript(**s) for s in d["sections"])
        d["groups"] = tuple(
            GroupSpec(g["group_id"], g["dm_name"], tuple(g["player_names"])) for g in d["groups"]
        )
        if "tokens_per_post" in d:
            d["tokens_per_post"] = tuple(d["tokens_per_post"])
        return cls(**d)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "DungeonScript":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def marker_texts(self) -> list[str]:
        return [s.marker_text for s in self.sections] + [self.final_marker_text]


def fixture_path(name: str = "table1") -> Path:
    return Path(str(resources.files("beliefmap") / "data" / f"{name}_script.json"))


def load_fixture(name: str = "table1") -> DungeonScript:
    return DungeonScript.load(fixture_path(name))


@dataclass
class GroundTruth:
    markers: list[dict[str, int]] = field(default_factory=list)
    place_labels: list[list[str]] = field(default_factory=list)
    space_terms: list[dict[str, list[str]]] = field(default_factory=list)
    buckets: list[dict[str, list[int]]] = field(default_factory=list)
    decoys: dict[str, list[int]] = field(default_factory=dict)
    post_counts: dict[str, int] = field(default_factory=dict)
    seed: int = 0

    @property
    def total_posts(self) -> int:
        return sum(self.post_counts.values())

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "GroundTruth":
        return cls(**json.loads(text))


def _top(weights: Mapping[str, int], k: int) -> list[str]:
    return [t for t, _ in sorted(weights.items(), key=lambda kv: (-kv[1], kv[0]))[:k]]


def _check_vocab(rule: str, vocab: Mapping[str, int]) -> None:
    for token, weight in vocab.items():
        if tokenize(normalize_text(token)) != [token]:
            raise ScriptError(rule, f"{token!r} is not a single normalized token")
        if not isinstance(weight, int) or isinstance(weight, bool) or weight <= 0:
            raise ScriptError(rule, f"weight of {token!r} must be a positive integer")


def check_script(script: DungeonScript) -> None:
    """Raise ScriptError for the first violated precondition."""
    if not script.sections:
        raise ScriptError("no-sections", "script needs at least one section")
    if len(script.groups) < 2:
        raise ScriptError("groups", "script needs at least two groups")
    ids = [g.group_id for g in script.groups]
    if len(set(ids)) != len(ids):
        raise ScriptError("groups", "group ids must be unique")
    for g in script.groups:
        if not g.player_names:
            raise ScriptError("groups", f"group {g.group_id} has no players")
    lo, hi = script.tokens_per_post
    if not 1 <= lo <= hi:
        raise ScriptError("tokens-per-post", "need 1 <= lo <= hi")
    if not script.filler_vocab:
        raise ScriptError("filler-vocab", "filler vocabulary is empty")
    _check_vocab("filler-vocab", script.filler_vocab)
    max_filler = max(script.filler_vocab.values())

    texts = script.marker_texts
    for i, text in enumerate(texts):
        if len(tokenize(normalize_text(text))) < script.min_tokens:
            raise ScriptError("marker-length", f"marker {i} has fewer than {script.min_tokens} tokens")
    probes = [Post("probe", i, "dm", Role.DM, t) for i, t in enumerate(texts)]
    for i, a in enumerate(probes):
        for b in probes[i + 1:]:
            if post_similarity(a, b) >= script.theta:
                raise ScriptError("marker-similarity",
                                  f"markers {a.seq} and {b.seq} are too similar")

    names = set()
    for g in script.groups:
        for player in g.player_names:
            names |= name_tokens(player)
    for i, sec in enumerate(script.sections):
        if sec.posts_per_bucket < 0:
            raise ScriptError("posts-per-bucket", f"section {i} has a negative post count")
        _check_vocab("place-vocab", sec.place_vocab)
        if sec.place_vocab and min(sec.place_vocab.values()) < 2 * max_filler:
            raise ScriptError("place-dominance", f"section {i} place weight below 2x filler")
        unknown = set(sec.per_group_space_vocab) - set(ids)
        if unknown:
            raise ScriptError("space-vocab", f"section {i} names unknown groups {sorted(unknown)}")
        for group, vocab in sec.per_group_space_vocab.items():
            _check_vocab("space-vocab", vocab)
            if vocab and min(vocab.values()) < 2 * max_filler:
                raise ScriptError("space-dominance",
                                  f"section {i} group {group} space weight below 2x filler")
            if set(vocab) & (set(sec.place_vocab) | set(script.filler_vocab)):
                raise ScriptError("vocab-overlap", f"section {i} group {group} reuses a token")
        if set(sec.place_vocab) & set(script.filler_vocab):
            raise ScriptError("vocab-overlap", f"section {i} place vocab overlaps filler")
        all_vocab = set(sec.place_vocab) | set(script.filler_vocab)
        for vocab in sec.per_group_space_vocab.values():
            all_vocab |= set(vocab)
        if all_vocab & names:
            raise ScriptError("vocab-names", f"section {i} vocab contains a player name")


def _decoy_tokens(marker: list[str], target: float, tail: list[str]) -> list[str]:
    """Keep a marker prefix so the shingle Jaccard lands near ``target``.

    With equal lengths and s shared shingles out of S each, J = s / (2S - s).
    """
    total = len(marker) - SHINGLE + 1
    shared = round(2 * target * total / (1 + target))
    keep = shared + SHINGLE - 1
    return marker[:keep] + tail[: len(marker) - keep]


def _style(rng: SplitMix64, body: str) -> str:
    pick = rng.below(4)
    if pick == 1:
        return f"*{body}*"
    if pick == 2:
        return f'"{body}"'
    if pick == 3:
        return f"(( {body} ))"
    return body


def generate(script: DungeonScript, seed: Optional[int] = None) -> tuple[Corpus, GroundTruth]:
    check_script(script)
    seed = script.seed if seed is None else seed
    truth = GroundTruth(seed=seed)
    truth.markers = [{} for _ in script.marker_texts]
    truth.buckets = [{} for _ in script.sections]
    truth.place_labels = [_top(sec.place_vocab, script.label_k) for sec in script.sections]
    truth.space_terms = [
        {g.group_id: _top(sec.per_group_space_vocab.get(g.group_id, {}), script.space_k)
         for g in script.groups}
        for sec in script.sections
    ]
    filler = WeightedVocab(script.filler_vocab)
    lo, hi = script.tokens_per_post
    marker_tokens = [tokenize(normalize_text(t)) for t in script.marker_texts]

    runs = []
    for gi, spec in enumerate(script.groups):
        rng = SplitMix64(seed ^ (((gi + 1) * STREAM) & MASK))
        gid = spec.group_id
        posts: list[Post] = []

        def emit(author: str, role: Role, text: str) -> int:
            seq = len(posts)
            stamp = (EPOCH + timedelta(minutes=seq)).isoformat().replace("+00:00", "Z")
            posts.append(Post(gid, seq, author, role, text, stamp))
            return seq

        def player_post(vocab: WeightedVocab) -> int:
            name = spec.player_names[rng.below(len(spec.player_names))]
            words = [vocab.draw(rng) for _ in range(rng.between(lo, hi))]
            # Players narrate in the third person: the character name opens every sentence.
            sentences = [
                f"{name} {' '.join(words[i:i + SENTENCE])}."
                for i in range(0, len(words), SENTENCE)
            ]
            return emit(name, Role.PLAYER, _style(rng, " ".join(sentences)))

        def chatter() -> None:
            for _ in range(script.chatter_posts):
                player_post(filler)

        def marker(index: int) -> None:
            text = script.marker_texts[index]
            # Group-specific emphasis; normalization makes them identical again.
            raw = f"<b>{text}</b>" if gi % 2 else text
            truth.markers[index][gid] = emit(spec.dm_name, Role.DM, raw)

        chatter()
        for si, sec in enumerate(script.sections):
            marker(si)
            place = dict(sec.place_vocab)
            if script.place_jitter:
                j = script.place_jitter
                place = {t: max(1, w + rng.between(-j, j)) for t, w in place.items()}
            mixture = dict(script.filler_vocab)
            mixture.update(place)
            mixture.update(sec.per_group_space_vocab.get(gid, {}))
            vocab = WeightedVocab(mixture)

            n = sec.posts_per_bucket
            kinds = ["player"] * n + ["bot"] * script.bot_posts_per_bucket
            if script.decoys:
                kinds.append("decoy")
            # Fisher-Yates on the bucket's post kinds.
            for i in range(len(kinds) - 1, 0, -1):
                k = rng.below(i + 1)
                kinds[i], kinds[k] = kinds[k], kinds[i]
            bucket = []
            for kind in kinds:
                if kind == "player":
                    bucket.append(player_post(vocab))
                elif kind == "bot":
                    who = spec.player_names[rng.below(len(spec.player_names))]
                    emit("Dicebot", Role.BOT,
                         f"{who} rolls 1d20+{rng.between(0, 5)}: {rng.between(1, 20)} rolz.org/r{rng.next_u64() % 100000}")
                else:
                    tail = [filler.draw(rng) for _ in marker_tokens[si]]
                    words = _decoy_tokens(marker_tokens[si], script.decoy_similarity, tail)
                    seq = emit(spec.dm_name, Role.DM, " ".join(words) + ".")
                    truth.decoys.setdefault(gid, []).append(seq)
                    bucket.append(seq)
            truth.buckets[si][gid] = bucket
        marker(len(script.sections))
        chatter()

        runs.append(GroupRun.from_posts(gid, posts))
        truth.post_counts[gid] = len(posts)

    meta = {"generator": "beliefmap.syngen", "script": script.name, "seed": seed}
    return Corpus.from_runs(runs, meta), truth


def decoy_similarities(c: Corpus, truth: GroundTruth) -> list[float]:
    """Similarity of every planted decoy to its own group's preceding marker."""
    sims = []
    for gid, seqs in truth.decoys.items():
        run = c.runs[gid]
        anchors = sorted(m[gid] for m in truth.markers)
        for seq in seqs:
            before = max(a for a in anchors if a < seq)
            sims.append(post_similarity(run.by_seq[seq], run.by_seq[before]))
    return sims
