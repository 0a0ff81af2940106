import random
from collections import Counter

import pytest

from beliefmap.alignment import Section
from beliefmap.corpus import Corpus, GroupRun, Post
from beliefmap.extraction import (
    PlaceProfile,
    SectionCounts,
    TermTable,
    count_terms,
    extract_terms,
    place_profile,
    rank,
    space_profile,
)
from beliefmap.lexicon import StopWordConfig, tokenize

from conftest import make_corpus

TABLE1_LABELS = [
    ("goblin", "orc", "stairs"),
    ("rope", "gate", "orb"),
    ("troll", "grogg", "box"),
    ("coins", "dragon", "barrier"),
]


def one_section(spec, cfg=StopWordConfig()):
    c = make_corpus(spec)
    section = Section(0, {g: tuple(range(len(rows))) for g, rows in spec.items()})
    return c, SectionCounts(c, [section], cfg)


def test_count_single_post():
    c = make_corpus({"g": [("Ann", "player", "goblin goblin orc")]})
    assert count_terms(c, "g", [0], StopWordConfig()) == {"goblin": 2, "orc": 1}


def test_count_all_stopped():
    c = make_corpus({"g": [("Ann", "player", "the d20 and a3f9c2d817")]})
    cfg = StopWordConfig(base={"the", "and"}, game_terms={"d20"})
    assert count_terms(c, "g", [0], cfg) == {}


def test_count_skips_bots_and_respects_players_only():
    c = make_corpus({"g": [("D", "dm", "vault"), ("Bot", "bot", "vault"), ("Ann", "player", "vault")]})
    assert count_terms(c, "g", [0, 1, 2], StopWordConfig()) == {"vault": 2}
    assert count_terms(c, "g", [0, 1, 2], StopWordConfig(), players_only=True) == {"vault": 1}


def test_count_matches_recount_on_fixture_bucket(table1_corpus, table1_sections, table1_cfg):
    bucket = table1_sections[1].buckets["g3"]
    assert len(bucket) >= 60
    posts = {p.seq: p for p in table1_corpus.runs["g3"].posts}
    oracle = Counter()
    for seq in bucket:
        for token in posts[seq].norm_text.split():
            token = "".join(ch for ch in token if ch.isalnum())
            if (len(token) >= 2 and not token.isdigit()
                    and token not in table1_cfg.effective and not table1_cfg.matches_guid(token)):
                oracle[token] += 1
    assert count_terms(table1_corpus, "g3", bucket, table1_cfg) == oracle


def test_rank_tie_rule():
    assert rank({"b": 1, "a": 1, "c": 2}) == [("c", 2), ("a", 1), ("b", 1)]
    assert rank({"b": 1, "a": 1}, 1) == [("a", 1)]


def test_place_tie_across_groups():
    _, counts = one_section({"g1": [("A", "player", "bb")], "g2": [("B", "player", "aa")]})
    assert place_profile(counts, 0).ranked_terms == ("aa", "bb")


def test_place_shorter_than_depth():
    _, counts = one_section({"g1": [("A", "player", "one two three")]})
    profile = place_profile(counts, 0, depth=20)
    assert len(profile.ranked_terms) == 3
    assert profile.label_text == "one-three-two"


def test_table1_labels(table1_terms):
    assert [p.label for p in table1_terms.places] == TABLE1_LABELS
    assert all(len(p.ranked_terms) == 20 for p in table1_terms.places)


def test_table1_labels_match_recount(table1_corpus, table1_sections, table1_cfg, table1_terms):
    for section, place in zip(table1_sections, table1_terms.places):
        total = Counter()
        for g, bucket in section.buckets.items():
            for seq in bucket:
                post = table1_corpus.runs[g].by_seq[seq]
                total.update(t for t in tokenize(post.norm_text) if not table1_cfg.is_stopped(t))
        top = sorted(total, key=lambda t: (-total[t], t))[:20]
        assert list(place.ranked_terms) == top


def test_space_excludes_place_terms():
    _, counts = one_section({"g": [("A", "player", "rope " * 5 + "gate " * 4 + "pit " * 3)]})
    place = PlaceProfile(0, ("gate",), (4,))
    assert space_profile(counts, 0, "g", place).terms == ("rope", "pit")


def test_space_empty_bucket():
    c = make_corpus({"g": [("A", "player", "x")]})
    counts = SectionCounts(c, [Section(0, {"g": ()})], StopWordConfig())
    place = place_profile(counts, 0)
    assert place.ranked_terms == ()
    assert space_profile(counts, 0, "g", place).terms == ()


def test_space_rejects_wrong_section():
    _, counts = one_section({"g": [("A", "player", "rope")]})
    with pytest.raises(ValueError):
        space_profile(counts, 0, "g", PlaceProfile(3, (), ()))


def test_planted_space_terms(table1_terms, table1_truth):
    g1 = [s for s in table1_terms.spaces_for(0) if s.group_id == "g1"][0]
    assert set(g1.terms) == {"sing", "parley", "key"}
    for section, truth in zip(range(4), table1_truth.space_terms):
        got = {s.group_id: set(s.terms) for s in table1_terms.spaces_for(section)}
        assert got == {g: set(t) for g, t in truth.items()}


def test_space_disjoint_from_place(table1_terms):
    for place in table1_terms.places:
        for space in table1_terms.spaces_for(place.section):
            assert not set(space.terms) & set(place.ranked_terms)


def rebuild(c, rename=lambda g: g, text_of=lambda post: post.raw_text, copies=1):
    runs = []
    for run in c:
        gid = rename(run.group_id)
        posts = [
            Post(gid, post.seq * copies + k, post.author, post.role, text_of(post), post.timestamp)
            for post in run.posts for k in range(copies)
        ]
        runs.append(GroupRun.from_posts(gid, posts))
    return Corpus.from_runs(runs)


def test_relabeling_and_shuffling_keep_place_ranking(table1_corpus, table1_sections, table1_cfg, table1_terms):
    rng = random.Random(1)
    rename = {"g1": "zz", "g2": "aa", "g3": "mm", "g4": "b", "g5": "q9"}
    # Shuffle texts inside every bucket: positions change, the bag does not.
    shuffled = {}
    for section in table1_sections:
        for g, bucket in section.buckets.items():
            texts = [table1_corpus.runs[g].by_seq[s].raw_text for s in bucket]
            rng.shuffle(texts)
            shuffled.update({(g, s): t for s, t in zip(bucket, texts)})
    c = rebuild(table1_corpus, rename=rename.get,
                text_of=lambda p: shuffled.get((p.group_id, p.seq), p.raw_text))
    sections = [Section(s.index, {rename[g]: b for g, b in s.buckets.items()}) for s in table1_sections]
    again = extract_terms(c, sections, table1_cfg)
    assert [p.ranked_terms for p in again.places] == [p.ranked_terms for p in table1_terms.places]


def test_doubling_posts_keeps_rankings(table1_corpus, table1_sections, table1_cfg, table1_terms):
    doubled = rebuild(table1_corpus, copies=2)
    sections = [
        Section(s.index, {g: tuple(x for seq in b for x in (2 * seq, 2 * seq + 1)) for g, b in s.buckets.items()})
        for s in table1_sections
    ]
    again = extract_terms(doubled, sections, table1_cfg)
    assert [p.ranked_terms for p in again.places] == [p.ranked_terms for p in table1_terms.places]
    assert [s.terms for s in again.spaces] == [s.terms for s in table1_terms.spaces]
    assert [tuple(2 * n for n in p.counts) for p in table1_terms.places] == [p.counts for p in again.places]


def test_parallel_counts_identical(table1_corpus, table1_sections, table1_cfg, table1_terms):
    assert extract_terms(table1_corpus, table1_sections, table1_cfg, jobs=4) == table1_terms


def test_term_table_json_round_trip(table1_terms):
    text = table1_terms.to_json()
    assert TermTable.from_json(text) == table1_terms
    assert TermTable.from_json(text).to_json() == text
