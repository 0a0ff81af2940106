from __future__ import annotations

from pathlib import Path

import pytest

from beliefmap.alignment import detect_markers, section_corpus
from beliefmap.corpus import Corpus, GroupRun, Post, Role
from beliefmap.extraction import extract_terms
from beliefmap.lexicon import build_stopword_config, default_base_path, default_game_path
from beliefmap.syngen import generate, load_fixture

FIXTURES = Path(__file__).parent / "fixtures"


def make_corpus(spec: dict[str, list[tuple]]) -> Corpus:
    """Build a corpus from {group: [(author, role, text), ...]} with seq = position."""
    runs = []
    for gid, rows in spec.items():
        posts = [Post(gid, i, a, Role(r), t) for i, (a, r, t) in enumerate(rows)]
        runs.append(GroupRun.from_posts(gid, posts))
    return Corpus.from_runs(runs)


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def table1_script():
    return load_fixture("table1")


@pytest.fixture(scope="session")
def table1(table1_script):
    return generate(table1_script)


@pytest.fixture(scope="session")
def table1_corpus(table1):
    return table1[0]


@pytest.fixture(scope="session")
def table1_truth(table1):
    return table1[1]


@pytest.fixture(scope="session")
def table1_cfg(table1_corpus):
    return build_stopword_config(default_base_path(), default_game_path(), table1_corpus, 1)


@pytest.fixture(scope="session")
def table1_markers(table1_corpus):
    return detect_markers(table1_corpus)


@pytest.fixture(scope="session")
def table1_sections(table1_corpus, table1_markers):
    return section_corpus(table1_corpus, table1_markers)


@pytest.fixture(scope="session")
def table1_terms(table1_corpus, table1_sections, table1_cfg):
    return extract_terms(table1_corpus, table1_sections, table1_cfg)
