"""``beliefmap`` command line: stage-by-stage or end-to-end runs over a workspace.

Exit codes: 0 success, 1 internal error, 2 usage or missing input,
3 data validation failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from . import alignment, cartography, convergence, extraction, ingest, lexicon, syngen
from .corpus import Corpus, validate_corpus
from .workspace import MissingInput, UndeclaredAccess, Workspace

log = logging.getLogger("beliefmap")

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE, EXIT_DATA = 0, 1, 2, 3

DEFAULTS: dict[str, Any] = {
    "workspace": ".",
    "jobs": 1,
    "seed": None,
    "base": None,
    "game": None,
    "n_per_player": 1,
    "theta": 0.8,
    "min_tokens": 25,
    "dm_only": True,
    "depth": extraction.DEPTH,
    "label_k": extraction.LABEL_K,
    "space_k": extraction.SPACE_K,
    "players_only": False,
    "snippet_len": cartography.SNIPPET_LEN,
    "pairwise": False,
    "script": None,
}


class DataError(Exception):
    pass


class UsageError(Exception):
    pass


class Options:
    """Flag value if given, else config-file value, else built-in default."""

    def __init__(self, args: argparse.Namespace, config: dict):
        self._args = args
        self._config = config

    def __getattr__(self, key: str) -> Any:
        value = getattr(self._args, key, None)
        if value is not None:
            return value
        if key in self._config:
            return self._config[key]
        return DEFAULTS.get(key)


def _load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError(f"config {path} must hold an object")
    return {k.replace("-", "_"): v for k, v in doc.items()}


def _corpus(stage) -> Corpus:
    try:
        c = ingest.ingest_canonical(stage.read_text("corpus.jsonl").splitlines())
    except ingest.IngestError as exc:
        raise DataError(f"corpus.jsonl: {exc}") from None
    problems = validate_corpus(c)
    if problems:
        first = problems[0]
        raise DataError(f"invalid corpus ({len(problems)} violations, first: "
                        f"{first.group_id} {first.seq} {first.rule})")
    return c


def _stopword_files(opts: Options) -> tuple[Path, Optional[Path]]:
    base = Path(opts.base) if opts.base else lexicon.default_base_path()
    if opts.game == "none":
        return base, None
    game = Path(opts.game) if opts.game else lexicon.default_game_path()
    return base, game


def stage_stopwords(ws: Workspace, opts: Options) -> None:
    base, game = _stopword_files(opts)
    for path in (base, game):
        if path is not None and not path.is_file():
            raise MissingInput("stopwords", str(path))
    params = {"base": str(base), "game": str(game), "n_per_player": opts.n_per_player}
    with ws.stage("stopwords", ["corpus.jsonl"], ["stopwords.json"], params) as st:
        c = _corpus(st)
        cfg = lexicon.build_stopword_config(base, game, c, opts.n_per_player)
        st.write_text("stopwords.json", cfg.to_json())


def stage_align(ws: Workspace, opts: Options) -> None:
    params = {"theta": opts.theta, "min_tokens": opts.min_tokens, "dm_only": opts.dm_only}
    with ws.stage("align", ["corpus.jsonl"], ["markers.json", "sections.json"], params) as st:
        c = _corpus(st)
        try:
            markers = alignment.detect_markers(c, opts.theta, opts.min_tokens, opts.dm_only,
                                               opts.jobs)
            sections = alignment.section_corpus(c, markers)
        except alignment.AlignmentError as exc:
            raise DataError(str(exc)) from None
        st.write_text("markers.json", alignment.markers_to_json(markers))
        st.write_text("sections.json", alignment.sections_to_json(sections))


def stage_extract(ws: Workspace, opts: Options) -> None:
    params = {"depth": opts.depth, "label_k": opts.label_k, "space_k": opts.space_k,
              "players_only": opts.players_only}
    inputs = ["corpus.jsonl", "stopwords.json", "sections.json"]
    with ws.stage("extract", inputs, ["terms.json"], params) as st:
        c = _corpus(st)
        cfg = lexicon.StopWordConfig.from_json(st.read_text("stopwords.json"))
        sections = alignment.sections_from_json(st.read_text("sections.json"))
        table = extraction.extract_terms(c, sections, cfg, opts.depth, opts.label_k,
                                         opts.space_k, opts.players_only, opts.jobs)
        st.write_text("terms.json", table.to_json())


def stage_map(ws: Workspace, opts: Options) -> None:
    params = {"snippet_len": opts.snippet_len}
    inputs = ["corpus.jsonl", "sections.json", "terms.json"]
    with ws.stage("map", inputs, ["map.json", "map.dot"], params) as st:
        c = _corpus(st)
        sections = alignment.sections_from_json(st.read_text("sections.json"))
        table = extraction.TermTable.from_json(st.read_text("terms.json"))
        m = cartography.build_map(c, sections, table, opts.snippet_len)
        st.write_text("map.json", cartography.emit_json(m))
        st.write_text("map.dot", cartography.emit_dot(m))


def stage_converge(ws: Workspace, opts: Options) -> None:
    params = {"depth": opts.depth, "label_k": opts.label_k, "players_only": opts.players_only,
              "pairwise": opts.pairwise}
    inputs = ["corpus.jsonl", "stopwords.json", "markers.json"]
    outputs = ["convergence.csv", "convergence_summary.json"]
    with ws.stage("converge", inputs, outputs, params) as st:
        c = _corpus(st)
        cfg = lexicon.StopWordConfig.from_json(st.read_text("stopwords.json"))
        markers = alignment.markers_from_json(st.read_text("markers.json"))
        report = convergence.convergence_report(c, markers, cfg, opts.depth, opts.label_k,
                                                opts.players_only, opts.pairwise, opts.jobs)
        st.write_text("convergence.csv", report.to_csv())
        st.write_text("convergence_summary.json", report.summary_json())


def _load_script(opts: Options) -> syngen.DungeonScript:
    path = Path(opts.script) if opts.script else syngen.fixture_path()
    if not path.is_file():
        raise MissingInput("generate", str(path))
    try:
        return syngen.DungeonScript.load(path)
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise DataError(f"bad script {path}: {exc}") from None


def stage_generate(ws: Workspace, opts: Options, out: Optional[str] = None,
                   truth_path: Optional[str] = None) -> None:
    script = _load_script(opts)
    try:
        c, truth = syngen.generate(script, opts.seed)
    except syngen.ScriptError as exc:
        raise DataError(str(exc)) from None
    text = ingest.emit_canonical(c)
    if out is not None and Path(out).resolve() != ws.path("corpus.jsonl").resolve():
        Path(out).write_text(text, encoding="utf-8")
    else:
        params = {"script": script.name, "seed": truth.seed}
        with ws.stage("generate", [], ["corpus.jsonl"], params) as st:
            st.write_text("corpus.jsonl", text)
    if truth_path is not None:
        Path(truth_path).write_text(truth.to_json(), encoding="utf-8")


def cmd_ingest(ws: Workspace, opts: Options, args: argparse.Namespace) -> None:
    fmt = args.format
    source = Path(args.input)
    if not source.exists():
        raise MissingInput("ingest", str(source))
    try:
        if fmt == "canonical":
            c = ingest.read_corpus(source)
            runs = list(c)
        elif fmt == "chat-export":
            if not args.group:
                raise UsageError("ingest: --group is required for chat-export")
            users = ingest.UserMap.load(args.user_map) if args.user_map else ingest.UserMap({})
            runs = [ingest.ingest_chat_export(source, users, args.group)]
        else:
            runs = [ingest.ingest_bbs_csv(source, args.group)]
        out = Path(args.out) if args.out else ws.path("corpus.jsonl")
        meta: dict = {}
        if args.append and out.is_file():
            existing = ingest.read_corpus(out)
            meta = dict(existing.meta)
            runs = list(existing) + runs
        corpus = Corpus.from_runs(runs, meta)
    except (ingest.IngestError, ValueError) as exc:
        raise DataError(str(exc)) from None
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(ingest.emit_canonical(corpus), encoding="utf-8")
    print(f"ingest: {corpus.post_count()} posts in {len(corpus)} groups -> {out}")


def cmd_validate(ws: Workspace, opts: Options) -> int:
    path = ws.path("corpus.jsonl")
    if not path.is_file():
        raise MissingInput("validate", "corpus.jsonl")
    try:
        c = ingest.read_corpus(path)
    except ingest.IngestError as exc:
        raise DataError(str(exc)) from None
    problems = validate_corpus(c)
    for v in problems:
        print(f"{v.group_id}\t{'-' if v.seq is None else v.seq}\t{v.rule}")
    if problems:
        return EXIT_DATA
    print(f"validate: ok ({c.post_count()} posts, {len(c)} groups)")
    return EXIT_OK


PIPELINE = (
    ("stopwords", stage_stopwords),
    ("align", stage_align),
    ("extract", stage_extract),
    ("map", stage_map),
    ("converge", stage_converge),
)


def run_all(ws: Workspace, opts: Options, generate: bool = False) -> None:
    if generate:
        stage_generate(ws, opts)
    for _, fn in PIPELINE:
        fn(ws, opts)


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workspace", default=argparse.SUPPRESS, help="workspace directory")
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON file of parameters")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS,
                        help="worker threads inside a stage (1 disables parallelism)")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    return common


def _add_stopword_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--base", help="base stop list, one token per line")
    p.add_argument("--game", help="game-term list; 'none' to skip")
    p.add_argument("--n-per-player", type=int)


def _add_align_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--theta", type=float)
    p.add_argument("--min-tokens", type=int)
    p.add_argument("--dm-only", action=argparse.BooleanOptionalAction, default=None)


def _add_extract_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--depth", type=int)
    p.add_argument("--label-k", type=int)
    p.add_argument("--space-k", type=int)
    p.add_argument("--players-only", action="store_true", default=None)


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(prog="beliefmap", parents=[common],
                                     description="Belief maps from multi-group RPG transcripts.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="convert transcripts to corpus.jsonl")
    p.add_argument("--format", required=True, choices=["canonical", "chat-export", "bbs-csv"])
    p.add_argument("--input", required=True, help="file or export directory")
    p.add_argument("--group", help="group id for the ingested run")
    p.add_argument("--user-map", help="JSONL of {id, name, role}")
    p.add_argument("--out", help="output corpus (default: <workspace>/corpus.jsonl)")
    p.add_argument("--append", action="store_true", help="add to an existing corpus")

    _add_stopword_flags(sub.add_parser("stopwords", parents=[common], help="build stopwords.json"))
    _add_align_flags(sub.add_parser("align", parents=[common], help="detect markers, sections"))
    _add_extract_flags(sub.add_parser("extract", parents=[common], help="place/space terms"))
    p = sub.add_parser("map", parents=[common], help="emit map.json and map.dot")
    p.add_argument("--snippet-len", type=int)
    p = sub.add_parser("converge", parents=[common], help="subset convergence report")
    p.add_argument("--pairwise", action="store_true", default=None)
    p.add_argument("--depth", type=int)
    p.add_argument("--label-k", type=int)
    p.add_argument("--players-only", action="store_true", default=None)

    p = sub.add_parser("generate", parents=[common], help="synthetic corpus with ground truth")
    p.add_argument("--script", help="DungeonScript JSON (default: bundled Table-1 fixture)")
    p.add_argument("--out", help="corpus path (default: <workspace>/corpus.jsonl)")
    p.add_argument("--truth", help="where to write the ground truth JSON")

    p = sub.add_parser("run-all", parents=[common], help="every stage in order")
    p.add_argument("--generate", action="store_true", help="generate corpus.jsonl first")
    p.add_argument("--script")
    _add_stopword_flags(p)
    _add_align_flags(p)
    _add_extract_flags(p)
    p.add_argument("--snippet-len", type=int)
    p.add_argument("--pairwise", action="store_true", default=None)

    sub.add_parser("validate", parents=[common], help="check corpus.jsonl invariants")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    command = args.command
    try:
        opts = Options(args, _load_config(getattr(args, "config", None)))
        ws = Workspace(opts.workspace)
        if command == "ingest":
            cmd_ingest(ws, opts, args)
        elif command == "validate":
            return cmd_validate(ws, opts)
        elif command == "generate":
            stage_generate(ws, opts, args.out, args.truth)
        elif command == "run-all":
            run_all(ws, opts, args.generate)
        else:
            dict(PIPELINE)[command](ws, opts)
    except (MissingInput, UsageError) as exc:
        print(str(exc) if isinstance(exc, MissingInput) else f"{command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"{_stage_of(exc, command)}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except UndeclaredAccess as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - last-resort reporting
        log.debug("internal error", exc_info=True)
        print(f"{_stage_of(exc, command)}: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


def _stage_of(exc: BaseException, command: str) -> str:
    """Name of the pipeline stage whose frame raised ``exc``, else the command."""
    names = {fn.__name__: name for name, fn in PIPELINE}
    names["stage_generate"] = "generate"
    found = command
    tb = exc.__traceback__
    while tb is not None:
        found = names.get(tb.tb_frame.f_code.co_name, found)
        tb = tb.tb_next
    return found


if __name__ == "__main__":
    sys.exit(main())
