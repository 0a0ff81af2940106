"""Readers for the canonical JSONL format, hosted-chat exports and BBS CSV dumps."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import IO, Iterable, Mapping, Optional, Union

from .corpus import Corpus, GroupRun, Post, Role

PathLike = Union[str, Path]

CANONICAL_FIELDS = ("group_id", "seq", "author", "role", "text")
BBS_COLUMNS = ("thread_id", "post_id", "author", "role", "timestamp", "body_html")


class IngestError(ValueError):
    """Input that cannot be turned into posts. Messages name the file or line."""


@dataclass(frozen=True)
class UserMap:
    entries: Mapping[str, tuple[str, Role]]

    def resolve(self, user_id: str) -> tuple[str, Role]:
        # Unknown users are players, never the DM.
        return self.entries.get(user_id, (user_id, Role.PLAYER))

    @classmethod
    def load(cls, path: PathLike) -> "UserMap":
        entries: dict[str, tuple[str, Role]] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    entries[str(rec["id"])] = (str(rec["name"]), Role.parse(rec["role"]))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise IngestError(f"{path}: line {lineno}: {exc}") from None
        return cls(entries)


def _parse_canonical_line(line: str, lineno: int) -> tuple[Optional[dict], Optional[Post]]:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise IngestError(f"line {lineno}: invalid JSON ({exc.msg})") from None
    if not isinstance(rec, dict):
        raise IngestError(f"line {lineno}: expected an object")
    if set(rec) == {"meta"}:
        if not isinstance(rec["meta"], dict):
            raise IngestError(f"line {lineno}: meta must be an object")
        return rec["meta"], None
    for name in CANONICAL_FIELDS:
        if name not in rec:
            raise IngestError(f"line {lineno}: missing field {name}")
    seq = rec["seq"]
    if not isinstance(seq, int) or isinstance(seq, bool) or seq < 0:
        raise IngestError(f"line {lineno}: seq must be a non-negative integer")
    for name in ("group_id", "author", "text"):
        if not isinstance(rec[name], str):
            raise IngestError(f"line {lineno}: {name} must be a string")
    timestamp = rec.get("timestamp")
    if timestamp is not None and not isinstance(timestamp, str):
        raise IngestError(f"line {lineno}: timestamp must be a string")
    try:
        role = Role.parse(rec["role"])
    except ValueError as exc:
        raise IngestError(f"line {lineno}: {exc}") from None
    return None, Post(rec["group_id"], seq, rec["author"], role, rec["text"], timestamp)


def ingest_canonical(lines: Iterable[str]) -> Corpus:
    """Parse canonical records (one JSON object per line) into a corpus.

    A line holding only ``{"meta": {...}}`` carries provenance and is merged
    into ``Corpus.meta``.
    """
    meta: dict = {}
    groups: dict[str, list[Post]] = {}
    seen: set[tuple[str, int]] = set()
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        extra, post = _parse_canonical_line(line, lineno)
        if extra is not None:
            meta.update(extra)
            continue
        key = (post.group_id, post.seq)
        if key in seen:
            raise IngestError(f"line {lineno}: duplicate seq {post.seq} in group {post.group_id}")
        seen.add(key)
        groups.setdefault(post.group_id, []).append(post)
    return Corpus.from_runs((GroupRun.from_posts(g, ps) for g, ps in groups.items()), meta)


def emit_canonical(c: Corpus) -> str:
    out = []
    if c.meta:
        out.append(json.dumps({"meta": c.meta}, ensure_ascii=False, sort_keys=True))
    for run in c:
        for post in run.posts:
            out.append(json.dumps(post.to_record(), ensure_ascii=False, sort_keys=True))
    return "".join(line + "\n" for line in out)


def read_corpus(path: PathLike) -> Corpus:
    with open(path, encoding="utf-8") as fh:
        return ingest_canonical(fh)


def write_corpus(c: Corpus, path: PathLike) -> None:
    Path(path).write_text(emit_canonical(c), encoding="utf-8")


def _ts_to_iso(ts: Decimal) -> str:
    micros = int((ts * 1_000_000).to_integral_value())
    moment = datetime(1970, 1, 1, tzinfo=timezone.utc) + timedelta(microseconds=micros)
    return moment.isoformat(timespec="microseconds").replace("+00:00", "Z")


def ingest_chat_export(directory: PathLike, user_map: UserMap, group_id: str) -> GroupRun:
    """Read a channel export: a directory of per-day JSON arrays of messages.

    Messages are ordered by ``ts``; equal timestamps keep file order (files
    sorted by name, then position inside the file).
    """
    root = Path(directory)
    if not root.is_dir():
        raise IngestError(f"{root}: not a directory")
    files = sorted(p for p in root.iterdir() if p.suffix == ".json")
    if not files:
        raise IngestError(f"{root}: no export files")

    staged = []
    for file_index, path in enumerate(files):
        try:
            messages = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise IngestError(f"{path.name}: unreadable ({exc})") from None
        if not isinstance(messages, list):
            raise IngestError(f"{path.name}: expected a message array")
        for msg_index, msg in enumerate(messages):
            where = f"{path.name}: message {msg_index}"
            if not isinstance(msg, dict):
                raise IngestError(f"{where}: expected an object")
            user = msg.get("user") or msg.get("bot_id") or msg.get("username")
            if user is None or "ts" not in msg or "text" not in msg:
                raise IngestError(f"{where}: needs ts, user and text")
            try:
                ts = Decimal(str(msg["ts"]))
            except InvalidOperation:
                raise IngestError(f"{where}: bad ts {msg['ts']!r}") from None
            staged.append((ts, file_index, msg_index, str(user), str(msg["text"])))

    staged.sort(key=lambda item: item[:3])
    posts = []
    for seq, (ts, _, _, user, text) in enumerate(staged):
        author, role = user_map.resolve(user)
        posts.append(Post(group_id, seq, author, role, text, _ts_to_iso(ts)))
    return GroupRun.from_posts(group_id, posts)


def ingest_bbs_csv(file: Union[PathLike, IO[str]], group_id: Optional[str] = None) -> GroupRun:
    """Read a forum dump with columns thread_id, post_id, author, role, timestamp, body_html.

    Posts are ordered by numeric ``post_id`` and renumbered 0..n-1. The group
    id defaults to the file's stem.
    """
    if hasattr(file, "read"):
        handle, name = file, getattr(file, "name", "<stream>")
        rows = _read_bbs_rows(handle, name)
    else:
        name = str(file)
        try:
            with open(file, encoding="utf-8", newline="") as handle:
                rows = _read_bbs_rows(handle, name)
        except OSError as exc:
            raise IngestError(f"{name}: unreadable ({exc})") from None
    if group_id is None:
        group_id = Path(name).stem

    staged = []
    for lineno, row in rows:
        try:
            post_id = int(row["post_id"])
        except ValueError:
            raise IngestError(f"{name}: line {lineno}: bad post_id {row['post_id']!r}") from None
        try:
            role = Role.parse(row["role"].strip().lower())
        except ValueError as exc:
            raise IngestError(f"{name}: line {lineno}: {exc}") from None
        staged.append((post_id, row["author"], role, row["body_html"], row["timestamp"] or None))
    staged.sort(key=lambda item: item[0])
    posts = [
        Post(group_id, seq, author, role, body, ts)
        for seq, (_, author, role, body, ts) in enumerate(staged)
    ]
    return GroupRun.from_posts(group_id, posts)


def _read_bbs_rows(handle: IO[str], name: str) -> list[tuple[int, dict]]:
    reader = csv.DictReader(handle)
    header = reader.fieldnames or []
    for column in BBS_COLUMNS:
        if column not in header:
            raise IngestError(f"{name}: missing column {column}")
    return [(reader.line_num, row) for row in reader]
