"""Workspace directory with a run manifest of parameters and content hashes."""
from __future__ import annotations

import hashlib
import json
import os
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Mapping, Optional, Sequence, Union

MANIFEST = "manifest.json"
ARTIFACTS = (
    "corpus.jsonl",
    "stopwords.json",
    "markers.json",
    "sections.json",
    "terms.json",
    "map.json",
    "map.dot",
    "convergence.csv",
)


class MissingInput(Exception):
    def __init__(self, stage: str, name: str):
        super().__init__(f"{stage}: missing {name}")
        self.stage = stage
        self.name = name


class UndeclaredAccess(Exception):
    """A stage touched an artifact it did not declare."""


def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


class Stage:
    def __init__(self, workspace: "Workspace", name: str, inputs: Sequence[str],
                 outputs: Sequence[str]):
        self.workspace = workspace
        self.name = name
        self.inputs = tuple(inputs)
        self.outputs = tuple(outputs)
        self._pending: dict[str, bytes] = {}
        self._hashes: dict[str, str] = {}

    def read_text(self, artifact: str) -> str:
        if artifact not in self.inputs:
            raise UndeclaredAccess(f"{self.name}: reads undeclared artifact {artifact}")
        data = self.workspace.path(artifact).read_bytes()
        self._hashes[artifact] = sha256(data)
        return data.decode("utf-8")

    def write_text(self, artifact: str, text: str) -> None:
        if artifact not in self.outputs:
            raise UndeclaredAccess(f"{self.name}: writes undeclared artifact {artifact}")
        self._pending[artifact] = text.encode("utf-8")


class Workspace:
    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)

    def path(self, artifact: str) -> Path:
        return self.root / artifact

    def exists(self, artifact: str) -> bool:
        return self.path(artifact).is_file()

    def manifest(self) -> dict:
        path = self.path(MANIFEST)
        if not path.is_file():
            return {"stages": {}}
        return json.loads(path.read_text(encoding="utf-8"))

    def _write_atomic(self, artifact: str, data: bytes) -> None:
        target = self.path(artifact)
        tmp = target.with_name(target.name + ".tmp")
        tmp.write_bytes(data)
        os.replace(tmp, target)

    @contextmanager
    def stage(self, name: str, inputs: Sequence[str], outputs: Sequence[str],
              params: Optional[Mapping] = None) -> Iterator[Stage]:
        """Run one stage; its outputs land on disk only if the body finishes."""
        for artifact in inputs:
            if not self.exists(artifact):
                raise MissingInput(name, artifact)
        ctx = Stage(self, name, inputs, outputs)
        yield ctx
        missing = [a for a in outputs if a not in ctx._pending]
        if missing:
            raise UndeclaredAccess(f"{name}: did not produce {', '.join(missing)}")
        self.root.mkdir(parents=True, exist_ok=True)
        for artifact in outputs:
            self._write_atomic(artifact, ctx._pending[artifact])
        manifest = self.manifest()
        manifest["stages"][name] = {
            "params": dict(sorted((params or {}).items())),
            "inputs": {a: ctx._hashes.get(a) or sha256(self.path(a).read_bytes()) for a in inputs},
            "outputs": {a: sha256(ctx._pending[a]) for a in outputs},
        }
        text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
        self._write_atomic(MANIFEST, text.encode("utf-8"))

    def hashes(self, artifacts: Sequence[str] = ARTIFACTS) -> dict[str, str]:
        return {a: sha256(self.path(a).read_bytes()) for a in artifacts if self.exists(a)}
