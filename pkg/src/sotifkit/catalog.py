"""File-based scenario data manager.

Layout under the catalog root::

    catalog.json            index: kind, id, relative path, sha256 digest
    ontologies/<id>.json
    scenarios/<id>.json
    tcs/<id>.json

Writers hold ``.catalog.lock``; every file is written to a temporary sibling
and renamed into place, so readers see either the old or the new index.
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional

from filelock import FileLock

from . import constraints, ontology, scenario
from .errors import DigestMismatch, DocumentSyntaxError, DuplicateId, NotFound, SotifError, ValidationFailed
from .report import Issue, has_errors

ONTOLOGY = "ONTOLOGY"
SCENARIO = "SCENARIO"
TC = "TC"
KINDS = {ONTOLOGY: "ontologies", SCENARIO: "scenarios", TC: "tcs"}

INDEX_NAME = "catalog.json"
LOCK_NAME = ".catalog.lock"
ENV_VAR = "SOTIF_CATALOG"
BUNDLED = Path(__file__).parent / "data" / "catalog"


def digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True, order=True)
class Entry:
    kind: str
    id: str
    path: str
    digest: str

    def to_dict(self):
        return {"kind": self.kind, "id": self.id, "path": self.path, "digest": self.digest}


def atomic_write(path: Path, data: bytes):
    """Write ``data`` next to ``path`` and rename it into place."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def default_root() -> Path:
    return Path(os.environ.get(ENV_VAR) or BUNDLED)


class Catalog:
    def __init__(self, root=None, ontology_id: Optional[str] = None):
        self.root = Path(root) if root is not None else default_root()
        self._ontology_id = ontology_id

    @property
    def index_path(self):
        return self.root / INDEX_NAME

    def _lock(self):
        return FileLock(str(self.root / LOCK_NAME))

    # index -----------------------------------------------------------------

    def entries(self) -> List[Entry]:
        if not self.index_path.exists():
            return []
        try:
            raw = json.loads(self.index_path.read_text(encoding="utf-8"))
            return sorted(Entry(**e) for e in raw["entries"])
        except (ValueError, KeyError, TypeError) as exc:
            raise DocumentSyntaxError(f"corrupt catalog index {self.index_path}: {exc}") from None

    def _write_index(self, entries):
        body = {"entries": [e.to_dict() for e in sorted(entries)]}
        atomic_write(self.index_path, (json.dumps(body, indent=2) + "\n").encode("utf-8"))

    def scan(self) -> List[Entry]:
        """Index entries recomputed from the files on disk."""
        out = []
        for kind, sub in KINDS.items():
            folder = self.root / sub
            if not folder.is_dir():
                continue
            for f in sorted(folder.glob("*.json")):
                out.append(Entry(kind, f.stem, f"{sub}/{f.name}", digest(f.read_bytes())))
        return sorted(out)

    def rebuild(self) -> List[Entry]:
        self.root.mkdir(parents=True, exist_ok=True)
        with self._lock():
            entries = self.scan()
            self._write_index(entries)
        return entries

    def find(self, kind, ident) -> Entry:
        for e in self.entries():
            if e.kind == kind and e.id == ident:
                return e
        raise NotFound(f"no {kind} {ident!r} in catalog {self.root}")

    # reading ---------------------------------------------------------------

    def read(self, kind, ident) -> bytes:
        entry = self.find(kind, ident)
        path = (self.root / entry.path).resolve()
        if self.root.resolve() not in path.parents:
            raise DigestMismatch(f"{entry.path} escapes the catalog root")
        try:
            data = path.read_bytes()
        except FileNotFoundError:
            raise NotFound(f"{kind} {ident!r} is indexed but {entry.path} is missing") from None
        if digest(data) != entry.digest:
            raise DigestMismatch(f"{entry.path}: content digest does not match the index")
        return data

    def get(self, kind, ident):
        data = self.read(kind, ident)
        if kind == ONTOLOGY:
            return ontology.load_ontology(data)
        if kind == SCENARIO:
            return scenario.load_scenario(data)
        if kind == TC:
            return constraints.load_tc(data)
        raise ValueError(f"unknown kind {kind!r}")

    def list(self, kind=None, odd_tag=None, layer_kind=None, predicate: Optional[Callable] = None) -> List[Entry]:
        """Entries sorted by id; scenario filters parse the stored files."""
        out = []
        for e in self.entries():
            if kind is not None and e.kind != kind:
                continue
            if odd_tag is not None or layer_kind is not None or predicate is not None:
                if e.kind != SCENARIO:
                    continue
                s = self.get(SCENARIO, e.id)
                if odd_tag is not None and odd_tag not in s.odd_tags:
                    continue
                if layer_kind is not None and not any(el.kind == layer_kind for el in s.elements()):
                    continue
                if predicate is not None and not predicate(s):
                    continue
            out.append(e)
        return sorted(out, key=lambda e: (e.id, e.kind))

    def ontology(self):
        if self._ontology_id is not None:
            return self.get(ONTOLOGY, self._ontology_id)
        ids = sorted(e.id for e in self.entries() if e.kind == ONTOLOGY)
        if not ids:
            raise NotFound(f"catalog {self.root} holds no ontology")
        return self.get(ONTOLOGY, "default" if "default" in ids else ids[0])

    def tc_lookup(self, ident):
        return self.get(TC, ident)

    # writing ---------------------------------------------------------------

    def _parse_and_validate(self, kind, document):
        try:
            if kind == ONTOLOGY:
                obj = ontology.load_ontology(document)
                return obj, obj, ontology.validate_ontology(obj)
            if kind == SCENARIO:
                obj = scenario.load_scenario(document)
                return obj, obj.id, scenario.validate_scenario(obj, self.ontology())
            if kind == TC:
                obj = constraints.load_tc(document)
                known = {e.id for e in self.entries() if e.kind == TC}
                return obj, obj.id, constraints.validate_tc(obj, self.ontology(), known)
        except SotifError as exc:
            if isinstance(exc, NotFound):
                raise
            report = [Issue(getattr(exc, "entity", None) or "<document>", str(exc))]
            raise ValidationFailed(f"{kind} document does not validate", report) from exc
        raise ValueError(f"unknown kind {kind!r}")

    def add(self, kind, document, ident: Optional[str] = None) -> Entry:
        if isinstance(document, str):
            document = document.encode("utf-8")
        obj, own_id, report = self._parse_and_validate(kind, document)
        if has_errors(report):
            raise ValidationFailed(f"{kind} document does not validate", report)
        if kind == ONTOLOGY:
            if ident is None:
                raise ValueError("ontologies need an explicit id")
        else:
            ident = own_id
        if not ontology.SEGMENT.fullmatch(ident.replace("-", "_")):
            raise ValueError(f"id {ident!r} is not usable as a file name")
        self.root.mkdir(parents=True, exist_ok=True)
        with self._lock():
            entries = self.entries()
            if any(e.kind == kind and e.id == ident for e in entries):
                raise DuplicateId(ident, f"{kind} id")
            rel = f"{KINDS[kind]}/{ident}.json"
            atomic_write(self.root / rel, document)
            entry = Entry(kind, ident, rel, digest(document))
            self._write_index(entries + [entry])
        return entry
