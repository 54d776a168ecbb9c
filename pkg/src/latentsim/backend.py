"""Backend: global document-frequency registry and secret-embedding lookups.

The backend only ever learns which words a user has used (never how often),
and which words a user wants vectors for. It never sees counts, tf-idf
scores, signatures, similarities, or who compares with whom.
"""
from __future__ import annotations

import json
import logging
import os
import tempfile
import threading
import urllib.error
import urllib.request
from collections import Counter
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Iterable, Protocol

import jsonschema

from .embedding import EmbeddingModel
from .errors import (
    BackendUnavailable,
    CorruptSnapshot,
    EmptyDocument,
    EmptySubmission,
    FormatError,
    ModelUnavailable,
)
from .relevance import DfVector, bow_from_document, user_df
from .textprep import PrepConfig, build_reference, read_history

log = logging.getLogger(__name__)

SNAPSHOT_VERSION = 1
SEED_PREFIX = "seed:"

_WORDS = {"type": "array", "items": {"type": "string", "minLength": 1}}
_COUNT = {"type": "integer", "minimum": 0}

# Request/response bodies exchanged with the backend. additionalProperties is
# false everywhere so nothing beyond these fields can cross the wire.
SCHEMAS: dict[str, dict] = {
    "df_request": {
        "type": "object",
        "properties": {"user_id": {"type": "string", "minLength": 1}, "words": {**_WORDS, "minItems": 1}},
        "required": ["user_id", "words"],
        "additionalProperties": False,
    },
    "df_response": {
        "type": "object",
        "properties": {
            "df": {"type": "object", "additionalProperties": {"type": "integer", "minimum": 1}},
            "num_users": _COUNT,
        },
        "required": ["df", "num_users"],
        "additionalProperties": False,
    },
    "vectors_request": {
        "type": "object",
        "properties": {"words": _WORDS},
        "required": ["words"],
        "additionalProperties": False,
    },
    "vectors_response": {
        "type": "object",
        "properties": {
            "dim": {"type": "integer", "minimum": 1},
            "vectors": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        },
        "required": ["dim", "vectors"],
        "additionalProperties": False,
    },
    "health_response": {
        "type": "object",
        "properties": {"num_users": _COUNT, "vocab_size": _COUNT},
        "required": ["num_users", "vocab_size"],
        "additionalProperties": False,
    },
}


def validate(kind: str, payload) -> None:
    try:
        jsonschema.validate(payload, SCHEMAS[kind])
    except jsonschema.ValidationError as exc:
        raise FormatError(f"{kind}: {exc.message}") from None


class Registry:
    """Per-user vocabularies and their aggregate document frequencies.

    Writes go through a single lock; every public method returns data that
    reflects one consistent state.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._words: dict[str, frozenset[str]] = {}
        self._df: Counter[str] = Counter()

    @property
    def num_users(self) -> int:
        return len(self._words)

    def submit_df(self, user_id: str, words: Iterable[str]) -> tuple[DfVector, int]:
        """Register (or replace) a user's vocabulary; return its truncated DF."""
        new = frozenset(words)
        if not new:
            raise EmptySubmission(f"user {user_id!r} submitted no words")
        with self._lock:
            old = self._words.get(user_id, frozenset())
            for w in old - new:
                self._df[w] -= 1
                if self._df[w] == 0:
                    del self._df[w]
            for w in new - old:
                self._df[w] += 1
            self._words[user_id] = new
            n = len(self._words)
            trunc = DfVector({w: self._df[w] for w in sorted(new)}, n)
        return trunc, n

    def global_df(self) -> DfVector:
        with self._lock:
            return DfVector(dict(self._df), len(self._words))

    def users(self) -> dict[str, frozenset[str]]:
        with self._lock:
            return dict(self._words)

    def health(self) -> dict:
        with self._lock:
            return {"num_users": len(self._words), "vocab_size": len(self._df)}

    def check_consistency(self) -> None:
        """Assert that the aggregate equals the sum of the per-user indicators."""
        with self._lock:
            expected = Counter(w for ws in self._words.values() for w in ws)
            if expected != self._df:
                raise AssertionError("global DF out of sync with per-user vocabularies")
            n = len(self._words)
            if any(c < 1 or c > n for c in self._df.values()):
                raise AssertionError("document frequency outside [1, num_users]")

    # persistence

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "version": SNAPSHOT_VERSION,
                "users": {u: sorted(ws) for u, ws in sorted(self._words.items())},
                "df": dict(sorted(self._df.items())),
            }

    @classmethod
    def restore(cls, data: dict) -> "Registry":
        if not isinstance(data, dict) or data.get("version") != SNAPSHOT_VERSION:
            raise CorruptSnapshot("missing or unsupported snapshot version")
        users = data.get("users")
        if not isinstance(users, dict):
            raise CorruptSnapshot("'users' must be an object")
        reg = cls()
        for user_id, words in users.items():
            if not isinstance(words, list) or not words or not all(isinstance(w, str) for w in words):
                raise CorruptSnapshot(f"bad vocabulary for user {user_id!r}")
            reg.submit_df(user_id, words)
        if "df" in data and dict(reg._df) != data["df"]:
            raise CorruptSnapshot("stored DF disagrees with the stored vocabularies")
        return reg

    def save(self, path: str | Path) -> None:
        path = Path(path)
        text = json.dumps(self.snapshot(), ensure_ascii=False, separators=(",", ":"))
        fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise

    @classmethod
    def load(cls, path: str | Path) -> "Registry":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CorruptSnapshot(f"{path}: {exc}") from None
        return cls.restore(data)


def seed_registry(
    registry: Registry | BackendClient,
    corpus_dir: str | Path,
    config: PrepConfig | None = None,
    errors: list[tuple[str, str]] | None = None,
) -> int:
    """Register one pseudo-user per readable seed document in *corpus_dir*.

    Unreadable or empty documents are skipped; they are logged and, when
    *errors* is given, appended to it as (filename, reason).
    """
    added = 0
    for path in sorted(Path(corpus_dir).iterdir()):
        if not path.is_file() or path.name.startswith("."):
            continue
        try:
            doc = build_reference(read_history(path), config, user_id=SEED_PREFIX + path.stem)
            registry.submit_df(doc.user_id, user_df(bow_from_document(doc)).df)
        except (OSError, UnicodeDecodeError, EmptyDocument, EmptySubmission) as exc:
            log.warning("skipping seed document %s: %s", path, exc)
            if errors is not None:
                errors.append((path.name, str(exc)))
            continue
        added += 1
    return added


class BackendClient(Protocol):
    def submit_df(self, user_id: str, words: Iterable[str]) -> tuple[DfVector, int]: ...

    def fetch_vectors(self, words: list[str]) -> list[list[float]]: ...


class LocalBackend:
    """In-process backend: the registry plus the secret model."""

    def __init__(self, registry: Registry | None = None, model: EmbeddingModel | None = None):
        self.registry = registry if registry is not None else Registry()
        self.model = model

    def submit_df(self, user_id: str, words: Iterable[str]) -> tuple[DfVector, int]:
        return self.registry.submit_df(user_id, words)

    def fetch_vectors(self, words: list[str]) -> list[list[float]]:
        if self.model is None:
            raise ModelUnavailable("no reference embedding loaded")
        return [self.model.vector(w).tolist() for w in words]

    # wire-level handlers shared with the HTTP server

    def handle_df(self, body: dict) -> dict:
        validate("df_request", body)
        trunc, n = self.submit_df(body["user_id"], body["words"])
        return {"df": trunc.df, "num_users": n}

    def handle_vectors(self, body: dict) -> dict:
        validate("vectors_request", body)
        if self.model is None:
            raise ModelUnavailable("no reference embedding loaded")
        return {"dim": self.model.dim, "vectors": self.fetch_vectors(body["words"])}

    def handle_health(self) -> dict:
        return self.registry.health()


class HttpBackend:
    """Client for the HTTP backend."""

    def __init__(self, base_url: str, timeout: float = 30.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def _call(self, method: str, path: str, body: dict | None = None) -> dict:
        data = None if body is None else json.dumps(body).encode("utf-8")
        req = urllib.request.Request(
            self.base_url + path, data=data, method=method,
            headers={"Content-Type": "application/json"},
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                return json.loads(resp.read().decode("utf-8"))
        except urllib.error.HTTPError as exc:
            detail = exc.read().decode("utf-8", "replace")
            if exc.code == HTTPStatus.SERVICE_UNAVAILABLE:
                raise ModelUnavailable(detail) from None
            if 400 <= exc.code < 500:
                raise FormatError(f"{path}: HTTP {exc.code}: {detail}") from None
            raise BackendUnavailable(f"{path}: HTTP {exc.code}: {detail}") from None
        except (urllib.error.URLError, OSError) as exc:
            raise BackendUnavailable(f"{self.base_url}: {exc}") from None

    def submit_df(self, user_id: str, words: Iterable[str]) -> tuple[DfVector, int]:
        body = {"user_id": user_id, "words": sorted(set(words))}
        validate("df_request", body)
        resp = self._call("POST", "/v1/df", body)
        validate("df_response", resp)
        return DfVector(resp["df"], resp["num_users"]), resp["num_users"]

    def fetch_vectors(self, words: list[str]) -> list[list[float]]:
        body = {"words": list(words)}
        resp = self._call("POST", "/v1/vectors", body)
        validate("vectors_response", resp)
        return resp["vectors"]

    def health(self) -> dict:
        resp = self._call("GET", "/v1/health")
        validate("health_response", resp)
        return resp


class _Handler(BaseHTTPRequestHandler):
    backend: LocalBackend  # set on the subclass built by make_server
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):
        log.debug("%s - %s", self.address_string(), fmt % args)

    def _reply(self, status: int, payload: dict) -> None:
        data = json.dumps(payload, ensure_ascii=False).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_GET(self):
        if self.path == "/v1/health":
            self._reply(HTTPStatus.OK, self.backend.handle_health())
        else:
            self._reply(HTTPStatus.NOT_FOUND, {"error": "not found"})

    def do_POST(self):
        routes = {"/v1/df": self.backend.handle_df, "/v1/vectors": self.backend.handle_vectors}
        handler = routes.get(self.path)
        length = int(self.headers.get("Content-Length") or 0)
        raw = self.rfile.read(length)
        if handler is None:
            self._reply(HTTPStatus.NOT_FOUND, {"error": "not found"})
            return
        try:
            body = json.loads(raw.decode("utf-8"))
            self._reply(HTTPStatus.OK, handler(body))
        except (json.JSONDecodeError, UnicodeDecodeError, FormatError, EmptySubmission) as exc:
            self._reply(HTTPStatus.BAD_REQUEST, {"error": str(exc)})
        except ModelUnavailable as exc:
            self._reply(HTTPStatus.SERVICE_UNAVAILABLE, {"error": str(exc)})


def make_server(backend: LocalBackend, host: str = "127.0.0.1", port: int = 8080) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"backend": backend})
    return ThreadingHTTPServer((host, port), handler)


class Snapshotter:
    """Periodically persist a registry from a background thread."""

    def __init__(self, registry: Registry, path: str | Path, interval: float):
        self.registry = registry
        self.path = Path(path)
        self.interval = interval
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, daemon=True)

    def _run(self):
        while not self._stop.wait(self.interval):
            self.registry.save(self.path)

    def start(self) -> "Snapshotter":
        if self.interval > 0:
            self._thread.start()
        return self

    def stop(self) -> None:
        self._stop.set()
        if self._thread.is_alive():
            self._thread.join()
        self.registry.save(self.path)
