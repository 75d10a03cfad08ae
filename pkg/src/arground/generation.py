"""Uniform interface to text-generation backends.

Four backends share one ``generate(request) -> GenerationRecord`` surface:

* ``HttpBackend``   - chat-completion wire format over HTTPS, with retry,
                      exponential backoff, and a per-request timeout.
* ``MockBackend``   - deterministic scripted queue, for tests and demos.
* ``ReplayBackend`` - serves recorded outputs keyed by request content
                      hash; any pipeline run on replay is a pure function
                      of its inputs.
* ``RecordBackend`` - wraps another backend and appends every record to a
                      JSONL log (single-writer, lock-serialized).

Requests are keyed by a hash of (prompt, temperature, n_samples,
max_tokens), not by sequence number, so replay tolerates request
reordering under concurrency.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import AuthError, BackendError, LogCorrupt, ReplayMiss

DEFAULT_BASE_URL = "https://api.openai.com/v1"
DEFAULT_TIMEOUT = 60.0
DEFAULT_RETRIES = 3
DEFAULT_BACKOFF = 0.5
DEFAULT_IN_FLIGHT = 4

ENV_API_KEY = "ARGROUND_API_KEY"
ENV_BASE_URL = "ARGROUND_BASE_URL"
ENV_MODEL = "ARGROUND_MODEL"


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    temperature: float = 0.0
    max_tokens: int = 256
    n_samples: int = 1
    stop_sequences: tuple[str, ...] = ()
    tag: str = ""

    def __post_init__(self):
        object.__setattr__(self, "stop_sequences", tuple(self.stop_sequences))
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")


@dataclass(frozen=True)
class GenerationRecord:
    request: GenerationRequest
    outputs: tuple[str, ...]
    backend_id: str
    timestamp: float = 0.0
    latency: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "outputs", tuple(self.outputs))


def request_key(request: GenerationRequest) -> str:
    """Content hash used to index record logs (stop/tag intentionally excluded)."""
    payload = json.dumps(
        {
            "prompt": request.prompt,
            "temperature": request.temperature,
            "n_samples": request.n_samples,
            "max_tokens": request.max_tokens,
        },
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def record_to_obj(record: GenerationRecord) -> dict:
    return {
        "request": {
            "prompt": record.request.prompt,
            "temperature": record.request.temperature,
            "max_tokens": record.request.max_tokens,
            "n_samples": record.request.n_samples,
            "stop_sequences": list(record.request.stop_sequences),
            "tag": record.request.tag,
        },
        "outputs": list(record.outputs),
        "backend_id": record.backend_id,
        "timestamp": record.timestamp,
        "latency": record.latency,
    }


def record_from_obj(obj: dict) -> GenerationRecord:
    req = obj["request"]
    request = GenerationRequest(
        prompt=req["prompt"],
        temperature=float(req["temperature"]),
        max_tokens=int(req["max_tokens"]),
        n_samples=int(req["n_samples"]),
        stop_sequences=tuple(req.get("stop_sequences", ())),
        tag=req.get("tag", ""),
    )
    return GenerationRecord(
        request=request,
        outputs=tuple(obj["outputs"]),
        backend_id=obj.get("backend_id", "unknown"),
        timestamp=float(obj.get("timestamp", 0.0)),
        latency=float(obj.get("latency", 0.0)),
    )


class GenerationBackend:
    """Interface shared by all backends; safe to share across workers."""

    backend_id: str = "backend"

    def generate(self, request: GenerationRequest) -> GenerationRecord:
        raise NotImplementedError


class MockBackend(GenerationBackend):
    """Pops scripted outputs in order; raises when the script runs dry.

    The queue is positional, so run mock-backed pipelines with an in-flight
    bound of 1 when reproducibility matters.
    """

    backend_id = "mock"

    def __init__(self, outputs):
        self._outputs = list(outputs)
        self._lock = threading.Lock()

    @classmethod
    def from_script(cls, path) -> "MockBackend":
        outputs = []
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = line.strip()
            if not line:
                continue
            try:
                value = json.loads(line)
            except json.JSONDecodeError as exc:
                raise BackendError(f"mock script line {lineno} is not JSON: {exc.msg}")
            if not isinstance(value, str):
                raise BackendError(f"mock script line {lineno} must be a JSON string")
            outputs.append(value)
        return cls(outputs)

    def remaining(self) -> int:
        with self._lock:
            return len(self._outputs)

    def generate(self, request: GenerationRequest) -> GenerationRecord:
        start = time.monotonic()
        with self._lock:
            if len(self._outputs) < request.n_samples:
                raise BackendError(
                    f"mock script exhausted: {len(self._outputs)} outputs left, "
                    f"{request.n_samples} requested"
                )
            outputs = tuple(self._outputs[: request.n_samples])
            del self._outputs[: request.n_samples]
        return GenerationRecord(
            request=request,
            outputs=outputs,
            backend_id=self.backend_id,
            timestamp=time.time(),
            latency=time.monotonic() - start,
        )


class HttpBackend(GenerationBackend):
    """Chat-completion client: POST {base}/chat/completions.

    Reads ARGROUND_API_KEY / ARGROUND_BASE_URL / ARGROUND_MODEL; a profile
    string other than "default" overrides the model name. Transient
    failures (connection errors, 429, 5xx) are retried with exponential
    backoff; auth failures are not retried.
    """

    backend_id = "http"

    def __init__(
        self,
        profile: str = "default",
        base_url: str | None = None,
        api_key: str | None = None,
        model: str | None = None,
        timeout: float = DEFAULT_TIMEOUT,
        retries: int = DEFAULT_RETRIES,
        backoff: float = DEFAULT_BACKOFF,
    ):
        self.base_url = (base_url or os.environ.get(ENV_BASE_URL) or DEFAULT_BASE_URL).rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_API_KEY, "")
        env_model = os.environ.get(ENV_MODEL, "")
        if model:
            self.model = model
        elif profile and profile != "default":
            self.model = profile
        else:
            self.model = env_model
        if not self.api_key:
            raise AuthError(f"{ENV_API_KEY} is not set")
        if not self.model:
            raise BackendError(f"no model configured (set {ENV_MODEL} or use http:<model>)")
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.backend_id = f"http:{self.model}"

    def _post(self, payload: dict):
        import requests

        return requests.post(
            f"{self.base_url}/chat/completions",
            json=payload,
            headers={"Authorization": f"Bearer {self.api_key}"},
            timeout=self.timeout,
        )

    def generate(self, request: GenerationRequest) -> GenerationRecord:
        import requests

        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "n": request.n_samples,
            "max_tokens": request.max_tokens,
        }
        if request.stop_sequences:
            payload["stop"] = list(request.stop_sequences)

        start = time.monotonic()
        last_error: str = ""
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                response = self._post(payload)
            except requests.RequestException as exc:
                last_error = f"connection error: {exc}"
                continue
            if response.status_code in (401, 403):
                raise AuthError(f"authentication failed (HTTP {response.status_code})")
            if response.status_code == 429 or response.status_code >= 500:
                last_error = f"HTTP {response.status_code}"
                continue
            if not response.ok:
                raise BackendError(f"HTTP {response.status_code}: {response.text[:200]}")
            try:
                data = response.json()
                outputs = tuple(c["message"]["content"] for c in data["choices"])
            except (ValueError, KeyError, TypeError) as exc:
                raise BackendError(f"malformed completion response: {exc}")
            if len(outputs) != request.n_samples:
                raise BackendError(
                    f"backend returned {len(outputs)} outputs, expected {request.n_samples}"
                )
            return GenerationRecord(
                request=request,
                outputs=outputs,
                backend_id=self.backend_id,
                timestamp=time.time(),
                latency=time.monotonic() - start,
            )
        raise BackendError(f"exhausted {self.retries} retries: {last_error}")


class ReplayBackend(GenerationBackend):
    """Serves outputs purely from a record log; read-only and freely concurrent."""

    backend_id = "replay"

    def __init__(self, index: dict[str, tuple[str, ...]]):
        self._index = index

    def generate(self, request: GenerationRequest) -> GenerationRecord:
        key = request_key(request)
        outputs = self._index.get(key)
        if outputs is None:
            raise ReplayMiss(f"no recorded response for request {key[:12]}... (tag={request.tag!r})")
        if len(outputs) < request.n_samples:
            raise ReplayMiss(
                f"recorded response for {key[:12]}... has {len(outputs)} outputs, "
                f"{request.n_samples} requested"
            )
        return GenerationRecord(
            request=request,
            outputs=outputs[: request.n_samples],
            backend_id=self.backend_id,
        )


def open_replay(path) -> ReplayBackend:
    """Index a record log by request content hash; first record wins per key."""
    index: dict[str, tuple[str, ...]] = {}
    offset = 0
    with open(path, "rb") as handle:
        for raw_line in handle:
            line = raw_line.strip()
            if line:
                try:
                    record = record_from_obj(json.loads(line.decode("utf-8")))
                except (ValueError, KeyError, TypeError) as exc:
                    raise LogCorrupt(f"unreadable record log entry: {exc}", offset=offset)
                index.setdefault(request_key(record.request), record.outputs)
            offset += len(raw_line)
    return ReplayBackend(index)


class RecordBackend(GenerationBackend):
    """Wraps a backend and appends every successful record to a JSONL sink."""

    def __init__(self, inner: GenerationBackend, path):
        self._inner = inner
        self._path = Path(path)
        self._lock = threading.Lock()
        self.backend_id = inner.backend_id

    def generate(self, request: GenerationRequest) -> GenerationRecord:
        record = self._inner.generate(request)
        line = json.dumps(record_to_obj(record), ensure_ascii=False)
        with self._lock:
            with open(self._path, "a", encoding="utf-8") as handle:
                handle.write(line + "\n")
        return record


def record_session(path, inner: GenerationBackend) -> RecordBackend:
    return RecordBackend(inner, path)


def backend_from_spec(spec: str) -> GenerationBackend:
    """Build a backend from ``http:<profile>``, ``mock:<script>``,
    ``replay:<log>``, or ``record:<log>`` (record wraps the default live
    backend)."""
    kind, sep, arg = spec.partition(":")
    if not sep:
        raise ValueError(f"backend spec {spec!r} must look like kind:argument")
    if kind == "http":
        return HttpBackend(profile=arg or "default")
    if kind == "mock":
        try:
            return MockBackend.from_script(arg)
        except OSError as exc:
            raise BackendError(f"cannot read mock script {arg!r}: {exc}")
    if kind == "replay":
        try:
            return open_replay(arg)
        except OSError as exc:
            raise BackendError(f"cannot read replay log {arg!r}: {exc}")
    if kind == "record":
        return record_session(arg, HttpBackend())
    raise ValueError(f"unknown backend kind {kind!r} (expected http|mock|replay|record)")
