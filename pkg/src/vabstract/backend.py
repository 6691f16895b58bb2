"""Chat-completion backends: a live OpenAI-compatible client and a
deterministic scripted mock, with retries, caching and token accounting.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

from .errors import (AuthenticationError, BackendError, MalformedResponseError,
                     NoScriptEntryError, RateLimitError)
from .problems import Stage

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RequestTag:
    task_id: str
    stage: Stage
    sample_index: int
    run_index: int


@dataclass(frozen=True)
class GenerationRequest:
    model_id: str
    prompt: str
    temperature: float = 0.6
    top_p: float = 0.99
    max_output_tokens: Optional[int] = None
    tag: Optional[RequestTag] = None

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature out of [0, 2]")
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError("top_p out of (0, 1]")

    def cache_key(self) -> str:
        tag = self.tag
        payload = json.dumps({
            "model_id": self.model_id,
            "prompt": self.prompt,
            "temperature": self.temperature,
            "top_p": self.top_p,
            "max_output_tokens": self.max_output_tokens,
            "sample_index": tag.sample_index if tag else None,
            "run_index": tag.run_index if tag else None,
        }, sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class GenerationResult:
    text: str
    input_tokens: int
    output_tokens: int
    model_id: str
    latency_ms: int = 0
    cached: bool = False

    def __post_init__(self):
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValueError("token counts must be non-negative")


class Backend:
    """Interface every backend implements. Thread-safe."""

    def complete(self, request: GenerationRequest) -> GenerationResult:
        raise NotImplementedError


def whitespace_token_count(text: str) -> int:
    return len(text.split())


@dataclass(frozen=True)
class ScriptEntry:
    """One canned response. Matches on (stage, task_id) or a prompt substring."""

    response: str
    stage: Optional[Stage] = None
    task_id: Optional[str] = None
    prompt_contains: Optional[str] = None
    fail_times: int = 0  # raise RateLimitError this many times first

    def matches(self, request: GenerationRequest) -> bool:
        if self.stage is not None or self.task_id is not None:
            tag = request.tag
            if tag is None:
                return False
            if self.stage is not None and tag.stage is not self.stage:
                return False
            if self.task_id is not None and tag.task_id != self.task_id:
                return False
        if self.prompt_contains is not None and \
                self.prompt_contains not in request.prompt:
            return False
        return True


class MockBackend(Backend):
    """Replays canned responses; token counts are whitespace token counts."""

    def __init__(self, script: List[ScriptEntry]):
        self.script = list(script)
        self._failures: Dict[int, int] = {}
        self._lock = threading.Lock()
        self.call_count = 0

    def complete(self, request: GenerationRequest) -> GenerationResult:
        with self._lock:
            self.call_count += 1
            for i, entry in enumerate(self.script):
                if entry.matches(request):
                    if entry.fail_times:
                        done = self._failures.get(i, 0)
                        if done < entry.fail_times:
                            self._failures[i] = done + 1
                            raise RateLimitError(
                                f"scripted transient failure {done + 1}")
                    return GenerationResult(
                        text=entry.response,
                        input_tokens=whitespace_token_count(request.prompt),
                        output_tokens=whitespace_token_count(entry.response),
                        model_id=request.model_id,
                    )
        tag = request.tag
        raise NoScriptEntryError(
            f"no script entry matches request "
            f"(stage={tag.stage.value if tag else '?'}, "
            f"task_id={tag.task_id if tag else '?'})")


def mock_from_script(script) -> MockBackend:
    """Build a mock backend from entries or plain dicts.

    Dict form: ``{"stage": "cls1", "task_id": "counter", "response": "..."}``
    with optional ``prompt_contains`` and ``fail_times``.
    """
    entries = []
    for item in script:
        if isinstance(item, ScriptEntry):
            entries.append(item)
            continue
        entries.append(ScriptEntry(
            response=item["response"],
            stage=Stage(item["stage"]) if item.get("stage") else None,
            task_id=item.get("task_id"),
            prompt_contains=item.get("prompt_contains"),
            fail_times=int(item.get("fail_times", 0)),
        ))
    return MockBackend(entries)


def mock_from_script_file(path) -> MockBackend:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = data.get("script", [])
    return mock_from_script(data)


class OpenAICompatBackend(Backend):
    """Minimal client for any chat-completions HTTP endpoint.

    Credentials are read from the named environment variable, never from
    configuration files.
    """

    def __init__(self, base_url: str, api_key_env: str = "OPENAI_API_KEY",
                 timeout: float = 120.0, session=None):
        self.base_url = base_url.rstrip("/")
        self.api_key_env = api_key_env
        self.timeout = timeout
        self._session = session

    def _get_session(self):
        if self._session is None:
            import requests
            self._session = requests.Session()
        return self._session

    def complete(self, request: GenerationRequest) -> GenerationResult:
        api_key = os.environ.get(self.api_key_env)
        if not api_key:
            raise AuthenticationError(
                f"environment variable {self.api_key_env} is not set")
        payload: Dict[str, Any] = {
            "model": request.model_id,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "top_p": request.top_p,
        }
        if request.max_output_tokens is not None:
            payload["max_tokens"] = request.max_output_tokens
        start = time.monotonic()
        resp = self._get_session().post(
            f"{self.base_url}/chat/completions",
            json=payload,
            headers={"Authorization": f"Bearer {api_key}"},
            timeout=self.timeout,
        )
        latency_ms = int((time.monotonic() - start) * 1000)
        if resp.status_code in (401, 403):
            raise AuthenticationError(f"provider rejected credentials "
                                      f"(HTTP {resp.status_code})")
        if resp.status_code == 429 or resp.status_code >= 500:
            raise RateLimitError(f"transient provider error "
                                 f"(HTTP {resp.status_code})")
        try:
            data = resp.json()
            text = data["choices"][0]["message"]["content"]
            usage = data.get("usage", {})
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise MalformedResponseError(
                f"cannot interpret provider response: {exc}",
                payload=resp.text)
        return GenerationResult(
            text=text,
            input_tokens=int(usage.get("prompt_tokens", 0)),
            output_tokens=int(usage.get("completion_tokens", 0)),
            model_id=request.model_id,
            latency_ms=latency_ms,
        )


class ResponseCache:
    """Content-addressed cache, in memory with optional disk persistence."""

    def __init__(self, directory=None):
        self.directory = Path(directory) if directory else None
        if self.directory:
            self.directory.mkdir(parents=True, exist_ok=True)
        self._memory: Dict[str, GenerationResult] = {}
        self._lock = threading.Lock()

    def get(self, key: str) -> Optional[GenerationResult]:
        with self._lock:
            if key in self._memory:
                return self._memory[key]
        if self.directory:
            path = self.directory / f"{key}.json"
            if path.exists():
                data = json.loads(path.read_text(encoding="utf-8"))
                result = GenerationResult(
                    text=data["text"],
                    input_tokens=data["input_tokens"],
                    output_tokens=data["output_tokens"],
                    model_id=data["model_id"],
                    latency_ms=data.get("latency_ms", 0),
                )
                with self._lock:
                    self._memory[key] = result
                return result
        return None

    def put(self, key: str, result: GenerationResult) -> None:
        with self._lock:
            self._memory[key] = result
            if self.directory:
                path = self.directory / f"{key}.json"
                path.write_text(json.dumps({
                    "text": result.text,
                    "input_tokens": result.input_tokens,
                    "output_tokens": result.output_tokens,
                    "model_id": result.model_id,
                    "latency_ms": result.latency_ms,
                }), encoding="utf-8")


@dataclass
class BackendHandle:
    """Backend plus retry and caching policy. Safe for concurrent use."""

    backend: Backend
    retry_cap: int = 3
    backoff_base: float = 0.5
    cache: Optional[ResponseCache] = None
    sleep: Callable[[float], None] = time.sleep

    def generate(self, request: GenerationRequest) -> GenerationResult:
        """One logical completion: cache lookup, retries, accounting.

        At most ``1 + retry_cap`` provider calls are made; only transient
        errors (rate limits, 5xx) are retried.
        """
        key = request.cache_key()
        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                return GenerationResult(
                    text=hit.text, input_tokens=hit.input_tokens,
                    output_tokens=hit.output_tokens, model_id=hit.model_id,
                    latency_ms=hit.latency_ms, cached=True)
        last_error: Optional[BackendError] = None
        for attempt in range(1 + self.retry_cap):
            try:
                result = self.backend.complete(request)
                if self.cache is not None:
                    self.cache.put(key, result)
                return result
            except (AuthenticationError, MalformedResponseError,
                    NoScriptEntryError):
                raise
            except RateLimitError as exc:
                last_error = exc
                if attempt < self.retry_cap:
                    delay = self.backoff_base * (2 ** attempt)
                    logger.warning("transient backend error (attempt %d): %s",
                                   attempt + 1, exc)
                    self.sleep(delay)
        assert last_error is not None
        raise last_error


def generate(handle: BackendHandle, request: GenerationRequest) -> GenerationResult:
    """Module-level convenience wrapper around BackendHandle.generate."""
    return handle.generate(request)
