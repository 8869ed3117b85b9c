"""External services: generation LLM, AMR parser, paraphraser.

Each service has an HTTP client and deterministic in-process stubs that
honour the same contract, so injection and detection run offline in tests.

LLM wire protocol: OpenAI-compatible ``POST <endpoint>/chat/completions``.
Parser wire protocol: ``POST <endpoint>/parse`` with ``{"sentences": [...]}``,
answered by ``{"penman": [...]}`` (``null`` or ``""`` for a failed parse).
"""

from __future__ import annotations

import hashlib
import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import httpx

from .amr import AmrGraph, parse_penman, serialize_penman
from .errors import (
    ParserUnavailable,
    PenmanSyntaxError,
    RateLimited,
    ServiceTimeout,
    TransportError,
    Unparseable,
)

log = logging.getLogger(__name__)

__all__ = [
    "LlmRequest",
    "ParserResult",
    "LlmClient",
    "AmrParser",
    "Paraphraser",
    "prompt_key",
    "ScriptedLlm",
    "CallbackLlm",
    "TemplateEchoLlm",
    "embed_amr",
    "template_from_prompt",
    "StubParser",
    "IdentityParaphraser",
    "TableParaphraser",
    "LlmParaphraser",
    "render_paraphrase_prompt",
    "OpenAIChatClient",
    "HttpAmrParser",
]


@dataclass(frozen=True)
class LlmRequest:
    prompt: str
    temperature: float = 0.6
    top_p: float = 0.9
    max_tokens: int = 256
    seed: int | None = None

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if not 0 < self.top_p <= 1:
            raise ValueError("top_p must be in (0, 1]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")


@dataclass(frozen=True)
class ParserResult:
    graph: AmrGraph
    raw: str

    @classmethod
    def from_penman(cls, raw: str) -> "ParserResult":
        return cls(parse_penman(raw), raw)


class LlmClient(Protocol):
    def generate(self, req: LlmRequest) -> str: ...


class AmrParser(Protocol):
    def parse_sentence(self, text: str) -> ParserResult: ...


class Paraphraser(Protocol):
    def paraphrase(self, text: str, context: Sequence[str]) -> str: ...


def _require_prompt(prompt: str):
    if not prompt or not prompt.strip():
        raise ValueError("prompt must be non-empty")


def prompt_key(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


# -- stubs -------------------------------------------------------------------


class ScriptedLlm:
    """Replies from a table keyed by :func:`prompt_key`."""

    def __init__(self, table: dict[str, str], default: str | None = None):
        self.table = dict(table)
        self.default = default

    @classmethod
    def from_prompts(cls, replies: dict[str, str], default: str | None = None) -> "ScriptedLlm":
        return cls({prompt_key(p): r for p, r in replies.items()}, default)

    def generate(self, req: LlmRequest) -> str:
        _require_prompt(req.prompt)
        reply = self.table.get(prompt_key(req.prompt), self.default)
        if reply is None:
            raise KeyError(f"no scripted reply for prompt {prompt_key(req.prompt)[:12]}")
        return reply.strip()


class CallbackLlm:
    """Replies computed by ``fn(prompt)``; handy for scripted test scenarios."""

    def __init__(self, fn: Callable[[str], str]):
        self.fn = fn
        self.prompts: list[str] = []

    def generate(self, req: LlmRequest) -> str:
        _require_prompt(req.prompt)
        self.prompts.append(req.prompt)
        return self.fn(req.prompt).strip()


_EMBED_RE = re.compile(r"<amr>(.*?)</amr>", re.DOTALL)


def embed_amr(sentence: str, graph: AmrGraph) -> str:
    """Attach a Penman payload that :class:`StubParser` will read back."""
    body = sentence.rstrip(".!? ")
    return f"{body} <amr>{serialize_penman(graph)}</amr>."


def template_from_prompt(prompt: str) -> AmrGraph:
    """Recover the target template from a rendered generation prompt."""
    start = prompt.rfind("\nAMR:\n")
    end = prompt.find("\nContext: ", start)
    if start < 0 or end < 0:
        raise ValueError("prompt has no AMR block")
    return parse_penman(prompt[start + len("\nAMR:\n"):end])


class TemplateEchoLlm:
    """A generator that always realises the requested template exactly."""

    def __init__(self, wording: str = "Stub sentence"):
        self.wording = wording
        self.calls = 0

    def generate(self, req: LlmRequest) -> str:
        _require_prompt(req.prompt)
        self.calls += 1
        return embed_amr(self.wording, template_from_prompt(req.prompt))


class StubParser:
    """Sentence -> AMR from a lookup table or an embedded ``<amr>`` payload.

    In strict mode anything else raises :class:`Unparseable`; otherwise it
    parses to a one-node ``sentence`` graph.
    """

    def __init__(self, table: dict | None = None, strict: bool = True):
        self.table = {}
        for sentence, g in (table or {}).items():
            raw = g if isinstance(g, str) else serialize_penman(g)
            self.table[sentence.strip()] = ParserResult.from_penman(raw)
        self.strict = strict

    def parse_sentence(self, text: str) -> ParserResult:
        if not text or not text.strip():
            raise ValueError("sentence must be non-empty")
        hit = self.table.get(text.strip())
        if hit is not None:
            return hit
        m = _EMBED_RE.search(text)
        if m:
            try:
                return ParserResult.from_penman(m.group(1))
            except PenmanSyntaxError:
                raise Unparseable(text) from None
        if self.strict:
            raise Unparseable(text)
        return ParserResult.from_penman("(s / sentence)")


class IdentityParaphraser:
    def paraphrase(self, text: str, context: Sequence[str]) -> str:
        if not text.strip():
            raise ValueError("sentence must be non-empty")
        return text


class TableParaphraser:
    """Scripted rewrites; sentences missing from the table pass through."""

    def __init__(self, table: dict[str, str]):
        self.table = dict(table)

    def paraphrase(self, text: str, context: Sequence[str]) -> str:
        if not text.strip():
            raise ValueError("sentence must be non-empty")
        return self.table.get(text, text)


def render_paraphrase_prompt(sent: str, context: Sequence[str]) -> str:
    return (
        f"Previous context: {' '.join(context)}\n"
        f"Current sentence to paraphrase: {sent}\n"
        "Rewrite the sentence above while preserving its meaning.\n"
        "Do not provide any explanation or extra commentary.\n"
        "Return only the new sentence."
    )


class LlmParaphraser:
    """Zero-shot paraphrase attack through any :class:`LlmClient`."""

    def __init__(self, llm: LlmClient, temperature: float = 0.6, top_p: float = 0.9, max_tokens: int = 256):
        self.llm = llm
        self.temperature, self.top_p, self.max_tokens = temperature, top_p, max_tokens

    def paraphrase(self, text: str, context: Sequence[str]) -> str:
        if not text.strip():
            raise ValueError("sentence must be non-empty")
        prompt = render_paraphrase_prompt(text, context)
        return self.llm.generate(LlmRequest(prompt, self.temperature, self.top_p, self.max_tokens))


# -- HTTP --------------------------------------------------------------------


def _retry_after(resp: httpx.Response) -> float | None:
    value = resp.headers.get("retry-after")
    try:
        return float(value) if value is not None else None
    except ValueError:
        return None


class _HttpBase:
    def __init__(self, endpoint: str, timeout: float, max_retries: int, backoff: float,
                 max_in_flight: int, transport: httpx.BaseTransport | None, sleep: Callable[[float], None]):
        self.endpoint = endpoint.rstrip("/")
        self.max_retries = max_retries
        self.backoff = backoff
        self.sleep = sleep
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def close(self):
        self._client.close()

    def _post(self, url: str, payload: dict, headers: dict | None = None) -> httpx.Response:
        """POST with retries on connection errors, timeouts, 5xx and 429."""
        last: Exception | None = None
        for attempt in range(self.max_retries + 1):
            delay = self.backoff * 2**attempt
            try:
                with self._slots:
                    resp = self._client.post(url, json=payload, headers=headers)
            except httpx.TimeoutException as exc:
                last = ServiceTimeout(str(exc) or "request timed out")
            except httpx.TransportError as exc:
                last = TransportError(None, str(exc))
            else:
                if resp.status_code == 429:
                    last = RateLimited(_retry_after(resp))
                    if last.retry_after is not None:
                        delay = last.retry_after
                elif resp.status_code >= 500:
                    last = TransportError(resp.status_code, resp.text)
                elif resp.status_code >= 400:
                    raise TransportError(resp.status_code, resp.text)
                else:
                    return resp
            if attempt < self.max_retries:
                log.warning("%s failed (%s); retry %d in %.1fs", url, last, attempt + 1, delay)
                self.sleep(delay)
        raise last


class OpenAIChatClient(_HttpBase):
    """Chat-completions client for any OpenAI-compatible endpoint."""

    def __init__(self, endpoint: str, model: str, api_key: str | None = None, timeout: float = 120.0,
                 max_retries: int = 3, backoff: float = 1.0, max_in_flight: int = 4,
                 transport: httpx.BaseTransport | None = None, sleep: Callable[[float], None] = time.sleep):
        super().__init__(endpoint, timeout, max_retries, backoff, max_in_flight, transport, sleep)
        self.model = model
        self.api_key = api_key
        self.url = self.endpoint if self.endpoint.endswith("/chat/completions") else self.endpoint + "/chat/completions"

    @classmethod
    def from_env(cls, **kwargs) -> "OpenAIChatClient":
        endpoint = kwargs.pop("endpoint", None) or os.environ.get("SWAN_LLM_ENDPOINT")
        if not endpoint:
            raise ValueError("no LLM endpoint configured (SWAN_LLM_ENDPOINT)")
        model = kwargs.pop("model", None) or os.environ.get("SWAN_LLM_MODEL", "default")
        api_key = kwargs.pop("api_key", None) or os.environ.get("SWAN_LLM_API_KEY")
        return cls(endpoint, model, api_key, **kwargs)

    def generate(self, req: LlmRequest) -> str:
        _require_prompt(req.prompt)
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
            "top_p": req.top_p,
            "max_tokens": req.max_tokens,
        }
        if req.seed is not None:
            payload["seed"] = req.seed
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else None
        resp = self._post(self.url, payload, headers)
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError):
            raise TransportError(resp.status_code, resp.text) from None
        return (content or "").strip()


class HttpAmrParser(_HttpBase):
    """Client for a parser sidecar speaking the ``/parse`` JSON protocol."""

    def __init__(self, endpoint: str, timeout: float = 120.0, max_retries: int = 3, backoff: float = 1.0,
                 max_in_flight: int = 4, transport: httpx.BaseTransport | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        super().__init__(endpoint, timeout, max_retries, backoff, max_in_flight, transport, sleep)
        self.url = self.endpoint if self.endpoint.endswith("/parse") else self.endpoint + "/parse"

    @classmethod
    def from_env(cls, **kwargs) -> "HttpAmrParser":
        endpoint = kwargs.pop("endpoint", None) or os.environ.get("SWAN_PARSER_ENDPOINT")
        if not endpoint:
            raise ValueError("no parser endpoint configured (SWAN_PARSER_ENDPOINT)")
        return cls(endpoint, **kwargs)

    def parse_many(self, sentences: Sequence[str]) -> list[ParserResult | None]:
        """Parse a batch; failed sentences come back as ``None``."""
        try:
            resp = self._post(self.url, {"sentences": list(sentences)})
        except (TransportError, ServiceTimeout, RateLimited) as exc:
            raise ParserUnavailable(str(exc)) from exc
        try:
            penman = resp.json()["penman"]
        except (ValueError, KeyError, TypeError):
            raise ParserUnavailable(f"malformed parser response: {resp.text[:200]}") from None
        if not isinstance(penman, list) or len(penman) != len(sentences):
            raise ParserUnavailable("parser returned the wrong number of graphs")
        out = []
        for raw in penman:
            try:
                out.append(ParserResult.from_penman(raw) if raw else None)
            except PenmanSyntaxError:
                out.append(None)
        return out

    def parse_sentence(self, text: str) -> ParserResult:
        if not text or not text.strip():
            raise ValueError("sentence must be non-empty")
        result = self.parse_many([text])[0]
        if result is None:
            raise Unparseable(text)
        return result
