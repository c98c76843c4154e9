"""
Model-side clients: the abstract chat interface used by the episode loop, a scripted
client that replays fixture responses (tests and offline runs), the remote chat client
(``POST <base>/chat`` with ``{"messages": [...], "decoding": {...}}`` -> ``{"text": ...}``)
and query encoders for frame selection (fixture lookup or remote embedding service).
"""

import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import requests

from vistrace_lib.method.kernel.components import EmbeddingVector
from vistrace_lib.method.kernel.solver import normalize
from vistrace_lib.utils.errors import ModelFailure, UnknownLabel
from vistrace_lib.utils.logger import logger

MODE_TEXT_COT = "text_cot"
MODE_TOOLS = "tools"


@dataclass
class ChatRequest:
    """
    One model query: interleaved text/image messages plus decoding parameters. ``turn``
    is the zero-based query number within the episode and ``mode`` tells whether tools
    were offered; neither is sent to remote endpoints.
    """
    messages: List[Dict[str, Any]]
    decoding: Dict[str, Any] = field(default_factory=dict)
    turn: int = 0
    mode: str = MODE_TOOLS
    question: str = ""


class ModelClient(ABC):
    """Chat interface: system + interleaved text/visual items in, text out."""

    @abstractmethod
    def chat(self, request: ChatRequest) -> str:
        ...


class ScriptedModelClient(ModelClient):
    """
    Replays scripted responses keyed by question.

    ``scripts`` maps a question (or ``"*"`` for any question) either to a list of responses
    used in every mode, or to ``{"text_cot": [...], "tools": [...]}``. The response for a
    request is entry ``turn`` of the list; past the end the last entry repeats. The client
    keeps no state, so concurrent episodes replay independently.
    """

    def __init__(self, scripts: Mapping[str, Union[Sequence[str], Mapping[str, Sequence[str]]]]):
        self.scripts = dict(scripts)

    @classmethod
    def single(cls, responses: Sequence[str]) -> "ScriptedModelClient":
        return cls({"*": list(responses)})

    def _responses(self, request: ChatRequest) -> Sequence[str]:
        entry = self.scripts.get(request.question, self.scripts.get("*"))
        if entry is None:
            raise UnknownLabel(f"no scripted responses for question {request.question!r}")
        if isinstance(entry, Mapping):
            if request.mode not in entry:
                raise UnknownLabel(f"no scripted '{request.mode}' responses for question {request.question!r}")
            entry = entry[request.mode]
        if not entry:
            raise ModelFailure(f"empty script for question {request.question!r}")
        return entry

    def chat(self, request: ChatRequest) -> str:
        responses = self._responses(request)
        return responses[min(request.turn, len(responses) - 1)]


class RemoteChatClient(ModelClient):
    """HTTP chat endpoint client with retries on transport errors."""

    def __init__(self, base_url: str, timeout: float = 120.0, retries: int = 1,
                 session: Optional[requests.Session] = None):
        self.endpoint = f"{base_url.rstrip('/')}/chat"
        self.timeout = timeout
        self.retries = retries
        self.session = session or requests.Session()

    def chat(self, request: ChatRequest) -> str:
        body = {"messages": request.messages, "decoding": request.decoding}
        last_error: Optional[Exception] = None
        for attempt in range(self.retries + 1):
            try:
                response = self.session.post(self.endpoint, json=body, timeout=self.timeout)
                response.raise_for_status()
                return str(response.json()["text"])
            except (requests.RequestException, ValueError, KeyError) as exc:
                last_error = exc
                logger.warning("Chat request failed (attempt %d/%d): %s", attempt + 1, self.retries + 1, exc)
                if attempt < self.retries:
                    time.sleep(0.5 * (attempt + 1))
        raise ModelFailure(f"chat endpoint {self.endpoint} failed: {last_error}")


class FixtureQueryEncoder:
    """Query encoder backed by a fixture mapping query text to a raw embedding."""

    def __init__(self, embeddings: Mapping[str, Sequence[float]]):
        self.embeddings = {query: normalize(vector) for query, vector in embeddings.items()}

    def __call__(self, query: str) -> EmbeddingVector:
        if query not in self.embeddings:
            raise UnknownLabel(f"fixture has no query embedding for {query!r}")
        return self.embeddings[query]


class RemoteEmbeddingClient:
    """Text encoder served over HTTP: ``POST <base>/embed`` with ``{"text": ...}`` -> ``{"embedding": [...]}``."""

    def __init__(self, base_url: str, timeout: float = 30.0, session: Optional[requests.Session] = None):
        self.endpoint = f"{base_url.rstrip('/')}/embed"
        self.timeout = timeout
        self.session = session or requests.Session()

    def __call__(self, query: str) -> EmbeddingVector:
        try:
            response = self.session.post(self.endpoint, json={"text": query}, timeout=self.timeout)
            response.raise_for_status()
            return normalize(response.json()["embedding"])
        except (requests.RequestException, ValueError, KeyError) as exc:
            raise ModelFailure(f"embedding endpoint {self.endpoint} failed: {exc}") from exc
