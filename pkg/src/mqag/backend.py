"""Question generation/answering backends and the mqag/1 wire protocol.

Two backends implement the same contract: a deterministic in-process mock
(for offline runs and tests) and an HTTP client for remote model services.
A backend turns a context into multiple-choice questions and answers a
question against a context with a probability distribution over options.
"""

from __future__ import annotations

import enum
import math
import random
import re
import threading
import time
from dataclasses import dataclass
from typing import Any, Protocol, Sequence

import httpx

from .distributions import OptionDistribution
from .textmetrics import tokenize

PROTOCOL_VERSION = "mqag/1"
MOCK_ANSWER_TEMPERATURE = 0.25

_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")
_STOPWORDS = frozenset(
    """a an and are as at be but by for from had has have he her his in is it
    its of on or she that the their there they this to was were will with
    would""".split()
)


class BackendError(Exception):
    """Base for all backend failures.

    ``partial_report`` is attached by the scoring pipeline when a failure
    interrupts a run that already produced partial results.
    """

    partial_report: Any = None


class BackendUnavailableError(BackendError):
    """Transport failure that persisted through all retries."""

    def __init__(self, endpoint: str, attempts: int, cause: Exception | str):
        super().__init__(f"backend at {endpoint} unavailable after {attempts} attempts: {cause}")
        self.endpoint = endpoint
        self.attempts = attempts


class ProtocolError(BackendError):
    """Malformed request or response; carries the offending payload."""

    def __init__(self, message: str, payload: Any = None):
        super().__init__(message)
        self.payload = payload


class ShortGenerationError(BackendError):
    """Backend returned fewer questions than requested.

    The decoded questions ride along so callers may proceed with them.
    """

    def __init__(self, requested: int, received: int, questions: list["MCQuestion"]):
        super().__init__(f"requested {requested} questions, received {received}")
        self.requested = requested
        self.received = received
        self.questions = questions


class InsufficientContentError(BackendError):
    """Context has too few distinct content tokens to build the options."""


def _normalized(text: str) -> str:
    return " ".join(text.split())


@dataclass(frozen=True)
class MCQuestion:
    """A question stem with K ordered options and the generation-time answer."""

    id: str
    stem: str
    options: tuple[str, ...]
    answer_index: int

    def __init__(self, id: str, stem: str, options: Sequence[str], answer_index: int):
        opts = tuple(str(o) for o in options)
        if len(opts) < 2:
            raise ValueError(f"question {id!r}: need at least 2 options, got {len(opts)}")
        normalized = [_normalized(o) for o in opts]
        if len(set(normalized)) != len(normalized):
            raise ValueError(f"question {id!r}: duplicate options after whitespace normalization")
        if not (0 <= answer_index < len(opts)):
            raise ValueError(f"question {id!r}: answer_index {answer_index} out of range")
        object.__setattr__(self, "id", str(id))
        object.__setattr__(self, "stem", str(stem))
        object.__setattr__(self, "options", opts)
        object.__setattr__(self, "answer_index", int(answer_index))

    @property
    def num_options(self) -> int:
        return len(self.options)


@dataclass(frozen=True)
class GenerationRequest:
    context: str
    num_questions: int
    num_options: int = 4
    seed: int | None = None

    def __post_init__(self):
        if not self.context.strip():
            raise ValueError("context is empty")
        if self.num_questions < 1:
            raise ValueError(f"num_questions must be >= 1, got {self.num_questions}")
        if self.num_options < 2:
            raise ValueError(f"num_options must be >= 2, got {self.num_options}")


@dataclass(frozen=True)
class AnswerRequest:
    context: str
    question: MCQuestion

    def __post_init__(self):
        if not self.context.strip():
            raise ValueError("context is empty")


class BackendKind(enum.Enum):
    MOCK = "mock"
    REMOTE = "remote"


@dataclass(frozen=True)
class BackendDescriptor:
    """How to reach a backend: in-process mock or remote HTTP service."""

    kind: BackendKind
    endpoint: str | None = None
    timeout: float = 120.0
    max_retries: int = 2
    max_concurrency: int = 4

    def __post_init__(self):
        if self.kind is BackendKind.REMOTE and not self.endpoint:
            raise ValueError("remote backend requires an endpoint")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")


class Backend(Protocol):
    """The contract both backends satisfy."""

    max_concurrency: int

    def generate(self, req: GenerationRequest) -> list[MCQuestion]: ...

    def answer(self, req: AnswerRequest) -> OptionDistribution: ...


# ---------------------------------------------------------------------------
# Mock backend: a pure function of (context, n, k, seed)
# ---------------------------------------------------------------------------


def _content_token(word: str) -> str | None:
    toks = tokenize(word)
    if not toks:
        return None
    tok = toks[0]
    if len(tok) < 3 or tok in _STOPWORDS or not any(c.isalpha() for c in tok):
        return None
    return tok


def _split_sentences(context: str) -> list[str]:
    return [s for s in _SENTENCE_SPLIT.split(context.strip()) if s.strip()]


def repair_duplicate_options(options: Sequence[str]) -> list[str]:
    """Suffix a disambiguating marker onto repeated options instead of failing."""
    seen: dict[str, int] = {}
    out = []
    for opt in options:
        key = _normalized(opt)
        count = seen.get(key, 0)
        seen[key] = count + 1
        out.append(opt if count == 0 else f"{opt} ({count + 1})")
    return out


def mock_generate(context: str, n: int, k: int, seed: int | None = None) -> list[MCQuestion]:
    """Derive n cloze questions deterministically from the context.

    Each question blanks one seeded content token of a seeded sentence; the
    blanked token is the answer and k-1 distractor tokens are drawn from the
    rest of the context. Repeated calls with identical arguments return
    identical questions.
    """
    if not context.strip():
        raise ValueError("context is empty")
    sentences = _split_sentences(context)
    words_per_sentence = [s.split() for s in sentences]
    content_per_sentence: list[list[str]] = []
    for words in words_per_sentence:
        seen: list[str] = []
        for w in words:
            tok = _content_token(w)
            if tok is not None and tok not in seen:
                seen.append(tok)
        content_per_sentence.append(seen)

    all_content: list[str] = []
    for toks in content_per_sentence:
        for tok in toks:
            if tok not in all_content:
                all_content.append(tok)
    if len(all_content) < k:
        raise InsufficientContentError(
            f"context has {len(all_content)} distinct content tokens, need {k}"
        )

    eligible = [i for i, toks in enumerate(content_per_sentence) if toks]
    rng = random.Random(0 if seed is None else seed)
    questions = []
    for qi in range(n):
        si = eligible[rng.randrange(len(eligible))]
        words = words_per_sentence[si]
        positions = [i for i, w in enumerate(words) if _content_token(w) is not None]
        pos = positions[rng.randrange(len(positions))]
        answer = _content_token(words[pos])
        assert answer is not None

        stem_words = list(words)
        stem_words[pos] = _blank_word(words[pos])
        stem = " ".join(stem_words)

        pool = [t for j, toks in enumerate(content_per_sentence) if j != si for t in toks]
        pool.extend(content_per_sentence[si])
        ordered_pool: list[str] = []
        for tok in pool:
            if tok != answer and tok not in ordered_pool:
                ordered_pool.append(tok)
        distractors = rng.sample(ordered_pool, k - 1)

        options = repair_duplicate_options([answer] + distractors)
        order = list(range(k))
        rng.shuffle(order)
        shuffled = [options[j] for j in order]
        questions.append(
            MCQuestion(
                id=f"q{qi:04d}",
                stem=stem,
                options=shuffled,
                answer_index=order.index(0),
            )
        )
    return questions


def _blank_word(word: str) -> str:
    # blank the alphanumeric core, keeping surrounding punctuation
    match = re.search(r"\w.*\w|\w", word)
    if match is None:
        return "____"
    return word[: match.start()] + "____" + word[match.end() :]


def mock_answer(context: str, question: MCQuestion) -> OptionDistribution:
    """Score options by lexical overlap with the context, softmaxed at T=0.25."""
    context_tokens = set(tokenize(context))
    scores = []
    for option in question.options:
        toks = tokenize(option)
        if not toks:
            scores.append(0.0)
        else:
            scores.append(sum(1 for t in toks if t in context_tokens) / len(toks))
    logits = [s / MOCK_ANSWER_TEMPERATURE for s in scores]
    peak = max(logits)
    weights = [math.exp(x - peak) for x in logits]
    total = sum(weights)
    return OptionDistribution([w / total for w in weights])


@dataclass(frozen=True)
class MockBackend:
    """Deterministic offline backend; safe for concurrent use."""

    max_concurrency: int = 4

    def generate(self, req: GenerationRequest) -> list[MCQuestion]:
        return mock_generate(req.context, req.num_questions, req.num_options, req.seed)

    def answer(self, req: AnswerRequest) -> OptionDistribution:
        return mock_answer(req.context, req.question)


# ---------------------------------------------------------------------------
# Wire codec (mqag/1)
# ---------------------------------------------------------------------------


def _require(payload: dict, key: str, types: type | tuple) -> Any:
    if not isinstance(payload, dict):
        raise ProtocolError(f"expected JSON object, got {type(payload).__name__}", payload)
    if key not in payload:
        raise ProtocolError(f"missing required field {key!r}", payload)
    value = payload[key]
    type_set = types if isinstance(types, tuple) else (types,)
    if not isinstance(value, type_set) or (bool not in type_set and isinstance(value, bool)):
        raise ProtocolError(f"field {key!r} has wrong type {type(value).__name__}", payload)
    return value


def encode_generation_request(req: GenerationRequest) -> dict:
    return {
        "context": req.context,
        "num_questions": req.num_questions,
        "num_options": req.num_options,
        "seed": req.seed,
    }


def decode_generation_request(payload: dict) -> GenerationRequest:
    context = _require(payload, "context", str)
    num_questions = _require(payload, "num_questions", int)
    num_options = _require(payload, "num_options", int)
    seed = _require(payload, "seed", (int, type(None)))
    try:
        return GenerationRequest(context, num_questions, num_options, seed)
    except ValueError as exc:
        raise ProtocolError(str(exc), payload) from exc


def encode_answer_request(req: AnswerRequest) -> dict:
    return {
        "context": req.context,
        "stem": req.question.stem,
        "options": list(req.question.options),
    }


def encode_questions_response(questions: Sequence[MCQuestion]) -> dict:
    return {
        "questions": [
            {
                "id": q.id,
                "stem": q.stem,
                "options": list(q.options),
                "answer_index": q.answer_index,
            }
            for q in questions
        ]
    }


def decode_questions_response(payload: dict, requested: int, num_options: int) -> list[MCQuestion]:
    """Validate and decode a /generate response.

    Raises ShortGenerationError (with the decoded questions attached) when
    fewer than ``requested`` questions come back; any other shape problem is
    a ProtocolError. Duplicate options are repaired, not rejected.
    """
    raw_questions = _require(payload, "questions", list)
    if len(raw_questions) > requested:
        raise ProtocolError(
            f"received {len(raw_questions)} questions, requested {requested}", payload
        )
    questions = []
    for raw in raw_questions:
        qid = _require(raw, "id", str)
        stem = _require(raw, "stem", str)
        options = _require(raw, "options", list)
        answer_index = _require(raw, "answer_index", int)
        if len(options) != num_options:
            raise ProtocolError(
                f"question {qid!r} has {len(options)} options, expected {num_options}", payload
            )
        if not all(isinstance(o, str) for o in options):
            raise ProtocolError(f"question {qid!r} has non-string options", payload)
        try:
            questions.append(
                MCQuestion(qid, stem, repair_duplicate_options(options), answer_index)
            )
        except ValueError as exc:
            raise ProtocolError(str(exc), payload) from exc
    if len(questions) < requested:
        raise ShortGenerationError(requested, len(questions), questions)
    return questions


def encode_answer_response(dist: OptionDistribution) -> dict:
    return {"probabilities": list(dist.probs)}


def decode_answer_response(payload: dict, expected_length: int) -> OptionDistribution:
    probs = _require(payload, "probabilities", list)
    if len(probs) != expected_length:
        raise ProtocolError(
            f"received {len(probs)} probabilities, expected {expected_length}", payload
        )
    if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in probs):
        raise ProtocolError("field 'probabilities' has non-numeric entries", payload)
    try:
        return OptionDistribution(probs)
    except ValueError as exc:
        raise ProtocolError(str(exc), payload) from exc


# ---------------------------------------------------------------------------
# Remote backend
# ---------------------------------------------------------------------------


class RemoteBackend:
    """HTTP client for a service speaking the mqag/1 protocol.

    Retries transport failures and 5xx responses with exponential backoff,
    up to the descriptor's max_retries; 4xx and malformed bodies are
    protocol errors and are not retried. In-flight requests are bounded by
    the descriptor's max_concurrency.
    """

    def __init__(
        self,
        descriptor: BackendDescriptor,
        token: str | None = None,
        backoff: float = 0.5,
        client: httpx.Client | None = None,
    ):
        if descriptor.kind is not BackendKind.REMOTE:
            raise ValueError("RemoteBackend requires a remote descriptor")
        self.descriptor = descriptor
        self.max_concurrency = descriptor.max_concurrency
        self._backoff = backoff
        self._sem = threading.Semaphore(descriptor.max_concurrency)
        headers = {"x-mqag-protocol": PROTOCOL_VERSION}
        if token:
            headers["authorization"] = f"Bearer {token}"
        self._client = client or httpx.Client(
            timeout=descriptor.timeout,
            headers=headers,
            limits=httpx.Limits(max_connections=descriptor.max_concurrency),
        )

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "RemoteBackend":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def _post(self, path: str, payload: dict) -> dict:
        assert self.descriptor.endpoint is not None
        url = self.descriptor.endpoint.rstrip("/") + path
        attempts = self.descriptor.max_retries + 1
        last_failure: Exception | str = "no attempt made"
        for attempt in range(attempts):
            if attempt > 0:
                time.sleep(self._backoff * (2 ** (attempt - 1)))
            try:
                with self._sem:
                    response = self._client.post(url, json=payload)
            except httpx.HTTPError as exc:
                last_failure = exc
                continue
            if response.status_code >= 500:
                last_failure = f"HTTP {response.status_code}"
                continue
            if response.status_code != 200:
                raise ProtocolError(
                    f"HTTP {response.status_code} from {url}", _safe_json(response)
                )
            body = _safe_json(response)
            if body is None:
                raise ProtocolError(f"non-JSON response from {url}", response.text)
            return body
        raise BackendUnavailableError(self.descriptor.endpoint, attempts, last_failure)

    def generate(self, req: GenerationRequest) -> list[MCQuestion]:
        payload = self._post("/generate", encode_generation_request(req))
        return decode_questions_response(payload, req.num_questions, req.num_options)

    def answer(self, req: AnswerRequest) -> OptionDistribution:
        payload = self._post("/answer", encode_answer_request(req))
        return decode_answer_response(payload, req.question.num_options)


def _safe_json(response: httpx.Response) -> Any:
    try:
        return response.json()
    except ValueError:
        return None


def make_backend(descriptor: BackendDescriptor, token: str | None = None) -> Backend:
    """Instantiate the backend named by the descriptor."""
    if descriptor.kind is BackendKind.MOCK:
        return MockBackend(max_concurrency=descriptor.max_concurrency)
    return RemoteBackend(descriptor, token=token)
