"""The mqag/1 HTTP service.

POST /generate and /answer follow the wire protocol exactly: UTF-8 JSON,
200 on success, 4xx with {"error": string} on malformed requests. Model
calls are serialized behind a lock (single device); connections are
accepted concurrently and queue. GET /healthz reports liveness and the
generator mode.
"""

from __future__ import annotations

import logging
import math
import random
import threading
from typing import Sequence

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .bundles import ModelBundle, load_bundle
from .config import BackendConfig, GeneratorMode
from .parsing import ParsedQuestion, parse_mcq_block

log = logging.getLogger("mqag_backend")

PROTOCOL_VERSION = "mqag/1"
ZERO_SHOT_PROMPT = (
    "Write {n} diverse multiple-choice questions with {k} options "
    "from the following context: {context}"
)


class RequestError(ValueError):
    """Client-side problem; mapped to a 4xx with {"error": ...}."""


def _field(body: dict, name: str, types, required: bool = True, default=None):
    if not isinstance(body, dict):
        raise RequestError("request body must be a JSON object")
    if name not in body:
        if required:
            raise RequestError(f"missing required field {name!r}")
        return default
    value = body[name]
    type_set = types if isinstance(types, tuple) else (types,)
    if not isinstance(value, type_set) or (bool not in type_set and isinstance(value, bool)):
        raise RequestError(f"field {name!r} has wrong type {type(value).__name__}")
    return value


def _softmax(scores: Sequence[float]) -> list[float]:
    peak = max(scores)
    weights = [math.exp(s - peak) for s in scores]
    total = sum(weights)
    return [w / total for w in weights]


class QuestionService:
    def __init__(self, config: BackendConfig, bundle: ModelBundle | None = None):
        self.config = config
        self.bundle = bundle if bundle is not None else load_bundle(config)
        self._lock = threading.Lock()  # single device: serialize model calls

    # -- generation -----------------------------------------------------------

    def generate(self, context: str, num_questions: int, num_options: int, seed: int | None) -> list[dict]:
        if self.config.mode is GeneratorMode.TWO_STAGE:
            questions = self._generate_two_stage(context, num_questions, num_options, seed)
        else:
            questions = self._generate_zero_shot(context, num_questions, num_options)
        return [
            {
                "id": f"q{idx:04d}",
                "stem": q.stem,
                "options": list(q.options),
                "answer_index": q.answer_index,
            }
            for idx, q in enumerate(questions)
        ]

    def _generate_two_stage(
        self, context: str, num_questions: int, num_options: int, seed: int | None
    ) -> list[ParsedQuestion]:
        questions = []
        for i in range(num_questions):
            rng = random.Random((seed if seed is not None else 0) * 1_000_003 + i)
            try:
                stem, answer = self.bundle.generate_question_answer(context, rng)
                distractors = self.bundle.generate_distractors(
                    stem, answer, context, num_options - 1, rng
                )
            except ValueError as exc:
                # a failed draw shortens the response instead of failing it
                log.warning("question %d dropped: %s", i, exc)
                continue
            options = [answer] + list(distractors)
            order = list(range(num_options))
            rng.shuffle(order)
            questions.append(
                ParsedQuestion(
                    stem=stem,
                    options=tuple(_dedupe_options(options[j] for j in order)),
                    answer_index=order.index(0),
                )
            )
        return questions

    def _generate_zero_shot(
        self, context: str, num_questions: int, num_options: int
    ) -> list[ParsedQuestion]:
        prompt = ZERO_SHOT_PROMPT.format(n=num_questions, k=num_options, context=context)
        raw = self.bundle.complete(prompt, max_new_tokens=64 * num_questions)
        questions, dropped = parse_mcq_block(raw, num_options)
        if dropped:
            log.info("zero-shot parser dropped %d malformed questions", dropped)
        return questions[:num_questions]

    # -- answering -------------------------------------------------------------

    def answer(self, context: str, stem: str, options: Sequence[str]) -> list[float]:
        scores = self.bundle.score_options(context, stem, options)
        if len(scores) != len(options):
            raise RuntimeError("bundle returned a wrong number of scores")
        return _softmax(scores)


def _dedupe_options(options) -> list[str]:
    seen: dict[str, int] = {}
    out = []
    for opt in options:
        key = " ".join(str(opt).split()).lower()
        n = seen.get(key, 0)
        seen[key] = n + 1
        out.append(str(opt) if n == 0 else f"{opt} ({n + 1})")
    return out


def create_app(config: BackendConfig, bundle: ModelBundle | None = None) -> FastAPI:
    service = QuestionService(config, bundle)
    app = FastAPI(title="mqag model backend", docs_url=None, redoc_url=None)
    app.state.service = service

    def error(status: int, message: str) -> JSONResponse:
        return JSONResponse(status_code=status, content={"error": message})

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "mode": config.mode.value}

    @app.post("/generate")
    async def generate(request: Request):
        try:
            body = await request.json()
        except Exception:
            return error(400, "request body is not valid JSON")
        try:
            context = _field(body, "context", str)
            num_questions = _field(body, "num_questions", int)
            num_options = _field(body, "num_options", int)
            seed = _field(body, "seed", (int, type(None)), required=False)
            if not context.strip():
                raise RequestError("field 'context' is empty")
            if num_questions < 1:
                raise RequestError("field 'num_questions' must be >= 1")
            if num_options < 2:
                raise RequestError("field 'num_options' must be >= 2")
        except RequestError as exc:
            return error(400, str(exc))
        with service._lock:
            questions = service.generate(context, num_questions, num_options, seed)
        return {"questions": questions}

    @app.post("/answer")
    async def answer(request: Request):
        try:
            body = await request.json()
        except Exception:
            return error(400, "request body is not valid JSON")
        try:
            context = _field(body, "context", str)
            stem = _field(body, "stem", str)
            options = _field(body, "options", list)
            if not context.strip():
                raise RequestError("field 'context' is empty")
            if len(options) < 2 or not all(isinstance(o, str) for o in options):
                raise RequestError("field 'options' must hold at least 2 strings")
        except RequestError as exc:
            return error(400, str(exc))
        with service._lock:
            probabilities = service.answer(context, stem, options)
        return {"probabilities": probabilities}

    return app


def serve(config: BackendConfig, host: str = "127.0.0.1", port: int = 8731) -> None:
    """Run the service until interrupted; model load failures raise
    StartupError before the socket opens."""
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=host, port=port, log_level="info")
