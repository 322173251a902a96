"""Service configuration."""

from __future__ import annotations

import enum
from dataclasses import dataclass


class GeneratorMode(enum.Enum):
    TWO_STAGE = "two-stage"
    ZERO_SHOT_PROMPT = "zero-shot-prompt"

    @classmethod
    def parse(cls, name: str) -> "GeneratorMode":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(f"unknown generator mode: {name!r}") from None


@dataclass(frozen=True)
class BackendConfig:
    """Model identifiers and decoding settings.

    ``question_model`` generates (question, answer) pairs in two-stage mode
    and serves as the completion model in zero-shot-prompt mode;
    ``distractor_model`` generates the incorrect options (two-stage only);
    ``answer_model`` scores options and is always required. The reserved
    identifier "lexical" selects the deterministic offline bundle.
    """

    mode: GeneratorMode = GeneratorMode.TWO_STAGE
    question_model: str = "lexical"
    distractor_model: str = "lexical"
    answer_model: str = "lexical"
    device: str = "cpu"
    max_context_tokens: int = 4096
    temperature: float = 1.0
    top_p: float = 0.9

    def __post_init__(self):
        if not self.answer_model:
            raise ValueError("an answering model is always required")
        if not self.question_model:
            raise ValueError(f"{self.mode.value} mode requires a question/completion model")
        if self.mode is GeneratorMode.TWO_STAGE and not self.distractor_model:
            raise ValueError("two-stage mode requires a distractor model")
        if self.max_context_tokens < 16:
            raise ValueError("max_context_tokens is unreasonably small")
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if not (0.0 < self.top_p <= 1.0):
            raise ValueError("top_p must lie in (0, 1]")
