"""Model bundles: the G1/G2/A stack behind the service.

A bundle supplies four capabilities: generate a (question, answer) pair
from a context, generate distractors for it, free-form completion (for the
zero-shot prompt mode), and option scoring. The "lexical" bundle is a
deterministic, dependency-free implementation for offline use and
conformance testing; the transformers bundle loads arbitrary pretrained
checkpoints by identifier.
"""

from __future__ import annotations

import logging
import random
import re
from typing import Protocol, Sequence

from .config import BackendConfig, GeneratorMode

log = logging.getLogger("mqag_backend")

_SENTENCES = re.compile(r"(?<=[.!?])\s+")
_FUNCTION_WORDS = frozenset(
    "a an and are as at be but by for from in is it of on or that the to was were with".split()
)


class StartupError(RuntimeError):
    """A model could not be loaded at service startup."""


class ModelBundle(Protocol):
    def generate_question_answer(self, context: str, rng: random.Random) -> tuple[str, str]:
        """G1: a question stem (with a blank or interrogative) and its answer."""
        ...

    def generate_distractors(
        self, stem: str, answer: str, context: str, count: int, rng: random.Random
    ) -> list[str]:
        """G2: incorrect options for the (stem, answer) pair."""
        ...

    def complete(self, prompt: str, max_new_tokens: int) -> str:
        """Free-form completion for the zero-shot prompt mode."""
        ...

    def score_options(self, context: str, stem: str, options: Sequence[str]) -> list[float]:
        """A: one raw score per option; the service normalizes them."""
        ...


# ---------------------------------------------------------------------------
# Deterministic lexical bundle
# ---------------------------------------------------------------------------


def _words(text: str) -> list[str]:
    return [w.strip(".,;:!?()[]\"'").lower() for w in text.split()]


def _content_words(text: str) -> list[str]:
    out = []
    for w in _words(text):
        if len(w) >= 3 and w not in _FUNCTION_WORDS and w not in out:
            out.append(w)
    return out


class LexicalBundle:
    """Cloze questions and overlap scoring derived only from the text."""

    def _sentences(self, context: str) -> list[str]:
        return [s for s in _SENTENCES.split(context.strip()) if s.strip()]

    def generate_question_answer(self, context: str, rng: random.Random) -> tuple[str, str]:
        sentences = [s for s in self._sentences(context) if _content_words(s)]
        if not sentences:
            raise ValueError("context has no usable sentences")
        sentence = sentences[rng.randrange(len(sentences))]
        candidates = _content_words(sentence)
        # prefer longer tokens: they carry the information
        candidates.sort(key=lambda w: (-len(w), w))
        answer = candidates[rng.randrange(min(3, len(candidates)))]
        pattern = re.compile(rf"\b{re.escape(answer)}\b", re.IGNORECASE)
        stem = pattern.sub("_____", sentence, count=1)
        return stem, answer

    def generate_distractors(
        self, stem: str, answer: str, context: str, count: int, rng: random.Random
    ) -> list[str]:
        pool = [w for w in _content_words(context) if w != answer.lower()]
        pool.sort(key=lambda w: (abs(len(w) - len(answer)), w))
        pool = pool[: max(count * 3, count)]
        if len(pool) >= count:
            return rng.sample(pool, count)
        filler = [f"{answer}-{i}" for i in range(2, 2 + count - len(pool))]
        return pool + filler

    def complete(self, prompt: str, max_new_tokens: int) -> str:
        """Render a numbered MCQ block from the context inside the prompt."""
        match = re.search(r"(\d+)\s+diverse.*?(\d+)\s+options.*?context:\s*(.*)", prompt, re.DOTALL)
        if not match:
            return ""
        n, k, context = int(match.group(1)), int(match.group(2)), match.group(3)
        rng = random.Random(len(context))
        lines = []
        produced = min(n, max(1, len(_content_words(context)) // 2))
        for i in range(produced):
            stem, answer = self.generate_question_answer(context, rng)
            options = [answer] + self.generate_distractors(stem, answer, context, k - 1, rng)
            order = list(range(k))
            rng.shuffle(order)
            lines.append(f"{i + 1}. {stem}")
            for j, pos in enumerate(order):
                lines.append(f"{chr(ord('A') + j)}. {options[pos]}")
            lines.append(f"Answer: {chr(ord('A') + order.index(0))}")
            lines.append("")
        return "\n".join(lines)

    def score_options(self, context: str, stem: str, options: Sequence[str]) -> list[float]:
        context_words = set(_words(context))
        scores = []
        for option in options:
            words = _words(option)
            overlap = sum(1 for w in words if w in context_words) / len(words) if words else 0.0
            scores.append(3.0 * overlap)
        return scores


# ---------------------------------------------------------------------------
# Transformers bundle
# ---------------------------------------------------------------------------


class TransformersBundle:
    """Pretrained checkpoints loaded by identifier.

    The question/completion and distractor models must be text-generation
    capable (seq2seq or causal); the answering model may be a
    multiple-choice head (scored by its logits) or a seq2seq model (options
    scored by length-normalized log-likelihood). Context is truncated to
    ``max_context_tokens`` keeping the head; truncation is logged.
    """

    def __init__(self, config: BackendConfig):
        try:
            import torch
            from transformers import AutoTokenizer
        except ImportError as exc:
            raise StartupError(
                "transformers/torch are required for non-lexical models; "
                "install the [models] extra"
            ) from exc
        self._torch = torch
        self._config = config
        try:
            self._gen_tokenizer = AutoTokenizer.from_pretrained(config.question_model)
            self._gen_model = self._load_generator(config.question_model)
            if config.mode is GeneratorMode.TWO_STAGE:
                self._dis_tokenizer = AutoTokenizer.from_pretrained(config.distractor_model)
                self._dis_model = self._load_generator(config.distractor_model)
            self._ans_tokenizer = AutoTokenizer.from_pretrained(config.answer_model)
            self._ans_model, self._ans_is_mc = self._load_answerer(config.answer_model)
        except StartupError:
            raise
        except Exception as exc:
            raise StartupError(f"failed to load models: {exc}") from exc

    def _load_generator(self, name: str):
        from transformers import AutoModelForCausalLM, AutoModelForSeq2SeqLM

        try:
            model = AutoModelForSeq2SeqLM.from_pretrained(name)
        except Exception:
            model = AutoModelForCausalLM.from_pretrained(name)
        return model.to(self._config.device).eval()

    def _load_answerer(self, name: str):
        from transformers import AutoModelForMultipleChoice, AutoModelForSeq2SeqLM

        try:
            return AutoModelForMultipleChoice.from_pretrained(name).to(
                self._config.device
            ).eval(), True
        except Exception:
            return AutoModelForSeq2SeqLM.from_pretrained(name).to(
                self._config.device
            ).eval(), False

    def _truncate(self, tokenizer, text: str) -> str:
        ids = tokenizer.encode(text, add_special_tokens=False)
        limit = self._config.max_context_tokens
        if len(ids) <= limit:
            return text
        log.info("truncating context from %d to %d tokens", len(ids), limit)
        return tokenizer.decode(ids[:limit], skip_special_tokens=True)

    def _generate_text(self, model, tokenizer, prompt: str, max_new_tokens: int, rng_seed: int) -> str:
        torch = self._torch
        inputs = tokenizer(prompt, return_tensors="pt", truncation=True).to(self._config.device)
        generator = torch.Generator(device="cpu").manual_seed(rng_seed)
        with torch.no_grad():
            output = model.generate(
                **inputs,
                do_sample=True,
                temperature=self._config.temperature,
                top_p=self._config.top_p,
                max_new_tokens=max_new_tokens,
                generator=generator,
            )
        return tokenizer.decode(output[0], skip_special_tokens=True)

    def generate_question_answer(self, context: str, rng: random.Random) -> tuple[str, str]:
        context = self._truncate(self._gen_tokenizer, context)
        raw = self._generate_text(
            self._gen_model,
            self._gen_tokenizer,
            f"generate question and answer: {context}",
            max_new_tokens=96,
            rng_seed=rng.randrange(2**31),
        )
        if "answer:" in raw.lower():
            head, _, tail = re.split(r"(answer:)", raw, maxsplit=1, flags=re.IGNORECASE)
            question = head.strip().removeprefix("question:").strip()
            answer = tail.strip()
        else:
            question, answer = raw.strip(), ""
        if not question or not answer:
            raise ValueError(f"generator output unparseable: {raw!r}")
        return question, answer

    def generate_distractors(
        self, stem: str, answer: str, context: str, count: int, rng: random.Random
    ) -> list[str]:
        context = self._truncate(self._dis_tokenizer, context)
        distractors: list[str] = []
        for i in range(count):
            raw = self._generate_text(
                self._dis_model,
                self._dis_tokenizer,
                f"generate distractor: question: {stem} answer: {answer} context: {context}",
                max_new_tokens=32,
                rng_seed=rng.randrange(2**31),
            )
            text = raw.strip() or f"{answer}-{i + 2}"
            if text in distractors or text == answer:
                text = f"{text} ({i + 2})"
            distractors.append(text)
        return distractors

    def complete(self, prompt: str, max_new_tokens: int) -> str:
        prompt = self._truncate(self._gen_tokenizer, prompt)
        return self._generate_text(
            self._gen_model, self._gen_tokenizer, prompt, max_new_tokens, rng_seed=0
        )

    def score_options(self, context: str, stem: str, options: Sequence[str]) -> list[float]:
        torch = self._torch
        context = self._truncate(self._ans_tokenizer, context)
        if self._ans_is_mc:
            first = [f"{context} {stem}"] * len(options)
            encoded = self._ans_tokenizer(
                first, list(options), return_tensors="pt", padding=True, truncation=True
            )
            encoded = {k: v.unsqueeze(0).to(self._config.device) for k, v in encoded.items()}
            with torch.no_grad():
                logits = self._ans_model(**encoded).logits
            return logits[0].tolist()
        # seq2seq: length-normalized log-likelihood of each option
        scores = []
        source = self._ans_tokenizer(
            f"context: {context} question: {stem}", return_tensors="pt", truncation=True
        ).to(self._config.device)
        for option in options:
            labels = self._ans_tokenizer(option, return_tensors="pt").input_ids.to(
                self._config.device
            )
            with torch.no_grad():
                loss = self._ans_model(**source, labels=labels).loss
            scores.append(-float(loss))
        return scores


def load_bundle(config: BackendConfig) -> ModelBundle:
    """Instantiate the bundle the config names; raises StartupError."""
    identifiers = {config.question_model, config.answer_model}
    if config.mode is GeneratorMode.TWO_STAGE:
        identifiers.add(config.distractor_model)
    if identifiers == {"lexical"}:
        return LexicalBundle()
    if "lexical" in identifiers:
        raise StartupError("mixing the lexical bundle with model identifiers is not supported")
    return TransformersBundle(config)
