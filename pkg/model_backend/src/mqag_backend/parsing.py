"""Tolerant parsing of model-completed multiple-choice question blocks.

Zero-shot completion models return loosely formatted text: numbered
questions with lettered (or re-numbered) options, occasionally an
"Answer:" line, and a fair amount of junk. The parser salvages what it
can; questions whose option count does not match the request are dropped
and counted, never fatal.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

_QUESTION_LINE = re.compile(r"^(?:q(?:uestion)?\s*)?(\d{1,3})\s*[.):\-]\s*(.*)$", re.IGNORECASE)
_OPTION_LINE = re.compile(r"^\(?([a-j]|\d{1,2})\)?\s*[.):\-]\s*(.+?)\s*$", re.IGNORECASE)
_ANSWER_LINE = re.compile(
    r"^answer\s*[:\-]?\s*\(?([a-j]|\d{1,2})\)?\s*[.)]?\s*$", re.IGNORECASE
)


@dataclass(frozen=True)
class ParsedQuestion:
    stem: str
    options: tuple[str, ...]
    answer_index: int


@dataclass
class _Block:
    number: int
    stem_parts: list[str]
    options: list[str] = field(default_factory=list)
    answer_index: int = 0
    numeric_options: bool = False


def _option_position(label: str) -> int:
    label = label.lower()
    if label.isdigit():
        return int(label) - 1
    return ord(label) - ord("a")


def _dedupe(options: list[str]) -> list[str]:
    seen: dict[str, int] = {}
    out = []
    for opt in options:
        key = " ".join(opt.split()).lower()
        n = seen.get(key, 0)
        seen[key] = n + 1
        out.append(opt if n == 0 else f"{opt} ({n + 1})")
    return out


def parse_mcq_block(raw: str, num_options: int) -> tuple[list[ParsedQuestion], int]:
    """Parse a completion into questions, returning (kept, dropped_count).

    A question survives when it has a non-empty stem and exactly
    ``num_options`` options. The generation-time answer defaults to the
    first option unless an "Answer:" line names another one. Lines like
    "2) text" are ambiguous between a numeric option and a question start;
    they continue the current option list when they extend its numbering
    and open a new question when they advance the question numbering.
    """
    blocks: list[_Block] = []
    current: _Block | None = None

    def open_block(match: re.Match) -> _Block:
        block = _Block(number=int(match.group(1)), stem_parts=[match.group(2).strip()])
        blocks.append(block)
        return block

    for raw_line in raw.splitlines():
        line = raw_line.strip()
        if not line:
            continue
        q_match = _QUESTION_LINE.match(line)
        o_match = _OPTION_LINE.match(line)

        if current is None:
            if q_match:
                current = open_block(q_match)
            continue  # preamble junk

        a_match = _ANSWER_LINE.match(line)
        if a_match:
            pos = _option_position(a_match.group(1))
            if 0 <= pos < len(current.options):
                current.answer_index = pos
            continue

        if o_match and not o_match.group(1).isdigit():
            current.options.append(o_match.group(2))
            continue

        if q_match and o_match:
            # numeric label: continues the option list only when the list is
            # numeric too (or empty); otherwise a higher number opens the
            # next question
            label = int(o_match.group(1))
            extends_options = label == len(current.options) + 1 and (
                current.numeric_options if current.options else label <= current.number
            )
            if extends_options:
                current.options.append(o_match.group(2))
                current.numeric_options = True
            elif label > current.number:
                current = open_block(q_match)
            continue
        if q_match:
            if q_match.group(1) and int(q_match.group(1)) > current.number:
                current = open_block(q_match)
            continue
        if not current.options:
            current.stem_parts.append(line)  # stem wrapped across lines

    kept: list[ParsedQuestion] = []
    dropped = 0
    for block in blocks:
        stem = " ".join(part for part in block.stem_parts if part).strip()
        if not stem or len(block.options) != num_options:
            dropped += 1
            continue
        kept.append(
            ParsedQuestion(
                stem=stem,
                options=tuple(_dedupe([o.strip() for o in block.options])),
                answer_index=block.answer_index,
            )
        )
    return kept, dropped
