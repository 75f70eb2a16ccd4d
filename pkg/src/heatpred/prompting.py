"""Prompt rendering and multiple-choice answer parsing.

Templates live as UTF-8 resource files next to this module so the wording
can be swapped (for instance back to the original-language prompts)
without code changes. Rendering is byte-deterministic; goldens pin it.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

from heatpred.clustering import HeatLevelScheme
from heatpred.corpus import Event
from heatpred.retrieval import CaseSet

OPTION_LETTERS = "ABCD"

_LETTER_TO_LEVEL = {letter: i + 1 for i, letter in enumerate(OPTION_LETTERS)}

# letter adjacent to the word "Option" (lowercase letter tolerated here
# because the keyword disambiguates it)
_OPTION_ADJACENT = re.compile(r"\boption\b[\s:\-]*\(?([A-Da-d])\b", re.IGNORECASE)
# uppercase letter glued to choice punctuation, e.g. "C," or "(B)"
_PUNCT_ADJACENT = re.compile(r"(?:^|(?<=[\s:(\[]))([A-D])(?=[:,.)\]])")
# any standalone uppercase letter; lowercase excluded so the article "a"
# never reads as an answer
_STANDALONE = re.compile(r"(?:^|(?<=\s))([A-D])(?=$|[\s:,.)\]])")
_LEVEL_PHRASE = re.compile(r"\b(?:heat\s+)?level\s*[:\-]?\s*([1-4])\b", re.IGNORECASE)


@dataclass
class PromptText:
    text: str
    kind: str  # "no_case" or "with_case"
    event_id: str


@dataclass
class ParsedAnswer:
    level: int | None  # None = unparseable
    raw: str


def _load_template(name: str) -> str:
    path = resources.files("heatpred") / "templates" / name
    text = path.read_text(encoding="utf-8")
    # template files carry the escape literally; real newline from here on
    return text.replace("\\n", "\n")


def _fill(template: str, mapping: dict[str, str]) -> str:
    # single-pass substitution so placeholder-like text inside event
    # content is never re-expanded
    pattern = re.compile("|".join(re.escape(k) for k in mapping))
    return pattern.sub(lambda m: mapping[m.group(0)], template)


def render_options(scheme: HeatLevelScheme) -> str:
    """The four-option block, one line per level, bounds to six decimals."""
    if scheme.num_levels != len(OPTION_LETTERS):
        raise ValueError(
            f"options template is {len(OPTION_LETTERS)}-way, scheme has {scheme.num_levels} levels"
        )
    line_tpl = _load_template("option_line.txt")
    lines = []
    for i, letter in enumerate(OPTION_LETTERS):
        lower = 0.0 if i == 0 else scheme.boundaries[i - 1]
        upper = "Inf" if i == len(OPTION_LETTERS) - 1 else f"{scheme.boundaries[i]:.6f}"
        lines.append(
            _fill(
                line_tpl,
                {
                    "{letter}": letter,
                    "{level}": str(i + 1),
                    "{lower}": f"{lower:.6f}",
                    "{upper}": upper,
                },
            )
        )
    return "\n".join(lines)


def render_no_case_prompt(event: Event, scheme: HeatLevelScheme) -> PromptText:
    if not event.content:
        raise ValueError(f"event {event.id!r} has empty content")
    text = _fill(
        _load_template("no_case.txt"),
        {"{event}": event.content, "{options}": render_options(scheme)},
    )
    return PromptText(text=text, kind="no_case", event_id=event.id)


def serialize_cases(cases: CaseSet) -> str:
    """One line per case: content, heat index to six decimals, level."""
    return "\n".join(
        f"{c.content} | {c.heat_index:.6f} | heat level {c.level}" for c in cases.cases
    )


def render_with_case_prompt(
    event: Event, cases: CaseSet, scheme: HeatLevelScheme
) -> PromptText:
    if not event.content:
        raise ValueError(f"event {event.id!r} has empty content")
    if len(cases) == 0:
        raise ValueError("case set is empty")
    text = _fill(
        _load_template("with_case.txt"),
        {
            "{event}": event.content,
            "{options}": render_options(scheme),
            "{Case}": serialize_cases(cases),
        },
    )
    return PromptText(text=text, kind="with_case", event_id=event.id)


def parse_answer(completion: str) -> ParsedAnswer:
    """Map a completion to a heat level, or None when nothing matches.

    Cascade: option-keyword letter, then punctuation-adjacent letter, then
    any standalone uppercase letter, then a "heat level N" phrase. Never
    raises; an unreadable completion is data, not an error.
    """
    for pattern in (_OPTION_ADJACENT, _PUNCT_ADJACENT, _STANDALONE):
        m = pattern.search(completion)
        if m:
            return ParsedAnswer(
                level=_LETTER_TO_LEVEL[m.group(1).upper()], raw=completion
            )
    m = _LEVEL_PHRASE.search(completion)
    if m:
        return ParsedAnswer(level=int(m.group(1)), raw=completion)
    return ParsedAnswer(level=None, raw=completion)
