"""Text synthesis from music tagger output.

Three generators turn a track's filtered tag predictions into a natural
language music description:

* ``tags`` - shuffle the tags and join them into a comma-separated list.
* ``data2text`` - fill one template sentence per tag category, then order,
  aggregate, and compress them with a (pluggable) rephraser.
* ``prompt2text`` - few-shot analogy prompting of a large language model:
  k (tags -> human description) pairs followed by the query tags.

The LLM and the neural rephraser sit behind small interfaces; deterministic
offline stand-ins are provided so the whole pipeline runs hermetically.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, Sequence

import numpy as np
import requests

from .vocab import DEFAULT_VOCABULARY

CATEGORIES = ("genre", "mood", "instrument")

DEFAULT_THRESHOLD = 0.3
DEFAULT_FEW_SHOT_K = 3


class EmptyTagSetError(ValueError):
    """Raised when a generator needs tags but none survived filtering."""


class SemanticsViolatedError(RuntimeError):
    """Raised when a rephraser output drops one of the input tags."""


class GenerationFailedError(RuntimeError):
    """Raised when an LLM completion is empty after truncation."""


@dataclass(frozen=True)
class TagPrediction:
    tag: str
    category: str
    confidence: float

    def __post_init__(self) -> None:
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown tag category {self.category!r}")
        if not math.isfinite(self.confidence):
            raise ValueError("confidence must be finite")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must be in [0, 1]")
        if not self.tag:
            raise ValueError("tag must be non-empty")


@dataclass
class TagSet:
    track_id: str
    predictions: list[TagPrediction] = field(default_factory=list)

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for pred in self.predictions:
            if pred.tag in seen:
                raise ValueError(f"duplicate tag {pred.tag!r}")
            seen.add(pred.tag)

    def __len__(self) -> int:
        return len(self.predictions)

    def tags(self) -> list[str]:
        return [p.tag for p in self.predictions]

    def by_category(self, category: str) -> list[TagPrediction]:
        return [p for p in self.predictions if p.category == category]


@dataclass
class AnalogyExample:
    """A (tagger output, human description) pair used for few-shot prompting."""

    tags: TagSet
    description: str

    def __post_init__(self) -> None:
        if not self.description.strip():
            raise ValueError("description must be non-empty")


@dataclass
class TemplateBank:
    """Per-category template sentences, each with one ``{tags}`` placeholder."""

    templates: dict[str, list[str]]

    def __post_init__(self) -> None:
        for category in CATEGORIES:
            entries = self.templates.get(category, [])
            if not entries:
                raise ValueError(f"template bank has no templates for {category}")
            for tpl in entries:
                if tpl.count("{tags}") != 1:
                    raise ValueError(
                        f"template {tpl!r} must contain exactly one {{tags}}"
                    )


DEFAULT_TEMPLATE_BANK = TemplateBank(
    {
        "genre": [
            "This is a {tags} track.",
            "A {tags} song.",
            "The recording leans toward {tags}.",
        ],
        "mood": [
            "The mood is {tags}.",
            "It feels {tags}.",
            "The atmosphere is {tags}.",
        ],
        "instrument": [
            "It features {tags}.",
            "You can hear {tags}.",
            "The arrangement is built on {tags}.",
        ],
    }
)


# ---------------------------------------------------------------------------
# Filtering and the "tags" generator
# ---------------------------------------------------------------------------


def filter_tags(
    predictions: Sequence[TagPrediction],
    threshold: float = DEFAULT_THRESHOLD,
    track_id: str = "",
) -> TagSet:
    """Keep predictions with confidence strictly above ``threshold``,
    preserving their relative order."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must be in [0, 1]")
    kept = [p for p in predictions if p.confidence > threshold]
    return TagSet(track_id=track_id, predictions=kept)


def tags_to_text(tags: TagSet, rng_seed: int = 0) -> str:
    """Comma-separated list of the tags in a seeded uniform-random order."""
    if len(tags) == 0:
        raise EmptyTagSetError("no tags above threshold")
    names = tags.tags()
    order = np.random.default_rng(rng_seed).permutation(len(names))
    return ", ".join(names[i] for i in order)


# ---------------------------------------------------------------------------
# data2text: templates + ordering/aggregation/compression
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TemplatedSentence:
    category: str
    text: str


def join_tags_natural(names: Sequence[str]) -> str:
    """Join tag names as prose: "a", "a and b", "a, b and c"."""
    if not names:
        raise ValueError("no tags to join")
    if len(names) == 1:
        return names[0]
    return ", ".join(names[:-1]) + " and " + names[-1]


def fill_templates(
    tags: TagSet,
    bank: TemplateBank = DEFAULT_TEMPLATE_BANK,
    rng_seed: int = 0,
) -> list[TemplatedSentence]:
    """One filled template per category that has at least one tag,
    in canonical category order (genre, mood, instrument)."""
    rng = np.random.default_rng(rng_seed)
    sentences = []
    for category in CATEGORIES:
        preds = tags.by_category(category)
        if not preds:
            continue
        options = bank.templates[category]
        template = options[int(rng.integers(len(options)))]
        text = template.replace("{tags}", join_tags_natural([p.tag for p in preds]))
        sentences.append(TemplatedSentence(category=category, text=text))
    return sentences


Rephraser = Callable[[list[str]], str]


def _category_rank(sentence: TemplatedSentence | str) -> int:
    if isinstance(sentence, TemplatedSentence) and sentence.category in CATEGORIES:
        return CATEGORIES.index(sentence.category)
    return len(CATEGORIES)


def rephrase(
    sentences: Sequence[TemplatedSentence | str],
    rephraser: Rephraser | None = None,
    tags: TagSet | None = None,
) -> str:
    """Order, aggregate, and compress template sentences into one description.

    The ordering stage sorts by category priority (genre, mood, instrument;
    stable). The default compression joins adjacent sentence pairs with
    spaces; an external neural rephraser may be plugged in instead. When
    ``tags`` is given, the output is checked to still contain every tag.
    """
    if not sentences:
        raise ValueError("need at least one sentence")
    ordered = sorted(sentences, key=_category_rank)
    texts = [s.text if isinstance(s, TemplatedSentence) else str(s) for s in ordered]
    if rephraser is None:
        # Aggregate adjacent sentences pairwise, then join everything with
        # spaces; with space-joined aggregation the two stages collapse.
        aggregated = [" ".join(texts[i : i + 2]) for i in range(0, len(texts), 2)]
        output = " ".join(aggregated)
    else:
        output = rephraser(texts)
    if tags is not None:
        missing = [t for t in tags.tags() if t not in output]
        if missing:
            raise SemanticsViolatedError(f"semantics violated: lost tags {missing}")
    return output


def data2text(
    tags: TagSet,
    bank: TemplateBank = DEFAULT_TEMPLATE_BANK,
    rng_seed: int = 0,
    rephraser: Rephraser | None = None,
) -> str:
    if len(tags) == 0:
        raise EmptyTagSetError("no tags above threshold")
    sentences = fill_templates(tags, bank, rng_seed)
    return rephrase(sentences, rephraser=rephraser, tags=tags)


# ---------------------------------------------------------------------------
# prompt2text: few-shot analogy prompting
# ---------------------------------------------------------------------------


def render_tags_with_confidence(tags: TagSet) -> str:
    return ", ".join(f"{p.tag} ({p.confidence:.2f})" for p in tags.predictions)


def build_analogy_prompt(
    examples: Sequence[AnalogyExample],
    query: TagSet,
    k: int = DEFAULT_FEW_SHOT_K,
    rng_seed: int = 0,
) -> str:
    """k sampled (Tags -> Description) blocks followed by the query block,
    ending exactly at the "Description:" completion anchor."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > len(examples):
        raise ValueError(f"k={k} exceeds the {len(examples)} available examples")
    rng = np.random.default_rng(rng_seed)
    chosen = rng.choice(len(examples), size=k, replace=False)
    parts = []
    for idx in chosen:
        ex = examples[int(idx)]
        parts.append(
            f"Tags: {render_tags_with_confidence(ex.tags)}\n"
            f"Description: {ex.description}\n\n"
        )
    parts.append(f"Tags: {render_tags_with_confidence(query)}\nDescription:")
    return "".join(parts)


def truncate_completion(raw: str) -> str:
    """Keep the completion's first paragraph, cutting at a blank line or a
    "Tags:" marker, and drop an echoed "Description:" prefix."""
    cut = len(raw)
    for marker in ("\n\n", "Tags:"):
        pos = raw.find(marker)
        if pos != -1:
            cut = min(cut, pos)
    text = raw[:cut].strip()
    if text.startswith("Description:"):
        text = text[len("Description:") :].strip()
    return text


class LlmClient(Protocol):
    def complete(self, prompt: str, max_tokens: int, seed: int) -> str: ...


class MockLlmClient:
    """Deterministic offline language-model double.

    Reads the query tags out of the prompt's final block and writes them into
    a short description, then appends a spurious next block so callers must
    truncate, mimicking raw completion output.
    """

    _TAG_ITEM = re.compile(r"\s*(.+?)\s*\(\d+\.\d+\)\s*$")

    def complete(self, prompt: str, max_tokens: int, seed: int) -> str:
        tag_lines = [
            line[len("Tags:") :].strip()
            for line in prompt.splitlines()
            if line.startswith("Tags:")
        ]
        names: list[str] = []
        if tag_lines:
            for item in tag_lines[-1].split(", "):
                match = self._TAG_ITEM.match(item)
                names.append(match.group(1) if match else item.strip())
        digest = hashlib.blake2b(
            f"{seed}|{prompt}".encode("utf-8"), digest_size=8
        ).digest()
        rng = np.random.default_rng(int.from_bytes(digest, "little"))
        sentence = self._compose(names, rng)
        words = sentence.split()
        if len(words) > max_tokens:
            sentence = " ".join(words[:max_tokens])
        return f" {sentence}\n\nTags: pop (0.50)\nDescription: another track"

    def _compose(self, names: list[str], rng: np.random.Generator) -> str:
        genres = [n for n in names if n in DEFAULT_VOCABULARY["genre"]]
        moods = [n for n in names if n in DEFAULT_VOCABULARY["mood"]]
        instruments = [
            n
            for n in names
            if n not in DEFAULT_VOCABULARY["genre"]
            and n not in DEFAULT_VOCABULARY["mood"]
        ]
        genre = genres[0] if genres else "music"
        mood = moods[0] if moods else ""
        variant = int(rng.integers(3))
        if instruments:
            played = join_tags_natural(instruments[:3])
            if variant == 0:
                body = f"A {mood} {genre} track featuring {played}."
            elif variant == 1:
                body = f"{genre} with {played}, {mood} in feel."
            else:
                body = f"A {mood} piece of {genre} built on {played}."
        else:
            body = f"A {mood} {genre} track." if mood else f"A {genre} track."
        body = " ".join(body.split())
        return body[0].upper() + body[1:]


class HttpLlmClient:
    """Minimal HTTP client for a text-completion endpoint.

    The endpoint, auth token, and model name come from constructor arguments
    or the VIML_LLM_URL / VIML_LLM_TOKEN / VIML_LLM_MODEL environment
    variables. The endpoint must accept ``{prompt, max_tokens, seed, model}``
    and answer with ``{"text": ...}`` or an OpenAI-style ``choices`` list.
    """

    def __init__(
        self,
        url: str | None = None,
        token: str | None = None,
        model: str | None = None,
        timeout: float = 60.0,
    ):
        import os

        self.url = url or os.environ.get("VIML_LLM_URL", "")
        self.token = token or os.environ.get("VIML_LLM_TOKEN", "")
        self.model = model or os.environ.get("VIML_LLM_MODEL", "")
        self.timeout = timeout
        if not self.url:
            raise ValueError("no LLM endpoint configured (set VIML_LLM_URL)")

    def complete(self, prompt: str, max_tokens: int, seed: int) -> str:
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        body = {"prompt": prompt, "max_tokens": max_tokens, "seed": seed}
        if self.model:
            body["model"] = self.model
        resp = requests.post(self.url, json=body, headers=headers, timeout=self.timeout)
        resp.raise_for_status()
        payload = resp.json()
        if "text" in payload:
            return payload["text"]
        return payload["choices"][0]["text"]


def prompt2text(
    query: TagSet,
    examples: Sequence[AnalogyExample],
    k: int = DEFAULT_FEW_SHOT_K,
    llm: LlmClient | None = None,
    rng_seed: int = 0,
    max_tokens: int = 80,
) -> str:
    """Few-shot analogy completion, truncated to the first paragraph."""
    if len(query) == 0:
        raise EmptyTagSetError("no tags above threshold")
    if llm is None:
        llm = MockLlmClient()
    prompt = build_analogy_prompt(examples, query, k=k, rng_seed=rng_seed)
    completion = llm.complete(prompt, max_tokens=max_tokens, seed=rng_seed)
    text = truncate_completion(completion)
    if not text:
        raise GenerationFailedError("generation failed")
    return text


# ---------------------------------------------------------------------------
# Record I/O and the generator dispatcher
# ---------------------------------------------------------------------------

GENERATOR_METHODS = ("tags", "data2text", "prompt2text")


def synthesize_description(
    method: str,
    tags: TagSet,
    rng_seed: int = 0,
    examples: Sequence[AnalogyExample] | None = None,
    k: int = DEFAULT_FEW_SHOT_K,
    llm: LlmClient | None = None,
) -> str:
    if method == "tags":
        return tags_to_text(tags, rng_seed)
    if method == "data2text":
        return data2text(tags, rng_seed=rng_seed)
    if method == "prompt2text":
        if not examples:
            raise ValueError("prompt2text needs analogy examples")
        return prompt2text(tags, examples, k=k, llm=llm, rng_seed=rng_seed)
    raise ValueError(f"unknown synthesis method {method!r}")


@dataclass
class TrackTextRecord:
    track_id: str
    tags: TagSet
    text: str | None = None


def write_records(path: str | Path, records: Sequence[TrackTextRecord]) -> None:
    """Write one JSON object per line: {track_id, tags:[...], text}."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(
                json.dumps(
                    {
                        "track_id": rec.track_id,
                        "tags": [
                            {
                                "tag": p.tag,
                                "category": p.category,
                                "confidence": p.confidence,
                            }
                            for p in rec.tags.predictions
                        ],
                        "text": rec.text,
                    }
                )
                + "\n"
            )


def read_records(path: str | Path) -> list[TrackTextRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            tags = TagSet(
                track_id=raw["track_id"],
                predictions=[
                    TagPrediction(
                        tag=p["tag"],
                        category=p["category"],
                        confidence=float(p["confidence"]),
                    )
                    for p in raw.get("tags", [])
                ],
            )
            records.append(
                TrackTextRecord(
                    track_id=raw["track_id"], tags=tags, text=raw.get("text")
                )
            )
    return records
