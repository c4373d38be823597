"""Data model and file I/O for surface-segmented word types.

A word type pairs a surface form with its gold morph sequence; the morphs
concatenate back to the surface exactly (no spelling changes). A corpus is
a deduplicated inventory of such types for one language.

File format: UTF-8, LF line endings, one type per line as
``surface<TAB>morph1 morph2 ...`` with single spaces between morphs.
Blank lines are ignored, lines starting with ``#`` are comments. The ``+``
joiner seen in human-readable output never appears in files, so ``+`` is
allowed as an ordinary character.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

DISPLAY_JOINER = " + "

_ERROR_KINDS = (
    "malformed-line",
    "empty-morph",
    "concat-mismatch",
    "conflicting-duplicate",
)


class CorpusError(ValueError):
    """Raised for invalid corpus content, with the offending line number."""

    def __init__(self, kind: str, message: str, line_no: int | None = None):
        assert kind in _ERROR_KINDS, kind
        self.kind = kind
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Word:
    """A surface form with its gold segmentation.

    Invariant: ``"".join(morphs) == surface`` and every morph is nonempty.
    """

    surface: str
    morphs: tuple[str, ...]

    def __post_init__(self):
        if not self.morphs:
            raise ValueError(f"word {self.surface!r} has no morphs")
        if any(not m for m in self.morphs):
            raise ValueError(f"word {self.surface!r} has an empty morph")
        if "".join(self.morphs) != self.surface:
            raise ValueError(
                f"morphs {self.morphs!r} do not rebuild surface {self.surface!r}"
            )

    def pretty(self) -> str:
        """Human-readable display form, e.g. ``paper + s``."""
        return DISPLAY_JOINER.join(self.morphs)


@dataclass(frozen=True)
class Corpus:
    """An ordered, surface-unique inventory of word types."""

    language_tag: str
    words: tuple[Word, ...]

    def __post_init__(self):
        seen = set()
        for w in self.words:
            if w.surface in seen:
                raise ValueError(f"duplicate surface {w.surface!r} in corpus")
            seen.add(w.surface)

    def __len__(self) -> int:
        return len(self.words)

    def surfaces(self) -> set[str]:
        return {w.surface for w in self.words}


def _parse_line(line: str, line_no: int) -> Word | None:
    """One TSV line to a Word; None for blank lines and # comments."""
    if not line.strip() or line.startswith("#"):
        return None
    parts = line.split("\t")
    if len(parts) != 2:
        raise CorpusError(
            "malformed-line",
            f"expected 'surface<TAB>morphs', got {line!r}",
            line_no,
        )
    surface, morph_field = parts
    morphs = tuple(morph_field.split(" "))
    if any(not m for m in morphs) or not surface:
        raise CorpusError(
            "empty-morph",
            f"empty morph or surface in {line!r}",
            line_no,
        )
    if "".join(morphs) != surface:
        raise CorpusError(
            "concat-mismatch",
            f"morphs {morphs!r} do not rebuild surface {surface!r}",
            line_no,
        )
    return Word(surface, morphs)


def parse_word_list(text: str) -> tuple[Word, ...]:
    """Parse a token list, keeping duplicates and order.

    Sampled-with-replacement data sets are multisets, so a repeated line
    is meaningful here, unlike in parse_corpus.
    """
    words = []
    for line_no, raw in enumerate(text.split("\n"), start=1):
        word = _parse_line(raw.rstrip("\r"), line_no)
        if word is not None:
            words.append(word)
    return tuple(words)


def parse_corpus(text: str, language_tag: str = "und") -> Corpus:
    """Parse a corpus document.

    Identical duplicate lines are silently deduplicated (first occurrence
    order is kept); the same surface with a different segmentation is a
    hard error, as are morphs that do not rebuild the surface.
    """
    by_surface: dict[str, Word] = {}
    for line_no, raw in enumerate(text.split("\n"), start=1):
        word = _parse_line(raw.rstrip("\r"), line_no)
        if word is None:
            continue
        prev = by_surface.get(word.surface)
        if prev is None:
            by_surface[word.surface] = word
        elif prev.morphs != word.morphs:
            raise CorpusError(
                "conflicting-duplicate",
                f"surface {word.surface!r} already segmented as {prev.morphs!r}, "
                f"conflicting with {word.morphs!r}",
                line_no,
            )
    return Corpus(language_tag, tuple(by_surface.values()))


def write_corpus(corpus: Corpus) -> str:
    """Serialize a corpus; ``parse_corpus(write_corpus(c))`` rebuilds ``c``."""
    return "".join(f"{w.surface}\t{' '.join(w.morphs)}\n" for w in corpus.words)


def type_count(corpus: Corpus) -> int:
    """Number of unique surfaces (equals ``len(corpus)`` by construction)."""
    return len(corpus.words)


def load_corpus(path: str | Path, language_tag: str | None = None) -> Corpus:
    p = Path(path)
    tag = language_tag if language_tag is not None else p.stem
    return parse_corpus(p.read_text(encoding="utf-8"), tag)


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    Path(path).write_text(write_corpus(corpus), encoding="utf-8")
