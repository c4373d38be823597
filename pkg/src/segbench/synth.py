"""Seeded synthetic agglutinative corpus generator.

Words are a CV-syllable stem followed by suffixes drawn from ordered slot
inventories, prefix-closed: a word either stops or fills the next slot, so
the corpus contains every stem alone, with slot 1, with slots 1+2, and so
on. Stems reuse the same syllable space as the suffixes, which makes
boundaries genuinely ambiguous from local context alone. Two derivations
can collide on one surface; the first derivation generated keeps the
surface and later ones are dropped.
"""

from __future__ import annotations

from dataclasses import dataclass

from .corpus import Corpus, Word
from .seeds import rng_for

CONSONANTS = "bdgklmnprstv"
VOWELS = "aeiou"

DEFAULT_SLOTS: tuple[tuple[str, ...], ...] = (
    ("ta", "li", "mo", "ke"),
    ("na", "si", "ru"),
    ("a", "i"),
)


@dataclass(frozen=True)
class SyntheticSpec:
    n_stems: int = 60
    slot_inventories: tuple[tuple[str, ...], ...] = DEFAULT_SLOTS
    max_slots: int = 3
    seed: int = 0
    language_tag: str = "syn"
    min_stem_syllables: int = 2
    max_stem_syllables: int = 3
    # Explicit stems are used verbatim, bypassing stem generation and the
    # syllable constraints; n_stems is synced to match. Hand-checkable
    # fixtures need exact stems, not just a count.
    stems: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.stems is not None:
            if not self.stems or any(not s for s in self.stems):
                raise ValueError("explicit stems must be nonempty strings")
            if len(set(self.stems)) != len(self.stems):
                raise ValueError("explicit stems must be unique")
            object.__setattr__(self, "n_stems", len(self.stems))
        if self.n_stems < 1:
            raise ValueError("n_stems must be >= 1")
        if self.max_slots > len(self.slot_inventories):
            raise ValueError("max_slots exceeds the number of slot inventories")
        if any(not inv for inv in self.slot_inventories):
            raise ValueError("slot inventories must be nonempty")
        if not 1 <= self.min_stem_syllables <= self.max_stem_syllables:
            raise ValueError("invalid stem syllable range")


def generate_synthetic_corpus(spec: SyntheticSpec) -> Corpus:
    """Full prefix-closed suffixation of seeded or explicit stems."""
    if spec.stems is not None:
        return _suffixed(spec, list(spec.stems))
    rng = rng_for(spec.seed, "stems")
    stems: list[str] = []
    seen: set[str] = set()
    attempts = 0
    while len(stems) < spec.n_stems:
        attempts += 1
        if attempts > 1000 * spec.n_stems:
            raise RuntimeError("stem space exhausted; lower n_stems")
        n_syl = int(rng.integers(spec.min_stem_syllables, spec.max_stem_syllables + 1))
        stem = "".join(
            CONSONANTS[rng.integers(0, len(CONSONANTS))] + VOWELS[rng.integers(0, len(VOWELS))]
            for _ in range(n_syl)
        )
        if stem not in seen:
            seen.add(stem)
            stems.append(stem)
    return _suffixed(spec, stems)


def _suffixed(spec: SyntheticSpec, stems: list[str]) -> Corpus:
    words: dict[str, Word] = {}
    for stem in stems:
        combos: list[tuple[str, ...]] = [(stem,)]
        frontier: list[tuple[str, ...]] = [(stem,)]
        for slot in spec.slot_inventories[: spec.max_slots]:
            frontier = [combo + (suffix,) for combo in frontier for suffix in slot]
            combos.extend(frontier)
        for combo in combos:
            surface = "".join(combo)
            if surface not in words:
                words[surface] = Word(surface=surface, morphs=combo)
    return Corpus(language_tag=spec.language_tag, words=tuple(words.values()))
