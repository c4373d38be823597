import pytest
from hypothesis import given, strategies as st

from segbench.corpus import (
    Corpus,
    CorpusError,
    Word,
    load_corpus,
    parse_corpus,
    parse_word_list,
    save_corpus,
    type_count,
    write_corpus,
)


def test_word_concat_invariant_enforced():
    Word("papers", ("paper", "s"))
    with pytest.raises(ValueError):
        Word("papers", ("paper", "z"))
    with pytest.raises(ValueError):
        Word("papers", ("papers", ""))


def test_word_is_hashable_and_frozen():
    w = Word("dogs", ("dog", "s"))
    assert hash(w) == hash(Word("dogs", ("dog", "s")))
    with pytest.raises(AttributeError):
        w.surface = "cats"


def test_parse_basic():
    c = parse_corpus("papers\tpaper s\ndog\tdog\n", "en")
    assert c.language_tag == "en"
    assert len(c) == 2
    assert c.words[0].morphs == ("paper", "s")


def test_parse_skips_blank_and_comment_lines():
    c = parse_corpus("# header\n\npapers\tpaper s\n   \n")
    assert type_count(c) == 1


def test_parse_malformed_line():
    with pytest.raises(CorpusError) as err:
        parse_corpus("no_tab_here\n")
    assert err.value.kind == "malformed-line"
    assert err.value.line_no == 1


def test_parse_concat_mismatch():
    with pytest.raises(CorpusError) as err:
        parse_corpus("papers\tpape rs\npaperz\tpaper s\n")
    assert err.value.kind == "concat-mismatch"
    assert err.value.line_no == 2


def test_parse_empty_morph():
    with pytest.raises(CorpusError) as err:
        parse_corpus("ab\ta  b\n")  # double space -> empty morph
    assert err.value.kind == "empty-morph"


def test_identical_duplicates_collapse_conflicts_raise():
    c = parse_corpus("dog\tdog\ndog\tdog\n")
    assert len(c) == 1
    with pytest.raises(CorpusError) as err:
        parse_corpus("dogs\tdog s\ndogs\tdogs\n")
    assert err.value.kind == "conflicting-duplicate"


def test_word_list_keeps_duplicates_in_order():
    words = parse_word_list("dog\tdog\nant\tant\ndog\tdog\n")
    assert [w.surface for w in words] == ["dog", "ant", "dog"]


def test_corpus_rejects_duplicate_surfaces():
    with pytest.raises(ValueError):
        Corpus("und", (Word("a", ("a",)), Word("a", ("a",))))


def test_roundtrip_file(tmp_path):
    c = parse_corpus("papers\tpaper s\ndog\tdog\n", "en")
    path = tmp_path / "c.tsv"
    save_corpus(c, path)
    again = load_corpus(path, language_tag="en")
    assert again == c


surfaces = st.text(
    alphabet=st.characters(whitelist_categories=("Ll",), max_codepoint=0x2FF),
    min_size=1,
    max_size=8,
)


@st.composite
def annotated_words(draw):
    surface = draw(surfaces)
    n = len(surface)
    cuts = sorted(draw(st.sets(st.integers(1, max(1, n - 1)), max_size=3)))
    cuts = [c for c in cuts if c < n]
    bounds = [0] + cuts + [n]
    morphs = tuple(surface[a:b] for a, b in zip(bounds, bounds[1:]))
    return Word(surface, morphs)


@given(st.lists(annotated_words(), min_size=1, max_size=30))
def test_write_parse_roundtrip(words):
    by_surface = {}
    for w in words:
        by_surface.setdefault(w.surface, w)
    corpus = Corpus("und", tuple(by_surface.values()))
    assert parse_corpus(write_corpus(corpus)) == corpus
