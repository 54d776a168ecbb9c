from hypothesis import given, settings
from hypothesis import strategies as st

from latentsim.textprep import (
    PrepConfig,
    RawHistory,
    build_reference,
    default_stopwords,
    majority_language_ok,
    parse_plain,
    parse_tsv,
    read_history,
    tokenize,
)


def test_tokenize_examples():
    assert tokenize("") == []
    assert tokenize("Hello, WORLD!") == ["hello", "world"]
    assert tokenize("good 😂😂 job") == ["good", "😂😂", "job"]


def test_tokenize_drops_urls_keeps_emoticons():
    assert tokenize("see https://x.co and www.foo.org or (http://a.b)") == ["see", "and", "or"]
    assert tokenize("nice :) <3") == ["nice", ":)", "<3"]


def test_tags_are_kept_by_default():
    assert tokenize("go #team @bob") == ["go", "#team", "@bob"]
    assert tokenize("go #team @bob", keep_tags=False) == ["go", "team", "bob"]
    assert tokenize("a#b") == ["a", "b"]


def test_build_reference_keeps_only_own_messages():
    history = RawHistory([(True, "Obama speaks to the media"), (False, "nope")])
    assert build_reference(history).tokens == ["obama", "speaks", "media"]


def test_build_reference_drops_urls():
    history = RawHistory([(True, "see https://x.co now")])
    assert build_reference(history).tokens == ["see", "now"]


def test_no_own_messages_gives_empty_document():
    history = RawHistory([(False, "hello there"), (False, "general")])
    assert build_reference(history, user_id="u").tokens == []
    assert build_reference(RawHistory()).tokens == []


def test_language_check():
    cfg = PrepConfig(english_threshold=0.5)
    assert majority_language_ok([], cfg)
    assert majority_language_ok(["the", "and", "house"], cfg)
    assert not majority_language_ok(["der", "und", "haus"], cfg)


def test_language_filter_empties_foreign_history():
    history = RawHistory([(True, "der hund und die katze im haus")])
    assert build_reference(history, PrepConfig(language_filter=True)).tokens == []
    assert build_reference(history).tokens  # filter is off by default


def test_custom_stoplist(tmp_path):
    path = tmp_path / "stop.txt"
    path.write_text("Media\nobama\n", encoding="utf-8")
    history = RawHistory([(True, "Obama speaks to the media")])
    assert build_reference(history, PrepConfig(stoplist_path=path)).tokens == ["speaks", "to", "the"]


def test_history_formats(tmp_path):
    assert parse_plain("a b\n\nc").messages == [(True, "a b"), (True, ""), (True, "c")]
    tsv = parse_tsv("self\thi there\nbob\tyo\nno tab here\nSELF\tbye\n")
    assert tsv.messages == [(True, "hi there"), (False, "yo"), (False, "no tab here"), (True, "bye")]
    p = tmp_path / "h.tsv"
    p.write_text("self\tmy words\nalice\ttheir words\n", encoding="utf-8")
    assert build_reference(read_history(p)).tokens == ["words"]


_piece = st.sampled_from(list("abcXYZ019 ,.!?#@:)-'é😂\t") + [" http://q.z ", " www.w "])
_text = st.lists(_piece, max_size=40).map("".join)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.tuples(st.booleans(), _text), max_size=6))
def test_reference_properties(messages):
    doc = build_reference(RawHistory(messages))
    stop = default_stopwords()
    for tok in doc.tokens:
        assert tok not in stop
        assert not tok.startswith(("http://", "https://", "www."))
        assert tok == tok.lower()
    # idempotent: re-tokenizing the output gives the output
    assert tokenize(" ".join(doc.tokens)) == doc.tokens
    # order preservation and self-only: the tokens equal the per-message
    # filtered tokens concatenated in message order
    expected = [t for own, text in messages if own for t in tokenize(text) if t not in stop]
    assert doc.tokens == expected


@settings(max_examples=200, deadline=None)
@given(_text)
def test_tokenize_deterministic(text):
    assert tokenize(text) == tokenize(text)
