"""Text ingestion: keep self-written messages, tokenize, filter.

Two on-disk history formats are understood:

* plain text -- every line is one self-written message;
* TSV -- ``author<TAB>text`` per line, where author ``self`` marks own messages.
"""
from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable

URL_PREFIXES = ("http://", "https://", "www.")
SELF_AUTHOR = "self"

# chunk-level ASCII emoticons such as :) ;-P <3 xD
_EMOTICON = re.compile(r"^(?:[:;=8][\-o^']?[()\[\]dDpP/\\|*oO3@$]+|<3+|[xX][dD]+|\^_*\^)$")
_LEADING_OPEN = "\"'([{<"
_TAG_SIGILS = "#@"
# zero-width joiner and skin-tone modifiers glue emoji into one run
_EMOJI_GLUE = {"\u200d"} | {chr(c) for c in range(0x1F3FB, 0x1F400)}

Message = tuple[bool, str]


@dataclass
class RawHistory:
    messages: list[Message] = field(default_factory=list)


@dataclass
class ReferenceDocument:
    user_id: str
    tokens: list[str] = field(default_factory=list)


@dataclass
class PrepConfig:
    stoplist_path: str | Path | None = None
    english_threshold: float = 0.5
    language_filter: bool = False
    keep_tags: bool = True

    def stopwords(self) -> frozenset[str]:
        if self.stoplist_path is None:
            return default_stopwords()
        return load_wordlist(self.stoplist_path)


def load_wordlist(path: str | Path) -> frozenset[str]:
    text = Path(path).read_text(encoding="utf-8")
    return frozenset(line.strip().lower() for line in text.splitlines() if line.strip())


def _bundled(name: str) -> frozenset[str]:
    text = resources.files("latentsim.data").joinpath(name).read_text(encoding="utf-8")
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


@lru_cache(maxsize=None)
def default_stopwords() -> frozenset[str]:
    return _bundled("stopwords_en.txt")


@lru_cache(maxsize=None)
def english_words() -> frozenset[str]:
    return _bundled("words_en.txt") | default_stopwords()


def is_url(chunk: str) -> bool:
    return chunk.lstrip(_LEADING_OPEN).startswith(URL_PREFIXES)


def _kind(ch: str) -> str:
    if ch.isalnum() or ch == "_":
        return "word"
    cat = unicodedata.category(ch)
    if ch in _EMOJI_GLUE or cat.startswith("M"):
        return "glue"
    if cat in ("So", "Sk") and not ch.isascii():
        return "emoji"
    return "sep"


def _split_chunk(chunk: str, keep_tags: bool) -> list[str]:
    out: list[str] = []
    cur: list[str] = []
    cur_kind = "sep"
    for i, ch in enumerate(chunk):
        kind = _kind(ch)
        if kind == "glue":
            if cur:
                cur.append(ch)
            continue
        if kind == cur_kind and kind != "sep":
            cur.append(ch)
            continue
        if cur:
            out.append("".join(cur))
        cur, cur_kind = [], kind
        if kind != "sep":
            cur.append(ch)
        elif (
            keep_tags
            and ch in _TAG_SIGILS
            and i + 1 < len(chunk)
            and _kind(chunk[i + 1]) == "word"
            and (i == 0 or _kind(chunk[i - 1]) != "word")
        ):
            cur, cur_kind = [ch], "word"
    if cur:
        out.append("".join(cur))
    return out


def tokenize(text: str, keep_tags: bool = True) -> list[str]:
    """Lowercase *text* and split it into word and emoji tokens.

    URL chunks are dropped whole. Punctuation separates tokens and is
    discarded, except for standalone ASCII emoticons and (with
    ``keep_tags``) a leading ``#``/``@`` on a word.
    """
    text = unicodedata.normalize("NFC", text.lower())
    tokens: list[str] = []
    for chunk in text.split():
        if is_url(chunk):
            continue
        if _EMOTICON.match(chunk):
            tokens.append(chunk)
            continue
        tokens.extend(_split_chunk(chunk, keep_tags))
    return tokens


def filter_tokens(tokens: Iterable[str], stopwords: frozenset[str]) -> list[str]:
    return [t for t in tokens if t not in stopwords and not t.startswith(URL_PREFIXES)]


def majority_language_ok(tokens: list[str], config: PrepConfig | None = None) -> bool:
    """True when at least ``english_threshold`` of *tokens* are known English words."""
    config = config or PrepConfig()
    if not tokens:
        return True
    vocab = english_words()
    hits = sum(1 for t in tokens if t in vocab)
    return hits / len(tokens) >= config.english_threshold


def build_reference(
    history: RawHistory, config: PrepConfig | None = None, user_id: str = ""
) -> ReferenceDocument:
    config = config or PrepConfig()
    stop = config.stopwords()
    own = [
        tokenize(text, keep_tags=config.keep_tags)
        for is_self, text in history.messages
        if is_self
    ]
    if config.language_filter:
        raw = [t for msg in own for t in msg]
        if not majority_language_ok(raw, config):
            return ReferenceDocument(user_id, [])
    tokens = [t for msg in own for t in filter_tokens(msg, stop)]
    return ReferenceDocument(user_id, tokens)


def parse_plain(text: str) -> RawHistory:
    return RawHistory([(True, line) for line in text.splitlines()])


def parse_tsv(text: str) -> RawHistory:
    messages: list[Message] = []
    for line in text.splitlines():
        if not line.strip():
            continue
        author, sep, body = line.partition("\t")
        if not sep:
            # a line without a tab cannot be attributed; treat as foreign
            messages.append((False, line))
            continue
        messages.append((author.strip().lower() == SELF_AUTHOR, body))
    return RawHistory(messages)


def read_history(path: str | Path) -> RawHistory:
    """Read a history file; ``.tsv`` selects the author/text format."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".tsv":
        return parse_tsv(text)
    return parse_plain(text)
