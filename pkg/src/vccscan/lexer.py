"""Lossless lexer for C, C++ and Java source.

The token list always concatenates back to the input text, which lets the
comment stripper, the Type-1 generator and the token-diff statistic share one
view of what counts as code, comment, literal and whitespace.
"""

from __future__ import annotations

import re
from typing import NamedTuple

from vccscan.languages import Language

WS = "ws"
LINE_COMMENT = "line_comment"
BLOCK_COMMENT = "block_comment"
STRING = "string"
CHAR = "char"
NUMBER = "number"
IDENT = "ident"
PUNCT = "punct"

COMMENT_KINDS = frozenset({LINE_COMMENT, BLOCK_COMMENT})
LITERAL_KINDS = frozenset({STRING, CHAR})


class Token(NamedTuple):
    kind: str
    text: str
    start: int

    @property
    def end(self) -> int:
        return self.start + len(self.text)


_PUNCT = (
    r">>>=|<<=|>>=|>>>|\.\.\.|->\*|->|\+\+|--|<<|>>|<=|>=|==|!=|&&|\|\||::"
    r"|\+=|-=|\*=|/=|%=|&=|\|=|\^=|##|."
)
_STR_PREFIX = r"(?:u8|[uUL])?"


def _build(language: Language) -> re.Pattern:
    parts = [
        (WS, r"(?:[ \t\f\v\r\n]|\\\r?\n)+"),
        (LINE_COMMENT, r"//(?:\\\r?\n|[^\r\n])*"),
        (BLOCK_COMMENT, r"/\*.*?(?:\*/|\Z)"),
    ]
    if language is Language.JAVA:
        parts.append((STRING, r'"""(?:\\.|.)*?(?:"""|\Z)'))
    if language is Language.CPP:
        parts.append((STRING, _STR_PREFIX + r'R"(?P<delim>[^ ()\\\t\r\n"]{0,16})\(.*?\)(?P=delim)"'))
    parts += [
        (STRING, _STR_PREFIX + r'"(?:\\(?:\r?\n|.)|[^"\\\r\n])*(?:"|(?=[\r\n])|\Z)'),
        (CHAR, _STR_PREFIX + r"'(?:\\(?:\r?\n|.)|[^'\\\r\n])*(?:'|(?=[\r\n])|\Z)"),
    ]
    # C++14 digit separators are the only place a quote may sit inside a number.
    sep = r"|'(?=\w)" if language is Language.CPP else ""
    parts += [
        (NUMBER, r"\.?\d(?:[eEpP][+-]|[\w.]" + sep + r")*"),
        (IDENT, r"(?:[^\W\d]|\$)(?:\w|\$)*"),
        (PUNCT, _PUNCT),
    ]
    # Named groups cannot repeat, so kinds are recovered from the group index.
    body = "|".join(f"(?P<g{i}>{rx})" for i, (_, rx) in enumerate(parts))
    return re.compile(body, re.DOTALL), [kind for kind, _ in parts]


_PATTERNS = {lang: _build(lang) for lang in Language}


def tokenize(text: str, language=Language.C) -> list[Token]:
    pattern, kinds = _PATTERNS[Language.parse(language)]
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        m = pattern.match(text, pos)
        # PUNCT's trailing "." makes the alternation total, so m is never None.
        idx = int(m.lastgroup[1:])
        tokens.append(Token(kinds[idx], m.group(), pos))
        pos = m.end()
    return tokens


def code_tokens(text: str, language=Language.C) -> list[str]:
    """Token texts with whitespace and comments removed."""
    return [t.text for t in tokenize(text, language) if t.kind != WS and t.kind not in COMMENT_KINDS]


_WORD = re.compile(r"\w+|[^\w\s]")


def comment_words(comment: str) -> list[str]:
    if comment.startswith("//"):
        return ["//"] + _WORD.findall(comment[2:])
    body = comment[2:]
    closed = body.endswith("*/") and len(body) >= 2
    if closed:
        body = body[:-2]
    return ["/*"] + _WORD.findall(body) + (["*/"] if closed else [])


def diff_tokens(text: str, language=Language.C) -> list[str]:
    """Tokens used for edit-distance statistics: code tokens plus the words of
    every comment, so a long comment counts as many tokens."""
    out: list[str] = []
    for tok in tokenize(text, language):
        if tok.kind == WS:
            continue
        if tok.kind in COMMENT_KINDS:
            out.extend(comment_words(tok.text))
        else:
            out.append(tok.text)
    return out
