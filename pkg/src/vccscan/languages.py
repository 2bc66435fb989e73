"""Supported source languages and their tree-sitter grammars."""

from __future__ import annotations

import enum
import functools

import tree_sitter
import tree_sitter_c
import tree_sitter_cpp
import tree_sitter_java

from vccscan.errors import UnsupportedLanguage


class Language(str, enum.Enum):
    C = "C"
    CPP = "CPP"
    JAVA = "JAVA"

    @classmethod
    def parse(cls, value) -> "Language":
        if isinstance(value, Language):
            return value
        key = str(value).strip().upper()
        key = {"C++": "CPP", "CXX": "CPP"}.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise UnsupportedLanguage(f"unsupported language: {value!r}") from None


EXTENSIONS = {
    ".c": Language.C,
    ".h": Language.C,
    ".cc": Language.CPP,
    ".cpp": Language.CPP,
    ".cxx": Language.CPP,
    ".hpp": Language.CPP,
    ".java": Language.JAVA,
}

_GRAMMARS = {
    Language.C: tree_sitter_c.language,
    Language.CPP: tree_sitter_cpp.language,
    Language.JAVA: tree_sitter_java.language,
}


@functools.lru_cache(maxsize=None)
def grammar(language: Language) -> tree_sitter.Language:
    return tree_sitter.Language(_GRAMMARS[Language.parse(language)]())


def new_parser(language) -> tree_sitter.Parser:
    # Parsers are stateful; callers get a fresh one so concurrent parses never share it.
    return tree_sitter.Parser(grammar(Language.parse(language)))
