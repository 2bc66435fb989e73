"""Text preprocessing for embedding and the abstraction used by the hash baseline."""

from __future__ import annotations

import dataclasses
import hashlib
import re

from vccscan.corpus import FunctionRecord, parse_standalone
from vccscan.errors import ParseFailure
from vccscan.languages import Language
from vccscan.lexer import BLOCK_COMMENT, IDENT, LINE_COMMENT, tokenize

C_KEYWORDS = frozenset(
    "auto break case char const continue default do double else enum extern float for goto if inline int long "
    "register restrict return short signed sizeof static struct switch typedef union unsigned void volatile while "
    "_Bool _Complex _Imaginary _Alignas _Alignof _Atomic _Generic _Noreturn _Static_assert _Thread_local".split()
)
CPP_KEYWORDS = C_KEYWORDS | frozenset(
    "alignas alignof and and_eq asm bitand bitor bool catch char8_t char16_t char32_t class compl concept consteval "
    "constexpr constinit const_cast co_await co_return co_yield decltype delete dynamic_cast explicit export false "
    "friend mutable namespace new noexcept not not_eq nullptr operator or or_eq private protected public "
    "reinterpret_cast requires static_assert static_cast template this thread_local throw true try typeid typename "
    "using virtual wchar_t xor xor_eq".split()
)
JAVA_KEYWORDS = frozenset(
    "abstract assert boolean break byte case catch char class const continue default do double else enum extends "
    "final finally float for goto if implements import instanceof int interface long native new package private "
    "protected public return short static strictfp super switch synchronized this throw throws transient try void "
    "volatile while var record yield sealed permits non-sealed true false null".split()
)
KEYWORDS = {Language.C: C_KEYWORDS, Language.CPP: CPP_KEYWORDS, Language.JAVA: JAVA_KEYWORDS}

FPARAM = "FPARAM"
LVAR = "LVAR"
DTYPE = "DTYPE"
FUNCCALL = "FUNCCALL"


def strip_comments(text: str, language=Language.C) -> str:
    """Remove ``//`` and ``/* */`` comments outside literals.

    Line comments vanish (their newline stays); block comments become a single
    space so adjacent tokens never fuse.
    """
    out = []
    for tok in tokenize(text, language):
        if tok.kind == LINE_COMMENT:
            continue
        out.append(" " if tok.kind == BLOCK_COMMENT else tok.text)
    return "".join(out)


_SPACES = re.compile(r" {2,}")
_TRAILING = re.compile(r" +$", re.MULTILINE)
_BLANK_RUNS = re.compile(r"\n{3,}")


def normalize_whitespace(text: str) -> str:
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    text = text.replace("\t", " ")
    text = _SPACES.sub(" ", text)
    text = _TRAILING.sub("", text)
    return _BLANK_RUNS.sub("\n\n", text)


def normalize_keyword_case(text: str, language=Language.C) -> str:
    """Lowercase language keywords.

    C, C++ and Java are case-sensitive, so a token is a keyword only when it is
    spelled exactly as one; ``RETURN`` stays an identifier and the pass is a
    near-identity for these grammars.
    """
    language = Language.parse(language)
    keywords = KEYWORDS[language]
    return "".join(
        tok.text.lower() if tok.kind == IDENT and tok.text in keywords else tok.text
        for tok in tokenize(text, language)
    )


def preprocess(text: str, language=Language.C) -> str:
    return normalize_keyword_case(normalize_whitespace(strip_comments(text, language)), language)


@dataclasses.dataclass(frozen=True)
class AbstractedFunction:
    source_id: str
    abstracted_text: str
    digest: str
    abstraction_degraded: bool = False

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


_WHITESPACE = re.compile(r"\s+")

_C_DECLARATOR_WRAPPERS = frozenset(
    {"pointer_declarator", "array_declarator", "reference_declarator", "parenthesized_declarator",
     "function_declarator", "init_declarator", "attributed_declarator"}
)
_C_PARAMS = frozenset({"parameter_declaration", "optional_parameter_declaration", "variadic_parameter_declaration"})
_JAVA_TYPED = frozenset(
    {"method_declaration", "formal_parameter", "local_variable_declaration", "enhanced_for_statement", "resource"}
)


def _declared_name(node):
    """Identifier introduced by a C/C++ declarator, through pointer/array/init wrappers."""
    while node is not None and node.type in _C_DECLARATOR_WRAPPERS:
        inner = node.child_by_field_name("declarator")
        if inner is None:
            inner = next((c for c in node.named_children if c.type != "parameter_list"), None)
        node = inner
    if node is not None and node.type == "identifier":
        return node
    return None


def _walk(node):
    stack = [node]
    while stack:
        cur = stack.pop()
        yield cur
        stack.extend(reversed(cur.children))


def _collect_c(fn):
    types, calls, params, locals_ = [], [], set(), set()
    ret = fn.child_by_field_name("type")
    if ret is not None:
        types.append(ret)
    for node in _walk(fn):
        kind = node.type
        if kind in _C_PARAMS:
            t = node.child_by_field_name("type")
            if t is not None:
                types.append(t)
            name = _declared_name(node.child_by_field_name("declarator"))
            if name is not None:
                params.add(name.text)
        elif kind == "declaration":
            t = node.child_by_field_name("type")
            if t is not None:
                types.append(t)
            for decl in node.children_by_field_name("declarator"):
                name = _declared_name(decl)
                if name is not None:
                    locals_.add(name.text)
        elif kind == "call_expression":
            callee = node.child_by_field_name("function")
            if callee is not None and callee.type in ("identifier", "qualified_identifier"):
                calls.append(callee)
            elif callee is not None and callee.type == "template_function":
                name = callee.child_by_field_name("name")
                if name is not None:
                    calls.append(name)
    return types, calls, params, locals_, {"identifier"}


def _collect_java(fn):
    types, calls, params, locals_ = [], [], set(), set()
    for node in _walk(fn):
        kind = node.type
        if kind in _JAVA_TYPED:
            t = node.child_by_field_name("type")
            if t is not None:
                types.append(t)
        if kind == "formal_parameter":
            name = node.child_by_field_name("name")
            if name is not None:
                params.add(name.text)
        elif kind == "spread_parameter":
            for child in node.named_children:
                if child.type == "variable_declarator":
                    params.add(child.child_by_field_name("name").text)
                elif child.type not in ("modifiers",):
                    types.append(child)
        elif kind == "catch_formal_parameter":
            for child in node.named_children:
                if child.type == "catch_type":
                    types.append(child)
            locals_.add(node.child_by_field_name("name").text)
        elif kind == "local_variable_declaration":
            for decl in node.children_by_field_name("declarator"):
                locals_.add(decl.child_by_field_name("name").text)
        elif kind in ("enhanced_for_statement", "resource"):
            name = node.child_by_field_name("name")
            if name is not None:
                locals_.add(name.text)
        elif kind == "method_invocation":
            calls.append(node.child_by_field_name("name"))
    return types, calls, params, locals_, {"identifier"}


def _is_java_member_name(node) -> bool:
    parent = node.parent
    if parent is None:
        return False
    if parent.type == "field_access" and parent.child_by_field_name("field") == node:
        return True
    if parent.type == "method_invocation" and parent.child_by_field_name("name") == node:
        return True
    return False


def _abstract(text: str, language: Language) -> bytes:
    data, _, fn, _ = parse_standalone(text, language)
    if fn is None:
        raise ParseFailure("no function definition found")
    wrapped = language is Language.JAVA
    collect = _collect_java if wrapped else _collect_c
    types, calls, params, locals_, ident_kinds = collect(fn)

    spans: list[tuple[int, int, str]] = []
    taken: list[tuple[int, int]] = []

    def claim(node, placeholder):
        lo, hi = node.start_byte, node.end_byte
        if any(lo < b and a < hi for a, b in taken):
            return
        taken.append((lo, hi))
        spans.append((lo, hi, placeholder))

    # Replacement order matters: a span claimed earlier is final.
    for node in types:
        claim(node, DTYPE)
    for node in calls:
        claim(node, FUNCCALL)
    idents = [n for n in _walk(fn) if n.type in ident_kinds and not (wrapped and _is_java_member_name(n))]
    for node in idents:
        if node.text in params:
            claim(node, FPARAM)
    for node in idents:
        if node.text in locals_:
            claim(node, LVAR)

    spans.sort()
    out = bytearray()
    pos = fn.start_byte
    for lo, hi, placeholder in spans:
        out += data[pos:lo]
        out += placeholder.encode()
        pos = hi
    out += data[pos:fn.end_byte]
    return bytes(out)


def _squeeze(text: str, language: Language) -> str:
    return _WHITESPACE.sub("", strip_comments(text, language))


def abstract_text(text: str, language, source_id: str = "") -> AbstractedFunction:
    """Abstract one function given as text; see :func:`abstract_function`."""
    language = Language.parse(language)
    try:
        replaced = _abstract(text, language).decode("utf-8", errors="replace")
        degraded = False
    except ParseFailure:
        replaced = text
        degraded = True
    flat = _squeeze(replaced, language)
    return AbstractedFunction(source_id, flat, hashlib.md5(flat.encode("utf-8")).hexdigest(), degraded)


def abstract_function(record: FunctionRecord) -> AbstractedFunction:
    """Replace declared types with DTYPE, called names with FUNCCALL, parameters
    with FPARAM and locals with LVAR, then drop comments and all whitespace and
    fingerprint with MD5.

    When no function can be recovered from the parse, the comment- and
    whitespace-stripped text is hashed as-is and ``abstraction_degraded`` is set.
    Globals and field accesses keep their names.
    """
    return abstract_text(record.text, record.language, record.id)


def hash_match(a: AbstractedFunction, b: AbstractedFunction) -> bool:
    return a.digest == b.digest
