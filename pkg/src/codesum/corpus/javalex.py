"""Tolerant Java lexing and method extraction.

No full parse: the extractor lexes the file, tracks brace contexts, and
recognizes type and method headers from the tokens accumulated since the
previous member boundary.  It keeps concrete, non-constructor methods
and drops overrides, found either by an @Override annotation or by a
name/arity match against a supertype declared in the same file.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field

from ..errors import UnbalancedBraces

_TOKEN = re.compile(
    r"""
      (?P<ws>\s+)
    | (?P<comment>//[^\n]*|/\*.*?\*/)
    | (?P<string>"(?:\\.|[^"\\])*")
    | (?P<char>'(?:\\.|[^'\\])*')
    | (?P<number>0[xXbB][0-9a-fA-F_]+[lL]?
        |(?:\d[\d_]*)?\.\d[\d_]*(?:[eE][+-]?\d+)?[fFdD]?
        |\d[\d_]*(?:\.[\d_]*)?(?:[eE][+-]?\d+)?[fFdDlL]?)
    | (?P<ident>[A-Za-z_$][A-Za-z0-9_$]*)
    | (?P<op>>>>=|>>>|<<=|>>=|\.\.\.|->|::|\+\+|--|&&|\|\|
        |[<>=!+\-*/%&|^]=|<<|>>|[{}()\[\];,.@?:~<>=!+\-*/%&|^])
    """,
    re.VERBOSE | re.DOTALL,
)

_MODIFIERS = {
    "public", "private", "protected", "static", "final", "abstract",
    "native", "synchronized", "strictfp", "default", "transient", "volatile",
}
# Keywords that can precede a parenthesized list but never name a method.
_NOT_A_METHOD = {
    "if", "for", "while", "switch", "catch", "do", "try", "else",
    "return", "new", "case", "throw", "assert", "super", "this",
    "synchronized",
}
_TYPE_KEYWORDS = {"class", "interface", "enum", "record"}


@dataclass
class RawMethod:
    """One extracted method: its name and the lexical tokens of its body."""

    name: str
    body_tokens: list[str]
    modifiers: set[str]
    annotations: set[str]
    file_path: str
    project: str


def lex(source_text: str) -> list[str]:
    """Lexical tokens of a Java source, comments and whitespace dropped.

    Unknown characters are skipped rather than rejected.
    """
    tokens: list[str] = []
    pos = 0
    n = len(source_text)
    while pos < n:
        m = _TOKEN.match(source_text, pos)
        if m is None:
            pos += 1
            continue
        pos = m.end()
        if m.lastgroup in ("ws", "comment"):
            continue
        tokens.append(m.group())
    return tokens


@dataclass
class _TypeDecl:
    name: str
    supertypes: list[str] = field(default_factory=list)
    declared: set[tuple[str, int]] = field(default_factory=set)


@dataclass
class _Header:
    name: str
    arity: int
    modifiers: set[str]
    annotations: set[str]
    has_return_type: bool


def _strip_generics(tokens: list[str]) -> list[str]:
    out: list[str] = []
    depth = 0
    for t in tokens:
        if t == "<":
            depth += 1
        elif t in (">", ">>", ">>>"):
            depth = max(0, depth - len(t))
        elif depth == 0:
            out.append(t)
    return out


def _parse_type_header(pending: list[str]) -> _TypeDecl | None:
    for kw in _TYPE_KEYWORDS:
        if kw in pending:
            k = pending.index(kw)
            rest = pending[k + 1:]
            if not rest or not re.match(r"[A-Za-z_$]", rest[0]):
                return None
            decl = _TypeDecl(name=rest[0])
            flat = _strip_generics(rest[1:])
            collecting = False
            for t in flat:
                if t in ("extends", "implements"):
                    collecting = True
                elif collecting and re.match(r"[A-Za-z_$]", t) and t not in ("extends", "implements"):
                    decl.supertypes.append(t)
            # record components make the header's parens a constructor-like
            # list, not a method; the TYPE classification already wins here.
            return decl
    return None


def _parse_method_header(pending: list[str]) -> _Header | None:
    if ")" not in pending:
        return None
    close = len(pending) - 1 - pending[::-1].index(")")
    # After the ')' only a throws clause may appear.
    for t in pending[close + 1:]:
        if t != "throws" and t != "," and t != "." and not re.match(r"[A-Za-z_$]", t):
            return None
    # Match the '(' for that ')'.
    depth = 0
    open_idx = None
    for i in range(close, -1, -1):
        if pending[i] == ")":
            depth += 1
        elif pending[i] == "(":
            depth -= 1
            if depth == 0:
                open_idx = i
                break
    if open_idx is None or open_idx == 0:
        return None
    name = pending[open_idx - 1]
    if not re.match(r"[A-Za-z_$][A-Za-z0-9_$]*$", name):
        return None
    if name in _NOT_A_METHOD or name in _MODIFIERS or name in _TYPE_KEYWORDS:
        return None
    # What precedes the name must look like a declaration, not an
    # expression: a type-ish token (identifier, '>', ']') or nothing at
    # all (constructors).
    has_return_type = False
    if open_idx >= 2:
        prev = pending[open_idx - 2]
        if prev in ("new", ".") or prev in _NOT_A_METHOD:
            return None
        if not (re.match(r"[A-Za-z_$]", prev) or prev in (">", ">>", ">>>", "]")):
            return None
        has_return_type = prev not in _MODIFIERS
    arity = 0
    depth = 0
    saw_any = False
    for t in pending[open_idx + 1:close]:
        saw_any = True
        if t in ("(", "[", "<"):
            depth += 1
        elif t in (")", "]"):
            depth = max(0, depth - 1)
        elif t in (">", ">>", ">>>"):
            depth = max(0, depth - len(t))
        elif t == "," and depth == 0:
            arity += 1
    if saw_any:
        arity += 1
    mods = {t for t in pending[:open_idx - 1] if t in _MODIFIERS}
    annotations = {pending[i + 1] for i, t in enumerate(pending[:-1]) if t == "@"}
    return _Header(name=name, arity=arity, modifiers=mods,
                   annotations=annotations, has_return_type=has_return_type)


def extract_methods(source_text: str, file_path: str, project: str,
                    stats: Counter | None = None) -> list[RawMethod]:
    """All concrete, non-constructor, non-override methods of a file.

    Raises UnbalancedBraces when the brace structure never closes; the
    caller is expected to skip the file and continue.
    """
    tokens = lex(source_text)
    if stats is None:
        stats = Counter()

    types: dict[str, _TypeDecl] = {}
    candidates: list[tuple[_Header, str | None, list[str]]] = []  # header, owner type, body

    # Context stack entries: ("type", _TypeDecl) | ("block", None)
    stack: list[tuple[str, _TypeDecl | None]] = []
    pending: list[str] = []
    # When inside a method, collect its body instead of scanning members.
    method: tuple[_Header, str | None, list[str], int] | None = None

    def enclosing_type() -> _TypeDecl | None:
        for kind, decl in reversed(stack):
            if kind == "type":
                return decl
        return None

    for tok in tokens:
        if method is not None:
            header, owner, body, depth = method
            body.append(tok)
            if tok == "{":
                method = (header, owner, body, depth + 1)
            elif tok == "}":
                depth -= 1
                if depth == 0:
                    candidates.append((header, owner, body))
                    method = None
                else:
                    method = (header, owner, body, depth)
            continue

        if tok == "{":
            type_decl = _parse_type_header(pending)
            if type_decl is not None:
                types[type_decl.name] = type_decl
                stack.append(("type", type_decl))
            else:
                header = _parse_method_header(pending)
                owner = enclosing_type()
                if header is not None and owner is not None:
                    owner.declared.add((header.name, header.arity))
                    method = (header, owner.name, ["{"], 1)
                else:
                    stack.append(("block", None))
            pending = []
        elif tok == "}":
            if not stack:
                raise UnbalancedBraces(f"{file_path}: unexpected '}}'")
            stack.pop()
            pending = []
        elif tok == ";":
            header = _parse_method_header(pending)
            owner = enclosing_type()
            if header is not None and owner is not None and header.has_return_type:
                # Abstract, interface, or native declaration: visible to
                # the override analysis but never extracted.
                owner.declared.add((header.name, header.arity))
                stats["excluded_bodyless"] += 1
            pending = []
        else:
            pending.append(tok)

    if stack or method is not None:
        raise UnbalancedBraces(f"{file_path}: braces never close")

    def overrides_same_file_supertype(header: _Header, owner: str | None) -> bool:
        seen: set[str] = set()
        queue = list(types[owner].supertypes) if owner in types else []
        while queue:
            sup = queue.pop()
            if sup in seen or sup not in types:
                continue
            seen.add(sup)
            if (header.name, header.arity) in types[sup].declared:
                return True
            queue.extend(types[sup].supertypes)
        return False

    out: list[RawMethod] = []
    for header, owner, body in candidates:
        stats["methods_seen"] += 1
        if owner is not None and header.name == owner:
            stats["excluded_constructor"] += 1
            continue
        if "abstract" in header.modifiers:
            stats["excluded_abstract"] += 1
            continue
        if "Override" in header.annotations or overrides_same_file_supertype(header, owner):
            stats["excluded_override"] += 1
            continue
        stats["methods_kept"] += 1
        out.append(RawMethod(
            name=header.name,
            body_tokens=body,
            modifiers=header.modifiers,
            annotations=header.annotations,
            file_path=file_path,
            project=project,
        ))
    return out
