"""Token-level metrics: NLOC, token counts and cyclomatic complexity."""

from __future__ import annotations

from vulnmine import kernels
from vulnmine.metrics.language import Syntax, syntax_for

_C_FAMILY = frozenset(["if", "for", "while", "case", "catch", "&&", "||", "?"])

DECISION_POINTS: dict[str, frozenset[str]] = {
    "C": _C_FAMILY,
    "C++": _C_FAMILY,
    "Objective-C": _C_FAMILY,
    "C#": _C_FAMILY | {"foreach"},
    "Java": _C_FAMILY,
    "Kotlin": frozenset(["if", "for", "while", "when", "catch", "&&", "||"]),
    "Scala": frozenset(["if", "for", "while", "case", "catch", "&&", "||"]),
    "Groovy": _C_FAMILY,
    "Swift": _C_FAMILY | {"guard"},
    "Dart": _C_FAMILY,
    "Rust": frozenset(["if", "for", "while", "=>", "&&", "||"]),
    "JavaScript": _C_FAMILY,
    "TypeScript": _C_FAMILY,
    "PHP": _C_FAMILY | {"foreach", "elseif", "and", "or"},
    "Go": frozenset(["if", "for", "case", "&&", "||"]),
    "Python": frozenset(["if", "elif", "for", "while", "except", "and", "or"]),
    "Ruby": frozenset(["if", "elsif", "unless", "while", "until", "for", "when", "rescue", "&&", "||", "and", "or", "?"]),
}

# tokens after which "?" is a type wildcard, not a conditional (Java/C# generics)
_WILDCARD_FOLLOWERS = frozenset(["extends", "super", ">", ",", ">>", ">>>"])


def tokens(source: str, language: str | None = None, syntax: Syntax | None = None) -> list[tuple[int, str]]:
    """Lexical tokens with their 1-based line numbers, comments dropped."""
    return kernels.lex(source, *(syntax or syntax_for(language)).as_args())[0]


def nloc(source: str, language: str | None = None) -> int:
    """Lines holding code outside comments; non-blank lines for unknown languages."""
    return kernels.lex(source, *syntax_for(language).as_args())[1]


def token_count(source: str, language: str | None = None) -> int:
    return len(tokens(source, language))


def cyclomatic_complexity(method_source: str, language: str | None) -> int | None:
    """1 + decision points, or None when the language has no decision table."""
    points = DECISION_POINTS.get(language or "")
    if points is None:
        return None
    toks = [t for _, t in tokens(method_source, language)]
    count = 0
    for idx, tok in enumerate(toks):
        if tok not in points:
            continue
        prev = toks[idx - 1] if idx else ""
        if tok == "if" and prev == "#":
            # preprocessor conditional
            continue
        if tok == "?" and idx + 1 < len(toks) and toks[idx + 1] in _WILDCARD_FOLLOWERS:
            continue
        if tok == "?" and prev in ("<", ","):
            continue
        count += 1
    return 1 + count
