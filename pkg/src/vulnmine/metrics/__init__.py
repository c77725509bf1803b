"""Code metrics: NLOC, tokens, cyclomatic complexity, DMM and language detection."""

from __future__ import annotations

from dataclasses import dataclass

from vulnmine.metrics.dmm import DmmProperty, DmmScores, dmm, dmm_scores, is_low_risk
from vulnmine.metrics.language import (
    SUPPORTED_METHOD_LANGUAGES,
    detect_language,
    get_detector,
    set_detector,
    syntax_for,
)
from vulnmine.metrics.lexical import cyclomatic_complexity, nloc, token_count, tokens
from vulnmine.metrics.methods import MethodSpan, find_methods


@dataclass(frozen=True)
class MethodProfile:
    nloc: int
    complexity: int
    parameter_count: int


def profile(source: str, language: str, parameters: tuple[str, ...] | list[str] = ()) -> MethodProfile:
    return MethodProfile(
        nloc(source, language),
        cyclomatic_complexity(source, language) or 1,
        len(parameters),
    )


__all__ = [
    "DmmProperty",
    "DmmScores",
    "MethodProfile",
    "MethodSpan",
    "SUPPORTED_METHOD_LANGUAGES",
    "cyclomatic_complexity",
    "detect_language",
    "dmm",
    "dmm_scores",
    "find_methods",
    "get_detector",
    "is_low_risk",
    "nloc",
    "profile",
    "set_detector",
    "syntax_for",
    "token_count",
    "tokens",
]
