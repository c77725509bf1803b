"""File-level programming language detection.

The default detector maps extensions and well-known file names to languages
and falls back to content heuristics where an extension is shared between
languages (``.h``, ``.m``, ``.pl``, ``.inc`` ...). It is deterministic and has
no model weights; results can differ from a learned classifier on ambiguous
files.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import PurePosixPath
from typing import Callable, Protocol

SUPPORTED_METHOD_LANGUAGES = frozenset(
    ["C", "C++", "Java", "Python", "JavaScript", "PHP", "Go", "Ruby"]
)


@dataclass(frozen=True)
class Syntax:
    """Lexical conventions the scanner needs for one language."""

    line_comments: tuple[str, ...] = ()
    block_comments: tuple[tuple[str, str], ...] = ()
    quotes: str = "\"'"
    triple_quotes: bool = False
    ident_extra: str = ""
    ident_suffix: str = ""

    def as_args(self) -> tuple:
        return (
            self.line_comments,
            self.block_comments,
            self.quotes,
            self.triple_quotes,
            self.ident_extra,
            self.ident_suffix,
        )


C_LIKE = Syntax(("//",), (("/*", "*/"),), "\"'")
JS_LIKE = Syntax(("//",), (("/*", "*/"),), "\"'`", ident_extra="$")
HASH = Syntax(("#",))
PLAIN = Syntax()

SYNTAX: dict[str, Syntax] = {
    "C": C_LIKE,
    "C++": C_LIKE,
    "C#": C_LIKE,
    "Objective-C": C_LIKE,
    "Java": C_LIKE,
    "Kotlin": C_LIKE,
    "Scala": C_LIKE,
    "Groovy": C_LIKE,
    "Swift": C_LIKE,
    "Dart": C_LIKE,
    "Rust": Syntax(("//",), (("/*", "*/"),), '"'),
    "Go": Syntax(("//",), (("/*", "*/"),), "\"'`"),
    "JavaScript": JS_LIKE,
    "TypeScript": JS_LIKE,
    "CoffeeScript": Syntax(("#",), (("###", "###"),), "\"'`"),
    "PHP": Syntax(("//", "#"), (("/*", "*/"),), "\"'`", ident_extra="$"),
    "Python": Syntax(("#",), (), "\"'", triple_quotes=True),
    "Ruby": Syntax(("#",), (("=begin", "=end"),), "\"'`", ident_extra="$@", ident_suffix="?!"),
    "Perl": Syntax(("#",), (("\n=pod", "\n=cut"),), "\"'`", ident_extra="$@%"),
    "Shell": Syntax(("#",), (), "\"'`", ident_extra="$"),
    "PowerShell": Syntax(("#",), (("<#", "#>"),), "\"'", ident_extra="$"),
    "Batchfile": Syntax(("REM ", "rem ", "::"), (), '"', ident_extra="%"),
    "Lua": Syntax(("--",), (("--[[", "]]"),), "\"'"),
    "SQL": Syntax(("--",), (("/*", "*/"),), "\"'`"),
    "Haskell": Syntax(("--",), (("{-", "-}"),), '"'),
    "Elixir": Syntax(("#",), (), "\"'", triple_quotes=True, ident_suffix="?!"),
    "Erlang": Syntax(("%",), (), "\"'"),
    "Clojure": Syntax((";",), (), '"'),
    "Lisp": Syntax((";",), (("#|", "|#"),), '"'),
    "OCaml": Syntax((), (("(*", "*)"),), '"'),
    "Julia": Syntax(("#",), (("#=", "=#"),), '"', triple_quotes=True),
    "R": Syntax(("#",), (), "\"'`"),
    "Matlab": Syntax(("%",), (("%{", "%}"),), '"'),
    "Fortran": Syntax(("!",), (), "\"'"),
    "Pascal": Syntax(("//",), (("{", "}"), ("(*", "*)")), "'"),
    "Visual Basic": Syntax(("'",), (), '"'),
    "Assembly": Syntax((";", "#"), (("/*", "*/"),), "\"'"),
    "Verilog": C_LIKE,
    "Prolog": Syntax(("%",), (("/*", "*/"),), "\"'"),
    "TeX": Syntax(("%",), (), ""),
    "HTML": Syntax((), (("<!--", "-->"),), "\"'"),
    "XML": Syntax((), (("<!--", "-->"),), "\"'"),
    "CSS": Syntax((), (("/*", "*/"),), "\"'"),
    "Markdown": Syntax((), (("<!--", "-->"),), ""),
    "JSON": Syntax((), (), '"'),
    "YAML": HASH,
    "TOML": HASH,
    "Makefile": HASH,
    "Dockerfile": HASH,
    "CMake": HASH,
}

EXTENSIONS: dict[str, str] = {
    ".c": "C",
    ".cc": "C++", ".cpp": "C++", ".cxx": "C++", ".c++": "C++", ".hpp": "C++", ".hh": "C++",
    ".hxx": "C++", ".ipp": "C++", ".tpp": "C++",
    ".cs": "C#",
    ".mm": "Objective-C",
    ".java": "Java",
    ".kt": "Kotlin", ".kts": "Kotlin",
    ".scala": "Scala", ".sc": "Scala",
    ".groovy": "Groovy", ".gradle": "Groovy",
    ".swift": "Swift",
    ".dart": "Dart",
    ".rs": "Rust",
    ".go": "Go",
    ".js": "JavaScript", ".mjs": "JavaScript", ".cjs": "JavaScript", ".jsx": "JavaScript",
    ".tsx": "TypeScript", ".mts": "TypeScript", ".cts": "TypeScript",
    ".coffee": "CoffeeScript",
    ".php": "PHP", ".phtml": "PHP", ".php3": "PHP", ".php4": "PHP", ".php5": "PHP", ".phpt": "PHP",
    ".py": "Python", ".pyw": "Python", ".pyi": "Python",
    ".rb": "Ruby", ".rake": "Ruby", ".gemspec": "Ruby", ".erb": "Ruby",
    ".pm": "Perl", ".t": "Perl",
    ".sh": "Shell", ".bash": "Shell", ".zsh": "Shell", ".ksh": "Shell",
    ".ps1": "PowerShell", ".psm1": "PowerShell",
    ".bat": "Batchfile", ".cmd": "Batchfile",
    ".lua": "Lua",
    ".sql": "SQL",
    ".hs": "Haskell", ".lhs": "Haskell",
    ".ex": "Elixir", ".exs": "Elixir",
    ".erl": "Erlang", ".hrl": "Erlang",
    ".clj": "Clojure", ".cljs": "Clojure", ".cljc": "Clojure", ".edn": "Clojure",
    ".lisp": "Lisp", ".el": "Lisp", ".scm": "Lisp", ".rkt": "Lisp",
    ".ml": "OCaml", ".mli": "OCaml",
    ".jl": "Julia",
    ".f": "Fortran", ".f90": "Fortran", ".f95": "Fortran", ".for": "Fortran",
    ".pas": "Pascal", ".dpr": "Pascal", ".pp": "Pascal",
    ".vb": "Visual Basic", ".bas": "Visual Basic", ".vbs": "Visual Basic",
    ".asm": "Assembly", ".s": "Assembly", ".S": "Assembly",
    ".sv": "Verilog", ".vh": "Verilog",
    ".pro": "Prolog",
    ".tex": "TeX", ".sty": "TeX", ".cls": "TeX",
    ".html": "HTML", ".htm": "HTML", ".xhtml": "HTML",
    ".xml": "XML", ".xsd": "XML", ".xsl": "XML", ".svg": "XML", ".plist": "XML",
    ".css": "CSS", ".scss": "CSS", ".less": "CSS",
    ".md": "Markdown", ".markdown": "Markdown",
    ".json": "JSON",
    ".yml": "YAML", ".yaml": "YAML",
    ".toml": "TOML",
    ".cmake": "CMake",
    ".mk": "Makefile",
}

FILENAMES: dict[str, str] = {
    "Makefile": "Makefile",
    "makefile": "Makefile",
    "GNUmakefile": "Makefile",
    "Dockerfile": "Dockerfile",
    "CMakeLists.txt": "CMake",
    "Rakefile": "Ruby",
    "Gemfile": "Ruby",
    "Vagrantfile": "Ruby",
    "Jenkinsfile": "Groovy",
}

SHEBANGS: dict[str, str] = {
    "python": "Python", "python2": "Python", "python3": "Python",
    "sh": "Shell", "bash": "Shell", "zsh": "Shell", "ksh": "Shell", "dash": "Shell",
    "ruby": "Ruby", "perl": "Perl", "node": "JavaScript", "php": "PHP", "lua": "Lua",
    "Rscript": "R", "pwsh": "PowerShell", "julia": "Julia", "elixir": "Elixir",
}

_CPP_HINTS = re.compile(
    r"\btemplate\s*<|\bclass\s+\w+\s*[:{]|\bnamespace\s+\w+|\bstd::|\bpublic:|\bprivate:|"
    r"\bvirtual\b|\busing\s+namespace\b|#include\s*<(?:iostream|string|vector|map|memory)>"
)
_OBJC_HINTS = re.compile(r"^\s*@(?:interface|implementation|protocol|end)\b|#import\s", re.M)
_MATLAB_HINTS = re.compile(r"^\s*(?:function\s|end\s*$|%)", re.M)
_PROLOG_HINTS = re.compile(r":-")
_PHP_HINTS = re.compile(r"<\?php|\$\w+\s*=")
_VERILOG_HINTS = re.compile(r"\bmodule\s+\w+\s*[(#;]|\bendmodule\b")
_COQ_HINTS = re.compile(r"\b(?:Theorem|Lemma|Proof|Qed|Definition|Inductive)\b")
_TS_XML_HINTS = re.compile(r"^\s*<\?xml|<TS\b")
_R_HINTS = re.compile(r"<-|\blibrary\(|\bfunction\s*\(")


def _ambiguous(ext: str, text: str) -> str | None:
    if ext == ".h":
        if _OBJC_HINTS.search(text):
            return "Objective-C"
        return "C++" if _CPP_HINTS.search(text) else "C"
    if ext == ".m":
        if _OBJC_HINTS.search(text):
            return "Objective-C"
        return "Matlab" if _MATLAB_HINTS.search(text) else "Objective-C"
    if ext == ".pl":
        if _PROLOG_HINTS.search(text) and "use strict" not in text and "my $" not in text:
            return "Prolog"
        return "Perl"
    if ext == ".inc":
        if _PHP_HINTS.search(text):
            return "PHP"
        if _CPP_HINTS.search(text):
            return "C++"
        return "Pascal" if re.search(r"\b(?:procedure|begin|end;)", text, re.I) else "C"
    if ext == ".v":
        if _VERILOG_HINTS.search(text):
            return "Verilog"
        return "Coq" if _COQ_HINTS.search(text) else None
    if ext == ".ts":
        if _TS_XML_HINTS.search(text):
            return "XML"
        return "TypeScript"
    if ext == ".r":
        # Rebol and others also claim .r; without R markers an empty file stays R
        return "R" if _R_HINTS.search(text) or not text.strip() or "#" in text else None
    return None


AMBIGUOUS_EXTENSIONS = frozenset([".h", ".m", ".pl", ".inc", ".v", ".ts", ".r"])


def _decode(content: str | bytes | None) -> str | None:
    if content is None:
        return ""
    if isinstance(content, bytes):
        if b"\x00" in content[:8000]:
            return None
        try:
            return content.decode("utf-8")
        except UnicodeDecodeError:
            return None
    if "\x00" in content[:8000]:
        return None
    return content


def detect_language(filename: str, content: str | bytes | None = None) -> str | None:
    """Best-effort language name for a file, or None for binary/unknown files."""
    text = _decode(content)
    if text is None:
        return None
    path = PurePosixPath(filename)
    if path.name in FILENAMES:
        return FILENAMES[path.name]
    ext = path.suffix
    lowered = ext.lower()
    if lowered in AMBIGUOUS_EXTENSIONS:
        return _ambiguous(lowered, text)
    if ext in EXTENSIONS:
        return EXTENSIONS[ext]
    if lowered in EXTENSIONS:
        return EXTENSIONS[lowered]
    if text.startswith("#!"):
        first = text.split("\n", 1)[0]
        parts = first[2:].strip().split()
        if parts:
            prog = PurePosixPath(parts[0]).name
            if prog == "env" and len(parts) > 1:
                prog = parts[1]
            return SHEBANGS.get(prog) or SHEBANGS.get(prog.rstrip("0123456789."))
    if text.lstrip().startswith("<?php"):
        return "PHP"
    return None


class LanguageDetector(Protocol):
    def __call__(self, filename: str, content: str | bytes | None = None) -> str | None: ...


_detector: LanguageDetector = detect_language


def set_detector(detector: LanguageDetector | None) -> None:
    """Swap the detector used by the extraction pipeline (None restores the default)."""
    global _detector
    _detector = detector or detect_language


def get_detector() -> Callable[..., str | None]:
    return _detector


def syntax_for(language: str | None) -> Syntax:
    if language is None:
        return PLAIN
    return SYNTAX.get(language, PLAIN)


def known_languages() -> set[str]:
    return set(EXTENSIONS.values()) | set(FILENAMES.values()) | {"Objective-C", "Matlab", "Prolog", "Coq", "R"}
