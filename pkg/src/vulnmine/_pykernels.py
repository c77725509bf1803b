"""Pure-Python lexical kernels.

``_speedups.pyx`` is a typed copy of this module; both must return identical
results for every input (checked in tests/test_kernels.py).
"""

from __future__ import annotations

import re

OPERATORS_3 = frozenset(
    ["===", "!==", "**=", "...", "<<=", ">>=", ">>>", "<=>", "//=", "??=", "&&=", "||="]
)
OPERATORS_2 = frozenset(
    [
        "==", "!=", "<=", ">=", "&&", "||", "++", "--", "+=", "-=", "*=", "/=", "%=",
        "&=", "|=", "^=", "<<", ">>", "->", "=>", "::", "**", "//", "?.", "??", "..", ":=",
    ]
)

_HUNK_RE = re.compile(r"^@@ -([0-9]+)(?:,([0-9]+))? \+([0-9]+)(?:,([0-9]+))? @@")


def _is_ident_start(ch: str, extra: str) -> bool:
    return ch == "_" or ch.isalpha() or ch in extra


def _is_ident_char(ch: str, extra: str) -> bool:
    return ch == "_" or ch.isalnum() or ch in extra


def lex(
    source: str,
    line_comments: tuple[str, ...],
    block_comments: tuple[tuple[str, str], ...],
    quotes: str,
    triple_quotes: bool,
    ident_extra: str,
    ident_suffix: str,
) -> tuple[list[tuple[int, str]], int]:
    """Tokenize ``source`` and count its code lines.

    Returns ``(tokens, nloc)`` where tokens are ``(line, text)`` pairs with
    1-based line numbers and nloc is the number of lines holding at least one
    non-whitespace character outside comments. Lines are split on ``"\\n"``
    only, matching git.
    """
    tokens: list[tuple[int, str]] = []
    code_lines: set[int] = set()
    n = len(source)
    i = 0
    line = 1
    comment_firsts = {m[0] for m in line_comments} | {b[0][0] for b in block_comments}

    while i < n:
        ch = source[i]
        if ch == "\n":
            line += 1
            i += 1
            continue
        if ch.isspace():
            i += 1
            continue

        if ch in comment_firsts:
            matched = False
            for opener, closer in block_comments:
                if source.startswith(opener, i):
                    end = source.find(closer, i + len(opener))
                    stop = n if end < 0 else end + len(closer)
                    line += source.count("\n", i, stop)
                    i = stop
                    matched = True
                    break
            if matched:
                continue
            for marker in line_comments:
                if source.startswith(marker, i):
                    end = source.find("\n", i)
                    i = n if end < 0 else end
                    matched = True
                    break
            if matched:
                continue

        start_line = line
        start = i
        if ch in quotes:
            if triple_quotes and source.startswith(ch * 3, i):
                delim = ch * 3
                j = i + 3
                while j < n:
                    c = source[j]
                    if c == "\\":
                        j += 2
                        continue
                    if source.startswith(delim, j):
                        j += 3
                        break
                    j += 1
                else:
                    j = n
            else:
                multiline = ch == "`"
                j = i + 1
                while j < n:
                    c = source[j]
                    if c == "\\":
                        j += 2
                        continue
                    if c == ch:
                        j += 1
                        break
                    if c == "\n" and not multiline:
                        break
                    j += 1
                else:
                    j = n
            j = min(j, n)
            text = source[start:j]
            # every line a string touches counts if it has visible characters on it
            if "\n" in text:
                for offset, part in enumerate(text.split("\n")):
                    if part.strip():
                        code_lines.add(start_line + offset)
                line += text.count("\n")
            else:
                code_lines.add(start_line)
            tokens.append((start_line, text))
            i = j
            continue

        code_lines.add(line)
        if _is_ident_start(ch, ident_extra):
            j = i + 1
            while j < n and _is_ident_char(source[j], ident_extra):
                j += 1
            if j < n and source[j] in ident_suffix and (j + 1 >= n or source[j + 1] != "="):
                j += 1
        elif ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i + 1
            while j < n:
                c = source[j]
                if c.isalnum() or c == "_" or c == ".":
                    j += 1
                elif (c == "+" or c == "-") and source[j - 1] in "eE" and not source.startswith(("0x", "0X"), i):
                    j += 1
                else:
                    break
        elif source[i:i + 3] in OPERATORS_3:
            j = i + 3
        elif source[i:i + 2] in OPERATORS_2:
            j = i + 2
        else:
            j = i + 1
        tokens.append((line, source[start:j]))
        i = j

    return tokens, len(code_lines)


def parse_hunks(diff: str) -> tuple[list[tuple[int, str]], list[tuple[int, str]]]:
    """Collect added/deleted lines from unified diff text.

    Anything outside a hunk (file headers, ``Binary files ... differ``) is
    skipped. Raises ``ValueError`` with the offending line when a ``@@`` line
    is not a valid hunk header.
    """
    added: list[tuple[int, str]] = []
    deleted: list[tuple[int, str]] = []
    old_left = new_left = 0
    old_no = new_no = 0
    for raw in diff.split("\n"):
        if old_left > 0 or new_left > 0:
            if raw.startswith("\\"):
                continue
            tag = raw[:1]
            if tag == "+":
                added.append((new_no, raw[1:]))
                new_no += 1
                new_left -= 1
            elif tag == "-":
                deleted.append((old_no, raw[1:]))
                old_no += 1
                old_left -= 1
            else:
                # context line; an empty string is a context line whose leading space was lost
                old_no += 1
                new_no += 1
                old_left -= 1
                new_left -= 1
            continue
        if raw.startswith("@@"):
            m = _HUNK_RE.match(raw)
            if m is None:
                raise ValueError(raw)
            old_no = int(m.group(1))
            old_left = 1 if m.group(2) is None else int(m.group(2))
            new_no = int(m.group(3))
            new_left = 1 if m.group(4) is None else int(m.group(4))
            # a zero-length side reports the line *before* the change
            if old_left == 0:
                old_no += 1
            if new_left == 0:
                new_no += 1
    return added, deleted
