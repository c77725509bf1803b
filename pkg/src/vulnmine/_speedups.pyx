# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled lexical kernels; mirrors vulnmine._pykernels exactly."""

from cpython.unicode cimport (
    Py_UNICODE_ISALNUM,
    Py_UNICODE_ISALPHA,
    Py_UNICODE_ISDIGIT,
    Py_UNICODE_ISSPACE,
)

from vulnmine._pykernels import OPERATORS_2, OPERATORS_3


cdef inline bint _in(Py_UCS4 ch, str chars):
    cdef Py_UCS4 c
    for c in chars:
        if c == ch:
            return True
    return False


cdef inline bint _starts(str source, Py_ssize_t i, Py_ssize_t n, str marker):
    cdef Py_ssize_t k, m = len(marker)
    if i + m > n:
        return False
    for k in range(m):
        if source[i + k] != marker[k]:
            return False
    return True


def lex(str source, tuple line_comments, tuple block_comments, str quotes,
        bint triple_quotes, str ident_extra, str ident_suffix):
    cdef list tokens = []
    cdef Py_ssize_t n = len(source)
    cdef Py_ssize_t i = 0, j, start, end, stop, k, last_code = 0, nloc = 0
    cdef Py_ssize_t line = 1, start_line
    cdef Py_UCS4 ch, c, q
    cdef bint matched, multiline, visible
    cdef str firsts = "".join({m[0] for m in line_comments} | {b[0][0] for b in block_comments})
    cdef str opener, closer, marker, text

    while i < n:
        ch = source[i]
        if ch == u"\n":
            line += 1
            i += 1
            continue
        if Py_UNICODE_ISSPACE(ch):
            i += 1
            continue

        if _in(ch, firsts):
            matched = False
            for opener, closer in block_comments:
                if _starts(source, i, n, opener):
                    end = source.find(closer, i + len(opener))
                    stop = n if end < 0 else end + len(closer)
                    for k in range(i, stop):
                        if source[k] == u"\n":
                            line += 1
                    i = stop
                    matched = True
                    break
            if matched:
                continue
            for marker in line_comments:
                if _starts(source, i, n, marker):
                    end = source.find("\n", i)
                    i = n if end < 0 else end
                    matched = True
                    break
            if matched:
                continue

        start_line = line
        start = i
        if _in(ch, quotes):
            if triple_quotes and i + 2 < n and source[i + 1] == ch and source[i + 2] == ch:
                j = i + 3
                while True:
                    if j >= n:
                        j = n
                        break
                    c = source[j]
                    if c == u"\\":
                        j += 2
                        continue
                    if c == ch and j + 2 < n and source[j + 1] == ch and source[j + 2] == ch:
                        j += 3
                        break
                    j += 1
            else:
                multiline = ch == u"`"
                j = i + 1
                while True:
                    if j >= n:
                        j = n
                        break
                    c = source[j]
                    if c == u"\\":
                        j += 2
                        continue
                    if c == ch:
                        j += 1
                        break
                    if c == u"\n" and not multiline:
                        break
                    j += 1
            if j > n:
                j = n
            # per-line visibility over the string body
            visible = False
            for k in range(start, j):
                c = source[k]
                if c == u"\n":
                    if visible and line > last_code:
                        nloc += 1
                        last_code = line
                    visible = False
                    line += 1
                elif not Py_UNICODE_ISSPACE(c):
                    visible = True
            if visible and line > last_code:
                nloc += 1
                last_code = line
            tokens.append((start_line, source[start:j]))
            i = j
            continue

        if line > last_code:
            nloc += 1
            last_code = line
        if ch == u"_" or Py_UNICODE_ISALPHA(ch) or _in(ch, ident_extra):
            j = i + 1
            while j < n:
                c = source[j]
                if c == u"_" or Py_UNICODE_ISALNUM(c) or _in(c, ident_extra):
                    j += 1
                else:
                    break
            if j < n and _in(source[j], ident_suffix) and (j + 1 >= n or source[j + 1] != u"="):
                j += 1
        elif Py_UNICODE_ISDIGIT(ch) or (ch == u"." and i + 1 < n and Py_UNICODE_ISDIGIT(source[i + 1])):
            j = i + 1
            while j < n:
                c = source[j]
                if c == u"_" or c == u"." or Py_UNICODE_ISALNUM(c):
                    j += 1
                elif (c == u"+" or c == u"-") and (source[j - 1] == u"e" or source[j - 1] == u"E") \
                        and not (ch == u"0" and i + 1 < n and (source[i + 1] == u"x" or source[i + 1] == u"X")):
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

    return tokens, nloc


cdef inline Py_ssize_t _digits(str s, Py_ssize_t i, Py_ssize_t n, Py_ssize_t* out):
    # parse [0-9]+ at i; returns index after digits or -1
    cdef Py_ssize_t v = 0, j = i
    cdef Py_UCS4 c
    while j < n:
        c = s[j]
        if u"0" <= c <= u"9":
            v = v * 10 + (<Py_ssize_t>c - 48)
            j += 1
        else:
            break
    if j == i:
        return -1
    out[0] = v
    return j


cdef bint _header(str raw, Py_ssize_t* on, Py_ssize_t* ol, Py_ssize_t* nn, Py_ssize_t* nl):
    cdef Py_ssize_t n = len(raw), j
    if not raw.startswith("@@ -"):
        return False
    j = _digits(raw, 4, n, on)
    if j < 0:
        return False
    ol[0] = 1
    if j < n and raw[j] == u",":
        j = _digits(raw, j + 1, n, ol)
        if j < 0:
            return False
    if not _starts(raw, j, n, " +"):
        return False
    j = _digits(raw, j + 2, n, nn)
    if j < 0:
        return False
    nl[0] = 1
    if j < n and raw[j] == u",":
        j = _digits(raw, j + 1, n, nl)
        if j < 0:
            return False
    return _starts(raw, j, n, " @@")


def parse_hunks(str diff):
    cdef list added = [], deleted = []
    cdef Py_ssize_t old_left = 0, new_left = 0, old_no = 0, new_no = 0
    cdef str raw
    cdef Py_UCS4 tag
    for raw in diff.split("\n"):
        if old_left > 0 or new_left > 0:
            if len(raw) == 0:
                tag = u" "
            else:
                tag = raw[0]
            if tag == u"\\":
                continue
            if tag == u"+":
                added.append((new_no, raw[1:]))
                new_no += 1
                new_left -= 1
            elif tag == u"-":
                deleted.append((old_no, raw[1:]))
                old_no += 1
                old_left -= 1
            else:
                old_no += 1
                new_no += 1
                old_left -= 1
                new_left -= 1
            continue
        if raw.startswith("@@"):
            if not _header(raw, &old_no, &old_left, &new_no, &new_left):
                raise ValueError(raw)
            if old_left == 0:
                old_no += 1
            if new_left == 0:
                new_no += 1
    return added, deleted
