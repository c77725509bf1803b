"""Kernel selection: compiled ``_speedups`` when importable, else pure Python.

Set ``VULNMINE_PURE_PYTHON=1`` to force the fallback.
"""

import os

from vulnmine import _pykernels

IMPLEMENTATION = "python"
lex = _pykernels.lex
parse_hunks = _pykernels.parse_hunks

if not os.environ.get("VULNMINE_PURE_PYTHON"):
    try:
        from vulnmine import _speedups
    except ImportError:
        pass
    else:
        lex = _speedups.lex
        parse_hunks = _speedups.parse_hunks
        IMPLEMENTATION = "cython"

__all__ = ["IMPLEMENTATION", "lex", "parse_hunks"]
