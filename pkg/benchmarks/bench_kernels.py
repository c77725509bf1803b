"""Compare the compiled kernels with the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat N] [--scale K]

Inputs are synthetic: a C source built from repeated functions (lexer) and
a unified diff with many hunks (hunk parser). Both implementations are first
checked to agree on the inputs, then timed with timeit (best of N).
"""

from __future__ import annotations

import argparse
import random
import sys
import timeit

from vulnmine import _pykernels
from vulnmine.metrics.language import syntax_for

try:
    from vulnmine import _speedups
except ImportError:
    _speedups = None

C_FUNCTION = """/* helper {n}: clamps and copies */
static int copy_{n}(const char *src, char *dst, int len)
{{
    int i = 0; // index
    if (len > 64 && src != NULL) len = 64;
    for (i = 0; i < len; i++) {{
        dst[i] = src[i] == '\\n' ? ' ' : src[i];
    }}
    return len >= 0 ? len : -1;
}}
"""


def make_source(scale: int) -> str:
    return "".join(C_FUNCTION.format(n=n) for n in range(40 * scale))


def make_diff(scale: int, seed: int = 1) -> str:
    rng = random.Random(seed)
    out = ["diff --git a/f.c b/f.c", "index 1111111..2222222 100644", "--- a/f.c", "+++ b/f.c"]
    old = new = 1
    for h in range(200 * scale):
        old += rng.randint(3, 30)
        new = old + h
        body = [" context line"] * 3
        removed = rng.randint(0, 4)
        added = rng.randint(0, 4)
        body += [f"-old line {h}.{k}" for k in range(removed)]
        body += [f"+new line {h}.{k}" for k in range(added)]
        body += [" context line"] * 3
        out.append(f"@@ -{old},{6 + removed} +{new},{6 + added} @@ ctx")
        out.extend(body)
    return "\n".join(out) + "\n"


def best(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=7)
    parser.add_argument("--scale", type=int, default=20)
    args = parser.parse_args(argv)

    if _speedups is None:
        print("compiled kernels are not built; run `pip install -e . --no-build-isolation` first")
        return 1

    source = make_source(args.scale)
    diff = make_diff(args.scale)
    syntax = syntax_for("C").as_args()
    cases = [
        ("lex", f"{len(source) / 1e6:.2f} MB of C",
         lambda: _pykernels.lex(source, *syntax), lambda: _speedups.lex(source, *syntax)),
        ("parse_hunks", f"{diff.count(chr(10)) / 1000:.0f}k diff lines",
         lambda: _pykernels.parse_hunks(diff), lambda: _speedups.parse_hunks(diff)),
    ]

    print(f"{'kernel':<12} {'input':<20} {'python s':>10} {'cython s':>10} {'speedup':>8}")
    for name, label, py, cy in cases:
        if py() != cy():
            print(f"{name}: implementations disagree", file=sys.stderr)
            return 2
        t_py, t_cy = best(py, args.repeat), best(cy, args.repeat)
        print(f"{name:<12} {label:<20} {t_py:>10.4f} {t_cy:>10.4f} {t_py / t_cy:>7.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
