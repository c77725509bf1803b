"""Function/method discovery on tree-sitter syntax trees.

Only outermost functions are reported: a function nested inside another
(closures, lambdas, local classes) is part of its enclosing function's span,
so spans within one file image never overlap.
"""

from __future__ import annotations

import importlib
import logging
import threading
from dataclasses import dataclass, field

import tree_sitter

logger = logging.getLogger(__name__)

ANONYMOUS = "(anonymous)"


@dataclass(frozen=True)
class MethodSpan:
    name: str
    parameters: tuple[str, ...]
    start_line: int
    end_line: int

    @property
    def signature(self) -> str:
        return f"{self.name}({', '.join(self.parameters)})"


@dataclass(frozen=True)
class _Grammar:
    module: str
    functions: frozenset[str]
    scopes: frozenset[str] = frozenset()
    separator: str = "."
    entry: str = "language"
    param_skip: frozenset[str] = field(default_factory=lambda: frozenset(["comment"]))


GRAMMARS: dict[str, _Grammar] = {
    "C": _Grammar("tree_sitter_c", frozenset(["function_definition"])),
    "C++": _Grammar(
        "tree_sitter_cpp",
        frozenset(["function_definition"]),
        frozenset(["class_specifier", "struct_specifier", "union_specifier", "namespace_definition"]),
        separator="::",
    ),
    "Java": _Grammar(
        "tree_sitter_java",
        frozenset(["method_declaration", "constructor_declaration", "compact_constructor_declaration"]),
        frozenset(["class_declaration", "interface_declaration", "enum_declaration", "record_declaration"]),
    ),
    "Python": _Grammar(
        "tree_sitter_python",
        frozenset(["function_definition"]),
        frozenset(["class_definition"]),
        param_skip=frozenset(["comment", "positional_separator", "keyword_separator"]),
    ),
    "JavaScript": _Grammar(
        "tree_sitter_javascript",
        frozenset([
            "function_declaration", "generator_function_declaration", "function_expression",
            "function", "generator_function", "arrow_function", "method_definition",
        ]),
        frozenset(["class_declaration", "class"]),
    ),
    "PHP": _Grammar(
        "tree_sitter_php",
        frozenset(["function_definition", "method_declaration", "anonymous_function",
                   "anonymous_function_creation_expression", "arrow_function"]),
        frozenset(["class_declaration", "interface_declaration", "trait_declaration", "enum_declaration"]),
        entry="language_php",
    ),
    "Go": _Grammar("tree_sitter_go", frozenset(["function_declaration", "method_declaration", "func_literal"])),
    "Ruby": _Grammar(
        "tree_sitter_ruby",
        frozenset(["method", "singleton_method"]),
        frozenset(["class", "module", "singleton_class"]),
        separator="::",
    ),
}

_local = threading.local()


def _parser(language: str) -> tree_sitter.Parser:
    cache = getattr(_local, "parsers", None)
    if cache is None:
        cache = _local.parsers = {}
    parser = cache.get(language)
    if parser is None:
        grammar = GRAMMARS[language]
        module = importlib.import_module(grammar.module)
        parser = tree_sitter.Parser(tree_sitter.Language(getattr(module, grammar.entry)()))
        cache[language] = parser
    return parser


def _text(node: tree_sitter.Node | None) -> str:
    if node is None:
        return ""
    return node.text.decode("utf-8", "replace")


def _c_declarator_name(node: tree_sitter.Node) -> tuple[str, tree_sitter.Node | None]:
    """Walk C/C++ declarator wrappers down to the function_declarator."""
    decl = node.child_by_field_name("declarator")
    while decl is not None and decl.type != "function_declarator":
        nxt = decl.child_by_field_name("declarator")
        if nxt is None:
            nxt = next((c for c in decl.named_children if "declarator" in c.type), None)
        decl = nxt
    if decl is None:
        return ANONYMOUS, None
    return _text(decl.child_by_field_name("declarator")), decl.child_by_field_name("parameters")


def _inferred_name(node: tree_sitter.Node) -> str:
    # name anonymous functions after what they are bound to
    parent = node.parent
    if parent is None:
        return ANONYMOUS
    if parent.type == "variable_declarator":
        return _text(parent.child_by_field_name("name")) or ANONYMOUS
    if parent.type in ("assignment_expression", "augmented_assignment_expression"):
        return _text(parent.child_by_field_name("left")) or ANONYMOUS
    if parent.type == "pair":
        return _text(parent.child_by_field_name("key")) or ANONYMOUS
    if parent.type in ("field_definition", "public_field_definition"):
        return _text(parent.child_by_field_name("property") or parent.child_by_field_name("name")) or ANONYMOUS
    return ANONYMOUS


def _go_parameters(params: tree_sitter.Node | None) -> list[str]:
    out: list[str] = []
    if params is None:
        return out
    for child in params.named_children:
        if child.type == "comment":
            continue
        names = child.children_by_field_name("name")
        type_text = _text(child.child_by_field_name("type"))
        prefix = "..." if child.type == "variadic_parameter_declaration" else ""
        if names:
            out.extend(f"{_text(n)} {prefix}{type_text}".strip() for n in names)
        else:
            out.append(prefix + type_text if type_text else _text(child))
    return out


def _describe(language: str, grammar: _Grammar, node: tree_sitter.Node) -> tuple[str, list[str]]:
    if language in ("C", "C++"):
        name, params = _c_declarator_name(node)
    elif language == "Go":
        name = _text(node.child_by_field_name("name")) or ANONYMOUS
        receiver = node.child_by_field_name("receiver")
        if receiver is not None and receiver.named_children:
            recv_type = _text(receiver.named_children[0].child_by_field_name("type")).lstrip("*")
            name = f"{recv_type}.{name}"
        return name, _go_parameters(node.child_by_field_name("parameters"))
    elif language == "Ruby" and node.type == "singleton_method":
        name = f"{_text(node.child_by_field_name('object'))}.{_text(node.child_by_field_name('name'))}"
        params = node.child_by_field_name("parameters")
    else:
        name_node = node.child_by_field_name("name")
        name = _text(name_node) if name_node is not None else _inferred_name(node)
        params = node.child_by_field_name("parameters")
        if params is None:
            params = node.child_by_field_name("parameter")
    if params is None:
        return name, []
    if params.type in ("identifier", "simple_parameter"):
        return name, [_text(params)]
    return name, [_text(c) for c in params.named_children if c.type not in grammar.param_skip]


def find_methods(source: str, language: str | None) -> list[MethodSpan] | None:
    """Outermost functions of ``source`` in line order.

    Returns None for languages without a grammar and an empty list when the
    source cannot be parsed.
    """
    grammar = GRAMMARS.get(language or "")
    if grammar is None:
        return None
    try:
        tree = _parser(language).parse(source.encode("utf-8", "surrogatepass"))
    except Exception:  # noqa: BLE001
        logger.warning("could not parse %s source", language)
        return []
    root = tree.root_node

    found: list[MethodSpan] = []
    stack: list[tuple[tree_sitter.Node, tuple[str, ...]]] = [(root, ())]
    while stack:
        node, scope = stack.pop()
        if node.type in grammar.functions:
            name, params = _describe(language, grammar, node)
            if scope and grammar.separator not in name:
                name = grammar.separator.join(scope + (name,))
            start = node.start_point[0] + 1
            end_row, end_col = node.end_point
            end = end_row + 1 if end_col > 0 or end_row == node.start_point[0] else end_row
            found.append(MethodSpan(name, tuple(params), start, end))
            continue
        if node.type in grammar.scopes:
            scope_name = _text(node.child_by_field_name("name"))
            if scope_name:
                scope = scope + (scope_name,)
        stack.extend((child, scope) for child in reversed(node.children))

    if root.has_error and not found:
        logger.warning("%s source has syntax errors and no recoverable functions", language)
    found.sort(key=lambda m: (m.start_line, m.end_line))
    return found
