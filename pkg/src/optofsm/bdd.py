"""Reduced ordered binary decision diagrams.

Each decision node later becomes one ring resonator, so the diagrams here are
plain ROBDDs: no complement edges, no reordering. Node references are ints;
``ZERO`` and ``ONE`` are the two terminals and decision nodes start at 2.

Truth tables are indexed with the first variable of the order as the most
significant bit, so row 0 is the all-zero assignment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence, Union

from .errors import EmptyOrder, MalformedSpec, MissingAssignment

ZERO = 0
ONE = 1


@dataclass(frozen=True)
class BddVariable:
    name: str
    order_index: int


@dataclass(frozen=True)
class BddNode:
    var: int  # position in Bdd.variables
    low: int
    high: int


@dataclass(frozen=True)
class Bdd:
    """An immutable ROBDD.

    ``nodes[k]`` is the decision node with reference ``k + 2``.  Nodes are
    numbered in depth-first creation order, children before parents, so two
    builds of the same function under the same order are identical.
    """

    variables: tuple[BddVariable, ...]
    nodes: tuple[BddNode, ...]
    root: int

    def node(self, ref: int) -> BddNode:
        if ref < 2:
            raise ValueError(f"{ref} is a terminal")
        return self.nodes[ref - 2]

    def is_terminal(self, ref: int) -> bool:
        return ref in (ZERO, ONE)

    @property
    def is_constant(self) -> bool:
        return self.root in (ZERO, ONE)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    def refs(self) -> Iterator[int]:
        """Decision-node references reachable from the root, parents first (BFS, low before high)."""
        if self.is_constant:
            return
        seen = {self.root}
        queue = [self.root]
        while queue:
            ref = queue.pop(0)
            yield ref
            n = self.node(ref)
            for child in (n.low, n.high):
                if child >= 2 and child not in seen:
                    seen.add(child)
                    queue.append(child)

    def support(self) -> tuple[str, ...]:
        used = {self.node(r).var for r in self.refs()}
        return tuple(v.name for i, v in enumerate(self.variables) if i in used)

    def __len__(self) -> int:
        return len(self.nodes)


# -- expressions -------------------------------------------------------------

@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class Not:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of & | ^
    left: "Expr"
    right: "Expr"


Expr = Union[Var, Const, Not, BinOp]

_TOKEN = re.compile(r"\s*(?:([A-Za-z_][A-Za-z0-9_]*)|([01])|(.))")
_PRECEDENCE = {"|": 1, "^": 2, "&": 3}


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        ident, const, other = m.groups()
        start = m.start(m.lastindex)
        if ident:
            tokens.append((ident, start))
        elif const:
            tokens.append((const, start))
        elif other in "&|^!()":
            tokens.append((other, start))
        else:
            raise MalformedSpec(f"unexpected character {other!r} at column {start}")
        pos = m.end()
    return tokens


def parse_expr(text: str) -> Expr:
    """Parse ``&``, ``|``, ``^``, ``!`` and parentheses over identifiers and 0/1.

    Binding from tightest: ``!``, ``&``, ``^``, ``|``.
    """
    tokens = _tokenize(text)
    if not tokens:
        raise MalformedSpec("empty expression")
    pos = 0

    def peek() -> str | None:
        return tokens[pos][0] if pos < len(tokens) else None

    def take() -> str:
        nonlocal pos
        if pos >= len(tokens):
            raise MalformedSpec("unexpected end of expression")
        tok = tokens[pos][0]
        pos += 1
        return tok

    def unary() -> Expr:
        tok = take()
        if tok == "!":
            return Not(unary())
        if tok == "(":
            inner = binary(0)
            if take() != ")":
                raise MalformedSpec("expected ')'")
            return inner
        if tok in ("0", "1"):
            return Const(int(tok))
        if tok[0].isalpha() or tok[0] == "_":
            return Var(tok)
        raise MalformedSpec(f"unexpected token {tok!r}")

    def binary(min_prec: int) -> Expr:
        left = unary()
        while True:
            op = peek()
            prec = _PRECEDENCE.get(op or "")
            if prec is None or prec <= min_prec:
                return left
            take()
            left = BinOp(op, left, binary(prec))

    expr = binary(0)
    if pos != len(tokens):
        raise MalformedSpec(f"trailing input {tokens[pos][0]!r}")
    return expr


def expr_variables(expr: Expr) -> list[str]:
    """Variable names in order of first appearance."""
    out: list[str] = []

    def walk(e: Expr) -> None:
        if isinstance(e, Var):
            if e.name not in out:
                out.append(e.name)
        elif isinstance(e, Not):
            walk(e.operand)
        elif isinstance(e, BinOp):
            walk(e.left)
            walk(e.right)

    walk(expr)
    return out


def eval_expr(expr: Expr, env: Mapping[str, int]) -> int:
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Var):
        try:
            return env[expr.name] & 1
        except KeyError:
            raise MissingAssignment(expr.name) from None
    if isinstance(expr, Not):
        return 1 - eval_expr(expr.operand, env)
    a = eval_expr(expr.left, env)
    b = eval_expr(expr.right, env)
    if expr.op == "&":
        return a & b
    if expr.op == "|":
        return a | b
    return a ^ b


# -- construction ------------------------------------------------------------

def _normalize_order(order: Sequence[BddVariable | str]) -> tuple[BddVariable, ...]:
    out = []
    for i, v in enumerate(order):
        if isinstance(v, str):
            v = BddVariable(v, i)
        if not v.name:
            raise MalformedSpec("variable names must be non-empty")
        out.append(v)
    if len({v.name for v in out}) != len(out):
        raise MalformedSpec("duplicate variable name in order")
    if len({v.order_index for v in out}) != len(out):
        raise MalformedSpec("duplicate order_index in order")
    out.sort(key=lambda v: v.order_index)
    return tuple(out)


def _table_from_spec(spec, variables: tuple[BddVariable, ...]) -> list[int]:
    n = len(variables)
    if isinstance(spec, str):
        spec = spec.strip()
        if spec and set(spec) <= {"0", "1"}:
            spec = [int(c) for c in spec]
        else:
            spec = parse_expr(spec)
    if isinstance(spec, (Var, Const, Not, BinOp)):
        names = [v.name for v in variables]
        unknown = [v for v in expr_variables(spec) if v not in names]
        if unknown:
            raise MalformedSpec(f"expression references unknown variable {unknown[0]!r}")
        return [eval_expr(spec, dict(zip(names, assignment_bits(row, n))))
                for row in range(1 << n)]
    table = list(spec)
    if len(table) != 1 << n:
        raise MalformedSpec(f"truth table has {len(table)} rows, expected {1 << n} for {n} variables")
    for bit in table:
        if bit not in (0, 1):
            raise MalformedSpec(f"truth table entry {bit!r} is not a bit")
    return [int(b) for b in table]


def assignment_bits(row: int, n: int) -> tuple[int, ...]:
    """Row index -> bits, first variable most significant."""
    return tuple((row >> (n - 1 - i)) & 1 for i in range(n))


def build_bdd(spec, order: Sequence[BddVariable | str]) -> Bdd:
    """Build the ROBDD of a truth table (sequence or 0/1 string) or expression.

    >>> node_count(build_bdd("0001", ["A", "B"]))
    2
    """
    variables = _normalize_order(order)
    try:
        table = _table_from_spec(spec, variables)
    except MalformedSpec:
        if not variables:
            raise EmptyOrder("no variables given for a non-constant function") from None
        raise

    nodes: list[BddNode] = []
    unique: dict[tuple[int, int, int], int] = {}
    memo: dict[tuple[int, tuple[int, ...]], int] = {}

    def make(level: int, sub: tuple[int, ...]) -> int:
        if all(b == sub[0] for b in sub):
            return ONE if sub[0] else ZERO
        key = (level, sub)
        if key in memo:
            return memo[key]
        half = len(sub) // 2
        low = make(level + 1, sub[:half])
        high = make(level + 1, sub[half:])
        if low == high:
            ref = low
        else:
            triple = (level, low, high)
            ref = unique.get(triple)
            if ref is None:
                nodes.append(BddNode(level, low, high))
                ref = len(nodes) + 1
                unique[triple] = ref
        memo[key] = ref
        return ref

    root = make(0, tuple(table))
    return Bdd(variables, tuple(nodes), root)


def resolve_dont_cares(table: Sequence[int | None]) -> list[int]:
    """Fill ``None`` entries greedily so the resulting BDD stays small.

    At each variable the two cofactors are merged whenever their defined
    entries agree, which removes that variable's decision node entirely.
    The greedy result is kept unless a constant fill gives a smaller diagram.
    """
    n = len(table)
    if n & (n - 1):
        raise MalformedSpec(f"table length {n} is not a power of two")

    def resolve(t: list[int | None]) -> list[int]:
        defined = {v for v in t if v is not None}
        if len(defined) <= 1:
            value = defined.pop() if defined else 0
            return [value] * len(t)
        half = len(t) // 2
        lo, hi = t[:half], t[half:]
        if all(a is None or b is None or a == b for a, b in zip(lo, hi)):
            merged = [a if a is not None else b for a, b in zip(lo, hi)]
            r = resolve(merged)
            return r + r
        return resolve(lo) + resolve(hi)

    greedy = resolve(list(table))
    fills = [[v if v is not None else c for v in table] for c in (0, 1)]
    return min([greedy] + fills, key=_diagram_size)


def _diagram_size(table: Sequence[int]) -> int:
    """Decision nodes the ROBDD of ``table`` would have (distinct essential cofactors)."""
    total, size = 0, len(table)
    while size > 1:
        half = size // 2
        total += len({tuple(table[i:i + size]) for i in range(0, len(table), size)
                      if table[i:i + half] != table[i + half:i + size]})
        size = half
    return total


# -- queries -----------------------------------------------------------------

def evaluate(bdd: Bdd, assignment: Mapping[str, int]) -> int:
    ref = bdd.root
    while ref >= 2:
        n = bdd.node(ref)
        name = bdd.variables[n.var].name
        if name not in assignment:
            raise MissingAssignment(name)
        ref = n.high if assignment[name] else n.low
    return ref


def node_count(bdd: Bdd) -> int:
    return sum(1 for _ in bdd.refs())


def truth_table(bdd: Bdd) -> list[int]:
    n = len(bdd.variables)
    names = bdd.names
    return [evaluate(bdd, dict(zip(names, assignment_bits(row, n)))) for row in range(1 << n)]
