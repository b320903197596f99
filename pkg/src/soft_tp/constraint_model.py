"""Constraint programs: groups of positions over a finite symbol domain.

Two group kinds are supported. ``EXACTLY_ONE`` groups require the members
to take pairwise distinct symbols (each symbol exactly once when the group
has ``k`` members, as in a Latin square). ``SUM_EQ`` groups treat symbol
index ``d`` as the digit ``d`` and require the members' digits to sum to a
target.

Programs can be built for the two problem families used in the benchmarks
(Sudoku and multi-addend digit sums) or read from a small line-oriented
text format::

    # comment
    domain 9 1 2 3 4 5 6 7 8 9      # k, then optional labels
    positions 81
    exactly_one row0 0 1 2 3 4 5 6 7 8
    sum_eq total 18 0 1
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ParseError, TargetOutOfRange, ValidationError


class GroupKind(str, enum.Enum):
    EXACTLY_ONE = "exactly_one"
    SUM_EQ = "sum_eq"


@dataclass(frozen=True)
class SymbolDomain:
    k: int
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.k < 2:
            raise ValidationError(f"domain needs at least 2 symbols, got {self.k}")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(str(s) for s in range(self.k)))
        else:
            object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.labels) != self.k:
            raise ValidationError(f"expected {self.k} labels, got {len(self.labels)}")
        if len(set(self.labels)) != self.k:
            raise ValidationError("symbol labels must be distinct")
        for lab in self.labels:
            if not lab or "#" in lab or lab.split() != [lab]:
                raise ValidationError(f"bad symbol label {lab!r}")

    @property
    def has_default_labels(self) -> bool:
        return self.labels == tuple(str(s) for s in range(self.k))


@dataclass(frozen=True)
class ConstraintGroup:
    name: str
    kind: GroupKind
    members: tuple[int, ...]
    target: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", GroupKind(self.kind))
        object.__setattr__(self, "members", tuple(int(m) for m in self.members))
        if not self.members:
            raise ValidationError(f"group {self.name!r} has no members")
        if len(set(self.members)) != len(self.members):
            raise ValidationError(f"group {self.name!r} has duplicate members")
        if self.kind is GroupKind.SUM_EQ and self.target is None:
            raise ValidationError(f"sum group {self.name!r} needs a target")
        if self.kind is GroupKind.EXACTLY_ONE and self.target is not None:
            raise ValidationError(f"exactly_one group {self.name!r} cannot carry a target")


@dataclass(frozen=True)
class ConstraintProgram:
    """An immutable set of constraint groups over ``n`` positions.

    ``provenance`` records the generator parameters, e.g. ``("sudoku", 3)``
    or ``("addition", N, k, S)``; programs read from text have none. It is
    excluded from equality so that a round trip through the text format
    compares equal.
    """

    n: int
    domain: SymbolDomain
    groups: tuple[ConstraintGroup, ...]
    provenance: tuple | None = field(default=None, compare=False)
    membership: tuple[tuple[int, ...], ...] = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(self.groups))
        if self.n < 1:
            raise ValidationError("a program needs at least one position")
        names = set()
        membership: list[list[int]] = [[] for _ in range(self.n)]
        for gi, g in enumerate(self.groups):
            if g.name in names:
                raise ValidationError(f"duplicate group name {g.name!r}")
            names.add(g.name)
            for m in g.members:
                if not 0 <= m < self.n:
                    raise ValidationError(f"group {g.name!r}: position {m} outside [0, {self.n})")
                membership[m].append(gi)
            if g.kind is GroupKind.SUM_EQ:
                hi = (self.k - 1) * len(g.members)
                if not 0 <= g.target <= hi:
                    raise TargetOutOfRange(f"group {g.name!r}: target {g.target} outside [0, {hi}]")
        object.__setattr__(self, "membership", tuple(tuple(gs) for gs in membership))

    @property
    def k(self) -> int:
        return self.domain.k

    @property
    def uncovered(self) -> tuple[int, ...]:
        """Positions in no group; they are unconstrained and left as they are."""
        return tuple(i for i, gs in enumerate(self.membership) if not gs)

    @cached_property
    def exactly_one_blocks(self) -> tuple[tuple[tuple[int, ...], np.ndarray], ...]:
        """Exclusivity groups bucketed by size as ``(group indices, members array)``.

        The members array has shape ``(groups, size)``; batched kernels index
        with it directly.
        """
        buckets: dict[int, list[int]] = {}
        for gi, g in enumerate(self.groups):
            if g.kind is GroupKind.EXACTLY_ONE:
                buckets.setdefault(len(g.members), []).append(gi)
        out = []
        for size in sorted(buckets):
            gis = tuple(buckets[size])
            members = np.array([self.groups[gi].members for gi in gis], dtype=np.intp)
            members.setflags(write=False)
            out.append((gis, members))
        return tuple(out)

    @cached_property
    def sum_groups(self) -> tuple[int, ...]:
        return tuple(gi for gi, g in enumerate(self.groups) if g.kind is GroupKind.SUM_EQ)

    def group(self, name: str) -> ConstraintGroup:
        for g in self.groups:
            if g.name == name:
                return g
        raise KeyError(name)

    @cached_property
    def peer_table(self) -> tuple[tuple[int, ...], ...]:
        table = []
        for i in range(self.n):
            out = set()
            for gi in self.membership[i]:
                g = self.groups[gi]
                if g.kind is GroupKind.EXACTLY_ONE:
                    out.update(g.members)
            out.discard(i)
            table.append(tuple(sorted(out)))
        return tuple(table)

    def peers(self, position: int) -> tuple[int, ...]:
        """Positions sharing an EXACTLY_ONE group with ``position``."""
        return self.peer_table[position]


def build_sudoku_program(box_size: int) -> ConstraintProgram:
    """Rows, columns and boxes of a ``b² x b²`` grid, row-major positions."""
    b = int(box_size)
    if b < 2:
        raise ValueError(f"box size must be >= 2, got {box_size}")
    s = b * b
    groups = []
    for r in range(s):
        groups.append(ConstraintGroup(f"row{r}", GroupKind.EXACTLY_ONE, [r * s + c for c in range(s)]))
    for c in range(s):
        groups.append(ConstraintGroup(f"col{c}", GroupKind.EXACTLY_ONE, [r * s + c for r in range(s)]))
    for bi in range(s):
        r0, c0 = (bi // b) * b, (bi % b) * b
        cells = [(r0 + dr) * s + (c0 + dc) for dr in range(b) for dc in range(b)]
        groups.append(ConstraintGroup(f"box{bi}", GroupKind.EXACTLY_ONE, cells))
    domain = SymbolDomain(s, tuple(str(v) for v in range(1, s + 1)))
    return ConstraintProgram(s * s, domain, groups, provenance=("sudoku", b))


def build_addition_program(addends: int, k: int, target: int) -> ConstraintProgram:
    if addends < 1:
        raise ValueError("need at least one addend")
    hi = (k - 1) * addends
    if not 0 <= target <= hi:
        raise TargetOutOfRange(f"target {target} outside [0, {hi}]")
    group = ConstraintGroup("sum", GroupKind.SUM_EQ, range(addends), target=int(target))
    return ConstraintProgram(addends, SymbolDomain(k), [group],
                             provenance=("addition", addends, k, int(target)))


def residual_term_count(program: ConstraintProgram) -> int:
    """Number of squared terms in the fixed-point residual loss."""
    return sum(len(g.members) * program.k for g in program.groups)


def _ints(tokens, lineno):
    try:
        return [int(t) for t in tokens]
    except ValueError as exc:
        raise ParseError(f"expected integers: {exc}", lineno) from None


def parse_program(text: str) -> ConstraintProgram:
    k = None
    labels: tuple[str, ...] = ()
    n = None
    groups = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *rest = line.split()
        if head == "domain":
            if k is not None:
                raise ParseError("domain declared twice", lineno)
            if not rest:
                raise ParseError("domain needs a symbol count", lineno)
            (k,) = _ints(rest[:1], lineno)
            labels = tuple(rest[1:])
        elif head == "positions":
            if n is not None:
                raise ParseError("positions declared twice", lineno)
            if len(rest) != 1:
                raise ParseError("positions takes exactly one integer", lineno)
            (n,) = _ints(rest, lineno)
        elif head == "exactly_one":
            if len(rest) < 2:
                raise ParseError("exactly_one needs a name and members", lineno)
            members = _ints(rest[1:], lineno)
            groups.append((lineno, ConstraintGroup, (rest[0], GroupKind.EXACTLY_ONE, members)))
        elif head == "sum_eq":
            if len(rest) < 3:
                raise ParseError("sum_eq needs a name, a target and members", lineno)
            target, *members = _ints(rest[1:], lineno)
            groups.append((lineno, ConstraintGroup, (rest[0], GroupKind.SUM_EQ, members, target)))
        else:
            raise ParseError(f"unknown declaration {head!r}", lineno)
    if k is None:
        raise ParseError("missing domain declaration")
    built = []
    for lineno, cls, args in groups:
        try:
            built.append(cls(*args))
        except ValidationError as exc:
            raise ValidationError(f"line {lineno}: {exc}") from None
    if n is None:
        # positions may be omitted; infer from the largest index
        n = 1 + max((m for g in built for m in g.members), default=-1)
    return ConstraintProgram(n, SymbolDomain(k, labels), built)


def serialize_program(program: ConstraintProgram) -> str:
    dom = program.domain
    head = f"domain {dom.k}"
    if not dom.has_default_labels:
        head += " " + " ".join(dom.labels)
    lines = [head, f"positions {program.n}"]
    for g in program.groups:
        members = " ".join(str(m) for m in g.members)
        if g.kind is GroupKind.EXACTLY_ONE:
            lines.append(f"exactly_one {g.name} {members}")
        else:
            lines.append(f"sum_eq {g.name} {g.target} {members}")
    return "\n".join(lines) + "\n"
