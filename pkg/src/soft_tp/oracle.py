"""Ground truth independent of the soft kernel.

Puzzle generation, a backtracking solver, two separate constraint checkers
and brute-force references for the operator. Randomness comes from numpy's
PCG64 generator seeded with ``numpy.random.SeedSequence``, so a seed maps to
the same board on every platform.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .constraint_model import ConstraintGroup, ConstraintProgram, GroupKind, build_sudoku_program
from .errors import IncompleteBoard, KindMismatch, SizeLimit, TargetOutOfRange, UnsupportedProgram

BRUTE_FORCE_GROUP_LIMIT = 1000
BRUTE_FORCE_ADDEND_LIMIT = 6


def make_rng(*seed) -> np.random.Generator:
    """PCG64 generator; tuple seeds are flattened, so ``(3, 1)`` and ``3, 1`` agree."""
    flat = []
    for s in seed:
        flat.extend(s if isinstance(s, (tuple, list)) else [s])
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(s) for s in flat])))


@dataclass
class DiscreteBoard:
    k: int
    cells: np.ndarray

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=np.int64).copy()
        if self.cells.ndim != 1:
            raise ValueError("cells must be a flat vector")
        bad = (self.cells < -1) | (self.cells >= self.k)
        if bad.any():
            raise ValueError(f"cell values must lie in [-1, {self.k}); bad positions {np.flatnonzero(bad)[:5]}")

    @property
    def n(self) -> int:
        return len(self.cells)

    @property
    def complete(self) -> bool:
        return bool((self.cells >= 0).all())

    def __eq__(self, other):
        if not isinstance(other, DiscreteBoard):
            return NotImplemented
        return self.k == other.k and np.array_equal(self.cells, other.cells)


@dataclass(frozen=True)
class Metrics:
    sym_acc: float
    board_acc: float
    csr: float
    vcsr: float
    boards: int
    dead_ends: int = 0
    disagreements: int = 0


def _require_complete(board: DiscreteBoard):
    if not board.complete:
        raise IncompleteBoard(f"{int((board.cells < 0).sum())} cells unassigned")


def check_csr(board: DiscreteBoard, program: ConstraintProgram) -> bool:
    """Algebraic check of every group against a complete board.

    Exclusivity groups must hold pairwise distinct symbols, which for a
    ``k``-member group means each symbol exactly once.
    """
    _require_complete(board)
    if board.n != program.n:
        raise ValueError(f"board has {board.n} cells, program has {program.n} positions")
    cells = board.cells
    for g in program.groups:
        vals = cells[list(g.members)]
        if g.kind is GroupKind.EXACTLY_ONE:
            if np.bincount(vals, minlength=program.k).max() > 1:
                return False
        elif int(vals.sum()) != g.target:
            return False
    return True


def verify_independent(board: DiscreteBoard, program: ConstraintProgram) -> bool:
    """Second checker that rebuilds the constraints from the generator parameters.

    The stored groups are ignored; only ``program.provenance`` is read.
    """
    _require_complete(board)
    prov = program.provenance
    if not prov:
        raise UnsupportedProgram("program has no generator provenance")
    values = [int(v) for v in board.cells]
    if prov[0] == "sudoku":
        b = prov[1]
        side = b * b
        if len(values) != side * side or board.k != side:
            return False
        grid = [values[r * side:(r + 1) * side] for r in range(side)]
        full = set(range(side))
        for r in range(side):
            if set(grid[r]) != full:
                return False
        for c in range(side):
            if {grid[r][c] for r in range(side)} != full:
                return False
        for br in range(b):
            for bc in range(b):
                box = {grid[br * b + i][bc * b + j] for i in range(b) for j in range(b)}
                if box != full:
                    return False
        return True
    if prov[0] == "addition":
        _, addends, k, target = prov
        return len(values) == addends and all(0 <= v < k for v in values) and sum(values) == target
    raise UnsupportedProgram(f"unknown provenance {prov[0]!r}")


class SolveStatus(str, enum.Enum):
    UNIQUE = "unique"
    MULTIPLE = "multiple"
    UNSATISFIABLE = "unsatisfiable"


@dataclass
class SolveResult:
    status: SolveStatus
    solution: DiscreteBoard | None = None


def _latin_peers(program: ConstraintProgram) -> list[tuple[int, ...]]:
    for g in program.groups:
        if g.kind is not GroupKind.EXACTLY_ONE:
            raise UnsupportedProgram("backtracking supports exclusivity groups only")
        if len(g.members) != program.k:
            raise UnsupportedProgram(f"group {g.name!r} has {len(g.members)} members, need {program.k}")
    return [program.peers(i) for i in range(program.n)]


def _search(cells: list[int], k: int, peers, rng: np.random.Generator | None = None):
    """Depth-first search with forward checking; yields complete assignments.

    Candidates are bitmasks. The unassigned cell with fewest candidates is
    branched on (lowest index on ties); ``rng`` shuffles the value order.
    """
    full = (1 << k) - 1
    cand = [full] * len(cells)
    for i, v in enumerate(cells):
        if v >= 0:
            if not (cand[i] >> v) & 1:
                return
            cand[i] = 1 << v
            for j in peers[i]:
                cand[j] &= ~(1 << v)
                if cand[j] == 0:
                    return
    assigned = [v >= 0 for v in cells]
    values = list(cells)

    def rec(cand):
        best, best_count = -1, k + 1
        for i, done in enumerate(assigned):
            if not done:
                c = bin(cand[i]).count("1")
                if c < best_count:
                    best, best_count = i, c
                    if c <= 1:
                        break
        if best < 0:
            yield list(values)
            return
        syms = [s for s in range(k) if (cand[best] >> s) & 1]
        if rng is not None:
            rng.shuffle(syms)
        assigned[best] = True
        for s in syms:
            bit = 1 << s
            nxt = list(cand)
            nxt[best] = bit
            ok = True
            for j in peers[best]:
                if not assigned[j]:
                    nxt[j] &= ~bit
                    if nxt[j] == 0:
                        ok = False
                        break
                elif values[j] == s:
                    ok = False
                    break
            if ok:
                values[best] = s
                yield from rec(nxt)
        values[best] = -1
        assigned[best] = False

    yield from rec(cand)


def solve_backtracking(board: DiscreteBoard, program: ConstraintProgram) -> SolveResult:
    peers = _latin_peers(program)
    found = list(itertools.islice(_search([int(v) for v in board.cells], program.k, peers), 2))
    if not found:
        return SolveResult(SolveStatus.UNSATISFIABLE)
    if len(found) > 1:
        return SolveResult(SolveStatus.MULTIPLE)
    return SolveResult(SolveStatus.UNIQUE, DiscreteBoard(program.k, found[0]))


def generate_solution(box_size: int, seed) -> DiscreteBoard:
    """A random complete Sudoku grid by randomized backtracking."""
    program = build_sudoku_program(box_size)
    rng = make_rng(seed)
    peers = _latin_peers(program)
    cells = next(_search([-1] * program.n, program.k, peers, rng))
    return DiscreteBoard(program.k, cells)


def mask_clues(board: DiscreteBoard, clue_count: int, seed) -> np.ndarray:
    if not 0 <= clue_count <= board.n:
        raise ValueError(f"clue count {clue_count} outside [0, {board.n}]")
    rng = make_rng(seed, 1)
    mask = np.zeros(board.n, dtype=np.int64)
    mask[rng.permutation(board.n)[:clue_count]] = 1
    return mask


def brute_force_tp(p, group: ConstraintGroup) -> np.ndarray:
    """Exclusivity-group operator by explicit scalar loops."""
    if group.kind is not GroupKind.EXACTLY_ONE:
        raise KindMismatch("brute_force_tp needs an exclusivity group")
    p = np.asarray(p, dtype=np.float64)
    members = list(group.members)
    k = p.shape[1]
    if len(members) * k > BRUTE_FORCE_GROUP_LIMIT:
        raise SizeLimit(f"group of {len(members)} x {k} exceeds {BRUTE_FORCE_GROUP_LIMIT}")
    out = np.zeros((len(members), k))
    for a, i in enumerate(members):
        for s in range(k):
            val = float(p[i, s])
            for j in members:
                if j != i:
                    val *= 1.0 - float(p[j, s])
            out[a, s] = val
    return out


def brute_force_sum(dists, target: int) -> np.ndarray:
    """Sum-group operator by enumerating every digit tuple."""
    dists = np.asarray(dists, dtype=np.float64)
    N, k = dists.shape
    if N > BRUTE_FORCE_ADDEND_LIMIT:
        raise SizeLimit(f"{N} addends exceeds {BRUTE_FORCE_ADDEND_LIMIT}")
    if not 0 <= target <= (k - 1) * N:
        raise TargetOutOfRange(f"target {target} outside [0, {(k - 1) * N}]")
    out = np.zeros((N, k))
    # the last digit is forced by the target, so only the others are enumerated
    for head in itertools.product(range(k), repeat=N - 1):
        last = target - sum(head)
        if not 0 <= last < k:
            continue
        digits = head + (last,)
        for i in range(N):
            # P(this tuple restricted to the other addends)
            rest = 1.0
            for j in range(N):
                if j != i:
                    rest *= dists[j, digits[j]]
            out[i, digits[i]] += rest
    return dists * out


def central_difference(f, p, step: float = 1e-6) -> np.ndarray:
    """Numerical gradient of scalar ``f`` at ``p`` by central differences."""
    p = np.asarray(p, dtype=np.float64)
    grad = np.zeros_like(p)
    for idx in np.ndindex(p.shape):
        up = p.copy()
        down = p.copy()
        up[idx] += step
        down[idx] -= step
        grad[idx] = (f(up) - f(down)) / (2.0 * step)
    return grad


def max_relative_error(analytic, numeric, floor: float = 1e-8) -> float:
    """Largest ``|a - n| / max(|a|, |n|)`` over coordinates with ``|a| > floor``."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    sel = np.abs(a) > floor
    if not sel.any():
        return 0.0
    return float(np.max(np.abs(a[sel] - n[sel]) / np.maximum(np.abs(a[sel]), np.abs(n[sel]))))
