"""Greedy constrained decoding and hard clue restoration."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch
from .refinement import ZERO_MASS, Instance


class DecodeStatus(str, enum.Enum):
    COMPLETE = "complete"
    DEAD_END = "dead_end"


@dataclass(frozen=True)
class DecodeResult:
    assignment: np.ndarray
    status: DecodeStatus
    trace: tuple[tuple[int, int, float], ...]
    dead_positions: tuple[int, ...]

    @property
    def complete(self) -> bool:
        return self.status is DecodeStatus.COMPLETE


def restore_clues(post_dist, pre_dist, mask) -> np.ndarray:
    post = np.asarray(post_dist, dtype=np.float64)
    pre = np.asarray(pre_dist, dtype=np.float64)
    mask = np.asarray(mask).astype(bool)
    if post.shape != pre.shape or mask.shape != post.shape[:1]:
        raise ShapeMismatch(f"shapes {post.shape}, {pre.shape} and mask {mask.shape} disagree")
    return np.where(mask[:, None], pre, post)


def check_feasible_symbols(inst: Instance, position: int) -> set[int]:
    return {int(s) for s in np.flatnonzero(inst.dist[position] > 0)}


def greedy_decode(inst: Instance) -> DecodeResult:
    """Confidence-ordered greedy commitment with exclusivity propagation.

    Evidence positions are locked first, in index order, at the argmax of
    their input rows. Then the uncommitted position with the highest current
    max-probability is committed to its argmax, repeatedly. Every commit
    zeroes the symbol in the uncommitted latent rows of its exclusivity
    peers and renormalises them; a row left without mass is a dead end and
    stays unassigned. Ties go to the lowest position, then lowest symbol.
    Sum groups do not propagate.
    """
    program = inst.program
    n = program.n
    dist = inst.dist.copy()
    evidence = inst.mask.astype(bool)
    peers = [program.peers(i) for i in range(n)]
    assignment = np.full(n, -1, dtype=np.int64)
    open_ = np.ones(n, dtype=bool)
    dead: list[int] = []
    trace = []

    def commit(i, sym, conf):
        assignment[i] = sym
        open_[i] = False
        trace.append((int(i), int(sym), float(conf)))
        for j in peers[i]:
            if not open_[j] or evidence[j] or dist[j, sym] == 0.0:
                continue
            dist[j, sym] = 0.0
            mass = dist[j].sum()
            if mass < ZERO_MASS:
                dist[j] = 0.0
                open_[j] = False
                dead.append(int(j))
            else:
                dist[j] /= mass

    for i in np.flatnonzero(evidence):
        sym = int(np.argmax(dist[i]))
        if dist[i, sym] <= 0.0:
            open_[i] = False
            dead.append(int(i))
            continue
        commit(i, sym, dist[i, sym])

    while open_.any():
        conf = np.where(open_, dist.max(axis=1), -np.inf)
        i = int(np.argmax(conf))
        sym = int(np.argmax(dist[i]))
        if dist[i, sym] <= 0.0:
            # an all-zero latent row on input
            open_[i] = False
            dead.append(i)
            continue
        commit(i, sym, dist[i, sym])

    status = DecodeStatus.DEAD_END if dead else DecodeStatus.COMPLETE
    return DecodeResult(assignment, status, tuple(trace), tuple(sorted(dead)))
