"""Evidence clamping and iterative soft propagation of a board."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .constraint_model import ConstraintProgram
from .errors import MissingLabel, ShapeMismatch
from .kernel import check_shape, image_sum

ZERO_MASS = 1e-300


@dataclass(frozen=True)
class Instance:
    """A board: per-position distributions, evidence mask and optional labels.

    ``labels`` uses -1 for unknown positions.
    """

    program: ConstraintProgram
    dist: np.ndarray
    mask: np.ndarray = field(default=None)
    labels: np.ndarray = field(default=None)

    def __post_init__(self):
        n = self.program.n
        object.__setattr__(self, "dist", check_shape(self.dist, self.program).copy())
        mask = np.zeros(n, dtype=np.int64) if self.mask is None else np.asarray(self.mask, dtype=np.int64)
        labels = np.full(n, -1, dtype=np.int64) if self.labels is None else np.asarray(self.labels, dtype=np.int64)
        if mask.shape != (n,) or labels.shape != (n,):
            raise ShapeMismatch(f"mask and labels must have length {n}")
        object.__setattr__(self, "mask", mask.copy())
        object.__setattr__(self, "labels", labels.copy())

    @property
    def evidence(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    def with_dist(self, dist) -> "Instance":
        return replace(self, dist=dist)


class EvidenceSource(str, enum.Enum):
    LABELS = "labels"
    ARGMAX = "argmax"


class ZeroRowFallback(str, enum.Enum):
    KEEP_PREVIOUS = "keep_previous"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class RefineConfig:
    iterations: int = 10
    reclamp_evidence: bool = True
    zero_row_fallback: ZeroRowFallback = ZeroRowFallback.KEEP_PREVIOUS

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        object.__setattr__(self, "zero_row_fallback", ZeroRowFallback(self.zero_row_fallback))


def clamp_evidence(inst: Instance, source: EvidenceSource = EvidenceSource.ARGMAX) -> Instance:
    """Replace every evidence row with a one-hot vector."""
    source = EvidenceSource(source)
    dist = inst.dist.copy()
    for i in inst.evidence:
        if source is EvidenceSource.LABELS:
            if inst.labels[i] < 0:
                raise MissingLabel(f"evidence position {i} has no label")
            sym = inst.labels[i]
        else:
            sym = int(np.argmax(dist[i]))
        dist[i] = 0.0
        dist[i, sym] = 1.0
    return inst.with_dist(dist)


def averaged_image(p: np.ndarray, program: ConstraintProgram) -> np.ndarray:
    """Operator images averaged over the groups containing each position.

    Positions outside every group keep their own row.
    """
    acc = image_sum(p, program)
    counts = np.array([len(gs) for gs in program.membership], dtype=np.float64)
    free = counts == 0
    out = acc / np.where(free, 1.0, counts)[:, None]
    out[free] = p[free]
    return out


def refine_step(p: np.ndarray, program: ConstraintProgram,
                fallback: ZeroRowFallback = ZeroRowFallback.KEEP_PREVIOUS) -> np.ndarray:
    avg = averaged_image(p, program)
    mass = avg.sum(axis=1)
    dead = mass < ZERO_MASS
    out = avg / np.where(dead, 1.0, mass)[:, None]
    if dead.any():
        if fallback is ZeroRowFallback.UNIFORM:
            out[dead] = 1.0 / program.k
        else:
            out[dead] = p[dead]
    return out


def refine(inst: Instance, config: RefineConfig = RefineConfig()) -> Instance:
    """Run ``config.iterations`` averaged-and-renormalised operator steps.

    With ``reclamp_evidence`` the evidence rows are reset after every step to
    the rows they held on entry (one-hots, after :func:`clamp_evidence`).
    """
    p = inst.dist.copy()
    ev = inst.evidence
    anchor = p[ev].copy()
    for _ in range(config.iterations):
        p = refine_step(p, inst.program, config.zero_row_fallback)
        if config.reclamp_evidence:
            p[ev] = anchor
    return inst.with_dist(p)


def sym_accuracy(inst: Instance) -> float:
    if (inst.labels < 0).any():
        raise MissingLabel("sym_accuracy needs labels at every position")
    return float(np.mean(np.argmax(inst.dist, axis=1) == inst.labels))
