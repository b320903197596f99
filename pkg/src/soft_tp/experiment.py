"""Simulated perception, curriculum schedules, descent solver and benchmarks.

Perception is a noisy oracle: every cell gets a temperature-softened
one-hot at its true symbol, except that with probability ``flip_rate`` the
peak sits on a uniformly chosen wrong symbol. Per-cell random draws do not
depend on the flip rate, so the set of flipped cells grows monotonically
with the rate for a fixed seed. That makes bisection on the rate
well defined.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .constraint_model import ConstraintProgram, build_sudoku_program
from .decoder import greedy_decode, restore_clues
from .errors import NonFinite
from .kernel import LOG_CLAMP_EPS, residual_loss, residual_loss_grad
from .oracle import (DiscreteBoard, Metrics, check_csr, generate_solution, make_rng,
                     mask_clues, verify_independent)
from .refinement import EvidenceSource, Instance, RefineConfig, clamp_evidence, refine

WORKERS_ENV = "SOFT_TP_WORKERS"


@dataclass(frozen=True)
class NoiseConfig:
    flip_rate: float = 0.0
    temperature: float = 0.25
    seed: int = 0
    # None: evidence cells share ``flip_rate``
    evidence_flip_rate: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.flip_rate <= 1.0:
            raise ValueError("flip_rate must lie in [0, 1]")
        if self.evidence_flip_rate is not None and not 0.0 <= self.evidence_flip_rate <= 1.0:
            raise ValueError("evidence_flip_rate must lie in [0, 1]")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")


def temperature_for_peak(peak: float, k: int) -> float:
    """Temperature at which a softened one-hot puts ``peak`` on its top symbol."""
    if not 1.0 / k < peak < 1.0:
        raise ValueError(f"peak must lie in (1/{k}, 1)")
    return -1.0 / math.log((1.0 - peak) / ((k - 1) * peak))


def softened_one_hot(symbols: np.ndarray, k: int, temperature: float) -> np.ndarray:
    logits = np.zeros((len(symbols), k))
    logits[np.arange(len(symbols)), symbols] = 1.0 / temperature
    logits -= logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    return e / e.sum(axis=1, keepdims=True)


def simulate_perception(board: DiscreteBoard, mask, noise: NoiseConfig,
                        program: ConstraintProgram | None = None, index=0) -> Instance:
    """Noisy per-cell distributions for a solved board.

    ``index`` is mixed into the seed so that each board in a corpus draws
    its own noise from the same config.
    """
    if not board.complete:
        raise ValueError("perception needs a complete board")
    if program is None:
        program = build_sudoku_program(math.isqrt(board.k))
    k, n = board.k, board.n
    mask = np.asarray(mask, dtype=np.int64)
    rng = make_rng(noise.seed, index, 2)
    u = rng.random(n)
    offset = rng.integers(1, k, size=n)
    ev_rate = noise.flip_rate if noise.evidence_flip_rate is None else noise.evidence_flip_rate
    rate = np.where(mask == 1, ev_rate, noise.flip_rate)
    flipped = u < rate
    peaks = np.where(flipped, (board.cells + offset) % k, board.cells)
    dist = softened_one_hot(peaks, k, noise.temperature)
    return Instance(program, dist, mask, board.cells)


@dataclass(frozen=True)
class ScheduleConfig:
    t_decay: float = 100
    t_warm: float = 20
    floor: float = 0.1

    def __post_init__(self):
        if self.t_decay <= 0 or self.t_warm <= 0:
            raise ValueError("schedule lengths must be positive")
        if not 0 < self.floor <= 1:
            raise ValueError("floor must lie in (0, 1]")


def curriculum_alpha(t: float, cfg: ScheduleConfig = ScheduleConfig()) -> float:
    """Weight on latent-position cross-entropy: linear decay to a floor."""
    return max(cfg.floor, 1.0 - 0.9 * t / cfg.t_decay)


def curriculum_beta(t: float, cfg: ScheduleConfig = ScheduleConfig()) -> float:
    """Weight on the constraint loss: linear warm-up to 1."""
    return min(1.0, t / cfg.t_warm)


@dataclass
class DescentResult:
    instance: Instance
    losses: list[float]


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def descent_solve(inst: Instance, steps: int = 2000, step_size: float = 0.5,
                  tol: float = 0.0) -> DescentResult:
    """Plain gradient descent on per-position logits against the residual loss.

    Evidence rows are held at their input values. ``losses[t]`` is the loss
    before update ``t``; the last entry is the loss of the returned board.
    Stops early once the loss is ``<= tol``.
    """
    program = inst.program
    ev = inst.mask.astype(bool)
    p = inst.dist.copy()
    losses = [residual_loss(p, program).total]
    if losses[0] <= tol:
        return DescentResult(inst, losses)
    logits = np.log(np.maximum(p, LOG_CLAMP_EPS))
    fixed = inst.dist[ev]
    for t in range(steps):
        if t:
            p = _softmax(logits)
            p[ev] = fixed
            losses.append(residual_loss(p, program).total)
            if losses[-1] <= tol:
                break
        g = residual_loss_grad(p, program)
        if not (np.isfinite(losses[-1]) and np.isfinite(g).all()):
            raise NonFinite("loss or gradient became non-finite")
        g_logits = p * (g - (p * g).sum(axis=1, keepdims=True))
        logits[~ev] -= step_size * g_logits[~ev]
    else:
        p = _softmax(logits)
        p[ev] = fixed
        losses.append(residual_loss(p, program).total)
    if not np.isfinite(losses[-1]):
        raise NonFinite("loss became non-finite")
    return DescentResult(inst.with_dist(p), losses)


@dataclass(frozen=True)
class CorpusSpec:
    box_size: int = 3
    count: int = 1000
    clues: int = 45
    seed: int = 0


@dataclass
class BoardRecord:
    index: int
    solution: DiscreteBoard
    mask: np.ndarray


def generate_corpus(spec: CorpusSpec) -> list[BoardRecord]:
    n = spec.box_size ** 4
    if not 0 <= spec.clues <= n:
        raise ValueError(f"clue count {spec.clues} outside [0, {n}]")
    out = []
    for i in range(spec.count):
        board = generate_solution(spec.box_size, (spec.seed, i))
        out.append(BoardRecord(i, board, mask_clues(board, spec.clues, (spec.seed, i))))
    return out


@dataclass(frozen=True)
class PipelineConfig:
    iterations: int = 0
    decode: bool = True
    reclamp_evidence: bool = True


@dataclass
class BoardOutcome:
    index: int
    correct_cells: int
    cells: int
    board_correct: bool
    csr: bool
    vcsr: bool
    dead_end: bool
    assignment: np.ndarray = field(repr=False, default=None)


def evaluate_board(record: BoardRecord, program: ConstraintProgram,
                   pipeline: PipelineConfig, noise: NoiseConfig) -> BoardOutcome:
    perceived = simulate_perception(record.solution, record.mask, noise, program, record.index)
    inst = clamp_evidence(perceived, EvidenceSource.ARGMAX)
    if pipeline.iterations:
        inst = refine(inst, RefineConfig(pipeline.iterations, pipeline.reclamp_evidence))
    dist = restore_clues(inst.dist, perceived.dist, inst.mask)
    inst = inst.with_dist(dist)
    dead = False
    if pipeline.decode:
        res = greedy_decode(inst)
        assignment = res.assignment
        dead = not res.complete
    else:
        assignment = np.argmax(dist, axis=1)
    board = DiscreteBoard(program.k, assignment)
    csr = vcsr = False
    if board.complete:
        csr = check_csr(board, program)
        vcsr = verify_independent(board, program)
    correct = int((assignment == record.solution.cells).sum())
    return BoardOutcome(record.index, correct, program.n, correct == program.n,
                        csr, vcsr, dead, assignment)


def _evaluate_chunk(args):
    records, program, pipeline, noise = args
    return [evaluate_board(r, program, pipeline, noise) for r in records]


def default_workers() -> int:
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


def evaluate_corpus(corpus: list[BoardRecord], pipeline: PipelineConfig, noise: NoiseConfig,
                    program: ConstraintProgram | None = None,
                    workers: int | None = None) -> list[BoardOutcome]:
    if not corpus:
        return []
    if program is None:
        program = build_sudoku_program(math.isqrt(corpus[0].solution.k))
    workers = default_workers() if workers is None else workers
    if workers <= 1:
        return [evaluate_board(r, program, pipeline, noise) for r in corpus]
    size = math.ceil(len(corpus) / workers)
    chunks = [(corpus[i:i + size], program, pipeline, noise) for i in range(0, len(corpus), size)]
    with ProcessPoolExecutor(workers) as ex:
        # map keeps submission order, so aggregation stays in index order
        return [o for chunk in ex.map(_evaluate_chunk, chunks) for o in chunk]


def aggregate(outcomes: list[BoardOutcome]) -> Metrics:
    m = len(outcomes)
    if m == 0:
        return Metrics(0.0, 0.0, 0.0, 0.0, 0)
    cells = sum(o.cells for o in outcomes)
    return Metrics(
        sym_acc=sum(o.correct_cells for o in outcomes) / cells,
        board_acc=sum(o.board_correct for o in outcomes) / m,
        csr=sum(o.csr for o in outcomes) / m,
        vcsr=sum(o.vcsr for o in outcomes) / m,
        boards=m,
        dead_ends=sum(o.dead_end for o in outcomes),
        disagreements=sum(o.csr != o.vcsr for o in outcomes),
    )


def run_benchmark(corpus: list[BoardRecord] | CorpusSpec, pipeline: PipelineConfig,
                  noise: NoiseConfig, program: ConstraintProgram | None = None,
                  workers: int | None = None) -> Metrics:
    if isinstance(corpus, CorpusSpec):
        corpus = generate_corpus(corpus)
    return aggregate(evaluate_corpus(corpus, pipeline, noise, program, workers))


def raw_argmax_csr(corpus: list[BoardRecord], noise: NoiseConfig,
                   program: ConstraintProgram | None = None) -> float:
    return run_benchmark(corpus, PipelineConfig(iterations=0, decode=False), noise, program, workers=1).csr


def calibrate_flip_rate(corpus: list[BoardRecord], band: tuple[float, float] = (0.90, 0.97),
                        noise: NoiseConfig = NoiseConfig(), program: ConstraintProgram | None = None,
                        hi: float = 0.05, max_iter: int = 60) -> NoiseConfig:
    """Bisect ``flip_rate`` until the raw argmax CSR lands inside ``band``.

    Raw CSR is non-increasing in the rate for a fixed seed, so plain
    bisection on the band midpoint suffices.
    """
    lo_rate, hi_rate = 0.0, hi
    target = 0.5 * (band[0] + band[1])
    for _ in range(max_iter):
        mid = 0.5 * (lo_rate + hi_rate)
        cfg = NoiseConfig(mid, noise.temperature, noise.seed, noise.evidence_flip_rate)
        csr = raw_argmax_csr(corpus, cfg, program)
        if band[0] <= csr <= band[1]:
            return cfg
        if csr > target:
            lo_rate = mid
        else:
            hi_rate = mid
    raise RuntimeError(f"could not place raw CSR inside {band}")


def benchmark_record(metrics: Metrics, spec: CorpusSpec, pipeline: PipelineConfig,
                     noise: NoiseConfig, suite_id: str = "sudoku") -> dict:
    return {
        "suite": suite_id,
        "corpus": asdict(spec),
        "noise": asdict(noise),
        "iterations": pipeline.iterations,
        "decode": pipeline.decode,
        "metrics": {
            "sym_acc": metrics.sym_acc,
            "board_acc": metrics.board_acc,
            "csr": metrics.csr,
            "vcsr": metrics.vcsr,
        },
        "boards": metrics.boards,
        "dead_ends": metrics.dead_ends,
        "csr_vcsr_disagreements": metrics.disagreements,
    }


def format_report(metrics: Metrics, pipeline: PipelineConfig) -> str:
    head = f"boards={metrics.boards} K={pipeline.iterations} decode={'on' if pipeline.decode else 'off'}"
    lines = [
        head,
        f"{'Sym-Acc':>8} {'Board-Acc':>9} {'CSR':>6} {'VCSR':>6} {'dead':>5}",
        f"{metrics.sym_acc:8.4f} {metrics.board_acc:9.4f} {metrics.csr:6.4f} {metrics.vcsr:6.4f} {metrics.dead_ends:5d}",
    ]
    return "\n".join(lines)
