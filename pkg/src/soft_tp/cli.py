"""Command-line entry point: ``soft-tp <command> ...``.

Exit codes: 0 success, 1 failed check or write error, 2 bad flags or
malformed input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import boardfile
from .constraint_model import build_addition_program, build_sudoku_program, serialize_program
from .decoder import greedy_decode
from .errors import SoftTPError
from .experiment import (CorpusSpec, NoiseConfig, PipelineConfig, BoardRecord, benchmark_record,
                         default_workers, format_report, generate_corpus, run_benchmark)
from .kernel import residual_loss, residual_loss_grad
from .oracle import DiscreteBoard, central_difference, check_csr, make_rng, max_relative_error
from .refinement import EvidenceSource, RefineConfig, clamp_evidence, refine, sym_accuracy

BOARDS_FILE = "boards.jsonl"
PROGRAM_FILE = "program.txt"


def fmt(x: float) -> str:
    return f"{x:.17g}"


class InputError(Exception):
    """Malformed input; maps to exit code 2."""


def _load(path) -> list:
    """``(index, Instance)`` pairs from a board file."""
    try:
        return [(r.get("index", i), boardfile.record_to_instance(r))
                for i, r in enumerate(boardfile.read_records(path))]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from None
    except (SoftTPError, KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from None


def cmd_generate(args) -> int:
    n = args.box_size ** 4
    if not 0 <= args.clues <= n:
        args.parser.error(f"--clues must lie in [0, {n}] for box size {args.box_size}")
    corpus = generate_corpus(CorpusSpec(args.box_size, args.count, args.clues, args.seed))
    program = build_sudoku_program(args.box_size)
    records = []
    for rec in corpus:
        records.append({
            "index": rec.index,
            "n": program.n,
            "k": program.k,
            "program": {"builtin": "sudoku", "box_size": args.box_size},
            "mask": [int(v) for v in rec.mask],
            "labels": [int(v) for v in rec.solution.cells],
        })
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        boardfile.write_records(out / BOARDS_FILE, records)
        (out / PROGRAM_FILE).write_text(serialize_program(program), encoding="utf-8")
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(records)} boards to {out / BOARDS_FILE}")
    return 0


def cmd_loss(args) -> int:
    insts = _load(args.boards)
    for idx, inst in insts:
        rep = residual_loss(inst.dist, inst.program, logspace=args.logspace)
        print(f"board {idx} total {fmt(rep.total)}")
        if args.per_group:
            for name, v in rep.per_group:
                print(f"  {name} {fmt(v)}")
    return 0


def _gradcheck_cases(args):
    if args.boards:
        for _, inst in _load(args.boards):
            yield "board", inst.dist, inst.program
        return
    rng = make_rng(args.seed)
    program = build_sudoku_program(args.box_size)
    for _ in range(args.count):
        yield f"sudoku{args.box_size}", rng.dirichlet(np.ones(program.k), program.n), program
    for _ in range(args.arith_count):
        target = int(rng.integers(0, 9 * args.addends + 1))
        prog = build_addition_program(args.addends, 10, target)
        yield f"sum{args.addends}={target}", rng.dirichlet(np.ones(10), args.addends), prog


def cmd_gradcheck(args) -> int:
    worst = 0.0
    for i, (label, p, program) in enumerate(_gradcheck_cases(args)):
        analytic = residual_loss_grad(p, program)
        numeric = central_difference(lambda x: residual_loss(x, program).total, p, args.fd_step)
        err = max_relative_error(analytic, numeric)
        worst = max(worst, err)
        print(f"case {i} {label} max_rel_err {err:.3e}")
    status = "PASS" if worst <= args.tol else "FAIL"
    print(f"{status} max_rel_err {worst:.3e} tol {args.tol:.1e}")
    return 0 if worst <= args.tol else 1


def cmd_refine(args) -> int:
    insts = _load(args.boards)
    cfg = RefineConfig(args.iterations, not args.no_reclamp, args.fallback)
    out_records = []
    for idx, inst in insts:
        before = residual_loss(inst.dist, inst.program).total
        refined = refine(clamp_evidence(inst, EvidenceSource.ARGMAX), cfg)
        after = residual_loss(refined.dist, refined.program).total
        line = f"board {idx} loss {fmt(before)} -> {fmt(after)}"
        if (inst.labels >= 0).all():
            line += f" sym_acc {sym_accuracy(inst):.4f} -> {sym_accuracy(refined):.4f}"
        print(line)
        out_records.append(boardfile.instance_to_record(refined, idx))
    if args.out:
        try:
            boardfile.write_records(args.out, out_records)
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    return 0


def cmd_decode(args) -> int:
    insts = _load(args.boards)
    failures = 0
    for idx, inst in insts:
        res = greedy_decode(inst)
        ok = res.complete and check_csr(DiscreteBoard(inst.program.k, res.assignment), inst.program)
        failures += not ok
        cells = " ".join(str(v) for v in res.assignment)
        print(f"board {idx} {res.status.value} csr {int(ok)} dead {len(res.dead_positions)} | {cells}")
    print(f"decoded {len(insts)} boards, {failures} failing constraint check")
    return 0


def _corpus_from_dir(path) -> list[BoardRecord]:
    insts = _load(Path(path) / BOARDS_FILE)
    corpus = []
    for idx, inst in insts:
        if inst.program.provenance is None or inst.program.provenance[0] != "sudoku":
            raise InputError("bench corpora must use the builtin sudoku program")
        corpus.append(BoardRecord(int(idx), DiscreteBoard(inst.program.k, inst.labels), inst.mask))
    return corpus


def cmd_bench(args) -> int:
    spec = CorpusSpec(args.box_size, args.count, args.clues, args.seed)
    if args.corpus:
        corpus = _corpus_from_dir(args.corpus)
        spec = replace(spec, count=len(corpus))
        if corpus:
            spec = replace(spec, box_size=int(round(corpus[0].solution.k ** 0.5)),
                           clues=int(corpus[0].mask.sum()))
    else:
        n = args.box_size ** 4
        if not 0 <= args.clues <= n:
            args.parser.error(f"--clues must lie in [0, {n}] for box size {args.box_size}")
        corpus = generate_corpus(spec)
    noise = NoiseConfig(args.noise_flip, args.noise_temp, args.noise_seed, args.evidence_flip)
    pipeline = PipelineConfig(args.iterations, args.decode)
    workers = args.workers if args.workers is not None else default_workers()
    metrics = run_benchmark(corpus, pipeline, noise, workers=workers)
    print(format_report(metrics, pipeline))
    print(f"CSR/VCSR {metrics.csr:.4f} {metrics.vcsr:.4f}")
    record = benchmark_record(metrics, spec, pipeline, noise)
    if args.corpus:
        record["corpus"]["path"] = str(args.corpus)
    if args.out:
        try:
            Path(args.out).write_text(json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="soft-tp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a seeded Sudoku corpus")
    p.add_argument("--box-size", type=int, default=3)
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--clues", type=int, default=45)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("loss", help="print the fixed-point residual of each board")
    p.add_argument("boards")
    p.add_argument("--per-group", action="store_true")
    p.add_argument("--logspace", action="store_true")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("gradcheck", help="compare the analytic gradient with finite differences")
    p.add_argument("boards", nargs="?")
    p.add_argument("--box-size", type=int, default=3)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--addends", type=int, default=4)
    p.add_argument("--arith-count", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fd-step", type=float, default=1e-6)
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("refine", help="clamp evidence and run iterative refinement")
    p.add_argument("boards")
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--no-reclamp", action="store_true")
    p.add_argument("--fallback", choices=["keep_previous", "uniform"], default="keep_previous")
    p.add_argument("--out")
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("decode", help="greedy constrained decoding")
    p.add_argument("boards")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("bench", help="simulated-perception benchmark")
    p.add_argument("--corpus", help="directory written by 'generate'")
    p.add_argument("--box-size", type=int, default=3)
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--clues", type=int, default=45)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iterations", type=int, default=0)
    p.add_argument("--decode", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--noise-flip", type=float, default=0.0)
    p.add_argument("--noise-temp", type=float, default=0.25)
    p.add_argument("--noise-seed", type=int, default=0)
    p.add_argument("--evidence-flip", type=float, default=None,
                   help="flip rate on clue cells (default: same as --noise-flip)")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", help="write the machine-readable record here")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    args.parser = parser
    for name in ("count", "iterations", "arith_count"):
        if getattr(args, name, 0) is not None and getattr(args, name, 0) < 0:
            parser.error(f"--{name.replace('_', '-')} must be non-negative")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (SoftTPError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
