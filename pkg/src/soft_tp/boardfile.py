"""JSON Lines board files.

One JSON object per line::

    {"index": 0, "n": 16, "k": 4,
     "program": {"builtin": "sudoku", "box_size": 2},
     "mask": [1, 0, ...], "labels": [2, 0, ...],
     "dist": [[0.25, 0.25, 0.25, 0.25], ...]}

``program`` is one of ``{"builtin": "sudoku", "box_size": b}``,
``{"builtin": "addition", "addends": N, "k": k, "target": S}`` or
``{"text": "<program source>"}``. ``labels`` uses -1 for unknown cells and
``dist`` is optional. See docs/board_format.md.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np

from .constraint_model import (ConstraintProgram, build_addition_program, build_sudoku_program,
                               parse_program, serialize_program)
from .errors import ValidationError
from .refinement import Instance

log = logging.getLogger(__name__)

ROW_SUM_TOL = 1e-6


def program_from_spec(spec: dict) -> ConstraintProgram:
    if "text" in spec:
        return parse_program(spec["text"])
    kind = spec.get("builtin")
    if kind == "sudoku":
        return build_sudoku_program(int(spec["box_size"]))
    if kind == "addition":
        return build_addition_program(int(spec["addends"]), int(spec["k"]), int(spec["target"]))
    raise ValidationError(f"unknown program spec {spec!r}")


def program_to_spec(program: ConstraintProgram) -> dict:
    prov = program.provenance
    if prov and prov[0] == "sudoku":
        return {"builtin": "sudoku", "box_size": prov[1]}
    if prov and prov[0] == "addition":
        return {"builtin": "addition", "addends": prov[1], "k": prov[2], "target": prov[3]}
    return {"text": serialize_program(program)}


def record_to_instance(rec: dict) -> Instance:
    program = program_from_spec(rec["program"])
    n, k = program.n, program.k
    if rec.get("n", n) != n or rec.get("k", k) != k:
        raise ValidationError(f"record declares n={rec.get('n')}, k={rec.get('k')}; program has n={n}, k={k}")
    labels = np.asarray(rec.get("labels", [-1] * n), dtype=np.int64)
    mask = np.asarray(rec.get("mask", [0] * n), dtype=np.int64)
    if "dist" in rec and rec["dist"] is not None:
        dist = np.asarray(rec["dist"], dtype=np.float64)
        if dist.shape != (n, k):
            raise ValidationError(f"dist has shape {dist.shape}, expected {(n, k)}")
        if (dist < 0).any() or not np.isfinite(dist).all():
            raise ValidationError("dist entries must be finite and non-negative")
        sums = dist.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > ROW_SUM_TOL):
            log.warning("record %s: dist rows not normalised, renormalising", rec.get("index"))
            if np.any(sums <= 0):
                raise ValidationError("dist has an all-zero row")
            dist = dist / sums[:, None]
    else:
        if (labels < 0).any():
            raise ValidationError("record without dist needs labels at every position")
        dist = np.eye(k)[labels]
    return Instance(program, dist, mask, labels)


def instance_to_record(inst: Instance, index: int | None = None, with_dist: bool = True) -> dict:
    rec = {}
    if index is not None:
        rec["index"] = int(index)
    rec.update({
        "n": inst.program.n,
        "k": inst.program.k,
        "program": program_to_spec(inst.program),
        "mask": [int(v) for v in inst.mask],
        "labels": [int(v) for v in inst.labels],
    })
    if with_dist:
        rec["dist"] = [[float(x) for x in row] for row in inst.dist]
    return rec


def read_records(path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                try:
                    out.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise ValidationError(f"{path}:{lineno}: {exc}") from None
    return out


def write_records(path, records) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
