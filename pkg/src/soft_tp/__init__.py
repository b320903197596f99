"""Differentiable constraint reasoning with a soft immediate-consequence operator."""

from .constraint_model import (ConstraintGroup, ConstraintProgram, GroupKind, SymbolDomain,
                               build_addition_program, build_sudoku_program, parse_program,
                               residual_term_count, serialize_program)
from .decoder import DecodeResult, DecodeStatus, check_feasible_symbols, greedy_decode, restore_clues
from .kernel import (LossReport, residual_loss, residual_loss_grad, tp_arithmetic, tp_group,
                     tp_group_logspace)
from .oracle import (DiscreteBoard, Metrics, SolveStatus, check_csr, generate_solution, mask_clues,
                     solve_backtracking, verify_independent)
from .refinement import (EvidenceSource, Instance, RefineConfig, ZeroRowFallback, clamp_evidence,
                         refine, sym_accuracy)

__version__ = "0.1.0"
