import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from soft_tp.constraint_model import build_addition_program, build_sudoku_program
from soft_tp.decoder import (DecodeStatus, check_feasible_symbols, greedy_decode, restore_clues)
from soft_tp.errors import ShapeMismatch
from soft_tp.oracle import (DiscreteBoard, SolveStatus, check_csr, generate_solution, make_rng,
                            mask_clues, solve_backtracking)
from soft_tp.refinement import Instance

from conftest import random_board


def clue_instance(b, seed, clues):
    prog = build_sudoku_program(b)
    board = generate_solution(b, seed)
    mask = mask_clues(board, clues, seed)
    dist = np.full((prog.n, prog.k), 1 / prog.k)
    dist[mask == 1] = np.eye(prog.k)[board.cells[mask == 1]]
    return prog, board, mask, Instance(prog, dist, mask, board.cells)


def test_restore_clues(rng):
    post, pre = random_board(rng, 5, 3), random_board(rng, 5, 3)
    np.testing.assert_array_equal(restore_clues(post, pre, np.ones(5)), pre)
    np.testing.assert_array_equal(restore_clues(post, pre, np.zeros(5)), post)
    mask = np.array([1, 0, 0, 1, 0])
    out = restore_clues(post, pre, mask)
    np.testing.assert_array_equal(out[mask == 1], pre[mask == 1])
    np.testing.assert_array_equal(out[mask == 0], post[mask == 0])


def test_restore_clues_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        restore_clues(np.zeros((3, 2)), np.zeros((4, 2)), np.zeros(3))
    with pytest.raises(ShapeMismatch):
        restore_clues(np.zeros((3, 2)), np.zeros((3, 2)), np.zeros(2))


def test_feasible_symbols(sudoku2):
    dist = np.full((16, 4), 0.25)
    dist[0] = [0.5, 0.5, 0, 0]
    dist[1] = [0, 0, 1, 0]
    dist[2] = 0
    inst = Instance(sudoku2, dist)
    assert check_feasible_symbols(inst, 0) == {0, 1}
    assert check_feasible_symbols(inst, 1) == {2}
    assert check_feasible_symbols(inst, 2) == set()


def test_valid_one_hot_decodes_to_itself(sudoku3):
    board = generate_solution(3, 4)
    res = greedy_decode(Instance(sudoku3, np.eye(9)[board.cells]))
    assert res.status is DecodeStatus.COMPLETE
    np.testing.assert_array_equal(res.assignment, board.cells)
    assert len(res.trace) == 81 and res.dead_positions == ()


def test_all_evidence(sudoku3):
    board = generate_solution(3, 5)
    inst = Instance(sudoku3, np.eye(9)[board.cells], np.ones(81), board.cells)
    res = greedy_decode(inst)
    assert res.complete
    assert check_csr(DiscreteBoard(9, res.assignment), sudoku3)
    # evidence is locked in index order
    assert [t[0] for t in res.trace] == list(range(81))


def test_matches_backtracking_on_unique_4x4():
    unique = 0
    for seed in range(60):
        prog, board, mask, inst = clue_instance(2, seed, 8)
        puzzle = DiscreteBoard(4, np.where(mask == 1, board.cells, -1))
        sol = solve_backtracking(puzzle, prog)
        if sol.status is not SolveStatus.UNIQUE:
            continue
        unique += 1
        res = greedy_decode(inst)
        assert res.complete, seed
        np.testing.assert_array_equal(res.assignment, sol.solution.cells)
    assert unique >= 10


def test_dead_end_is_reported(sudoku2):
    # two clues in row 0 claim symbol 0; the rest of row 0 stays open
    dist = np.full((16, 4), 0.25)
    dist[0] = dist[1] = [1, 0, 0, 0]
    mask = np.zeros(16)
    mask[[0, 1]] = 1
    dist[2] = dist[3] = [0.5, 0.5, 0, 0]
    res = greedy_decode(Instance(sudoku2, dist, mask))
    assert res.status is DecodeStatus.DEAD_END
    assert res.dead_positions
    assert all(res.assignment[i] == -1 for i in res.dead_positions)
    assert len(res.trace) == int((res.assignment >= 0).sum())


def test_all_zero_latent_row_is_dead(sudoku2):
    dist = np.full((16, 4), 0.25)
    dist[7] = 0
    res = greedy_decode(Instance(sudoku2, dist))
    assert 7 in res.dead_positions and res.assignment[7] == -1


def test_tie_breaking_lowest_position_then_symbol(sudoku2):
    res = greedy_decode(Instance(sudoku2, np.full((16, 4), 0.25)))
    assert res.trace[0][:2] == (0, 0)


def test_sum_groups_do_not_propagate():
    prog = build_addition_program(2, 10, 9)
    dist = np.full((2, 10), 0.1)
    dist[0] = np.eye(10)[4]
    res = greedy_decode(Instance(prog, dist))
    # with no propagation the second cell keeps its uniform row and takes symbol 0
    assert list(res.assignment) == [4, 0]


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 16), st.floats(0.1, 3.0))
def test_decode_properties(seed, clues, alpha):
    prog = build_sudoku_program(2)
    r = make_rng(seed)
    p = r.dirichlet(np.full(4, alpha), 16)
    p[r.random((16, 4)) < 0.15] = 0.0
    p[p.sum(axis=1) == 0, 0] = 1.0
    p /= p.sum(axis=1, keepdims=True)
    mask = np.zeros(16, dtype=int)
    mask[r.permutation(16)[:clues]] = 1
    inst = Instance(prog, p, mask)
    res = greedy_decode(inst)
    again = greedy_decode(inst)
    np.testing.assert_array_equal(res.assignment, again.assignment)
    assert res.trace == again.trace and res.status == again.status
    for i in np.flatnonzero(mask):
        if i not in res.dead_positions:
            assert res.assignment[i] == np.argmax(p[i])
    for pos, sym, conf in res.trace:
        assert conf > 0 and p[pos, sym] > 0
    assert res.complete == (not res.dead_positions) == bool((res.assignment >= 0).all())
    ev_syms = {i: int(np.argmax(p[i])) for i in np.flatnonzero(mask)}
    consistent = all(ev_syms[i] != ev_syms[j] for i in ev_syms for j in prog.peers(i) if j in ev_syms)
    if res.complete and consistent:
        assert check_csr(DiscreteBoard(4, res.assignment), prog)


def test_conflicting_clues_are_kept(sudoku2):
    # clue fidelity wins over soundness: the decode finishes but fails the check
    dist = np.full((16, 4), 0.25)
    dist[0] = dist[1] = [1, 0, 0, 0]
    mask = np.zeros(16)
    mask[[0, 1]] = 1
    res = greedy_decode(Instance(sudoku2, dist, mask))
    assert res.assignment[0] == res.assignment[1] == 0
    if res.complete:
        assert not check_csr(DiscreteBoard(4, res.assignment), sudoku2)
