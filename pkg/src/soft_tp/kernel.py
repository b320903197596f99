"""Probabilistic immediate-consequence operator and its fixed-point residual.

A soft assignment is an ``(n, k)`` float64 array whose rows are probability
distributions over the symbol domain. For an exclusivity group the operator
keeps ``p[i, s]`` only to the extent that no other member claims ``s``::

    T(p)[i, s] = p[i, s] * prod_{j in G, j != i} (1 - p[j, s])

For a sum group it keeps ``p[i, d]`` weighted by the probability that the
other members' digits make up the rest of the target::

    T(p)[i, d] = p[i, d] * P(sum_{j != i} d_j = S - d)

The residual loss is the squared distance between ``p`` and its image,
summed over all groups. Leave-one-out products and sums are formed from
prefix/suffix scans, so no division by ``1 - p`` (which may be zero) occurs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constraint_model import ConstraintGroup, ConstraintProgram, GroupKind
from .errors import KindMismatch, ShapeMismatch, TargetOutOfRange

LOG_CLAMP_EPS = 1e-12


@dataclass(frozen=True)
class LossReport:
    total: float
    per_group: tuple[tuple[str, float], ...]

    def as_dict(self) -> dict[str, float]:
        return dict(self.per_group)


def check_shape(p: np.ndarray, program: ConstraintProgram) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (program.n, program.k):
        raise ShapeMismatch(f"expected shape {(program.n, program.k)}, got {p.shape}")
    return p


def leave_one_out_prod(q: np.ndarray, axis: int = 0) -> np.ndarray:
    """Product over all entries along ``axis`` except the current one."""
    q = np.moveaxis(np.asarray(q, dtype=np.float64), axis, 0)
    ones = np.ones((1,) + q.shape[1:])
    pre = np.cumprod(np.concatenate([ones, q[:-1]]), axis=0)
    suf = np.cumprod(np.concatenate([ones, q[:0:-1]]), axis=0)[::-1]
    return np.moveaxis(pre * suf, 0, axis)


def leave_one_out_sums(dists: np.ndarray) -> list[np.ndarray]:
    """Distribution of the sum of all digits but one, for each addend.

    Entry ``t`` of the ``i``-th array is ``P(sum_{j != i} d_j = t)``; every
    array has length ``(k - 1) * (N - 1) + 1``.
    """
    dists = np.asarray(dists, dtype=np.float64)
    N = len(dists)
    fwd = [np.ones(1)]
    for i in range(N - 1):
        fwd.append(np.convolve(fwd[-1], dists[i]))
    bwd = [np.ones(1)]
    for i in range(N - 1, 0, -1):
        bwd.append(np.convolve(bwd[-1], dists[i]))
    bwd.reverse()
    return [np.convolve(fwd[i], bwd[i]) for i in range(N)]


def _shifted(loo: np.ndarray, target: int, k: int) -> np.ndarray:
    # out[d] = loo[target - d], zero where the index falls outside loo
    out = np.zeros(k)
    for d in range(k):
        t = target - d
        if 0 <= t < len(loo):
            out[d] = loo[t]
    return out


def _exactly_one(group: ConstraintGroup) -> None:
    if group.kind is not GroupKind.EXACTLY_ONE:
        raise KindMismatch(f"group {group.name!r} is {group.kind.value}, expected exactly_one")


def tp_group(p: np.ndarray, group: ConstraintGroup) -> np.ndarray:
    """Operator image on an exclusivity group.

    Returns a ``(len(members), k)`` array whose rows follow ``group.members``.
    """
    _exactly_one(group)
    P = np.asarray(p, dtype=np.float64)[list(group.members)]
    return P * leave_one_out_prod(1.0 - P)


def tp_group_logspace(p: np.ndarray, group: ConstraintGroup, eps: float = LOG_CLAMP_EPS) -> np.ndarray:
    """Same as :func:`tp_group`, with the products accumulated as log sums."""
    _exactly_one(group)
    P = np.asarray(p, dtype=np.float64)[list(group.members)]
    logq = np.log1p(-np.minimum(P, 1.0 - eps))
    return P * np.exp(logq.sum(axis=0) - logq)


def tp_arithmetic(dists: np.ndarray, target: int) -> np.ndarray:
    dists = np.asarray(dists, dtype=np.float64)
    N, k = dists.shape
    if not 0 <= target <= (k - 1) * N:
        raise TargetOutOfRange(f"target {target} outside [0, {(k - 1) * N}]")
    loos = leave_one_out_sums(dists)
    return dists * np.stack([_shifted(loo, target, k) for loo in loos])


def tp_image(p: np.ndarray, group: ConstraintGroup, logspace: bool = False) -> np.ndarray:
    """Operator image for either group kind, rows ordered as ``group.members``."""
    if group.kind is GroupKind.SUM_EQ:
        return tp_arithmetic(np.asarray(p)[list(group.members)], group.target)
    if logspace:
        return tp_group_logspace(p, group)
    return tp_group(p, group)


def _exactly_one_residual(P: np.ndarray) -> np.ndarray:
    # P has shape (..., members, k)
    return P - P * leave_one_out_prod(1.0 - P, axis=-2)


def residual_loss(p: np.ndarray, program: ConstraintProgram, logspace: bool = False) -> LossReport:
    """Squared fixed-point residual, summed over groups in declaration order."""
    p = check_shape(p, program)
    values = np.zeros(len(program.groups))
    if logspace:
        for gi, g in enumerate(program.groups):
            diff = p[list(g.members)] - tp_image(p, g, logspace=True)
            values[gi] = np.sum(diff * diff)
    else:
        for gis, members in program.exactly_one_blocks:
            r = _exactly_one_residual(p[members])
            values[list(gis)] = np.sum(r * r, axis=(1, 2))
        for gi in program.sum_groups:
            g = program.groups[gi]
            diff = p[list(g.members)] - tp_image(p, g)
            values[gi] = np.sum(diff * diff)
    per_group = tuple((g.name, float(v)) for g, v in zip(program.groups, values))
    total = 0.0
    for _, v in per_group:
        total += v
    return LossReport(total, per_group)


def image_sum(p: np.ndarray, program: ConstraintProgram) -> np.ndarray:
    """Sum of every group's operator image, scattered back to positions."""
    p = check_shape(p, program)
    acc = np.zeros_like(p)
    for _, members in program.exactly_one_blocks:
        P = p[members]
        np.add.at(acc, members, P * leave_one_out_prod(1.0 - P, axis=-2))
    for gi in program.sum_groups:
        g = program.groups[gi]
        acc[list(g.members)] += tp_image(p, g)
    return acc


def _grad_exactly_one(P: np.ndarray) -> np.ndarray:
    """Gradient of the group residual for a stack of groups, shape (..., m, k)."""
    m = P.shape[-2]
    Q = 1.0 - P
    E = leave_one_out_prod(Q, axis=-2)
    r = P - P * E
    grad = 2.0 * r * (1.0 - E)
    if m > 1:
        # E2[..., l, i, s] = prod over j not in {i, l} of Q[..., j, s]
        Qb = np.broadcast_to(Q[..., None, :, :], Q.shape[:-2] + (m, m, Q.shape[-1])).copy()
        diag = np.arange(m)
        Qb[..., diag, diag, :] = 1.0
        E2 = leave_one_out_prod(Qb, axis=-2)
        E2[..., diag, diag, :] = 0.0
        grad += np.einsum("...lis,...is->...ls", E2, 2.0 * r * P)
    return grad


def _grad_sum_eq(P: np.ndarray, target: int) -> np.ndarray:
    N, k = P.shape
    loos = leave_one_out_sums(P)
    Lt = np.stack([_shifted(loo, target, k) for loo in loos])
    r = P - P * Lt
    grad = 2.0 * r * (1.0 - Lt)
    c = 2.0 * r * P
    for l in range(N):
        others = [i for i in range(N) if i != l]
        if not others:
            continue
        # sums over everything except l and i, for each remaining i
        pair_loos = leave_one_out_sums(P[others])
        for i, loo in zip(others, pair_loos):
            # sum_d c[i, d] * loo[S - d - e] = (c_i conv loo)[S - e]
            grad[l] -= _shifted(np.convolve(c[i], loo), target, k)
    return grad


def residual_loss_grad(p: np.ndarray, program: ConstraintProgram) -> np.ndarray:
    """Exact gradient of the residual loss w.r.t. every entry of ``p``.

    Entries are treated as free variables; no simplex projection or softmax
    is applied here.
    """
    p = check_shape(p, program)
    grad = np.zeros_like(p)
    for _, members in program.exactly_one_blocks:
        np.add.at(grad, members, _grad_exactly_one(p[members]))
    for gi in program.sum_groups:
        g = program.groups[gi]
        idx = list(g.members)
        grad[idx] += _grad_sum_eq(p[idx], g.target)
    return grad
