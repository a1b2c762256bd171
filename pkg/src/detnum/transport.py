"""Discrete Monge-Kantorovich matching between box sets.

Builds box-to-box cost matrices (1 − IoU by default), solves the
entropic-regularized Kantorovich problem with a log-domain Sinkhorn-Knopp
iteration, provides exact small-instance solvers for both the Kantorovich
LP and the Monge assignment, and exposes the negative-IoU quantity

    negative_iou(p, g) = MP/KP − IoU(p, g)

combining the two optima with pairwise overlap. On equal-cardinality
uniform problems MP = KP (Birkhoff extremality of the assignment
polytope), so the ratio is 1 and the quantity collapses to 1 − IoU; for
unequal cardinalities the Monge map does not exist and the same ratio = 1
convention is applied. Both routes are implemented so the collapse itself
is verifiable.

Extended-real (+inf) costs are represented by the sentinel BIG = 1e6;
solvers assert that no optimal plan places mass on sentinel entries.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import linear_sum_assignment, linprog

from .boxes import AABox, iou as _box_iou
from .losses import DEFAULT_THETA, LossBreakdown, baseline_loss, mks_loss

__all__ = [
    "BIG", "DEFAULT_EPSILON", "DEFAULT_MAX_ITERS", "DEFAULT_TOL",
    "OTProblem", "TransportPlan", "Assignment", "MatchConfig", "MatchResult",
    "InfeasibleMongeError", "uniform_marginals", "build_cost_matrix",
    "sinkhorn", "exact_kp", "exact_mp", "negative_iou", "round_plan", "match",
]

BIG = 1e6  # sentinel standing in for +inf cost entries

DEFAULT_EPSILON = 0.01
DEFAULT_MAX_ITERS = 1000
DEFAULT_TOL = 1e-9

_EXACT_CAP = 64     # largest side exact_kp will hand to the LP
_BRUTE_CAP = 8      # permutation enumeration bound inside exact_mp


class InfeasibleMongeError(ValueError):
    """Raised when no Monge map exists (n != m or non-uniform marginals)."""


def _frozen_array(x, dtype=float) -> np.ndarray:
    a = np.array(x, dtype=dtype, order="C")
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class OTProblem:
    """A discrete transport problem: cost (n, m), source mu, target nu."""

    cost: np.ndarray
    mu: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        cost = np.asarray(self.cost, dtype=float)
        if cost.ndim != 2 or cost.size == 0:
            raise ValueError(f"cost must be a nonempty 2-d matrix, got shape {cost.shape}")
        if np.isnan(cost).any() or np.isneginf(cost).any():
            raise ValueError("cost entries must be real or +inf")
        cost = np.where(np.isposinf(cost), BIG, cost)
        mu = np.asarray(self.mu, dtype=float)
        nu = np.asarray(self.nu, dtype=float)
        if mu.shape != (cost.shape[0],) or nu.shape != (cost.shape[1],):
            raise ValueError("mu/nu lengths must match the cost matrix sides")
        for name, v in (("mu", mu), ("nu", nu)):
            if not np.isfinite(v).all() or (v < 0).any():
                raise ValueError(f"{name} entries must be finite and >= 0")
            if abs(float(v.sum()) - 1.0) > 1e-9:
                raise ValueError(f"{name} must sum to 1 within 1e-9, got {float(v.sum())!r}")
        object.__setattr__(self, "cost", _frozen_array(cost))
        object.__setattr__(self, "mu", _frozen_array(mu))
        object.__setattr__(self, "nu", _frozen_array(nu))

    @property
    def n(self) -> int:
        return self.cost.shape[0]

    @property
    def m(self) -> int:
        return self.cost.shape[1]


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """A coupling, its objective <cost, plan>, and solve diagnostics."""

    plan: np.ndarray
    objective: float
    marginal_violation: float
    converged: bool = True
    iterations: int = 0

    def __post_init__(self):
        object.__setattr__(self, "plan", _frozen_array(self.plan))


@dataclass(frozen=True)
class Assignment:
    """A (partial) one-to-one map from prediction indices to gt indices.

    total_cost is the transport objective of the induced map under uniform
    source weights: (1/n) · Σ cost over matched pairs, n = number of
    predictions. For square problems this equals the Monge objective.
    """

    pairs: tuple[tuple[int, int], ...]
    unmatched_predictions: tuple[int, ...]
    total_cost: float


def uniform_marginals(k: int) -> np.ndarray:
    if k < 1:
        raise ValueError(f"need at least one support point, got k={k}")
    return np.full(k, 1.0 / k)


def build_cost_matrix(preds, gts, *, kind: str = "iou",
                      theta: float = DEFAULT_THETA) -> OTProblem:
    """Box-to-box cost matrix with uniform marginals.

    kind "iou" gives entries 1 − IoU (the default matching objective);
    kind "siou" uses the full additive geometry cost instead.
    """
    preds = list(preds)
    gts = list(gts)
    if not preds or not gts:
        raise ValueError("build_cost_matrix needs nonempty prediction and gt lists")
    if kind == "iou":
        cost = [[1.0 - _box_iou(p, g) for g in gts] for p in preds]
    elif kind == "siou":
        cost = [[baseline_loss("siou", p, g, theta=theta) for g in gts] for p in preds]
    else:
        raise ValueError(f"unknown cost kind {kind!r}; expected 'iou' or 'siou'")
    return OTProblem(np.array(cost), uniform_marginals(len(preds)), uniform_marginals(len(gts)))


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    amax = np.max(a, axis=axis, keepdims=True)
    amax = np.where(np.isfinite(amax), amax, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - amax), axis=axis))
    return out + np.squeeze(amax, axis=axis)


_ANNEAL_EPS_START = 0.3
_ANNEAL_EPS_FACTOR = 3.0
_ANNEAL_STAGE_ITERS = 25


def sinkhorn(problem: OTProblem, epsilon: float = DEFAULT_EPSILON,
             max_iters: int = DEFAULT_MAX_ITERS, tol: float = DEFAULT_TOL,
             *, anneal: bool = False) -> TransportPlan:
    """Entropic-regularized plan by log-domain Sinkhorn-Knopp scaling.

    Costs are rescaled by their largest finite entry before exponentiation
    so epsilon always acts on a [0, 1]-scale matrix. Stops when the worst
    row/column marginal deviation drops below tol or after max_iters;
    non-convergence is reported through the converged flag, not raised.

    anneal=True warm-starts the potentials through a decreasing epsilon
    schedule (0.3 → epsilon, factor 3, 25 sweeps each) before iterating at
    the target epsilon. The fixed point is unchanged — annealing only
    shortens the approach, which matters when epsilon is small enough to
    make the plan nearly a permutation. max_iters then bounds the final
    stage; reported iterations count every sweep including warm-up.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon!r}")
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters!r}")
    cost = problem.cost
    finite = cost < BIG
    scale = float(np.abs(cost[finite]).max()) if finite.any() else 1.0
    if scale <= 0.0:
        scale = 1.0
    norm_cost = np.where(finite, cost / scale, BIG)

    stages = [epsilon]
    if anneal:
        e = _ANNEAL_EPS_START
        head = []
        while e > epsilon * (1.0 + 1e-12):
            head.append(e)
            e /= _ANNEAL_EPS_FACTOR
        stages = head + [epsilon]

    with np.errstate(divide="ignore"):
        log_mu = np.log(problem.mu)
        log_nu = np.log(problem.nu)
    u = np.zeros(problem.n)
    v = np.zeros(problem.m)
    mr = norm_cost / -stages[0]
    plan = np.exp(mr)
    violation = np.inf
    converged = False
    iterations = 0
    for si, eps_k in enumerate(stages):
        mr = norm_cost / -eps_k
        final = si == len(stages) - 1
        budget = max_iters if final else _ANNEAL_STAGE_ITERS
        for k in range(1, budget + 1):
            v = log_nu - _logsumexp(mr + u[:, None], axis=0)
            u = log_mu - _logsumexp(mr + v[None, :], axis=1)
            iterations += 1
            # the marginal check costs as much as a sweep, so the annealed
            # path only looks every 10th sweep
            if final and (not anneal or k % 10 == 0 or k == budget):
                plan = np.exp(mr + u[:, None] + v[None, :])
                violation = max(
                    float(np.abs(plan.sum(axis=1) - problem.mu).max()),
                    float(np.abs(plan.sum(axis=0) - problem.nu).max()),
                )
                if violation < tol:
                    converged = True
                    break
        if not final:
            # keep the dual potentials eps_k * u fixed across the switch
            u *= eps_k / stages[si + 1]
            v *= eps_k / stages[si + 1]
    _assert_no_sentinel_mass(plan, finite)
    objective = float((plan * cost).sum())
    return TransportPlan(plan, objective, violation, converged, iterations)


def _assert_no_sentinel_mass(plan: np.ndarray, finite: np.ndarray) -> None:
    forbidden = float(plan[~finite].sum()) if not finite.all() else 0.0
    # written as a negated <= so a NaN plan (fully forbidden row/column,
    # i.e. an infeasible problem) also lands here instead of leaking out
    if not forbidden <= 1e-9:
        raise RuntimeError(
            f"optimal plan places mass {forbidden:g} on sentinel (forbidden) cost entries")


def exact_kp(problem: OTProblem) -> TransportPlan:
    """Exact Kantorovich optimum by linear programming (desk-scale sizes)."""
    n, m = problem.n, problem.m
    if n > _EXACT_CAP or m > _EXACT_CAP:
        raise ValueError(f"exact_kp caps sides at {_EXACT_CAP}, got {n}x{m}")
    a_eq = np.zeros((n + m, n * m))
    for i in range(n):
        a_eq[i, i * m:(i + 1) * m] = 1.0
    for j in range(m):
        a_eq[n + j, j::m] = 1.0
    b_eq = np.concatenate([problem.mu, problem.nu])
    res = linprog(problem.cost.ravel(), A_eq=a_eq, b_eq=b_eq,
                  bounds=(0, None), method="highs")
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    plan = np.maximum(res.x.reshape(n, m), 0.0)
    _assert_no_sentinel_mass(plan, problem.cost < BIG)
    violation = max(
        float(np.abs(plan.sum(axis=1) - problem.mu).max()),
        float(np.abs(plan.sum(axis=0) - problem.nu).max()),
    )
    objective = float((plan * problem.cost).sum())
    return TransportPlan(plan, objective, violation, True, int(res.nit))


@lru_cache(maxsize=None)
def _perm_table(n: int) -> np.ndarray:
    return _frozen_array(list(itertools.permutations(range(n))), dtype=np.int64)


def _require_monge_feasible(problem: OTProblem) -> int:
    n, m = problem.n, problem.m
    if n != m:
        raise InfeasibleMongeError(
            f"Monge map needs equal cardinalities, got {n} predictions vs {m} gts")
    w = 1.0 / n
    if (np.abs(problem.mu - w).max() > 1e-9) or (np.abs(problem.nu - w).max() > 1e-9):
        raise InfeasibleMongeError("Monge map needs uniform marginals on both sides")
    return n


def exact_mp(problem: OTProblem, method: str = "auto") -> Assignment:
    """Exact Monge optimum: the minimum-cost permutation.

    Permutation enumeration for n <= 8 (lexicographically smallest optimum
    on ties), Hungarian-style exact assignment beyond; method may force
    "brute" or "hungarian" for cross-checking the two routes.
    """
    n = _require_monge_feasible(problem)
    if method == "auto":
        method = "brute" if n <= _BRUTE_CAP else "hungarian"
    if method == "brute":
        if n > _BRUTE_CAP:
            raise ValueError(f"brute-force enumeration caps n at {_BRUTE_CAP}, got {n}")
        perms = _perm_table(n)
        totals = problem.cost[np.arange(n)[None, :], perms].sum(axis=1)
        perm = perms[int(np.argmin(totals))]
    elif method == "hungarian":
        rows, cols = linear_sum_assignment(problem.cost)
        perm = cols[np.argsort(rows)]
    else:
        raise ValueError(f"unknown method {method!r}; expected auto|brute|hungarian")
    pairs = tuple((i, int(perm[i])) for i in range(n))
    selected = problem.cost[np.arange(n), perm]
    if (selected >= BIG).any():
        raise RuntimeError("optimal Monge map crosses a sentinel (forbidden) cost entry")
    return Assignment(pairs, (), float(selected.sum()) / n)


def negative_iou(p: AABox, g: AABox, mp_value: float, kp_value: float) -> float:
    """MP/KP − IoU(p, g).

    MP >= KP always; both zero means the optima coincide and the ratio is
    taken as 1 (so the result is 1 − IoU, the collapsed form).
    """
    mp_value = float(mp_value)
    kp_value = float(kp_value)
    if mp_value < kp_value - 1e-9:
        raise ValueError(f"MP ({mp_value!r}) below KP ({kp_value!r}); optima are inconsistent")
    if kp_value <= 1e-12:
        if mp_value > 1e-9:
            raise ValueError(f"KP = 0 with MP = {mp_value!r} > 0 cannot happen (MP >= KP)")
        ratio = 1.0
    else:
        ratio = mp_value / kp_value
    return ratio - _box_iou(p, g)


def round_plan(plan: np.ndarray, limit=None) -> list[tuple[int, int]]:
    """Greedy plan rounding: entries in descending order, accept when both
    row and column are free; ties resolved by (row, column) order."""
    plan = np.asarray(plan)
    n, m = plan.shape
    if limit is None:
        limit = min(n, m)
    # stable sort on the flattened array keeps row-major (row, col) order
    # among equal entries
    order = np.argsort(-plan, axis=None, kind="stable")
    row_used = np.zeros(n, dtype=bool)
    col_used = np.zeros(m, dtype=bool)
    pairs = []
    for idx in order:
        i, j = divmod(int(idx), m)
        if row_used[i] or col_used[j]:
            continue
        pairs.append((i, j))
        row_used[i] = True
        col_used[j] = True
        if len(pairs) == limit:
            break
    return pairs


@dataclass(frozen=True)
class MatchConfig:
    epsilon: float = DEFAULT_EPSILON
    max_iters: int = DEFAULT_MAX_ITERS
    tol: float = DEFAULT_TOL
    cost: str = "iou"           # "iou" or "siou"
    theta: float = DEFAULT_THETA
    anneal: bool = False


@dataclass(frozen=True, eq=False)
class MatchResult:
    """Assignment plus per-pair loss breakdowns (parallel to pairs) and the
    underlying plan, whose converged flag propagates solver status."""

    assignment: Assignment
    breakdowns: tuple[LossBreakdown, ...]
    plan: TransportPlan


def match(preds, gts, config: MatchConfig | None = None) -> MatchResult:
    """Sinkhorn matching of predictions to ground truths.

    The plan is rounded to a (partial) one-to-one assignment covering
    min(n, m) pairs; surplus predictions are reported unmatched. Each
    matched pair is scored with mks_loss under the collapsed negative-IoU
    convention (ratio = 1: exact on square uniform problems, by definition
    when the Monge side is infeasible).
    """
    cfg = config or MatchConfig()
    preds = list(preds)
    gts = list(gts)
    problem = build_cost_matrix(preds, gts, kind=cfg.cost, theta=cfg.theta)
    tp = sinkhorn(problem, cfg.epsilon, cfg.max_iters, cfg.tol, anneal=cfg.anneal)
    pairs = sorted(round_plan(tp.plan))
    breakdowns = tuple(
        mks_loss(preds[i], gts[j], 1.0 - _box_iou(preds[i], gts[j]), theta=cfg.theta)
        for i, j in pairs)
    matched_rows = {i for i, _ in pairs}
    unmatched = tuple(i for i in range(len(preds)) if i not in matched_rows)
    total = float(sum(problem.cost[i, j] for i, j in pairs)) / len(preds)
    assignment = Assignment(tuple(pairs), unmatched, total)
    return MatchResult(assignment, breakdowns, tp)
