"""Finger-selection strategies.

Every selector returns a :class:`SelectionOutcome` whose SINR has been
recomputed through :func:`fingersel.sinr.exact_sinr`, so outcomes from
different methods are directly comparable.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import qp
from .model import MaiSignature, SystemConfig
from .sinr import build_qp_data, exact_sinr, exact_sinr_batch, individual_sinr

__all__ = [
    "DEFAULT_EXHAUSTIVE_BUDGET",
    "FingerSet",
    "SelectionOutcome",
    "ExhaustiveBudgetError",
    "select_conventional",
    "select_exhaustive",
    "round_top_m",
    "select_relaxation",
    "select_hybrid",
    "RELAXATIONS",
]

DEFAULT_EXHAUSTIVE_BUDGET = 2_000_000
_CHUNK = 50_000


@dataclass(frozen=True, order=True)
class FingerSet:
    """Strictly increasing tuple of distinct zero-based path indices."""

    indices: tuple

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("indices must be strictly increasing")
        if idx and idx[0] < 0:
            raise ValueError("indices must be nonnegative")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def of(cls, indices) -> "FingerSet":
        return cls(tuple(sorted(int(i) for i in indices)))

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __str__(self):
        return "{" + ",".join(map(str, self.indices)) + "}"


@dataclass(frozen=True)
class SelectionOutcome:
    fingers: FingerSet
    exact_sinr: float
    method: str
    solver_report: Optional[qp.SolveReport] = field(default=None, compare=False)
    fallback: bool = False
    note: str = ""


class ExhaustiveBudgetError(RuntimeError):
    """The number of candidate subsets exceeds the configured budget."""


def _outcome(fingers, sig, cfg, method, **kw) -> SelectionOutcome:
    fs = fingers if isinstance(fingers, FingerSet) else FingerSet.of(fingers)
    value = exact_sinr(fs.indices, sig, cfg.e1, cfg.noise_var)
    return SelectionOutcome(fingers=fs, exact_sinr=value, method=method, **kw)


def _top_m(values, M: int) -> np.ndarray:
    # stable sort on the negated values breaks ties toward the smaller index
    return np.argsort(-np.asarray(values, dtype=float), kind="stable")[:M]


def select_conventional(sig: MaiSignature, cfg: SystemConfig) -> SelectionOutcome:
    """The ``M`` paths with the largest individual SINRs."""
    per_path = individual_sinr(None, sig, cfg.e1, cfg.noise_var)
    return _outcome(_top_m(per_path, cfg.M), sig, cfg, "conventional")


def select_exhaustive(
    sig: MaiSignature,
    cfg: SystemConfig,
    budget: int = DEFAULT_EXHAUSTIVE_BUDGET,
) -> SelectionOutcome:
    """Global maximizer of the exact SINR over all ``M``-subsets.

    Subsets are visited in lexicographic order and a later subset replaces
    the incumbent only if strictly better, so ties resolve to the
    lexicographically smallest set.

    Raises
    ------
    ExhaustiveBudgetError
        If ``C(L, M)`` exceeds ``budget``.
    """
    n = math.comb(cfg.L, cfg.M)
    if n > budget:
        raise ExhaustiveBudgetError(
            f"C({cfg.L},{cfg.M}) = {n} subsets exceeds the budget of {budget}"
        )
    combos = itertools.combinations(range(cfg.L), cfg.M)
    best_val, best_set = -np.inf, None
    while True:
        chunk = np.fromiter(
            itertools.chain.from_iterable(itertools.islice(combos, _CHUNK)),
            dtype=np.int64,
        ).reshape(-1, cfg.M)
        if chunk.size == 0:
            break
        vals = exact_sinr_batch(chunk, sig, cfg.e1, cfg.noise_var)
        j = int(np.argmax(vals))
        if vals[j] > best_val:
            best_val, best_set = vals[j], chunk[j]
    return _outcome(best_set, sig, cfg, "exhaustive")


def round_top_m(x_star, M: int) -> FingerSet:
    """Indices of the ``M`` largest entries, ties toward the smaller index."""
    return FingerSet.of(_top_m(x_star, M))


RELAXATIONS = {
    "sphere": qp.solve_sphere_qcqp,
    "box": qp.solve_box_lcqp,
    "dual": qp.solve_sphere_dual,
}


def _solver_tol(problem: qp.RelaxedProblem) -> float:
    # absolute KKT tolerance scaled to the gradient magnitude of the instance
    scale = np.abs(problem.q).max() + 2.0 * np.abs(problem.P).sum(axis=1).max() / problem.nv
    return qp.DEFAULT_TOL * max(1.0, scale)


def select_relaxation(
    sig: MaiSignature, cfg: SystemConfig, variant: str = "box"
) -> SelectionOutcome:
    """Solve a convex relaxation of the linearized problem and round it.

    ``variant`` is one of ``"sphere"``, ``"box"`` or ``"dual"`` (the sphere
    relaxation solved through its Lagrange dual). A solver that fails to
    converge falls back to the conventional selection; the outcome is then
    flagged with ``fallback=True``.
    """
    try:
        solve = RELAXATIONS[variant]
    except KeyError:
        raise ValueError(f"unknown relaxation {variant!r}") from None
    problem = qp.RelaxedProblem.from_qp(build_qp_data(sig, cfg.e1, cfg.noise_var), cfg.M)
    # the dual solver's tolerance is already relative
    kwargs = {} if variant == "dual" else {"tol": _solver_tol(problem)}
    try:
        report = solve(problem, **kwargs)
    except qp.SolverError as err:
        conv = select_conventional(sig, cfg)
        return SelectionOutcome(
            fingers=conv.fingers,
            exact_sinr=conv.exact_sinr,
            method=variant,
            solver_report=err.report,
            fallback=True,
            note=str(err),
        )
    return _outcome(round_top_m(report.x_star, cfg.M), sig, cfg, variant, solver_report=report)


def select_hybrid(
    sig: MaiSignature,
    cfg: SystemConfig,
    candidates: Sequence[SelectionOutcome],
) -> SelectionOutcome:
    """Best candidate by exact SINR; ties go to the earlier candidate."""
    if not candidates:
        raise ValueError("hybrid selection needs at least one candidate")
    scored = [_outcome(c.fingers, sig, cfg, c.method) for c in candidates]
    best = 0
    for i, c in enumerate(scored):
        if c.exact_sinr > scored[best].exact_sinr:
            best = i
    return SelectionOutcome(
        fingers=scored[best].fingers,
        exact_sinr=scored[best].exact_sinr,
        method="hybrid",
        note=f"from {scored[best].method}",
    )
