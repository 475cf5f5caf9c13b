"""Genetic-algorithm finger selection on the exact MMSE SINR.

A chromosome is a finger assignment, stored as the sorted tuple of its
selected path indices. Fitness is the exact SINR, so no approximation or
relaxation is involved.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from .model import MaiSignature, SystemConfig
from .selectors import FingerSet, SelectionOutcome
from .sinr import exact_sinr

__all__ = [
    "GaConfig",
    "GaInitError",
    "Population",
    "Fitness",
    "GaResult",
    "ga_init",
    "pair_parents",
    "mate",
    "mutate",
    "run_ga",
    "ga_select",
]

Chromosome = Tuple[int, ...]

MATE_RETRIES = 10


@dataclass(frozen=True)
class GaConfig:
    """Population sizes and iteration budget.

    Defaults are the settings used for the 15-path experiment.
    """

    n_ipop: int = 32
    n_pop: int = 16
    n_good: int = 8
    n_mut: int = 8
    n_iter: int = 10

    def __post_init__(self):
        if min(self.n_ipop, self.n_pop, self.n_good) < 1 or self.n_mut < 0 or self.n_iter < 0:
            raise ValueError("GA sizes must be >= 1 and counts >= 0")
        if not self.n_good <= self.n_pop <= self.n_ipop:
            raise ValueError("need n_good <= n_pop <= n_ipop")
        if self.n_good % 2:
            raise ValueError("n_good must be even")


class GaInitError(ValueError):
    """Too few distinct assignments exist for the initial population."""


class Fitness:
    """Memoized exact SINR of a chromosome."""

    def __init__(self, sig: MaiSignature, e1: float, nv: float):
        self.sig, self.e1, self.nv = sig, e1, nv
        self._cache: Dict[Chromosome, float] = {}

    def __call__(self, chrom: Chromosome) -> float:
        try:
            return self._cache[chrom]
        except KeyError:
            value = exact_sinr(chrom, self.sig, self.e1, self.nv)
            self._cache[chrom] = value
            return value

    @property
    def evaluations(self) -> int:
        return len(self._cache)


@dataclass(frozen=True)
class Population:
    """Chromosomes with their fitness, sorted by decreasing fitness."""

    members: Tuple[Chromosome, ...]
    fitness: Tuple[float, ...]

    @classmethod
    def build(cls, members: Sequence[Chromosome], fitness: Callable) -> "Population":
        vals = [fitness(m) for m in members]
        order = sorted(range(len(members)), key=lambda i: -vals[i])
        return cls(tuple(members[i] for i in order), tuple(vals[i] for i in order))

    def __len__(self):
        return len(self.members)

    @property
    def best_index(self) -> int:
        return int(np.argmax(self.fitness))

    @property
    def best(self) -> Tuple[Chromosome, float]:
        i = self.best_index
        return self.members[i], self.fitness[i]


def _random_chromosome(L: int, M: int, rng: np.random.Generator) -> Chromosome:
    return tuple(sorted(int(i) for i in rng.choice(L, size=M, replace=False)))


def ga_init(
    cfg: SystemConfig, ga_cfg: GaConfig, rng: np.random.Generator, fitness: Callable
) -> Population:
    """``n_ipop`` distinct random assignments, truncated to the ``n_pop`` fittest."""
    L, M = cfg.L, cfg.M
    total = math.comb(L, M)
    if total < ga_cfg.n_ipop:
        raise GaInitError(
            f"only C({L},{M}) = {total} assignments exist but n_ipop = {ga_cfg.n_ipop}; "
            "use exhaustive search instead"
        )
    if total <= 4 * ga_cfg.n_ipop:
        every = list(itertools.combinations(range(L), M))
        pick = rng.choice(total, size=ga_cfg.n_ipop, replace=False)
        pool = [every[i] for i in pick]
    else:
        seen = set()
        pool = []
        while len(pool) < ga_cfg.n_ipop:
            c = _random_chromosome(L, M, rng)
            if c not in seen:
                seen.add(c)
                pool.append(c)
    full = Population.build(pool, fitness)
    return Population(full.members[: ga_cfg.n_pop], full.fitness[: ga_cfg.n_pop])


def pair_parents(pop: Population, n_good: int, rng: np.random.Generator) -> List[Tuple[int, int]]:
    """Draw ``n_good`` distinct parents with probability proportional to
    fitness and pair them in draw order.

    Returns pairs of member indices.
    """
    n = len(pop)
    if n_good > n:
        raise ValueError("n_good exceeds the population size")
    w = np.asarray(pop.fitness, dtype=float)
    total = w.sum()
    p = w / total if np.all(np.isfinite(w)) and total > 0 else None
    if p is not None and np.count_nonzero(p) < n_good:
        # too few members with positive weight for sampling without replacement
        p = 0.5 * p + 0.5 / n
    picks = rng.choice(n, size=n_good, replace=False, p=p)
    return [(int(picks[i]), int(picks[i + 1])) for i in range(0, n_good - 1, 2)]


def mate(
    x1: Chromosome, x2: Chromosome, rng: np.random.Generator, retries: int = MATE_RETRIES
) -> Tuple[Chromosome, bool]:
    """One child drawn from the concatenated index vectors of two parents.

    Indices are drawn uniformly from ``[*x1, *x2]`` until ``M`` distinct ones
    are collected, so an index carried by both parents is twice as likely to
    be drawn. A child equal to a parent is redrawn up to ``retries`` times
    and then accepted.

    Returns the child and whether the pair was degenerate (identical
    parents, in which case the child is the parent itself).
    """
    M = len(x1)
    if set(x1) == set(x2):
        return tuple(x1), True
    pool = np.array(tuple(x1) + tuple(x2))
    parents = {tuple(x1), tuple(x2)}
    for _ in range(retries + 1):
        chosen = []
        while len(chosen) < M:
            v = int(pool[rng.integers(pool.size)])
            if v not in chosen:
                chosen.append(v)
        child = tuple(sorted(chosen))
        if child not in parents:
            break
    return child, False


def mutate(
    pop: Population, n_mut: int, rng: np.random.Generator, fitness: Callable, L: int
) -> Population:
    """Apply ``n_mut`` swap mutations, never touching the current best.

    Each mutation picks a member other than the current best uniformly and
    swaps one of its selected paths with one unselected path. With ``M == L``
    or fewer than two members nothing can be mutated and ``pop`` is returned.
    """
    members = list(pop.members)
    vals = list(pop.fitness)
    if len(members) < 2 or len(members[0]) >= L:
        return pop
    for _ in range(n_mut):
        best = int(np.argmax(vals))
        others = [i for i in range(len(members)) if i != best]
        i = others[int(rng.integers(len(others)))]
        chrom = members[i]
        unselected = sorted(set(range(L)) - set(chrom))
        out_pos = int(rng.integers(len(chrom)))
        new_idx = unselected[int(rng.integers(len(unselected)))]
        child = tuple(sorted(chrom[:out_pos] + chrom[out_pos + 1:] + (new_idx,)))
        members[i] = child
        vals[i] = fitness(child)
    return Population(tuple(members), tuple(vals))


def _next_generation(pop, ga_cfg, rng, fitness) -> Population:
    pairs = pair_parents(pop, ga_cfg.n_good, rng)
    parents = [i for pair in pairs for i in pair]
    children = []
    for a, b in pairs:
        for _ in range(2):
            child, _degenerate = mate(pop.members[a], pop.members[b], rng)
            children.append(child)
    if ga_cfg.n_pop == 2 * ga_cfg.n_good:
        kids = Population.build(children, fitness)
        kid_members = list(kids.members)
        best = pop.best_index
        if best not in parents:
            # elitism: the best member survives in place of the weakest child
            kid_members[-1] = pop.members[best]
        return Population.build([pop.members[i] for i in parents] + kid_members, fitness)
    merged = Population.build(list(pop.members) + children, fitness)
    return Population(merged.members[: ga_cfg.n_pop], merged.fitness[: ga_cfg.n_pop])


@dataclass
class GaResult:
    best: Chromosome
    best_fitness: float
    population: Population
    history: List[float] = field(default_factory=list)
    evaluations: int = 0


def run_ga(
    sig: MaiSignature, cfg: SystemConfig, ga_cfg: GaConfig, rng: np.random.Generator
) -> GaResult:
    """Initialize, then ``n_iter`` rounds of pairing, mating and mutation.

    ``history[k]`` is the best fitness seen up to iteration ``k``
    (``history[0]`` after initialization).
    """
    fitness = Fitness(sig, cfg.e1, cfg.noise_var)
    pop = ga_init(cfg, ga_cfg, rng, fitness)
    best, best_val = pop.best
    history = [best_val]
    for _ in range(ga_cfg.n_iter):
        pop = _next_generation(pop, ga_cfg, rng, fitness)
        pop = mutate(pop, ga_cfg.n_mut, rng, fitness, cfg.L)
        cand, val = pop.best
        if val > best_val:
            best, best_val = cand, val
        history.append(best_val)
    return GaResult(best, best_val, pop, history, fitness.evaluations)


def ga_select(
    sig: MaiSignature, cfg: SystemConfig, ga_cfg: GaConfig, rng: np.random.Generator
) -> SelectionOutcome:
    res = run_ga(sig, cfg, ga_cfg, rng)
    return SelectionOutcome(
        fingers=FingerSet(res.best),
        exact_sinr=exact_sinr(res.best, sig, cfg.e1, cfg.noise_var),
        method="ga",
        note=f"{res.evaluations} fitness evaluations",
    )
