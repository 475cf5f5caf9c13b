"""Seeded Monte Carlo comparison of finger-selection methods.

Scenario randomness is keyed by ``(master_seed, trial_index)`` through
:class:`numpy.random.SeedSequence` spawn keys, so any trial can be rebuilt
on its own and trials may run in any order or in parallel. Codes and
channels do not depend on ``M`` or on the noise level, so every grid point
of a sweep reuses the same realizations (common random numbers).
"""

from __future__ import annotations

import concurrent.futures
import dataclasses
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .ga import GaConfig, ga_select
from .model import (
    ChannelSet,
    CodeSet,
    MaiSignature,
    SystemConfig,
    build_mai_signature,
    generate_channels,
    generate_codes,
)
from .selectors import (
    DEFAULT_EXHAUSTIVE_BUDGET,
    FingerSet,
    SelectionOutcome,
    select_conventional,
    select_exhaustive,
    select_hybrid,
    select_relaxation,
)
from .sinr import exact_sinr

__all__ = [
    "METHODS",
    "HYBRID_SOURCES",
    "Scenario",
    "TrialResult",
    "SweepSpec",
    "SweepRow",
    "SweepResult",
    "profile_energies",
    "make_scenario",
    "ebno_to_noise_var",
    "run_trial",
    "run_sweep",
]

METHODS = ("exhaustive", "ga", "hybrid", "sphere", "box", "dual", "conventional")
HYBRID_SOURCES = ("conventional", "sphere", "box")
PROFILES = ("equal", "mai_limited")


def profile_energies(K: int, profile: str = "equal", e1: float = 1.0, gain_db: float = 10.0):
    """User energies for an interference profile.

    ``"equal"`` gives every user ``e1``; ``"mai_limited"`` gives each
    interferer ``gain_db`` more power than the desired user.
    """
    if profile == "equal":
        return (e1,) * K
    if profile == "mai_limited":
        return (e1,) + (e1 * 10.0 ** (gain_db / 10.0),) * (K - 1)
    raise ValueError(f"unknown profile {profile!r}; expected one of {PROFILES}")


def ebno_to_noise_var(ebno_db: float, e1: float) -> float:
    """Noise variance for a given Eb/N0.

    Taps have unit total mean energy and the pulse has unit energy, so the
    received bit energy equals ``e1`` and ``noise_var = e1 / (Eb/N0)``.
    """
    if e1 <= 0:
        raise ValueError("e1 must be positive")
    return e1 * 10.0 ** (-ebno_db / 10.0)


@dataclass(frozen=True)
class Scenario:
    cfg: SystemConfig
    codes: CodeSet
    channels: ChannelSet
    sig: MaiSignature
    seed: Tuple[int, int]


def _seed_sequence(master_seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=tuple(int(k) for k in key))


def make_scenario(cfg: SystemConfig, master_seed: int, trial_index: int) -> Scenario:
    rng = np.random.default_rng(_seed_sequence(master_seed, trial_index, 0))
    codes = generate_codes(cfg, rng)
    channels = generate_channels(cfg, rng)
    return Scenario(
        cfg=cfg,
        codes=codes,
        channels=channels,
        sig=build_mai_signature(cfg, codes, channels),
        seed=(int(master_seed), int(trial_index)),
    )


def ga_rng(master_seed: int, trial_index: int, point_index: int = 0) -> np.random.Generator:
    return np.random.default_rng(_seed_sequence(master_seed, trial_index, 1, point_index))


@dataclass
class TrialResult:
    """Per-method outcome of one trial; failed methods carry NaN SINR."""

    sinr: Dict[str, float]
    fingers: Dict[str, Optional[FingerSet]]
    failures: Dict[str, str] = field(default_factory=dict)
    diagnostics: Dict[str, dict] = field(default_factory=dict)
    wall_time: Dict[str, float] = field(default_factory=dict, compare=False)


def _diagnostics(out: SelectionOutcome) -> dict:
    d = {"fallback": out.fallback}
    rep = out.solver_report
    if rep is not None:
        d.update(kkt_residual=rep.kkt_residual, iterations=rep.iterations,
                 regularized=rep.regularized)
    if out.note:
        d["note"] = out.note
    return d


def run_trial(
    scenario: Scenario,
    methods: Sequence[str],
    ga_cfg: Optional[GaConfig] = None,
    rng: Optional[np.random.Generator] = None,
    exhaustive_budget: int = DEFAULT_EXHAUSTIVE_BUDGET,
) -> TrialResult:
    """Run every requested method on the same scenario.

    A method that raises is recorded in ``failures`` and the trial goes on.
    The hybrid compares the conventional, sphere and box selections, which
    are computed when needed even if not requested. Relaxations whose solver
    failed fall back to the conventional choice; this is marked in their
    diagnostics. All SINRs are recomputed through one exact-SINR path.
    """
    if not methods:
        raise ValueError("no methods requested")
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods: {sorted(unknown)}")
    cfg, sig = scenario.cfg, scenario.sig
    ga_cfg = ga_cfg or GaConfig()
    if rng is None:
        rng = ga_rng(*scenario.seed)
    done: Dict[str, SelectionOutcome] = {}
    errors: Dict[str, str] = {}
    times: Dict[str, float] = {}

    def compute(m: str):
        if m in done or m in errors:
            return
        t0 = time.perf_counter()
        try:
            if m == "conventional":
                done[m] = select_conventional(sig, cfg)
            elif m == "exhaustive":
                done[m] = select_exhaustive(sig, cfg, budget=exhaustive_budget)
            elif m in ("sphere", "box", "dual"):
                done[m] = select_relaxation(sig, cfg, m)
            elif m == "ga":
                done[m] = ga_select(sig, cfg, ga_cfg, rng)
            elif m == "hybrid":
                for src in HYBRID_SOURCES:
                    compute(src)
                cands = [done[s] for s in HYBRID_SOURCES if s in done]
                done[m] = select_hybrid(sig, cfg, cands)
        except Exception as err:  # recorded per method; the trial continues
            errors[m] = f"{type(err).__name__}: {err}"
        times[m] = time.perf_counter() - t0

    for m in methods:
        compute(m)
    res = TrialResult(sinr={}, fingers={})
    for m in methods:
        if m in done:
            out = done[m]
            res.fingers[m] = out.fingers
            res.sinr[m] = exact_sinr(out.fingers.indices, sig, cfg.e1, cfg.noise_var)
            res.diagnostics[m] = _diagnostics(out)
        else:
            res.fingers[m] = None
            res.sinr[m] = math.nan
            res.failures[m] = errors[m]
        res.wall_time[m] = times.get(m, 0.0)
    return res


@dataclass(frozen=True)
class SweepSpec:
    """A grid of operating points sharing one base configuration.

    ``axis`` is ``"ebno_db"`` (values set the noise level) or ``"M"``
    (values set the finger count, with the noise level fixed by
    ``ebno_db``). The interference profile lives in ``base.energies``.
    """

    base: SystemConfig
    axis: str
    values: Tuple[float, ...]
    trials: int = 500
    methods: Tuple[str, ...] = METHODS
    ga: GaConfig = GaConfig()
    ebno_db: Optional[float] = None
    exhaustive_budget: int = DEFAULT_EXHAUSTIVE_BUDGET

    def __post_init__(self):
        if self.axis not in ("ebno_db", "M"):
            raise ValueError("axis must be 'ebno_db' or 'M'")
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "methods", tuple(self.methods))
        if not self.values:
            raise ValueError("empty grid")
        if not self.methods:
            raise ValueError("no methods")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.axis == "M":
            for v in self.values:
                if int(v) != v:
                    raise ValueError("M grid values must be integers")
        # validates every grid point up front
        for v in self.values:
            self.point_config(v)

    def point_config(self, value) -> SystemConfig:
        e1 = self.base.e1
        if self.axis == "ebno_db":
            return dataclasses.replace(self.base, noise_var=ebno_to_noise_var(value, e1))
        nv = self.base.noise_var if self.ebno_db is None else ebno_to_noise_var(self.ebno_db, e1)
        return dataclasses.replace(self.base, M=int(value), noise_var=nv)


@dataclass(frozen=True)
class SweepRow:
    axis: float
    method: str
    mean_sinr_db: float
    stderr_db: float
    trials: int
    failures: int


@dataclass
class SweepResult:
    spec: SweepSpec
    master_seed: int
    rows: List[SweepRow]
    # (grid index, method) -> linear SINR per trial, NaN where the method failed
    samples: Dict[Tuple[int, str], np.ndarray] = field(repr=False, default_factory=dict)
    elapsed: float = 0.0

    def row(self, axis_value, method: str) -> SweepRow:
        for r in self.rows:
            if r.axis == axis_value and r.method == method:
                return r
        raise KeyError((axis_value, method))

    def mean_db(self, method: str) -> np.ndarray:
        return np.array([self.row(v, method).mean_sinr_db for v in self.spec.values])


def _trial_job(args):
    spec, master_seed, trial = args
    scen = make_scenario(spec.base, master_seed, trial)
    out = []
    for gi, v in enumerate(spec.values):
        cfg = spec.point_config(v)
        scen_v = dataclasses.replace(scen, cfg=cfg)
        out.append(
            run_trial(
                scen_v,
                spec.methods,
                spec.ga,
                ga_rng(master_seed, trial, gi),
                spec.exhaustive_budget,
            )
        )
    return out


def _summarize(values: np.ndarray) -> Tuple[float, float, int]:
    ok = values[np.isfinite(values)]
    n = ok.size
    if n == 0:
        return math.nan, math.nan, 0
    mean = float(ok.mean())
    se = float(ok.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return 10.0 * math.log10(mean), 10.0 / math.log(10.0) * se / mean, n


def run_sweep(
    spec: SweepSpec,
    master_seed: int,
    workers: int = 1,
    progress=None,
) -> SweepResult:
    """Average every method's exact SINR over ``spec.trials`` scenarios per
    grid point.

    Means are taken on the linear scale and reported in dB; the standard
    error is carried to dB to first order. ``workers > 1`` runs trials in a
    process pool; results are folded in trial order either way.
    """
    t0 = time.perf_counter()
    jobs = [(spec, master_seed, t) for t in range(spec.trials)]
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as ex:
            per_trial = list(ex.map(_trial_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        per_trial = []
        for job in jobs:
            per_trial.append(_trial_job(job))
            if progress is not None:
                progress(len(per_trial), len(jobs))
    samples = {}
    rows = []
    for gi, v in enumerate(spec.values):
        for m in spec.methods:
            arr = np.array([per_trial[t][gi].sinr[m] for t in range(spec.trials)])
            samples[(gi, m)] = arr
            mean_db, se_db, n = _summarize(arr)
            rows.append(SweepRow(v, m, mean_db, se_db, n, spec.trials - n))
    return SweepResult(spec, int(master_seed), rows, samples, time.perf_counter() - t0)
