import itertools

import numpy as np
import pytest

from fingersel import qp, selectors
from fingersel.model import MaiSignature
from fingersel.selectors import (
    ExhaustiveBudgetError,
    FingerSet,
    SelectionOutcome,
    round_top_m,
    select_conventional,
    select_exhaustive,
    select_hybrid,
    select_relaxation,
)
from fingersel.sinr import exact_sinr, individual_sinr

from conftest import make_cfg, scenario


def brute_force_best(sig, cfg):
    """Independent exhaustive search: scalar evaluations, first maximum kept."""
    best, best_val = None, -np.inf
    for c in itertools.combinations(range(cfg.L), cfg.M):
        v = exact_sinr(c, sig, cfg.e1, cfg.noise_var)
        if v > best_val:
            best, best_val = c, v
    return best, best_val


# --- FingerSet and rounding ------------------------------------------------

def test_fingerset_normalizes_and_validates():
    fs = FingerSet.of([4, 1, 2])
    assert fs.indices == (1, 2, 4)
    assert len(fs) == 3 and list(fs) == [1, 2, 4]
    assert str(fs) == "{1,2,4}"
    with pytest.raises(ValueError):
        FingerSet((2, 1))
    with pytest.raises(ValueError):
        FingerSet((1, 1))
    with pytest.raises(ValueError):
        FingerSet((-1, 2))


def test_round_binary_vector_returns_support():
    x = np.array([0, 1, 0, 1, 1, 0], dtype=float)
    assert round_top_m(x, 3).indices == (1, 3, 4)


def test_round_order_statistics():
    assert round_top_m(np.array([0.9, 0.2, 0.2, 0.7]), 2).indices == (0, 3)


def test_round_ties_toward_smaller_index():
    assert round_top_m(np.array([0.5, 0.1, 0.5]), 1).indices == (0,)
    assert round_top_m(np.array([0.2, 0.2, 0.2, 0.2]), 2).indices == (0, 1)


# --- conventional ----------------------------------------------------------

def test_conventional_single_user_is_max_energy():
    s = scenario(K=1, L=12, M=4)
    out = select_conventional(s.sig, s.cfg)
    expected = tuple(sorted(np.argsort(-s.sig.alpha1 ** 2)[:4]))
    assert out.fingers.indices == expected
    assert out.method == "conventional"


def test_conventional_equal_values_tie_break():
    cfg = make_cfg(K=1, L=6, M=3)
    sig = MaiSignature(alpha1=np.full(6, 0.4), smai=np.zeros((6, 0)), amat=np.zeros(0))
    assert select_conventional(sig, cfg).fingers.indices == (0, 1, 2)


def test_conventional_drops_strong_path_with_heavy_mai():
    cfg = make_cfg(K=2, L=4, M=2, Nc=10, nv=0.1)
    alpha1 = np.array([1.0, 0.6, 0.5, 0.1])
    smai = np.array([[0.0], [0.0], [0.0], [0.0]])
    for hit in (0.1, 3.0):
        smai[0, 0] = hit
        sig = MaiSignature(alpha1=alpha1, smai=smai.copy(), amat=np.ones(1))
        per_path = individual_sinr(None, sig, 1.0, 0.1)
        keep = 0 in select_conventional(sig, cfg).fingers.indices
        assert keep == (per_path[0] >= np.sort(per_path)[-2])
    assert not keep


# --- exhaustive ------------------------------------------------------------

def test_exhaustive_matches_brute_force():
    for i in range(30):
        s = scenario(seed=5, index=i, K=5, L=8, M=3, nv=0.01)
        out = select_exhaustive(s.sig, s.cfg)
        best, val = brute_force_best(s.sig, s.cfg)
        assert out.fingers.indices == best
        assert out.exact_sinr == val


def test_exhaustive_small_instance_enumerates_six_subsets():
    s = scenario(seed=1, K=3, L=4, M=2, Nc=10)
    vals = {c: exact_sinr(c, s.sig, 1.0, 0.1) for c in itertools.combinations(range(4), 2)}
    assert len(vals) == 6
    assert select_exhaustive(s.sig, s.cfg).fingers.indices == max(vals, key=vals.get)


def test_exhaustive_single_user_equals_conventional():
    for i in range(10):
        s = scenario(seed=6, index=i, K=1, L=10, M=4)
        assert select_exhaustive(s.sig, s.cfg).fingers == select_conventional(s.sig, s.cfg).fingers


def test_exhaustive_full_set():
    s = scenario(K=4, L=6, M=6, Nc=12)
    out = select_exhaustive(s.sig, s.cfg)
    assert out.fingers.indices == tuple(range(6))
    assert out.exact_sinr == exact_sinr(range(6), s.sig, 1.0, 0.1)


def test_exhaustive_lexicographic_tie_break():
    cfg = make_cfg(K=1, L=5, M=2)
    sig = MaiSignature(alpha1=np.ones(5), smai=np.zeros((5, 0)), amat=np.zeros(0))
    assert select_exhaustive(sig, cfg).fingers.indices == (0, 1)


def test_exhaustive_budget_guard():
    s = scenario(K=2, L=30, M=10, Nc=40)
    with pytest.raises(ExhaustiveBudgetError):
        select_exhaustive(s.sig, s.cfg)
    with pytest.raises(ExhaustiveBudgetError):
        select_exhaustive(scenario().sig, make_cfg(), budget=100)


def test_exhaustive_dominates_every_method():
    for i in range(20):
        s = scenario(seed=7, index=i, K=5, L=10, M=3, nv=0.01)
        best = select_exhaustive(s.sig, s.cfg).exact_sinr
        for out in [select_conventional(s.sig, s.cfg)] + [
            select_relaxation(s.sig, s.cfg, v) for v in ("sphere", "box", "dual")
        ]:
            assert out.exact_sinr <= best


# --- relaxations -----------------------------------------------------------

@pytest.mark.parametrize("variant", ["sphere", "box", "dual"])
def test_relaxation_without_mai_is_optimal(variant):
    for i in range(10):
        s = scenario(seed=8, index=i, K=1, L=10, M=3)
        out = select_relaxation(s.sig, s.cfg, variant)
        assert not out.fallback
        assert out.fingers == select_conventional(s.sig, s.cfg).fingers
        assert out.solver_report is not None


@pytest.mark.parametrize("variant", ["sphere", "box"])
def test_relaxation_beats_conventional_in_most_seeds(variant):
    wins = ties = 0
    for i in range(200):
        s = scenario(seed=9, index=i, K=5, L=10, M=3, nv=0.01)
        r = select_relaxation(s.sig, s.cfg, variant).exact_sinr
        c = select_conventional(s.sig, s.cfg).exact_sinr
        wins += r > c
        ties += r == c
    assert wins + ties > 100
    assert wins > 0


def test_relaxation_outcome_is_recomputed():
    s = scenario(seed=10, K=5)
    for v in ("sphere", "box", "dual"):
        out = select_relaxation(s.sig, s.cfg, v)
        assert out.exact_sinr == exact_sinr(out.fingers.indices, s.sig, 1.0, 0.1)
        assert len(out.fingers) == s.cfg.M


def test_relaxation_unknown_variant():
    s = scenario()
    with pytest.raises(ValueError):
        select_relaxation(s.sig, s.cfg, "hypercube-dual")


def test_relaxation_falls_back_on_solver_failure(monkeypatch):
    s = scenario(seed=11, K=5)

    def broken(prob, **kw):
        rep = qp.SolveReport(x_star=np.zeros(prob.L), objective=0.0, kkt_residual=1.0,
                             iterations=1, converged=False)
        raise qp.SolverError("no luck", rep)

    monkeypatch.setitem(selectors.RELAXATIONS, "box", broken)
    out = select_relaxation(s.sig, s.cfg, "box")
    assert out.fallback
    assert out.fingers == select_conventional(s.sig, s.cfg).fingers
    assert out.method == "box"
    assert "no luck" in out.note


# --- hybrid ----------------------------------------------------------------

def test_hybrid_single_candidate():
    s = scenario(seed=12)
    conv = select_conventional(s.sig, s.cfg)
    out = select_hybrid(s.sig, s.cfg, [conv])
    assert out.fingers == conv.fingers
    assert out.note == "from conventional"


def test_hybrid_is_max_and_ties_go_first():
    s = scenario(seed=13, K=5, nv=0.01)
    cands = [select_conventional(s.sig, s.cfg)] + [
        select_relaxation(s.sig, s.cfg, v) for v in ("sphere", "box")
    ]
    out = select_hybrid(s.sig, s.cfg, cands)
    assert out.exact_sinr == max(c.exact_sinr for c in cands)
    same = SelectionOutcome(fingers=cands[0].fingers, exact_sinr=cands[0].exact_sinr, method="other")
    assert select_hybrid(s.sig, s.cfg, [cands[0], same]).note == "from conventional"


def test_hybrid_dominates_constituents():
    for i in range(200):
        s = scenario(seed=14, index=i, K=5, L=10, M=3, nv=0.01)
        cands = [select_conventional(s.sig, s.cfg)] + [
            select_relaxation(s.sig, s.cfg, v) for v in ("sphere", "box")
        ]
        h = select_hybrid(s.sig, s.cfg, cands).exact_sinr
        assert all(h >= c.exact_sinr for c in cands)


def test_hybrid_needs_candidates():
    s = scenario()
    with pytest.raises(ValueError):
        select_hybrid(s.sig, s.cfg, [])


def test_hybrid_ignores_stale_recorded_sinr():
    s = scenario(seed=15)
    conv = select_conventional(s.sig, s.cfg)
    liar = SelectionOutcome(fingers=FingerSet((0, 1, 2)), exact_sinr=1e9, method="liar")
    out = select_hybrid(s.sig, s.cfg, [conv, liar])
    assert out.exact_sinr == max(conv.exact_sinr, exact_sinr((0, 1, 2), s.sig, 1.0, 0.1))
