"""Attack search: repair projections, pattern search, sweeps, dominance."""

import numpy as np
import pytest

from lossyqkd.analysis import tradeoff_point
from lossyqkd.attack import ProbeKets, check_equal_throughput, check_isometry, filter_no_count
from lossyqkd.search import (
    SWEEP_CSV_HEADER,
    SearchResult,
    SearchSpec,
    optimize_attack,
    random_feasible_attack,
    repair_kets,
    sweep_rows,
    sweep_tradeoff,
)
from lossyqkd.states import b92, bb84_four_state, bb84_six_state
from lossyqkd.streams import stream

REPAIR_ATOL = 1e-12
FEAS_ATOL = 1e-8


def small_spec(**overrides) -> SearchSpec:
    base = dict(
        family=bb84_four_state(),
        eta=0.5,
        d_e=4,
        qber_cap=0.05,
        x_mode="zero",
        seed=5,
        budget=600,
    )
    base.update(overrides)
    return SearchSpec(**base)


def test_repair_returns_machine_precision_feasibility():
    rng = stream(314)
    for _ in range(50):
        raw = rng.standard_normal((3, 2, 4)) + 1j * rng.standard_normal((3, 2, 4))
        kets = repair_kets(raw, 0.5, zero_deficit=False)
        assert kets is not None
        pk = ProbeKets(eta=0.5, kets=kets)
        assert check_isometry(pk).max() < REPAIR_ATOL
        assert check_equal_throughput(pk, bb84_four_state()).max() < REPAIR_ATOL


def test_repair_with_pinned_deficit_is_six_state_feasible():
    rng = stream(315)
    for _ in range(50):
        raw = rng.standard_normal((3, 2, 4)) + 1j * rng.standard_normal((3, 2, 4))
        kets = repair_kets(raw, 0.5, zero_deficit=True)
        assert kets is not None
        pk = ProbeKets(eta=0.5, kets=kets)
        assert check_equal_throughput(pk, bb84_six_state()).max() < REPAIR_ATOL
        assert abs(filter_no_count(pk).deficit) < REPAIR_ATOL


def test_repair_rejects_degenerate_input():
    assert repair_kets(np.zeros((3, 2, 4), dtype=complex), 0.5, zero_deficit=False) is None


def test_random_feasible_attacks_respect_deficit_bound():
    for eta in (0.55, 0.7, 0.85):
        rng = stream(316)
        bound = (1.0 - eta) / eta
        for _ in range(60):
            pk = random_feasible_attack(eta, 4, rng)
            fa = filter_no_count(pk)
            assert abs(fa.x) <= bound + 1e-10


def test_budget_one_returns_the_passive_point():
    res = optimize_attack(small_spec(budget=1, qber_cap=0.0))
    assert res.feasible
    assert res.evaluations == 1
    assert res.point.d_avg == pytest.approx(0.0, abs=REPAIR_ATOL)
    assert res.point.i_holevo == pytest.approx(0.0, abs=REPAIR_ATOL)
    assert res.point.p_guess == pytest.approx(0.5, abs=REPAIR_ATOL)
    assert res.point.x == pytest.approx(0.0, abs=REPAIR_ATOL)


def test_cap_zero_keeps_leakage_negligible():
    for mode in ("zero", "free"):
        res = optimize_attack(small_spec(qber_cap=0.0, x_mode=mode))
        assert res.feasible
        assert res.point.i_holevo <= 1e-6
        assert res.point.d_avg <= 1e-8 + 1e-12


def test_search_is_deterministic():
    res_a = optimize_attack(small_spec())
    res_b = optimize_attack(small_spec())
    assert res_a.evaluations == res_b.evaluations
    assert res_a.point.i_holevo == res_b.point.i_holevo
    assert np.array_equal(res_a.best.kets, res_b.best.kets)


def test_best_attack_is_feasible_and_capped():
    res = optimize_attack(small_spec(budget=900))
    assert res.feasible
    assert max(res.residuals.values()) < FEAS_ATOL
    assert res.point.d_avg <= 0.05 + 1e-8
    assert res.point.i_holevo > 0.0


def test_free_phase_replays_the_pinned_schedule():
    # The free search runs the zero-mode schedule first, so its pinned-phase
    # best must reproduce the zero-mode result exactly, and its final result
    # can only improve on it.
    zero = optimize_attack(small_spec(budget=1000, x_mode="zero"))
    free = optimize_attack(small_spec(budget=1000, x_mode="free"))
    assert np.array_equal(free.zero_phase_best.kets, zero.best.kets)
    assert free.point.i_holevo >= zero.point.i_holevo


def test_sweeps_dominate_and_stay_monotone():
    grid = [0.0, 0.02, 0.05]
    zero = sweep_tradeoff(small_spec(budget=700, x_mode="zero"), grid)
    free = sweep_tradeoff(small_spec(budget=700, x_mode="free"), grid)
    chi_zero = [r.point.i_holevo for r in zero]
    chi_free = [r.point.i_holevo for r in free]
    for a, b in zip(chi_zero, chi_zero[1:]):
        assert b >= a - 1e-12
    for a, b in zip(chi_free, chi_free[1:]):
        assert b >= a - 1e-12
    for z, f in zip(chi_zero, chi_free):
        assert f >= z - 1e-12
    # The pinned chain inside the free sweep is the zero sweep, point for point.
    for z, f in zip(zero, free):
        assert np.array_equal(f.zero_phase_best.kets, z.best.kets)


def test_six_state_search_pins_the_deficit():
    spec = small_spec(family=bb84_six_state(), x_mode="free", qber_cap=0.05, budget=500)
    res = optimize_attack(spec)
    assert res.feasible
    assert abs(res.point.x) <= FEAS_ATOL
    assert "no_count_overlap_im" in res.residuals
    assert max(res.residuals.values()) < FEAS_ATOL


def test_optimizer_dominates_rejection_sampling():
    cap = 0.08
    res = optimize_attack(small_spec(qber_cap=cap, budget=2000))
    rng = stream(271)
    best_sampled = 0.0
    for _ in range(300):
        pk = random_feasible_attack(0.5, 4, rng)
        point = tradeoff_point(pk, bb84_four_state())
        if point.d_avg <= cap:
            best_sampled = max(best_sampled, point.i_holevo)
    assert res.point.i_holevo >= best_sampled - 1e-9


def test_helstrom_objective_runs():
    res = optimize_attack(small_spec(objective="helstrom", budget=400))
    assert res.feasible
    assert res.point.p_guess >= 0.5


def test_spec_validation():
    with pytest.raises(ValueError):
        small_spec(family=b92())
    with pytest.raises(ValueError):
        small_spec(qber_cap=0.6)
    with pytest.raises(ValueError):
        small_spec(d_e=1)
    with pytest.raises(ValueError):
        small_spec(x_mode="wild")
    with pytest.raises(ValueError):
        small_spec(budget=0)
    with pytest.raises(ValueError):
        small_spec(objective="accuracy")
    with pytest.raises(ValueError):
        small_spec(eta=0.0)


def test_zero_phase_warm_rejected_in_zero_mode():
    warm = random_feasible_attack(0.5, 4, stream(1), zero_deficit=True)
    with pytest.raises(ValueError):
        optimize_attack(small_spec(x_mode="zero"), zero_phase_warm=warm)


def test_sweep_grid_validation():
    spec = small_spec()
    with pytest.raises(ValueError):
        sweep_tradeoff(spec, [])
    with pytest.raises(ValueError):
        sweep_tradeoff(spec, [0.05, 0.02])
    with pytest.raises(ValueError):
        sweep_tradeoff(spec, [0.0, 0.7])


def test_sweep_rows_formatting():
    spec = small_spec()
    res = optimize_attack(small_spec(budget=1, qber_cap=0.0))
    empty = SearchResult(
        spec=spec, feasible=False, best=None, point=None, residuals={}, evaluations=7
    )
    rows = sweep_rows([res, empty])
    assert tuple(rows[0].keys()) == SWEEP_CSV_HEADER
    assert rows[0]["feasible"] is True
    assert rows[1] == {
        "qber_cap": 0.05,
        "i_holevo": "",
        "p_guess": "",
        "x_best": "",
        "feasible": False,
        "evaluations": 7,
    }
