"""Derivative-free search for strong attacks under a disturbance cap.

Candidates are parameterized by the raw real/imaginary coordinates of the six
probe kets (12 * d_e reals). Each candidate is repaired onto the feasible
manifold by exact projections: the no-count kets are rescaled to squared norm
1 - eta and their overlap is made purely imaginary (or zero when the deficit
is pinned), then the in-plane kets are rescaled and rotated so the isometry
constraints hold to machine precision. The repaired attack is scored by the
chosen leakage metric, with a quadratic penalty above the disturbance cap;
the penalty weight doubles whenever a repair fails.

The optimizer is a randomized pattern search: per sweep it probes a random
subset of coordinate directions at the current step, accepts the first
improvement, and halves the step after a failed sweep, stopping below a step
floor or when the evaluation budget runs out. Multiple restarts are used; the
first starts at the zero-disturbance forwarding attack, the second at a
caller-provided warm start.

Mode "zero" pins the deficit to zero during repair. Mode "free" first runs
the identical pinned schedule (every such point is also free-feasible), then
spends any remaining budget continuing from the best points found with the
deficit released. The free result therefore never falls below the zero result
for the same SearchSpec, and warm-started sweeps are non-decreasing by
construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .analysis import TradeoffPoint, tradeoff_point
from .attack import (
    InfeasibleAttackError,
    ProbeKets,
    check_equal_throughput,
    check_isometry,
    passive_loss_attack,
)
from .states import FOUR_STATE, SIX_STATE, ProtocolFamily
from .streams import stream

X_MODE_ZERO = "zero"
X_MODE_FREE = "free"
OBJECTIVE_HOLEVO = "holevo"
OBJECTIVE_HELSTROM = "helstrom"

# A candidate is feasible when its disturbance exceeds the cap by at most this.
CAP_SLACK = 1e-8
_TINY = 1e-12
# Stream indices >= this are reserved for the free-phase continuations.
_FREE_STREAM_BASE = 1000


@dataclass(frozen=True)
class SearchSpec:
    """Everything that determines a search run (results are deterministic)."""

    family: ProtocolFamily
    eta: float
    d_e: int
    qber_cap: float
    x_mode: str
    objective: str = OBJECTIVE_HOLEVO
    seed: int = 0
    budget: int = 20000
    penalty_weight: float = 1e4
    restarts: int = 16
    initial_step: float = 0.1
    step_tol: float = 1e-9
    probes_per_sweep: int = 16

    def __post_init__(self):
        if self.family.kind not in (FOUR_STATE, SIX_STATE):
            raise ValueError("attack search targets BB84 families")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError(f"transmittance must lie in (0, 1], got {self.eta}")
        if not 2 <= self.d_e <= 8:
            raise ValueError(f"probe dimension must lie in [2, 8], got {self.d_e}")
        if not 0.0 <= self.qber_cap <= 0.5:
            raise ValueError(f"disturbance cap must lie in [0, 0.5], got {self.qber_cap}")
        if self.x_mode not in (X_MODE_ZERO, X_MODE_FREE):
            raise ValueError(f"unknown x mode {self.x_mode!r}")
        if self.objective not in (OBJECTIVE_HOLEVO, OBJECTIVE_HELSTROM):
            raise ValueError(f"unknown objective {self.objective!r}")
        if self.budget < 1:
            raise ValueError("budget must be at least 1")
        if self.restarts < 1:
            raise ValueError("need at least one restart")
        if not 0.0 < self.initial_step or not 0.0 < self.step_tol < self.initial_step:
            raise ValueError("need 0 < step_tol < initial_step")
        if self.probes_per_sweep < 1:
            raise ValueError("need at least one probe per sweep")


@dataclass(frozen=True)
class SearchResult:
    """Outcome of one search; best/point are None when nothing feasible was found."""

    spec: SearchSpec
    feasible: bool
    best: ProbeKets | None
    point: TradeoffPoint | None
    residuals: dict[str, float]
    evaluations: int
    zero_phase_best: ProbeKets | None = None


# ---------------------------------------------------------------------------
# Repair: exact projection onto the constraint manifold
# ---------------------------------------------------------------------------


def repair_kets(raw: np.ndarray, eta: float, zero_deficit: bool) -> np.ndarray | None:
    """Project raw kets onto the feasible set; None when degenerate.

    Degenerate inputs (vanishing norms where mass is required, or a no-count
    overlap too large for the in-plane kets to cancel) cannot be repaired.
    """
    kets = np.array(raw, dtype=complex)
    nc0, nc1 = kets[2, 0], kets[2, 1]
    target = 1.0 - eta
    if target <= _TINY:
        nc0[:] = 0.0
        nc1[:] = 0.0
    else:
        n0 = math.sqrt(np.vdot(nc0, nc0).real)
        if n0 < _TINY:
            return None
        nc0 *= math.sqrt(target) / n0
        overlap = np.vdot(nc0, nc1)
        coeff = (overlap if zero_deficit else overlap.real) / target
        nc1 -= coeff * nc0
        n1 = math.sqrt(np.vdot(nc1, nc1).real)
        if n1 < _TINY:
            return None
        nc1 *= math.sqrt(target) / n1
    z = np.vdot(nc0, nc1)

    plane0 = kets[:2, 0].reshape(-1)
    plane1 = kets[:2, 1].reshape(-1)
    norm0 = math.sqrt(np.vdot(plane0, plane0).real)
    if norm0 < _TINY:
        return None
    plane0 *= math.sqrt(eta) / norm0
    # The isometry overlap condition needs <plane0|plane1> = -z with the
    # plane-1 norm pinned at sqrt(eta); the parallel component is fixed and
    # the perpendicular one rescaled to make up the norm.
    parallel = np.vdot(plane0, plane1) / eta
    perp = plane1 - parallel * plane0
    residual_mass = eta - (abs(z) ** 2) / eta
    if residual_mass < 0.0:
        return None
    perp_norm = math.sqrt(np.vdot(perp, perp).real)
    if perp_norm < _TINY:
        if residual_mass > 1e-9:
            return None
        plane1_new = (-z / eta) * plane0
    else:
        plane1_new = (-z / eta) * plane0 + (math.sqrt(residual_mass) / perp_norm) * perp
    kets[:2, 0] = plane0.reshape(2, -1)
    kets[:2, 1] = plane1_new.reshape(2, -1)
    return kets


def random_feasible_attack(
    eta: float,
    d_e: int,
    rng: np.random.Generator,
    zero_deficit: bool = False,
    max_tries: int = 64,
) -> ProbeKets:
    """Sample Gaussian kets and repair them; retries until repair succeeds."""
    for _ in range(max_tries):
        raw = rng.standard_normal((3, 2, d_e)) + 1j * rng.standard_normal((3, 2, d_e))
        kets = repair_kets(raw, eta, zero_deficit)
        if kets is not None:
            return ProbeKets(eta=eta, kets=kets)
    raise RuntimeError(f"no repairable sample in {max_tries} tries at eta={eta}, d_e={d_e}")


def _zero_disturbance_kets(eta: float, d_e: int) -> np.ndarray:
    """Forward-faithfully attack used as the deterministic first restart."""
    if d_e >= 3:
        return np.array(passive_loss_attack(eta, d_e).kets)
    kets = np.zeros((3, 2, d_e), dtype=complex)
    kets[0, 0, 0] = math.sqrt(eta)
    kets[1, 1, 0] = math.sqrt(eta)
    kets[2, 0, 0] = math.sqrt(1.0 - eta)
    kets[2, 1, 1] = math.sqrt(1.0 - eta)
    return kets


def _params_from_kets(kets: np.ndarray) -> np.ndarray:
    return np.concatenate([kets.real.ravel(), kets.imag.ravel()])


def _kets_from_params(params: np.ndarray, d_e: int) -> np.ndarray:
    half = 6 * d_e
    return params[:half].reshape(3, 2, d_e) + 1j * params[half:].reshape(3, 2, d_e)


# ---------------------------------------------------------------------------
# Penalized evaluation and pattern search
# ---------------------------------------------------------------------------


@dataclass
class _Tracker:
    """Budget counter plus the best feasible candidate seen so far."""

    limit: int
    used: int = 0
    best_value: float = -math.inf
    best_kets: np.ndarray | None = None
    best_point: TradeoffPoint | None = None

    def take(self) -> bool:
        if self.used >= self.limit:
            return False
        self.used += 1
        return True

    def offer(self, value: float, kets: np.ndarray, point: TradeoffPoint) -> None:
        if value > self.best_value:
            self.best_value = value
            self.best_kets = kets
            self.best_point = point


class _Evaluator:
    """Scores parameter vectors; owns the (doubling) penalty weight."""

    def __init__(self, spec: SearchSpec, zero_deficit: bool, tracker: _Tracker):
        self.spec = spec
        self.zero_deficit = zero_deficit
        self.tracker = tracker
        self.penalty = spec.penalty_weight

    def __call__(self, params: np.ndarray) -> float:
        """Penalized objective; -inf for unrepairable or invalid candidates."""
        kets = repair_kets(_kets_from_params(params, self.spec.d_e), self.spec.eta, self.zero_deficit)
        if kets is None:
            self.penalty = min(self.penalty * 2.0, 1e12)
            return -math.inf
        try:
            point = tradeoff_point(ProbeKets(eta=self.spec.eta, kets=kets), self.spec.family)
        except (InfeasibleAttackError, ValueError):
            return -math.inf
        value = point.i_holevo if self.spec.objective == OBJECTIVE_HOLEVO else point.p_guess
        if not math.isfinite(value):
            return -math.inf
        excess = max(0.0, point.d_avg - self.spec.qber_cap)
        if excess <= CAP_SLACK:
            self.tracker.offer(value, kets, point)
        return value - self.penalty * excess * excess


def _pattern_search(
    start: np.ndarray,
    rng: np.random.Generator,
    evaluate: _Evaluator,
    tracker: _Tracker,
    local_budget: int,
    initial_step: float,
    step_tol: float,
    probes: int,
) -> None:
    """Randomized compass search from start, spending at most local_budget."""
    spent = 0

    def consume() -> bool:
        nonlocal spent
        if spent >= local_budget or not tracker.take():
            return False
        spent += 1
        return True

    if not consume():
        return
    x = np.array(start, dtype=float)
    fx = evaluate(x)
    step = initial_step
    n_dim = x.size
    while step >= step_tol:
        improved = False
        dims = rng.permutation(n_dim)[: min(probes, n_dim)]
        signs = rng.integers(0, 2, size=dims.size) * 2 - 1
        for d, s in zip(dims, signs):
            for direction in (s, -s):
                if not consume():
                    return
                cand = x.copy()
                cand[d] += direction * step
                fc = evaluate(cand)
                if fc > fx:
                    x, fx = cand, fc
                    improved = True
                    break
            if improved:
                break
        if not improved:
            step *= 0.5


def optimize_attack(
    spec: SearchSpec,
    warm_start: ProbeKets | None = None,
    zero_phase_warm: ProbeKets | None = None,
) -> SearchResult:
    """Best attack found for the spec; deterministic given the spec.

    warm_start seeds the search with a known-good attack (the previous grid
    point during sweeps). In free mode, zero_phase_warm optionally seeds the
    pinned phase separately so that a free sweep reproduces the zero sweep's
    schedule exactly; it is rejected in zero mode.
    """
    if spec.x_mode == X_MODE_ZERO and zero_phase_warm is not None:
        raise ValueError("zero_phase_warm applies to free-mode searches only")
    # A six-state family forces a vanishing deficit, so the released phase
    # would only produce infeasible candidates; pin it in both modes.
    release_phase = spec.x_mode == X_MODE_FREE and spec.family.kind != SIX_STATE
    tracker = _Tracker(limit=spec.budget)

    pinned_eval = _Evaluator(spec, zero_deficit=True, tracker=tracker)
    pinned_warm = zero_phase_warm if zero_phase_warm is not None else warm_start
    starts: list[np.ndarray | None] = [_params_from_kets(_zero_disturbance_kets(spec.eta, spec.d_e))]
    if pinned_warm is not None:
        starts.append(_params_from_kets(np.asarray(pinned_warm.kets)))
    while len(starts) < spec.restarts:
        starts.append(None)  # drawn from the restart's own stream below
    per_restart = max(1, spec.budget // spec.restarts)
    improving_snapshots: list[np.ndarray] = []
    for index, start in enumerate(starts[: spec.restarts]):
        rng = stream(spec.seed, index)
        params = start if start is not None else rng.standard_normal(12 * spec.d_e)
        before = tracker.best_value
        _pattern_search(
            params, rng, pinned_eval, tracker, per_restart,
            spec.initial_step, spec.step_tol, spec.probes_per_sweep,
        )
        if tracker.best_value > before and tracker.best_kets is not None:
            improving_snapshots.append(tracker.best_kets)
        if tracker.used >= tracker.limit:
            break
    zero_phase_best = (
        ProbeKets(eta=spec.eta, kets=tracker.best_kets) if tracker.best_kets is not None else None
    )

    if release_phase and tracker.used < tracker.limit:
        released_eval = _Evaluator(spec, zero_deficit=False, tracker=tracker)
        sources: list[np.ndarray] = []
        if warm_start is not None:
            sources.append(np.asarray(warm_start.kets))
        if tracker.best_kets is not None:
            sources.append(tracker.best_kets)
        sources.extend(reversed(improving_snapshots))
        if not sources:
            sources.append(_zero_disturbance_kets(spec.eta, spec.d_e))
        cont_starts = []
        seen: set[int] = set()
        for kets in sources:
            if id(kets) in seen or len(cont_starts) >= 4:
                continue
            seen.add(id(kets))
            cont_starts.append(_params_from_kets(kets))
        share = max(1, (tracker.limit - tracker.used) // len(cont_starts))
        for k, params in enumerate(cont_starts):
            _pattern_search(
                params, stream(spec.seed, _FREE_STREAM_BASE + k), released_eval, tracker,
                share, spec.initial_step / 4.0, spec.step_tol, spec.probes_per_sweep,
            )
            if tracker.used >= tracker.limit:
                break

    if tracker.best_kets is None:
        return SearchResult(
            spec=spec, feasible=False, best=None, point=None,
            residuals={}, evaluations=tracker.used, zero_phase_best=zero_phase_best,
        )
    best = ProbeKets(eta=spec.eta, kets=tracker.best_kets)
    residuals = check_isometry(best).as_dict()
    residuals.update(check_equal_throughput(best, spec.family).as_dict())
    return SearchResult(
        spec=spec,
        feasible=True,
        best=best,
        point=tracker.best_point,
        residuals=residuals,
        evaluations=tracker.used,
        zero_phase_best=zero_phase_best,
    )


def sweep_tradeoff(spec: SearchSpec, qber_grid) -> list[SearchResult]:
    """One search per cap, warm-started from the previous point's best.

    Free-mode sweeps thread the pinned-phase chain separately so the pinned
    schedule matches a zero-mode sweep of the same SearchSpec point for point.
    """
    grid = [float(q) for q in qber_grid]
    if not grid:
        raise ValueError("empty disturbance grid")
    if any(not 0.0 <= q <= 0.5 for q in grid):
        raise ValueError("disturbance caps must lie in [0, 0.5]")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("disturbance grid must be non-decreasing")
    results: list[SearchResult] = []
    warm: ProbeKets | None = None
    pinned_warm: ProbeKets | None = None
    for cap in grid:
        point_spec = replace(spec, qber_cap=cap)
        if spec.x_mode == X_MODE_ZERO:
            res = optimize_attack(point_spec, warm_start=warm)
        else:
            res = optimize_attack(point_spec, warm_start=warm, zero_phase_warm=pinned_warm)
        results.append(res)
        if res.best is not None:
            warm = res.best
        if res.zero_phase_best is not None:
            pinned_warm = res.zero_phase_best
    return results


SWEEP_CSV_HEADER = ("qber_cap", "i_holevo", "p_guess", "x_best", "feasible", "evaluations")


def sweep_rows(results: list[SearchResult]) -> list[dict]:
    """Flatten sweep results into CSV-ready dicts (one per grid point)."""
    rows = []
    for res in results:
        rows.append(
            {
                "qber_cap": res.spec.qber_cap,
                "i_holevo": res.point.i_holevo if res.point is not None else "",
                "p_guess": res.point.p_guess if res.point is not None else "",
                "x_best": res.point.x if res.point is not None else "",
                "feasible": res.feasible,
                "evaluations": res.evaluations,
            }
        )
    return rows
