"""End-to-end acceptance checks, one test per criterion.

Each test prints one PASS/FAIL line naming its criterion, checks every stated
tolerance, and enforces its runtime ceiling where one applies.
"""

import json
import math
import time

import numpy as np
import pytest

from lossyqkd.analysis import qber, tradeoff_point
from lossyqkd.attack import (
    ProbeKets,
    check_equal_throughput,
    check_isometry,
    filter_no_count,
    outcome_probabilities,
    passive_loss_attack,
    pure_imaginary_deficit_attack,
    throughput_of,
    usd_intercept_resend,
)
from lossyqkd.cli import main
from lossyqkd.montecarlo import SimConfig, run_protocol
from lossyqkd.search import SearchSpec, random_feasible_attack, sweep_tradeoff
from lossyqkd.states import b92, bb84_four_state, bb84_six_state
from lossyqkd.streams import stream


def verdict(number: int, name: str, ok: bool, detail: str) -> None:
    print(f"criterion {number} ({name}): {'PASS' if ok else 'FAIL'}; {detail}")
    assert ok, f"criterion {number} ({name}): {detail}"


def test_criterion_1_passive_attack_constraint_suite():
    started = time.perf_counter()
    worst_residual = 0.0
    worst_metric = 0.0
    for eta in (0.1, 0.5, 0.9):
        pk = passive_loss_attack(eta, d_e=4)
        worst_residual = max(
            worst_residual,
            check_isometry(pk).max(),
            check_equal_throughput(pk, bb84_four_state()).max(),
            check_equal_throughput(pk, bb84_six_state()).max(),
        )
        fa = filter_no_count(pk)
        worst_metric = max(worst_metric, abs(fa.x), abs(fa.deficit))
        for family in (bb84_four_state(), bb84_six_state()):
            point = tradeoff_point(pk, family)
            worst_metric = max(
                worst_metric, max(point.qber_by_basis.values()), point.i_holevo
            )
    elapsed = time.perf_counter() - started
    ok = worst_residual < 1e-12 and worst_metric < 1e-12 and elapsed < 1.0
    verdict(
        1, "passive attack constraint suite", ok,
        f"max residual {worst_residual:.2e}, max metric {worst_metric:.2e}, {elapsed:.2f}s",
    )


def test_criterion_2_lossless_reduction():
    rng = stream(20)
    worst_deficit = 0.0
    identical = True
    for k in range(100):
        d_e = 2 + k % 5
        raw = rng.standard_normal((2 * d_e, 2)) + 1j * rng.standard_normal((2 * d_e, 2))
        q, _ = np.linalg.qr(raw)
        kets = np.zeros((3, 2, d_e), dtype=complex)
        kets[0, 0], kets[1, 0] = q[:d_e, 0], q[d_e:, 0]
        kets[0, 1], kets[1, 1] = q[:d_e, 1], q[d_e:, 1]
        pk = ProbeKets(eta=1.0, kets=kets)
        fa = filter_no_count(pk)
        identical = identical and np.array_equal(fa.hatted, pk.kets[:2])
        worst_deficit = max(worst_deficit, abs(fa.deficit))
    ok = identical and worst_deficit < 1e-12
    verdict(
        2, "lossless filtering reduction", ok,
        f"hatted kets identical: {identical}, max |deficit| {worst_deficit:.2e}",
    )


def test_criterion_3_deficit_witness_analytic_and_monte_carlo():
    started = time.perf_counter()
    pk = pure_imaginary_deficit_attack(0.5, 0.3)
    residual = max(
        check_isometry(pk).max(), check_equal_throughput(pk, bb84_four_state()).max()
    )
    analytic = qber(filter_no_count(pk), "Z")
    rep = run_protocol(
        SimConfig(family=bb84_four_state(), n_rounds=1_000_000, eta=0.5, seed=300, attack=pk)
    )
    sifted_z = rep.sifted_per_basis["Z"]
    sigma = math.sqrt(0.045 * 0.955 / sifted_z)
    deviation = abs(rep.qber_hat["Z"] - 0.045)
    elapsed = time.perf_counter() - started
    ok = (
        residual < 1e-12
        and abs(analytic - 0.045) < 1e-12
        and deviation < 3.0 * sigma
        and elapsed < 30.0
    )
    verdict(
        3, "imaginary-deficit witness", ok,
        f"residual {residual:.2e}, analytic qber_z {analytic:.6f}, "
        f"simulated {rep.qber_hat['Z']:.6f} ({deviation / sigma:.2f} sigma), {elapsed:.1f}s",
    )


def test_criterion_4_six_state_deficit_collapse():
    rng = stream(4242)
    worst = 0.0
    for _ in range(200):
        pk = random_feasible_attack(0.5, 4, rng, zero_deficit=True)
        assert check_equal_throughput(pk, bb84_six_state()).max() < 1e-8
        worst = max(worst, abs(filter_no_count(pk).deficit))
    ok = worst < 1e-8
    verdict(4, "six-state deficit collapse", ok, f"max |deficit| {worst:.2e} over 200 samples")


def test_criterion_5_throughput_uniformity():
    rng = stream(50)
    worst_real = 0.0
    etas = (0.3, 0.5, 0.8)
    for k in range(100):
        eta = etas[k % 3]
        pk = random_feasible_attack(eta, 4, rng)
        angles = rng.uniform(0.0, 2.0 * math.pi, size=1000)
        for theta in angles:
            psi = (math.cos(theta), math.sin(theta))
            worst_real = max(worst_real, abs(throughput_of(pk, psi) - eta))
    worst_complex = 0.0
    for k in range(100):
        eta = etas[k % 3]
        pk = random_feasible_attack(eta, 4, rng, zero_deficit=True)
        vecs = rng.standard_normal((1000, 2)) + 1j * rng.standard_normal((1000, 2))
        vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
        for psi in vecs:
            worst_complex = max(worst_complex, abs(throughput_of(pk, psi) - eta))
    ok = worst_real < 1e-10 and worst_complex < 1e-10
    verdict(
        5, "throughput uniformity", ok,
        f"four-state real-amplitude deviation {worst_real:.2e}, "
        f"six-state complex deviation {worst_complex:.2e}",
    )


def test_criterion_6_deficit_bound():
    rng = stream(60)
    margin = -math.inf
    for eta in (0.5, 0.6, 0.75, 0.9):
        bound = (1.0 - eta) / eta
        for _ in range(50):
            pk = random_feasible_attack(eta, 4, rng)
            margin = max(margin, abs(filter_no_count(pk).x) - bound)
    ok = margin <= 1e-10
    verdict(6, "deficit bound", ok, f"max |X| - (1-eta)/eta = {margin:.2e}")


def brute_force_usd_rate(v0: np.ndarray, v1: np.ndarray) -> float:
    """Best zero-error conclusive rate over all 3-outcome qubit POVMs.

    A zero-error element must annihilate the state it excludes; for qubits
    that forces rank-one support on the excluded state's orthogonal
    complement, so the POVM reduces to two scale factors (a, b). The rate is
    flat along the positivity boundary, so a naive 2-D grid stalls; instead
    we grid over a and solve the largest admissible b exactly from the 2x2
    remainder (trace >= 0 and determinant >= 0, a quadratic in b).
    """
    perp0 = np.array([-np.conj(v0[1]), np.conj(v0[0])])
    perp1 = np.array([-np.conj(v1[1]), np.conj(v1[0])])
    p0 = np.outer(perp1, perp1.conj())  # detects v0
    p1 = np.outer(perp0, perp0.conj())  # detects v1
    gain0 = float(np.real(np.vdot(v0, p0 @ v0)))
    gain1 = float(np.real(np.vdot(v1, p1 @ v1)))
    b00, b11, d01 = p1[0, 0].real, p1[1, 1].real, p1[0, 1]
    c2 = b00 * b11 - abs(d01) ** 2

    def b_limit(a: float) -> float:
        a00 = 1.0 - a * p0[0, 0].real
        a11 = 1.0 - a * p0[1, 1].real
        c01 = -a * p0[0, 1]
        c1 = -(a00 * b11 + a11 * b00) + 2.0 * (c01 * d01.conjugate()).real
        c0 = a00 * a11 - abs(c01) ** 2  # equals 1 - a, so nonnegative here
        b_det = math.inf
        if abs(c2) < 1e-15:
            if c1 < -1e-15:
                b_det = c0 / -c1
        else:
            disc = c1 * c1 - 4.0 * c2 * c0
            if disc >= 0.0:
                s = math.sqrt(disc)
                roots = [r for r in ((-c1 - s) / (2 * c2), (-c1 + s) / (2 * c2)) if r > 0.0]
                if roots:
                    b_det = min(roots)
        return max(0.0, min(b_det, 2.0 - a))

    lo, hi = 0.0, 1.0
    best = 0.0
    for _ in range(3):
        grid = np.linspace(lo, hi, 1001)
        rates = [0.5 * (a * gain0 + b_limit(float(a)) * gain1) for a in grid]
        i = int(np.argmax(rates))
        best = rates[i]
        h = (hi - lo) / 1000.0
        lo, hi = max(0.0, float(grid[i]) - 3.0 * h), min(1.0, float(grid[i]) + 3.0 * h)
    return best


def test_criterion_7_usd_break_and_povm_optimality():
    started = time.perf_counter()
    fam = b92()
    pair = (fam.signals[0], fam.signals[1])
    c = 1.0 / math.sqrt(2.0)

    attack, _ = usd_intercept_resend(pair, 0.25)
    rep = run_protocol(
        SimConfig(family=fam, n_rounds=100_000, eta=0.25, seed=700, attack=attack,
                  line_replacement=True)
    )
    qber_zero = all(v in (0.0, None) for v in rep.qber_hat.values())
    delivered = sum(rep.detected.values()) / sum(rep.sent.values())
    sigma = math.sqrt(0.25 * 0.75 / sum(rep.sent.values()))
    delivery_ok = abs(delivered - 0.25) < 3.0 * sigma

    _, report_above = usd_intercept_resend(pair, 0.6)
    shortfall_ok = (
        report_above.full_break is False
        and abs(report_above.shortfall - (0.6 - (1.0 - c))) < 1e-12
    )

    oracle = brute_force_usd_rate(pair[0].vector(), pair[1].vector())
    p_sig0 = outcome_probabilities(attack, pair[0].vector())
    p_sig1 = outcome_probabilities(attack, pair[1].vector())
    attack_rate = 0.5 * (p_sig0[0] + p_sig1[1])
    povm_ok = abs(oracle - (1.0 - c)) < 1e-6 and abs(attack_rate - oracle) < 1e-6

    elapsed = time.perf_counter() - started
    ok = (
        qber_zero and rep.eve_accuracy == 1.0 and delivery_ok and shortfall_ok
        and povm_ok and elapsed < 60.0
    )
    verdict(
        7, "discrimination break and optimality", ok,
        f"qber zero: {qber_zero}, eve accuracy {rep.eve_accuracy}, "
        f"delivered {delivered:.4f} vs 0.25, shortfall {report_above.shortfall:.6f}, "
        f"oracle rate {oracle:.8f} vs attack {attack_rate:.8f}, {elapsed:.1f}s",
    )


def test_criterion_8_tradeoff_dominance():
    started = time.perf_counter()
    grid = [0.0, 0.01, 0.03, 0.05, 0.08, 0.11]
    base = dict(family=bb84_four_state(), eta=0.5, d_e=4, qber_cap=0.0, seed=88,
                budget=20_000)
    zero = sweep_tradeoff(SearchSpec(x_mode="zero", **base), grid)
    free = sweep_tradeoff(SearchSpec(x_mode="free", **base), grid)
    chi_zero = [r.point.i_holevo for r in zero]
    chi_free = [r.point.i_holevo for r in free]
    feasible = all(r.feasible for r in zero + free)
    dominance = all(f >= z - 1e-6 for z, f in zip(chi_zero, chi_free))
    monotone_zero = all(b >= a - 1e-6 for a, b in zip(chi_zero, chi_zero[1:]))
    monotone_free = all(b >= a - 1e-6 for a, b in zip(chi_free, chi_free[1:]))
    elapsed = time.perf_counter() - started
    gaps = ", ".join(
        f"D={cap:g}: {f - z:+.3e}" for cap, z, f in zip(grid, chi_zero, chi_free)
    )
    ok = feasible and dominance and monotone_zero and monotone_free and elapsed < 600.0
    verdict(
        8, "free-versus-zero tradeoff dominance", ok,
        f"signed gaps [{gaps}], monotone zero/free: {monotone_zero}/{monotone_free}, "
        f"{elapsed:.0f}s",
    )


def test_criterion_9_manifest_replay(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    runs = [
        ["simulate", "--family", "b92", "--eta", "0.25", "--rounds", "2000",
         "--attack", "usd", "--seed", "77", "--line-replacement", "--csv", "sim.csv"],
        ["tradeoff", "--family", "bb84-4", "--eta", "0.5", "--d-e", "4",
         "--grid", "0.0,0.03", "--x-mode", "free", "--budget", "250", "--seed", "77",
         "--out", "sweep.csv"],
        ["usd", "--pair", "default", "--eta-grid", "0.1,0.3,0.5", "--out", "usd.csv"],
    ]
    manifests = ["sim.csv.manifest.json", "sweep.csv.manifest.json", "usd.csv.manifest.json"]
    all_match = True
    for argv, manifest in zip(runs, manifests):
        assert main(argv) == 0
        capsys.readouterr()
        code = main(["replay", manifest])
        payload = json.loads(capsys.readouterr().out)
        all_match = all_match and code == 0 and payload["match"] is True
    verdict(9, "manifest replay reproducibility", all_match,
            f"{len(runs)} commands replayed byte-identically: {all_match}")
