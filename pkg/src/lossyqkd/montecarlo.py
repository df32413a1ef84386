"""Monte Carlo rounds of prepare-and-measure protocols over a lossy line.

Alice draws signals uniformly, Bob draws a measurement basis uniformly, and
the line is either the bare loss channel, an identical individual attack
(an isometry replacing the channel), or a probabilistic re-send attack.
Detector inefficiency thins bit outcomes last.

All sampling is vectorized over rounds. Randomness comes from fixed
counter-based substreams of the config seed, one per sampling stage, so a
given SimConfig always reproduces the same SimReport bit for bit:

    0 Alice's signal choices      4 detector thinning
    1 Bob's basis choices         5 re-send suppression
    2 channel/attack outcome      6 Bob's measurement outcome
    3 residual loss after re-send

Sifting keeps matched-basis counts for BB84 families. For B92, Bob's basis
is built around one signal and the outcome orthogonal to it is conclusive,
excluding that signal; conclusive counts are the sifted set. The per-round
record lists, as Alice's basis, the basis built on her signal.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .attack import Block, InfeasibleAttackError, ProbeKets, PrsAttack, check_isometry
from .states import B92, OUTCOME_NAMES, BobOutcome, ProtocolFamily
from .streams import stream

ISOMETRY_SIM_ATOL = 1e-8
_NC = int(BobOutcome.NO_COUNT)


@dataclass(frozen=True)
class SimConfig:
    """Full description of one simulation run."""

    family: ProtocolFamily
    n_rounds: int
    eta: float
    seed: int
    attack: ProbeKets | PrsAttack | None = None
    p_det: float = 1.0
    line_replacement: bool = False

    def __post_init__(self):
        if self.n_rounds < 1:
            raise ValueError(f"round count must be positive, got {self.n_rounds}")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"transmittance must lie in [0, 1], got {self.eta}")
        if not 0.0 <= self.p_det <= 1.0:
            raise ValueError(f"detector efficiency must lie in [0, 1], got {self.p_det}")


@dataclass(frozen=True)
class RateEstimate:
    estimate: float
    stderr: float

    def as_dict(self) -> dict:
        return {"estimate": self.estimate, "stderr": self.stderr}


@dataclass(frozen=True)
class SimReport:
    """Aggregated statistics of one run, keyed by signal label or basis name."""

    sent: dict[str, int]
    detected: dict[str, int]
    eta_hat: dict[str, RateEstimate | None]
    sifted_count: int
    sifted_per_basis: dict[str, int]
    errors_per_basis: dict[str, int]
    qber_hat: dict[str, float | None]
    eve_accuracy: float | None

    def to_dict(self) -> dict:
        return {
            "sent": self.sent,
            "detected": self.detected,
            "eta_hat": {k: (v.as_dict() if v is not None else None) for k, v in self.eta_hat.items()},
            "sifted_count": self.sifted_count,
            "sifted_per_basis": self.sifted_per_basis,
            "errors_per_basis": self.errors_per_basis,
            "qber_hat": self.qber_hat,
            "eve_accuracy": self.eve_accuracy,
        }


PER_ROUND_HEADER = ("round", "state", "alice_basis", "alice_bit", "bob_basis", "outcome", "sifted", "error", "eve_tag")


def _categorical(cum_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Sample category indices given per-row cumulative probabilities."""
    return (u[:, None] >= cum_rows[:, :-1]).sum(axis=1)


def _iia_outcome_table(pk: ProbeKets, amps: np.ndarray, basis_vecs: np.ndarray) -> np.ndarray:
    """P[s, basis, outcome] for every signal/basis pair under the isometry."""
    n_sig, n_bas = amps.shape[0], basis_vecs.shape[0]
    joint = np.einsum("sb,ibe->sie", amps, pk.kets)  # (S, 3, d_e)
    table = np.empty((n_sig, n_bas, 3))
    for j in range(n_bas):
        for o in (0, 1):
            w = basis_vecs[j, o].conj()
            amp = w[0] * joint[:, 0, :] + w[1] * joint[:, 1, :]
            table[:, j, o] = np.sum(np.abs(amp) ** 2, axis=1)
    table[:, :, 2] = np.sum(np.abs(joint[:, 2, :]) ** 2, axis=1)[:, None]
    table = np.clip(table, 0.0, None)
    return table / table.sum(axis=2, keepdims=True)


def run_protocol(cfg: SimConfig, per_round_path=None) -> SimReport:
    """Simulate cfg.n_rounds rounds; optionally write the per-round CSV."""
    fam = cfg.family
    amps = np.array([s.vector() for s in fam.signals])  # (S, 2)
    basis_vecs = np.array([[b[0].vector(), b[1].vector()] for b in fam.bases])  # (B, 2, 2)
    n_sig, n_bas = amps.shape[0], basis_vecs.shape[0]
    n = cfg.n_rounds

    alice_rng = stream(cfg.seed, 0)
    bob_rng = stream(cfg.seed, 1)
    primary_rng = stream(cfg.seed, 2)
    residual_rng = stream(cfg.seed, 3)
    detector_rng = stream(cfg.seed, 4)
    suppress_rng = stream(cfg.seed, 5)
    measure_rng = stream(cfg.seed, 6)

    s_idx = alice_rng.integers(0, n_sig, size=n)
    b_idx = bob_rng.integers(0, n_bas, size=n)
    tag_idx = None
    tags: tuple[str, ...] = ()

    if cfg.attack is None:
        delivered = primary_rng.random(n) < cfg.eta
        p_first = np.abs(np.einsum("sk,bk->sb", amps, basis_vecs[:, 0, :].conj())) ** 2
        bit = np.where(measure_rng.random(n) < p_first[s_idx, b_idx], 0, 1)
        outcome = np.where(delivered, bit, _NC)
    elif isinstance(cfg.attack, ProbeKets):
        pk = cfg.attack
        if abs(pk.eta - cfg.eta) > 1e-12:
            raise ValueError(f"attack transmittance {pk.eta} differs from config {cfg.eta}")
        res = check_isometry(pk)
        if res.max() > ISOMETRY_SIM_ATOL:
            raise InfeasibleAttackError("cannot simulate non-isometric probe kets", res.as_dict())
        table = _iia_outcome_table(pk, amps, basis_vecs)
        cum = np.cumsum(table, axis=2)
        outcome = _categorical(cum[s_idx, b_idx], primary_rng.random(n))
    elif isinstance(cfg.attack, PrsAttack):
        prs = cfg.attack
        tags = prs.tags
        n_out = len(tags)
        born = np.empty((n_sig, n_out))
        for k, element in enumerate(prs.elements):
            born[:, k] = np.real(np.einsum("sj,jk,sk->s", amps.conj(), element, amps))
        born = np.clip(born, 0.0, None)
        born /= born.sum(axis=1, keepdims=True)
        tag_idx = _categorical(np.cumsum(born, axis=1)[s_idx], primary_rng.random(n))
        blocked = np.array([isinstance(prs.policy[t], Block) for t in tags])
        send_prob = np.array(
            [0.0 if isinstance(prs.policy[t], Block) else prs.policy[t].send_prob for t in tags]
        )
        resent = np.stack(
            [
                np.eye(2, dtype=complex) / 2.0 if isinstance(prs.policy[t], Block) else prs.policy[t].state
                for t in tags
            ]
        )
        delivered = ~blocked[tag_idx]
        delivered &= suppress_rng.random(n) < send_prob[tag_idx]
        if not cfg.line_replacement:
            delivered &= residual_rng.random(n) < cfg.eta
        p_first = np.empty((n_out, n_bas))
        for k in range(n_out):
            for j in range(n_bas):
                w = basis_vecs[j, 0]
                p_first[k, j] = float(np.real(np.conj(w) @ resent[k] @ w))
        p_first = np.clip(p_first, 0.0, 1.0)
        bit = np.where(measure_rng.random(n) < p_first[tag_idx, b_idx], 0, 1)
        outcome = np.where(delivered, bit, _NC)
    else:
        raise TypeError(f"unsupported attack type {type(cfg.attack).__name__}")

    # Detector inefficiency acts on bit outcomes only, after everything else.
    lost = detector_rng.random(n) >= cfg.p_det
    outcome = np.where((outcome != _NC) & lost, _NC, outcome)

    if fam.kind == B92:
        alice_bit = s_idx
        alice_basis = s_idx  # basis built around Alice's signal
        sifted = outcome == 1
        inferred = 1 - b_idx
        error = sifted & (inferred != alice_bit)
    else:
        alice_basis = s_idx // 2
        alice_bit = s_idx % 2
        sifted = (b_idx == alice_basis) & (outcome != _NC)
        error = sifted & (outcome != alice_bit)

    sent = np.bincount(s_idx, minlength=n_sig)
    detected = np.bincount(s_idx[outcome != _NC], minlength=n_sig)
    sifted_per_basis = np.bincount(b_idx[sifted], minlength=n_bas)
    errors_per_basis = np.bincount(b_idx[error], minlength=n_bas)

    labels = [s.label for s in fam.signals]
    eta_hat: dict[str, RateEstimate | None] = {}
    for i, label in enumerate(labels):
        if sent[i] == 0:
            eta_hat[label] = None
            continue
        est = detected[i] / sent[i]
        eta_hat[label] = RateEstimate(
            estimate=float(est), stderr=float(math.sqrt(est * (1.0 - est) / sent[i]))
        )

    qber_hat: dict[str, float | None] = {}
    for j, name in enumerate(fam.basis_names):
        qber_hat[name] = (
            float(errors_per_basis[j] / sifted_per_basis[j]) if sifted_per_basis[j] > 0 else None
        )

    eve_accuracy = None
    if isinstance(cfg.attack, PrsAttack) and cfg.attack.bit_guesses and sifted.any():
        guess = np.array([cfg.attack.bit_guesses.get(t, -1) for t in tags])
        eve_accuracy = float(np.mean(guess[tag_idx[sifted]] == alice_bit[sifted]))

    if per_round_path is not None:
        _write_per_round(
            per_round_path, fam, s_idx, alice_basis, alice_bit, b_idx, outcome, sifted, error,
            tag_idx, tags,
        )

    return SimReport(
        sent={label: int(sent[i]) for i, label in enumerate(labels)},
        detected={label: int(detected[i]) for i, label in enumerate(labels)},
        eta_hat=eta_hat,
        sifted_count=int(sifted.sum()),
        sifted_per_basis={name: int(sifted_per_basis[j]) for j, name in enumerate(fam.basis_names)},
        errors_per_basis={name: int(errors_per_basis[j]) for j, name in enumerate(fam.basis_names)},
        qber_hat=qber_hat,
        eve_accuracy=eve_accuracy,
    )


def _write_per_round(path, fam, s_idx, alice_basis, alice_bit, b_idx, outcome, sifted, error,
                     tag_idx, tags) -> None:
    state_names = [s.label for s in fam.signals]
    outcome_names = [OUTCOME_NAMES[BobOutcome(v)] for v in (0, 1, 2)]
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(PER_ROUND_HEADER)
        for r in range(len(s_idx)):
            writer.writerow(
                (
                    r,
                    state_names[s_idx[r]],
                    fam.basis_names[alice_basis[r]],
                    int(alice_bit[r]),
                    fam.basis_names[b_idx[r]],
                    outcome_names[outcome[r]],
                    int(sifted[r]),
                    int(error[r]),
                    tags[tag_idx[r]] if tag_idx is not None else "",
                )
            )


@dataclass(frozen=True)
class UniformityReport:
    """Per-signal z-scores of detection rates against the pooled rate."""

    z_scores: dict[str, float]
    excluded: tuple[str, ...]
    verdict: str

    def to_dict(self) -> dict:
        return {"z_scores": self.z_scores, "excluded": list(self.excluded), "verdict": self.verdict}


def uniformity_check(report: SimReport, z_threshold: float = 3.0) -> UniformityReport:
    """Flag signal-dependent detection rates.

    Signals with zero sent rounds are excluded (and reported as such). The
    verdict is "uniform" iff every remaining |z| is at most z_threshold.
    """
    total_sent = sum(report.sent.values())
    total_detected = sum(report.detected.values())
    if total_sent == 0:
        raise ValueError("report contains no rounds")
    pooled = total_detected / total_sent
    z_scores: dict[str, float] = {}
    excluded = []
    for label, sent in report.sent.items():
        if sent == 0:
            excluded.append(label)
            continue
        spread = pooled * (1.0 - pooled)
        est = report.detected[label] / sent
        if spread == 0.0:
            z_scores[label] = 0.0 if est == pooled else math.inf
            continue
        z_scores[label] = float((est - pooled) / math.sqrt(spread / sent))
    verdict = "uniform" if all(abs(z) <= z_threshold for z in z_scores.values()) else "non-uniform"
    return UniformityReport(z_scores=z_scores, excluded=tuple(excluded), verdict=verdict)
