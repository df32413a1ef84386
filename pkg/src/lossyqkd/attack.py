"""Eavesdropping models for lossy-channel key distribution.

Two attack classes live here.

The first is the identical individual attack: Eve replaces the line with an
isometry that maps each computational signal, jointly with her probe, onto
Bob's three-dimensional receiving space (Bit0, Bit1, NoCount) tensored with
her own d_e-dimensional space. Such an attack is fully described by six probe
kets phi[i][b], one per (Bob outcome i, Alice bit b) pair. Physicality is a
pair of isometry constraints; hiding inside the expected loss rate adds
equal-throughput constraints on the no-count kets, whose strength depends on
the protocol family. Conditioning on Bob's counts rescales the kets by
1/sqrt(eta) and leaves a single real degree of freedom in the no-count
overlap, the purely imaginary deficit i*x.

The second is probabilistic re-send: Eve performs a POVM on each signal and,
per outcome, either forwards a chosen state (possibly only with some
probability) or blocks the round. Unambiguous state discrimination on a B92
pair is the canonical instance, with full-break threshold eta* = 1 - overlap.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .qmath import as_density_operator, inner_product, norm_sq
from .states import FOUR_STATE, SIX_STATE, ProtocolFamily, SignalState, bb84_four_state

# Probe-ket index along Bob's outcome axis.
BIT0, BIT1, NO_COUNT = 0, 1, 2

# Residuals at or below this are treated as satisfied constraints.
ISOMETRY_ATOL = 1e-10
FEASIBILITY_ATOL = 1e-8

_KET_KEYS = {
    (BIT0, 0): "phi_0_b0",
    (BIT1, 0): "phi_1_b0",
    (NO_COUNT, 0): "phi_nc_b0",
    (BIT0, 1): "phi_0_b1",
    (BIT1, 1): "phi_1_b1",
    (NO_COUNT, 1): "phi_nc_b1",
}


class InfeasibleAttackError(ValueError):
    """Raised when probe kets violate a required constraint set."""

    def __init__(self, message: str, residuals: dict[str, float]):
        detail = ", ".join(f"{k}={v:.3e}" for k, v in residuals.items())
        super().__init__(f"{message} ({detail})")
        self.residuals = residuals


@dataclass(frozen=True, eq=False)
class ProbeKets:
    """Six probe kets of an identical individual attack.

    kets has shape (3, 2, d_e), indexed by (Bob outcome, Alice bit). The
    constructor checks shape only; constraint checks are separate, so
    infeasible candidates can be represented and inspected.
    """

    eta: float
    kets: np.ndarray

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"transmittance must lie in [0, 1], got {self.eta}")
        arr = np.ascontiguousarray(np.asarray(self.kets, dtype=complex))
        if arr.ndim != 3 or arr.shape[:2] != (3, 2) or arr.shape[2] < 1:
            raise ValueError(f"kets must have shape (3, 2, d_e), got {arr.shape}")
        arr.flags.writeable = False
        object.__setattr__(self, "kets", arr)

    @property
    def d_e(self) -> int:
        return self.kets.shape[2]

    def ket(self, outcome: int, bit: int) -> np.ndarray:
        return self.kets[outcome, bit]

    def to_dict(self) -> dict:
        kets = {
            key: [[float(z.real), float(z.imag)] for z in self.kets[i, b]]
            for (i, b), key in _KET_KEYS.items()
        }
        return {"eta": self.eta, "d_e": self.d_e, "kets": kets}

    @classmethod
    def from_dict(cls, payload: dict) -> "ProbeKets":
        try:
            eta = float(payload["eta"])
            d_e = int(payload["d_e"])
            raw = payload["kets"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed attack payload: {exc}") from exc
        if not isinstance(raw, dict):
            raise ValueError("attack payload field 'kets' must be an object")
        kets = np.zeros((3, 2, d_e), dtype=complex)
        for (i, b), key in _KET_KEYS.items():
            if key not in raw:
                raise ValueError(f"attack payload missing ket {key!r}")
            entries = raw[key]
            if not isinstance(entries, list) or len(entries) != d_e:
                raise ValueError(f"ket {key!r} must list {d_e} [re, im] pairs")
            for j, pair in enumerate(entries):
                try:
                    re, im = pair
                    kets[i, b, j] = complex(float(re), float(im))
                except (TypeError, ValueError) as exc:
                    raise ValueError(f"ket {key!r} entry {j} is not an [re, im] pair") from exc
        return cls(eta=eta, kets=kets)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "ProbeKets":
        try:
            payload = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValueError(f"attack file is not valid JSON: {exc}") from exc
        return cls.from_dict(payload)


@dataclass(frozen=True)
class IsometryResiduals:
    """Deviations from the two isometry constraints."""

    norm_b0: float
    norm_b1: float
    overlap: float

    def max(self) -> float:
        return max(self.norm_b0, self.norm_b1, self.overlap)

    def as_dict(self) -> dict[str, float]:
        return {
            "isometry_norm_b0": self.norm_b0,
            "isometry_norm_b1": self.norm_b1,
            "isometry_overlap": self.overlap,
        }


@dataclass(frozen=True)
class ThroughputResiduals:
    """Deviations from the equal-throughput conditions on the no-count kets.

    overlap_im is populated for six-state families only; four-state signal
    sets constrain just the real part of the no-count overlap.
    """

    norm_b0: float
    norm_b1: float
    overlap_re: float
    overlap_im: float | None = None

    def max(self) -> float:
        vals = [self.norm_b0, self.norm_b1, self.overlap_re]
        if self.overlap_im is not None:
            vals.append(self.overlap_im)
        return max(vals)

    def as_dict(self) -> dict[str, float]:
        out = {
            "no_count_norm_b0": self.norm_b0,
            "no_count_norm_b1": self.norm_b1,
            "no_count_overlap_re": self.overlap_re,
        }
        if self.overlap_im is not None:
            out["no_count_overlap_im"] = self.overlap_im
        return out


def check_isometry(pk: ProbeKets) -> IsometryResiduals:
    """Residuals of unit norm per input bit and orthogonality between bits."""
    norms = [abs(sum(norm_sq(pk.ket(i, b)) for i in range(3)) - 1.0) for b in (0, 1)]
    overlap = abs(sum(inner_product(pk.ket(i, 0), pk.ket(i, 1)) for i in range(3)))
    return IsometryResiduals(norm_b0=norms[0], norm_b1=norms[1], overlap=overlap)


def is_isometric(pk: ProbeKets, atol: float = ISOMETRY_ATOL) -> bool:
    return check_isometry(pk).max() <= atol


def check_equal_throughput(pk: ProbeKets, family: ProtocolFamily) -> ThroughputResiduals:
    """Residuals of the family's loss-concealment conditions.

    Four-state sets need both no-count kets at squared norm 1-eta and a purely
    imaginary no-count overlap; six-state sets force that overlap to vanish.
    """
    if family.kind not in (FOUR_STATE, SIX_STATE):
        raise ValueError("equal-throughput conditions are defined for BB84 families")
    target = 1.0 - pk.eta
    nc0, nc1 = pk.ket(NO_COUNT, 0), pk.ket(NO_COUNT, 1)
    overlap = inner_product(nc0, nc1)
    return ThroughputResiduals(
        norm_b0=abs(norm_sq(nc0) - target),
        norm_b1=abs(norm_sq(nc1) - target),
        overlap_re=abs(overlap.real),
        overlap_im=abs(overlap.imag) if family.kind == SIX_STATE else None,
    )


def throughput_of(pk: ProbeKets, psi) -> float:
    """Probability that the signal a|0> + b|1> produces a count at Bob.

    The no-count amplitude is linear in the input, so the throughput is
    1 - ||a * phi_nc_b0 + b * phi_nc_b1||^2.
    """
    vec = np.asarray(psi, dtype=complex).reshape(-1)
    if vec.size != 2:
        raise ValueError("signal must be a qubit state vector")
    if abs(norm_sq(vec) - 1.0) > 1e-10:
        raise ValueError("signal must be normalized")
    res = check_isometry(pk)
    if res.max() > FEASIBILITY_ATOL:
        raise InfeasibleAttackError("probe kets are not isometric", res.as_dict())
    combo = vec[0] * pk.ket(NO_COUNT, 0) + vec[1] * pk.ket(NO_COUNT, 1)
    return 1.0 - norm_sq(combo)


@dataclass(frozen=True, eq=False)
class FilteredAttack:
    """Probe kets conditioned on Bob registering a count.

    hatted has shape (2, 2, d_e); the no-count pair survives only through its
    rescaled overlap, deficit = i*x with x real for any four-state-feasible
    attack.
    """

    eta: float
    hatted: np.ndarray
    deficit: complex
    x: float

    def hat(self, outcome: int, bit: int) -> np.ndarray:
        return self.hatted[outcome, bit]


def filter_no_count(pk: ProbeKets, atol: float = FEASIBILITY_ATOL) -> FilteredAttack:
    """Condition a feasible four-state attack on the count events.

    Rejects eta = 0 (nothing to condition on) and any violation of the
    isometry or four-state equal-throughput constraints above atol.
    """
    if pk.eta <= 0.0:
        raise ValueError("filtering requires positive transmittance")
    residuals = check_isometry(pk).as_dict()
    residuals.update(check_equal_throughput(pk, bb84_four_state()).as_dict())
    worst = max(residuals.values())
    if worst > atol:
        raise InfeasibleAttackError("attack violates count-filtering preconditions", residuals)
    scale = 1.0 / math.sqrt(pk.eta)
    hatted = np.ascontiguousarray(pk.kets[:2] * scale)
    hatted.flags.writeable = False
    deficit = inner_product(pk.ket(NO_COUNT, 0), pk.ket(NO_COUNT, 1)) / pk.eta
    return FilteredAttack(eta=pk.eta, hatted=hatted, deficit=deficit, x=float(deficit.imag))


def passive_loss_attack(eta: float, d_e: int = 3) -> ProbeKets:
    """The do-nothing attack: forward faithfully, mark losses orthogonally.

    Satisfies every constraint of both BB84 families at any transmittance and
    produces zero disturbance and zero leakage.
    """
    if d_e < 3:
        raise ValueError("passive attack needs at least three probe dimensions")
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"transmittance must lie in [0, 1], got {eta}")
    kets = np.zeros((3, 2, d_e), dtype=complex)
    kets[BIT0, 0, 0] = math.sqrt(eta)
    kets[BIT1, 1, 0] = math.sqrt(eta)
    kets[NO_COUNT, 0, 1] = math.sqrt(1.0 - eta)
    kets[NO_COUNT, 1, 2] = math.sqrt(1.0 - eta)
    return ProbeKets(eta=eta, kets=kets)


def pure_imaginary_deficit_attack(eta: float, x: float, d_e: int = 4) -> ProbeKets:
    """A four-state-feasible attack whose count-filtered deficit equals i*x.

    Witnesses that the no-count overlap's imaginary part is a genuine degree
    of freedom of the four-state constraint set. Requires
    |x| <= min(1, (1-eta)/eta).
    """
    if d_e < 4:
        raise ValueError("construction needs at least four probe dimensions")
    if not 0.0 < eta < 1.0:
        raise ValueError(f"transmittance must lie in (0, 1), got {eta}")
    limit = min(1.0, (1.0 - eta) / eta)
    if abs(x) > limit:
        raise ValueError(f"|x| must not exceed {limit} at eta={eta}, got {x}")
    kets = np.zeros((3, 2, d_e), dtype=complex)
    kets[BIT0, 0, 0] = math.sqrt(eta)
    kets[BIT0, 1, 0] = -1j * math.sqrt(eta) * x
    kets[BIT1, 1, 1] = math.sqrt(eta * (1.0 - x * x))
    kets[NO_COUNT, 0, 2] = math.sqrt(1.0 - eta)
    kets[NO_COUNT, 1, 2] = 1j * eta * x / math.sqrt(1.0 - eta)
    # Rounding can push the radicand to -ulp when |x| sits on the limit.
    radicand = (1.0 - eta) - eta * eta * x * x / (1.0 - eta)
    kets[NO_COUNT, 1, 3] = math.sqrt(max(0.0, radicand))
    return ProbeKets(eta=eta, kets=kets)


# ---------------------------------------------------------------------------
# Probabilistic re-send attacks
# ---------------------------------------------------------------------------

POVM_ATOL = 1e-10


@dataclass(frozen=True)
class Block:
    """Suppress the round: Bob records a no-count."""


@dataclass(frozen=True, eq=False)
class ResendAction:
    """Forward a chosen state, optionally only with probability send_prob."""

    state: np.ndarray
    send_prob: float = 1.0

    def __post_init__(self):
        mat = as_density_operator(self.state)
        if mat.shape != (2, 2):
            raise ValueError("resend state must be a qubit density operator")
        object.__setattr__(self, "state", mat)
        if not 0.0 <= self.send_prob <= 1.0:
            raise ValueError(f"send probability must lie in [0, 1], got {self.send_prob}")


@dataclass(frozen=True, eq=False)
class PrsAttack:
    """Measure-and-resend strategy: a qubit POVM plus a per-outcome policy."""

    elements: tuple[np.ndarray, ...]
    tags: tuple[str, ...]
    policy: dict[str, "ResendAction | Block"]
    bit_guesses: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if len(self.elements) != len(self.tags) or not self.elements:
            raise ValueError("POVM needs one tag per element")
        if len(set(self.tags)) != len(self.tags):
            raise ValueError("POVM tags must be unique")
        elems = []
        total = np.zeros((2, 2), dtype=complex)
        for tag, element in zip(self.tags, self.elements):
            mat = np.asarray(element, dtype=complex)
            if mat.shape != (2, 2):
                raise ValueError(f"POVM element {tag!r} must act on a qubit")
            if float(np.max(np.abs(mat - mat.conj().T))) > POVM_ATOL:
                raise ValueError(f"POVM element {tag!r} is not Hermitian")
            low = float(np.linalg.eigvalsh(mat).min())
            if low < -POVM_ATOL:
                raise ValueError(f"POVM element {tag!r} has negative eigenvalue {low:.3e}")
            mat = np.ascontiguousarray(mat)
            mat.flags.writeable = False
            elems.append(mat)
            total = total + mat
        if float(np.max(np.abs(total - np.eye(2)))) > POVM_ATOL:
            raise ValueError("POVM elements must sum to the identity")
        object.__setattr__(self, "elements", tuple(elems))
        for tag in self.tags:
            if tag not in self.policy:
                raise ValueError(f"policy missing outcome {tag!r}")
        for tag, bit in self.bit_guesses.items():
            if tag not in self.tags or bit not in (0, 1):
                raise ValueError(f"bad bit guess {tag!r} -> {bit!r}")


def outcome_probabilities(attack: PrsAttack, psi) -> np.ndarray:
    """Born probabilities of each POVM outcome on a pure signal."""
    vec = np.asarray(psi, dtype=complex).reshape(-1)
    if vec.size != 2 or abs(norm_sq(vec) - 1.0) > 1e-10:
        raise ValueError("signal must be a normalized qubit state vector")
    probs = np.array([float(np.real(np.vdot(vec, m @ vec))) for m in attack.elements])
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def apply_prs(attack: PrsAttack, psi, rng: np.random.Generator):
    """One round of the attack: returns (outcome tag, delivered state or None)."""
    probs = outcome_probabilities(attack, psi)
    u = rng.random()
    k = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    k = min(k, len(probs) - 1)
    tag = attack.tags[k]
    action = attack.policy[tag]
    if isinstance(action, Block):
        return tag, None
    if action.send_prob < 1.0 and rng.random() >= action.send_prob:
        return tag, None
    return tag, action.state


@dataclass(frozen=True)
class UsdThresholdReport:
    """Throughput accounting for unambiguous discrimination with re-send."""

    overlap: float
    eta: float
    eta_star: float
    full_break: bool
    send_prob: float
    delivered_fraction: float
    shortfall: float

    def as_dict(self) -> dict:
        return {
            "overlap": self.overlap,
            "eta": self.eta,
            "eta_star": self.eta_star,
            "full_break": self.full_break,
            "send_prob": self.send_prob,
            "delivered_fraction": self.delivered_fraction,
            "shortfall": self.shortfall,
        }


def usd_intercept_resend(pair: tuple[SignalState, SignalState], eta: float):
    """Optimal unambiguous discrimination of a signal pair, with re-send policy.

    Equal priors assumed. The conclusive rate is 1 - overlap, so the attack
    reproduces transmittance eta exactly iff eta <= eta* = 1 - overlap; below
    threshold Eve thins her conclusive deliveries to match eta, above it she
    forwards every conclusive outcome and the report carries the shortfall.

    Returns (PrsAttack, UsdThresholdReport).
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"transmittance must lie in [0, 1], got {eta}")
    first, second = pair
    v0, v1 = first.vector(), second.vector()
    c = abs(inner_product(v0, v1))
    if c > 1.0 - 1e-12:
        raise ValueError("signals are indistinguishable; discrimination is impossible")
    perp0 = np.array([-np.conj(v0[1]), np.conj(v0[0])])
    perp1 = np.array([-np.conj(v1[1]), np.conj(v1[0])])
    scale = 1.0 / (1.0 + c)
    m0 = scale * np.outer(perp1, perp1.conj())
    m1 = scale * np.outer(perp0, perp0.conj())
    m_inc = np.eye(2, dtype=complex) - m0 - m1
    conclusive_rate = 1.0 - c
    eta_star = 1.0 - c
    send_prob = min(1.0, eta / conclusive_rate)
    delivered = conclusive_rate * send_prob
    report = UsdThresholdReport(
        overlap=c,
        eta=eta,
        eta_star=eta_star,
        full_break=eta <= eta_star + 1e-12,
        send_prob=send_prob,
        delivered_fraction=delivered,
        shortfall=max(0.0, eta - delivered),
    )
    attack = PrsAttack(
        elements=(m0, m1, m_inc),
        tags=("conclusive-0", "conclusive-1", "inconclusive"),
        policy={
            "conclusive-0": ResendAction(first.density(), send_prob),
            "conclusive-1": ResendAction(second.density(), send_prob),
            "inconclusive": Block(),
        },
        bit_guesses={"conclusive-0": 0, "conclusive-1": 1},
    )
    return attack, report
