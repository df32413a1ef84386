"""Disturbance and leakage metrics of count-filtered attacks.

All quantities condition on Bob registering a count and on matched bases.
For a measurement basis (u, w) the filtered probe kets transform linearly,
t_i = u[0] * hat_i_b0 + u[1] * hat_i_b1, so each basis yields an error rate
and a pair of Eve states; the tradeoff point aggregates them across the
family's bases, reporting both a Holevo leakage bound and the optimal
single-shot guessing probability.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .attack import FEASIBILITY_ATOL, FilteredAttack, InfeasibleAttackError, ProbeKets, check_equal_throughput, filter_no_count
from .qmath import helstrom_probability, holevo_bound, norm_sq
from .states import FOUR_STATE, SIX_STATE, ProtocolFamily

_SQ2 = 1.0 / math.sqrt(2.0)

# Measurement bases on the signal qubit, as pairs of state vectors.
_BASIS_VECTORS = {
    "Z": (np.array([1.0, 0.0], dtype=complex), np.array([0.0, 1.0], dtype=complex)),
    "X": (np.array([_SQ2, _SQ2], dtype=complex), np.array([_SQ2, -_SQ2], dtype=complex)),
    "Y": (np.array([_SQ2, _SQ2 * 1j], dtype=complex), np.array([_SQ2, -_SQ2 * 1j], dtype=complex)),
}


def _require_basis(fa: FilteredAttack, basis: str) -> tuple[np.ndarray, np.ndarray]:
    if basis not in _BASIS_VECTORS:
        raise ValueError(f"unknown basis {basis!r}; expected one of Z, X, Y")
    if basis == "Y" and abs(fa.deficit) > FEASIBILITY_ATOL:
        raise ValueError(
            "Y-basis statistics require a vanishing no-count overlap; "
            f"this attack has deficit {fa.deficit:.3e}"
        )
    return _BASIS_VECTORS[basis]


def _transformed(fa: FilteredAttack, vec: np.ndarray) -> np.ndarray:
    """Filtered kets for the signal vec[0]|0> + vec[1]|1>, shape (2, d_e)."""
    return vec[0] * fa.hatted[:, 0, :] + vec[1] * fa.hatted[:, 1, :]


def qber(fa: FilteredAttack, basis: str) -> float:
    """Matched-basis error rate Bob sees in the given basis."""
    u, w = _require_basis(fa, basis)
    t_key0 = _transformed(fa, u)
    t_key1 = _transformed(fa, w)
    wrong0 = norm_sq(np.conj(w[0]) * t_key0[0] + np.conj(w[1]) * t_key0[1])
    wrong1 = norm_sq(np.conj(u[0]) * t_key1[0] + np.conj(u[1]) * t_key1[1])
    return 0.5 * (wrong0 + wrong1)


def eve_states(fa: FilteredAttack, basis: str) -> tuple[np.ndarray, np.ndarray]:
    """Eve's conditional states for key bit 0 and 1 in the given basis.

    Each state is a rank <= 2 mixture of the transformed kets. Traces deviate
    from one only at the attack's residual level and are renormalized.
    """
    u, w = _require_basis(fa, basis)
    out = []
    for vec in (u, w):
        t = _transformed(fa, vec)
        rho = np.outer(t[0], t[0].conj()) + np.outer(t[1], t[1].conj())
        trace = float(np.real(np.trace(rho)))
        if abs(trace - 1.0) > 1e-6:
            raise InfeasibleAttackError(
                f"Eve state in basis {basis} is not normalized", {"trace_deviation": abs(trace - 1.0)}
            )
        out.append(rho / trace)
    return out[0], out[1]


@dataclass(frozen=True)
class TradeoffPoint:
    """Disturbance/leakage summary of one attack against one family."""

    qber_by_basis: dict[str, float]
    d_avg: float
    i_holevo: float
    p_guess: float
    x: float

    def to_dict(self) -> dict:
        out = {f"qber_{name.lower()}": value for name, value in self.qber_by_basis.items()}
        out.update(
            {"d_avg": self.d_avg, "i_holevo": self.i_holevo, "p_guess": self.p_guess, "x": self.x}
        )
        return out


def tradeoff_point(pk: ProbeKets, family: ProtocolFamily) -> TradeoffPoint:
    """Per-basis disturbance plus basis-averaged leakage for a feasible attack."""
    if family.kind not in (FOUR_STATE, SIX_STATE):
        raise ValueError("tradeoff points are defined for BB84 families")
    fa = filter_no_count(pk)
    if family.kind == SIX_STATE:
        res = check_equal_throughput(pk, family)
        if res.max() > FEASIBILITY_ATOL:
            raise InfeasibleAttackError("attack is not six-state feasible", res.as_dict())
    qbers: dict[str, float] = {}
    chis: list[float] = []
    guesses: list[float] = []
    for name in family.basis_names:
        qbers[name] = qber(fa, name)
        # eve_states output is Hermitian PSD with unit trace by construction.
        rho0, rho1 = eve_states(fa, name)
        chis.append(holevo_bound(rho0, rho1, 0.5, validate=False))
        guesses.append(helstrom_probability(rho0, rho1, 0.5, validate=False))
    return TradeoffPoint(
        qber_by_basis=qbers,
        d_avg=float(np.mean(list(qbers.values()))),
        i_holevo=float(np.mean(chis)),
        p_guess=float(np.mean(guesses)),
        x=fa.x,
    )
