"""Qubit signal states and protocol families.

Alice's signals live in a two-dimensional Hilbert space spanned by the
computational basis (|0>, |1>). Bob's receiving space carries one extra
dimension for the no-count event, indexed in the fixed order
(Bit0, Bit1, NoCount).

Three families are provided: four-state BB84 (Z and X bases), six-state BB84
(Z, X, and Y bases), and B92 built on two nonorthogonal signals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .qmath import inner_product

NORMALIZATION_ATOL = 1e-12

FOUR_STATE = "bb84-4"
SIX_STATE = "bb84-6"
B92 = "b92"


class BobOutcome(IntEnum):
    """Detector outcome on Bob's three-dimensional receiving space."""

    BIT0 = 0
    BIT1 = 1
    NO_COUNT = 2


OUTCOME_NAMES = {BobOutcome.BIT0: "Bit0", BobOutcome.BIT1: "Bit1", BobOutcome.NO_COUNT: "NoCount"}


@dataclass(frozen=True)
class SignalState:
    """A pure qubit signal with a protocol-level label."""

    label: str
    amplitudes: tuple[complex, complex]

    def __post_init__(self):
        a, b = self.amplitudes
        dev = abs(abs(a) ** 2 + abs(b) ** 2 - 1.0)
        if dev > NORMALIZATION_ATOL:
            raise ValueError(f"state {self.label!r} not normalized (deviation {dev:.3e})")

    def vector(self) -> np.ndarray:
        return np.array(self.amplitudes, dtype=complex)

    def density(self) -> np.ndarray:
        v = self.vector()
        return np.outer(v, v.conj())


_SQ2 = 1.0 / math.sqrt(2.0)

Z0 = SignalState("Z0", (1.0, 0.0))
Z1 = SignalState("Z1", (0.0, 1.0))
XP = SignalState("Xp", (_SQ2, _SQ2))
XM = SignalState("Xm", (_SQ2, -_SQ2))
YL = SignalState("YL", (_SQ2, _SQ2 * 1j))
YR = SignalState("YR", (_SQ2, -_SQ2 * 1j))


def bloch_vector(state: SignalState) -> tuple[float, float, float]:
    """Cartesian Bloch coordinates (x, y, z) of a pure qubit state."""
    a, b = state.amplitudes
    cross = np.conj(a) * b
    return (float(2.0 * cross.real), float(2.0 * cross.imag), float(abs(a) ** 2 - abs(b) ** 2))


def orthogonal_partner(state: SignalState, label: str) -> SignalState:
    """The unique (up to phase) state orthogonal to the given one."""
    a, b = state.amplitudes
    return SignalState(label, (-np.conj(b), np.conj(a)))


@dataclass(frozen=True)
class ProtocolFamily:
    """A prepare-and-measure protocol: signal set plus Bob's measurement bases.

    Each basis is an orthonormal pair; basis_names and bases are aligned. The
    signal order is the canonical serialization order for reports.
    """

    kind: str
    basis_names: tuple[str, ...]
    bases: tuple[tuple[SignalState, SignalState], ...]
    signals: tuple[SignalState, ...]

    def __post_init__(self):
        for name, (u, w) in zip(self.basis_names, self.bases):
            if abs(inner_product(u.vector(), w.vector())) > NORMALIZATION_ATOL:
                raise ValueError(f"basis {name!r} is not orthonormal")


def signal_states(family: ProtocolFamily) -> tuple[SignalState, ...]:
    """Signal list in canonical order."""
    return family.signals


def bb84_four_state() -> ProtocolFamily:
    return ProtocolFamily(
        kind=FOUR_STATE,
        basis_names=("Z", "X"),
        bases=((Z0, Z1), (XP, XM)),
        signals=(Z0, Z1, XP, XM),
    )


def bb84_six_state() -> ProtocolFamily:
    return ProtocolFamily(
        kind=SIX_STATE,
        basis_names=("Z", "X", "Y"),
        bases=((Z0, Z1), (XP, XM), (YL, YR)),
        signals=(Z0, Z1, XP, XM, YL, YR),
    )


def b92(pair: tuple[SignalState, SignalState] | None = None) -> ProtocolFamily:
    """B92 on two nonorthogonal signals; defaults to the (Z0, Xp) pair.

    Bob measures, uniformly at random, the basis built around one of the two
    signals; the outcome orthogonal to that signal excludes it and is the
    conclusive event.
    """
    if pair is None:
        pair = (Z0, XP)
    first, second = pair
    overlap = abs(inner_product(first.vector(), second.vector()))
    if overlap < NORMALIZATION_ATOL:
        raise ValueError("B92 signals must be nonorthogonal")
    if overlap > 1.0 - NORMALIZATION_ATOL:
        raise ValueError("B92 signals must be distinct")
    if (first, second) == (Z0, XP):
        bases = ((Z0, Z1), (XP, XM))
        names = ("Z", "X")
    else:
        bases = (
            (first, orthogonal_partner(first, first.label + "_perp")),
            (second, orthogonal_partner(second, second.label + "_perp")),
        )
        names = ("A", "B")
    return ProtocolFamily(kind=B92, basis_names=names, bases=bases, signals=(first, second))


def b92_overlap(family: ProtocolFamily) -> float:
    """|<psi_a|psi_b>| of a B92 family's signal pair."""
    if family.kind != B92:
        raise ValueError("overlap is defined for B92 families only")
    a, b = family.signals
    return abs(inner_product(a.vector(), b.vector()))
