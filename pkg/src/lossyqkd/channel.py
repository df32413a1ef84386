"""Lossy transmission and detector models.

The line is a pure-loss channel of transmittance eta: a qubit survives with
probability eta and is otherwise replaced by the no-count state, extending
the output space to dimension three with index order (Bit0, Bit1, NoCount).
Detector inefficiency is a separate thinning applied to bit outcomes after
everything else.
"""

from __future__ import annotations

import numpy as np

from .qmath import as_density_operator
from .states import BobOutcome


def _check_probability(value: float, name: str) -> float:
    p = float(value)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return p


def apply_loss_map(rho, eta: float) -> np.ndarray:
    """Embed a qubit density operator into Bob's 3-dim space under loss.

    Output is eta * rho on the qubit block plus (1 - eta) on the no-count
    diagonal entry; trace and positivity are preserved exactly.
    """
    eta = _check_probability(eta, "transmittance")
    mat = as_density_operator(rho)
    if mat.shape != (2, 2):
        raise ValueError("loss map acts on qubit density operators")
    out = np.zeros((3, 3), dtype=complex)
    out[:2, :2] = eta * mat
    out[2, 2] = 1.0 - eta
    return out


def sample_transmission(eta: float, rng: np.random.Generator, size: int | None = None):
    """Bernoulli survival draw(s): True means the signal reached Bob."""
    eta = _check_probability(eta, "transmittance")
    if size is None:
        return bool(rng.random() < eta)
    return rng.random(size) < eta


def detector_thin(outcomes, p_det: float, rng: np.random.Generator):
    """Degrade bit outcomes to NoCount with probability 1 - p_det each.

    NoCount outcomes pass through unchanged. Accepts a scalar outcome or an
    integer array; arrays are not modified in place.
    """
    p_det = _check_probability(p_det, "detector efficiency")
    arr = np.asarray(outcomes)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr).copy()
    is_bit = arr != int(BobOutcome.NO_COUNT)
    lost = rng.random(arr.shape) >= p_det
    arr[is_bit & lost] = int(BobOutcome.NO_COUNT)
    if scalar:
        return BobOutcome(int(arr[0]))
    return arr
