"""Dense complex linear algebra and information metrics for small quantum systems.

State vectors are 1-D complex numpy arrays, density operators are square
complex matrices. All dimensions in this package are small (2 to 8), so dense
eigendecompositions are used throughout.
"""

from __future__ import annotations

import numpy as np

# Default tolerances. Every public check accepts an override.
HERMITIAN_ATOL = 1e-12
TRACE_ATOL = 1e-12
# Eigenvalues of a density operator in [-PSD_ATOL, 0) are clamped to zero;
# anything more negative is a genuine positivity violation.
PSD_ATOL = 1e-12


def as_state_vector(x) -> np.ndarray:
    """Coerce to a 1-D complex array, rejecting anything else."""
    vec = np.asarray(x, dtype=complex)
    if vec.ndim != 1 or vec.size == 0:
        raise ValueError("state vector must be a nonempty 1-D array")
    return vec


def inner_product(x, y) -> complex:
    """Hermitian inner product <x|y>, conjugate-linear in the first argument."""
    xv = as_state_vector(x)
    yv = as_state_vector(y)
    if xv.shape != yv.shape:
        raise ValueError(f"dimension mismatch: {xv.size} vs {yv.size}")
    return complex(np.vdot(xv, yv))


def norm_sq(x) -> float:
    """Squared 2-norm <x|x>."""
    xv = as_state_vector(x)
    return float(np.real(np.vdot(xv, xv)))


def as_density_operator(rho, *, hermitian_atol: float = HERMITIAN_ATOL,
                        trace_atol: float = TRACE_ATOL,
                        psd_atol: float = PSD_ATOL) -> np.ndarray:
    """Validate and return a density operator as a complex matrix.

    Enforces Hermiticity, unit trace, and positive semidefiniteness up to the
    given tolerances. Raises ValueError on any violation.
    """
    mat = np.asarray(rho, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] == 0:
        raise ValueError("density operator must be a nonempty square matrix")
    herm_dev = float(np.max(np.abs(mat - mat.conj().T)))
    if herm_dev > hermitian_atol:
        raise ValueError(f"density operator not Hermitian (deviation {herm_dev:.3e})")
    trace_dev = abs(np.trace(mat) - 1.0)
    if trace_dev > trace_atol:
        raise ValueError(f"density operator trace differs from 1 by {trace_dev:.3e}")
    evals = np.linalg.eigvalsh(mat)
    if float(evals.min()) < -psd_atol:
        raise ValueError(f"density operator has negative eigenvalue {evals.min():.3e}")
    return mat


def density_eigenvalues(rho, *, psd_atol: float = PSD_ATOL, validate: bool = True) -> np.ndarray:
    """Eigenvalues of a density operator, with tiny negatives clamped to zero."""
    mat = as_density_operator(rho, psd_atol=psd_atol) if validate else np.asarray(rho, dtype=complex)
    evals = np.linalg.eigvalsh(mat)
    return np.where((evals < 0.0) & (evals >= -psd_atol), 0.0, evals)


def vn_entropy(rho, *, psd_atol: float = PSD_ATOL, validate: bool = True) -> float:
    """Von Neumann entropy in bits, with the convention 0*log2(0) = 0."""
    evals = density_eigenvalues(rho, psd_atol=psd_atol, validate=validate)
    positive = evals[evals > 0.0]
    return float(-np.sum(positive * np.log2(positive)))


def holevo_bound(rho0, rho1, p0: float, *, validate: bool = True) -> float:
    """Holevo quantity of the binary ensemble {(p0, rho0), (1-p0, rho1)} in bits.

    validate=False skips the density-operator checks for callers that
    construct their inputs to be valid; the entropy eigenvalues are still
    clamped against rounding noise.
    """
    if not 0.0 <= p0 <= 1.0:
        raise ValueError(f"prior must lie in [0, 1], got {p0}")
    a = as_density_operator(rho0) if validate else np.asarray(rho0, dtype=complex)
    b = as_density_operator(rho1) if validate else np.asarray(rho1, dtype=complex)
    if a.shape != b.shape:
        raise ValueError("ensemble states must share a dimension")
    mixed = p0 * a + (1.0 - p0) * b
    chi = (
        vn_entropy(mixed, validate=False)
        - p0 * vn_entropy(a, validate=False)
        - (1.0 - p0) * vn_entropy(b, validate=False)
    )
    # Concavity guarantees chi >= 0; clamp rounding noise.
    return max(chi, 0.0)


def trace_norm_hermitian(op) -> float:
    """Trace norm of a Hermitian matrix (sum of absolute eigenvalues)."""
    mat = np.asarray(op, dtype=complex)
    return float(np.sum(np.abs(np.linalg.eigvalsh(mat))))


def helstrom_probability(rho0, rho1, p0: float, *, validate: bool = True) -> float:
    """Optimal guessing probability for the binary ensemble {(p0, rho0), (1-p0, rho1)}."""
    if not 0.0 <= p0 <= 1.0:
        raise ValueError(f"prior must lie in [0, 1], got {p0}")
    a = as_density_operator(rho0) if validate else np.asarray(rho0, dtype=complex)
    b = as_density_operator(rho1) if validate else np.asarray(rho1, dtype=complex)
    if a.shape != b.shape:
        raise ValueError("ensemble states must share a dimension")
    p = 0.5 + 0.5 * trace_norm_hermitian(p0 * a - (1.0 - p0) * b)
    return min(p, 1.0)
