"""Jones-calculus primitives for polarization transport.

Conventions used throughout the package:

- A Jones vector is a length-2 complex ndarray ``(h, v)``.
- A Jones matrix is a 2x2 complex ndarray acting on Jones vectors from the
  left. Functions broadcast over leading axes, so stacks of shape
  ``(..., 2, 2)`` work everywhere.
- Reciprocal elements (fibers, modulators) act as ``transpose(M)`` on a
  backward pass. Faraday rotators are non-reciprocal: in the fixed lab frame
  the same rotation matrix applies in both directions.
- A mirror is the identity matrix by convention; the sign bookkeeping of
  reflection is absorbed into the Faraday-mirror matrix.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError

# Faraday mirror: 45-degree rotator, mirror, 45-degree rotator again.
# Maps every polarization state onto the state orthogonal to its phase
# conjugate: <conj(v), M_FM v> = 0 identically.
_FARADAY_MIRROR = np.array([[0.0, -1.0], [1.0, 0.0]], dtype=complex)

HORIZONTAL = np.array([1.0, 0.0], dtype=complex)
VERTICAL = np.array([0.0, 1.0], dtype=complex)


def coupler_scatter(t: float) -> np.ndarray:
    """Scattering matrix [[t, i*r], [i*r, t]] of a lossless 2x2 coupler, r = sqrt(1 - t^2)."""
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"coupler transmission t={t!r} outside [0, 1]")
    r = float(np.sqrt(1.0 - t * t))
    return np.array([[t, 1j * r], [1j * r, t]], dtype=complex)


def faraday_mirror_matrix() -> np.ndarray:
    """Round-trip matrix [[0, -1], [1, 0]] of a Faraday mirror."""
    return _FARADAY_MIRROR.copy()


def faraday_rotator_matrix(theta_rad: float) -> np.ndarray:
    """Rotation by ``theta_rad``; identical for both propagation directions."""
    c = np.cos(theta_rad)
    s = np.sin(theta_rad)
    return np.array([[c, -s], [s, c]], dtype=complex)


def backward_matrix(m: np.ndarray) -> np.ndarray:
    """Matrix applied on the reverse pass of a reciprocal element: the transpose."""
    return np.swapaxes(m, -1, -2)


def roundtrip_operator(b: np.ndarray) -> np.ndarray:
    """transpose(B) @ M_FM @ B for a one-way transport matrix B.

    Equals det(B) * M_FM for every 2x2 B, which is why a go-and-return pass
    over a Faraday mirror cancels arbitrary fiber birefringence up to a
    scalar. Broadcasts over stacked inputs.
    """
    bt = np.swapaxes(b, -1, -2)
    return bt @ (_FARADAY_MIRROR @ b)


def modulator_matrix(phase_rad: float, delta_rad: float = 0.0, gamma: float = 1.0) -> np.ndarray:
    """diag(e^{i phi}, gamma e^{i(phi + delta)}): phase shift with polarization dependence.

    ``delta_rad`` is the differential phase between polarization axes and
    ``gamma`` the differential amplitude transmission of the slow axis.
    """
    if not 0.0 <= gamma <= 1.0:
        raise DomainError(f"modulator gamma={gamma!r} outside [0, 1]")
    return np.array(
        [
            [np.exp(1j * phase_rad), 0.0],
            [0.0, gamma * np.exp(1j * (phase_rad + delta_rad))],
        ],
        dtype=complex,
    )


def haar_random_unitary(rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Haar-distributed 2x2 unitaries from an explicit parametrization.

    U = e^{i alpha} [[ e^{i psi} cos(th), e^{i chi} sin(th)],
                     [-e^{-i chi} sin(th), e^{-i psi} cos(th)]]
    with alpha, psi, chi uniform on [0, 2pi) and cos^2(th) uniform on [0, 1].
    Returns shape (2, 2) for ``size=None``, else (size, 2, 2).
    """
    n = 1 if size is None else int(size)
    alpha, psi, chi = (rng.uniform(0.0, 2.0 * np.pi, n) for _ in range(3))
    theta = np.arcsin(np.sqrt(rng.uniform(0.0, 1.0, n)))
    c, s = np.cos(theta), np.sin(theta)
    u = np.empty((n, 2, 2), dtype=complex)
    u[:, 0, 0] = np.exp(1j * psi) * c
    u[:, 0, 1] = np.exp(1j * chi) * s
    u[:, 1, 0] = -np.exp(-1j * chi) * s
    u[:, 1, 1] = np.exp(-1j * psi) * c
    u *= np.exp(1j * alpha)[:, None, None]
    return u[0] if size is None else u


def det2(m: np.ndarray) -> np.ndarray | complex:
    """Determinant of 2x2 matrices, broadcasting over leading axes."""
    d = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    return complex(d) if d.ndim == 0 else d


def unitarity_defect(m: np.ndarray) -> float:
    """Largest absolute entry of conj(M).T @ M - I over the whole stack."""
    mt = np.swapaxes(m, -1, -2).conj()
    eye = np.eye(2, dtype=complex)
    return float(np.max(np.abs(mt @ m - eye)))


def is_unitary(m: np.ndarray, tol: float = 1e-12) -> bool:
    """True when every matrix in the stack is unitary within ``tol``."""
    return unitarity_defect(m) <= tol


def largest_singular_value(m: np.ndarray) -> float:
    """Largest singular value over the stack; lossy elements must stay <= 1."""
    return float(np.max(np.linalg.svd(m, compute_uv=False)))
