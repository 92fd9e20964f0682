"""Vectorised SU(2) algebra on quaternion arrays.

An element ``q = (q0, qx, qy, qz)`` represents ``q0*I - i*(q . sigma)``.
All functions broadcast over leading axes.
"""

import numpy as np

PAULI = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)


def evolution(wz, wx, t):
    """Propagator of H = wz*Iz + wx*Ix (rad/s) for time t."""
    wz, wx, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (wz, wx, t)))
    w = np.hypot(wz, wx)
    half = 0.5 * w * t
    s = np.sin(half)
    safe = np.where(w > 0, w, 1.0)
    q = np.empty(w.shape + (4,))
    q[..., 0] = np.cos(half)
    q[..., 1] = np.where(w > 0, s * wx / safe, 0.0)
    q[..., 2] = 0.0
    q[..., 3] = np.where(w > 0, s * wz / safe, 0.0)
    return q


def mul(p, q):
    """Product p @ q."""
    p0, pv = p[..., 0], p[..., 1:]
    q0, qv = q[..., 0], q[..., 1:]
    out = np.empty(np.broadcast_shapes(p.shape, q.shape))
    out[..., 0] = p0 * q0 - np.sum(pv * qv, axis=-1)
    out[..., 1:] = p0[..., None] * qv + q0[..., None] * pv + np.cross(pv, qv)
    return out


def angle_axis(q):
    """Return (phi, n) with q = cos(phi) I - i sin(phi) n.sigma and phi in [0, pi]."""
    phi = np.arccos(np.clip(q[..., 0], -1.0, 1.0))
    norm = np.linalg.norm(q[..., 1:], axis=-1)
    n = np.zeros(q.shape[:-1] + (3,))
    n[..., 2] = 1.0
    ok = norm > 1e-15
    n[ok] = q[ok][..., 1:] / norm[ok][..., None]
    return phi, n


def power(q, k):
    """q**k for integer k (broadcast)."""
    phi, n = angle_axis(q)
    k = np.asarray(k)
    out = np.empty(np.broadcast_shapes(q.shape, k.shape + (4,)))
    out[..., 0] = np.cos(k * phi)
    out[..., 1:] = np.sin(k * phi)[..., None] * n
    return out


def overlap(p, q):
    """Re Tr(p^dagger q) / 2, which is exact for SU(2) elements."""
    return np.sum(p * q, axis=-1)


def to_matrix(q):
    q = np.asarray(q)
    eye = np.eye(2)
    return q[..., 0, None, None] * eye - 1j * np.einsum("...k,kij->...ij", q[..., 1:], PAULI)


def from_matrix(u):
    """Quaternion of a 2x2 unitary after removing its global phase to land in SU(2)."""
    u = np.asarray(u, dtype=complex)
    det = np.linalg.det(u)
    u = u / np.sqrt(det)[..., None, None]
    q = np.empty(u.shape[:-2] + (4,))
    q[..., 0] = np.real(np.trace(u, axis1=-2, axis2=-1)) / 2
    for k in range(3):
        q[..., k + 1] = np.real(1j * np.einsum("...ij,ji->...", u, PAULI[k])) / 2
    return q


def rz(angle):
    """Quaternion of exp(-i angle sigma_z / 2)."""
    angle = np.asarray(angle, dtype=float)
    q = np.zeros(angle.shape + (4,))
    q[..., 0] = np.cos(angle / 2)
    q[..., 3] = np.sin(angle / 2)
    return q


def rotation(axis, angle):
    """Quaternion of exp(-i angle n.sigma / 2)."""
    axis = np.asarray(axis, dtype=float)
    angle = np.asarray(angle, dtype=float)
    q = np.empty(np.broadcast_shapes(axis.shape[:-1], angle.shape) + (4,))
    q[..., 0] = np.cos(angle / 2)
    q[..., 1:] = np.sin(angle / 2)[..., None] * axis
    return q
