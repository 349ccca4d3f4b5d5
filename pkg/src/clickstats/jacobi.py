"""Cyclic Jacobi eigensolver for small real symmetric matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

MAX_DIM = 64
MAX_SWEEPS = 100


def jacobi_eigh(A, tol: float = 1e-13) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and eigenvectors (columns) of a symmetric matrix.

    Sweeps over all (p, q) pairs until the off-diagonal Frobenius norm falls
    below ``tol * max(1, ||A||_F)``.
    """
    A = np.array(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError("matrix must be square")
    n = A.shape[0]
    if n > MAX_DIM:
        raise ValidationError(f"dimension {n} exceeds {MAX_DIM}")
    norm = max(1.0, float(np.linalg.norm(A)))
    if np.max(np.abs(A - A.T), initial=0.0) > 1e-10 * norm:
        raise ValidationError("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    V = np.eye(n)
    target = tol * norm
    offdiag = ~np.eye(n, dtype=bool)
    for _ in range(MAX_SWEEPS):
        if np.linalg.norm(A[offdiag]) < target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.hypot(t, 1.0)
                s = t * c
                col_p, col_q = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p, row_q = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = A[q, p] = 0.0
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    else:
        raise RuntimeError("Jacobi iteration did not converge")
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def _sign_fix(v: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(v) > 1e-12)
    if nz.size and v[nz[0]] < 0:
        return -v
    return v


@dataclass(frozen=True)
class MinEig:
    value: float
    vector: np.ndarray
    degenerate: bool = False

    def __iter__(self):
        yield self.value
        yield self.vector


def min_eig_sym(A, gap: float = 1e-12) -> MinEig:
    """Smallest eigenvalue with a unit eigenvector, first nonzero entry positive.

    If other eigenvalues lie within ``gap`` of the minimum the eigenvector is
    not unique.  We then return the normalized projection of the first unit
    vector e_i (lowest i) with a nonzero projection onto that eigenspace,
    which is the eigenvector with the largest leading components, and set
    ``degenerate``.
    """
    w, V = jacobi_eigh(A)
    scale = max(1.0, float(np.max(np.abs(w), initial=0.0)))
    cluster = np.flatnonzero(w - w[0] <= gap * scale)
    if cluster.size == 1:
        return MinEig(float(w[0]), _sign_fix(V[:, 0]))
    Q = V[:, cluster]
    vec = V[:, 0]
    for i in range(Q.shape[0]):
        u = Q @ Q[i, :]
        nrm = np.linalg.norm(u)
        if nrm > 1e-8:
            vec = u / nrm
            break
    return MinEig(float(w[0]), _sign_fix(vec), True)
