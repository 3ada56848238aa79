"""Dense complex linear algebra for non-normal Hamiltonians.

Provides eigendecomposition with a residual contract, construction of the
Hermitian positive-definite operator Q that renders the right eigenvectors
mutually orthogonal, and inner-product utilities weighted by Q.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import DimensionMismatch, NotDiagonalizable

DEFAULT_RESIDUAL_TOL = 1e-10
DEFAULT_COND_CEILING = 1e12


def as_square_matrix(h) -> np.ndarray:
    """Validate and return a finite square complex matrix."""
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {h.shape}")
    if not np.all(np.isfinite(h)):
        raise ValueError("matrix entries must be finite")
    return h


@dataclass
class SpectralData:
    """Eigenvalues, unit-norm right eigenvectors and (optionally) Q.

    Eigenvalues are sorted by descending imaginary part, ties broken by
    descending real part; ``eigvec_matrix`` columns follow the same order.
    """

    eigenvalues: np.ndarray
    eigvec_matrix: np.ndarray
    cond_estimate: float
    q_op: np.ndarray | None = field(default=None)

    @property
    def dim(self) -> int:
        return self.eigvec_matrix.shape[0]


class InnerProductKind(Enum):
    EUCLIDEAN = "euclidean"
    Q_WEIGHTED = "q_weighted"


@dataclass
class InnerProductTag:
    kind: InnerProductKind
    q_op: np.ndarray | None = None

    @classmethod
    def euclidean(cls) -> "InnerProductTag":
        return cls(InnerProductKind.EUCLIDEAN)

    @classmethod
    def q_weighted(cls, q_op) -> "InnerProductTag":
        q = as_square_matrix(q_op)
        if np.linalg.norm(q - q.conj().T) > 1e-10 * max(np.linalg.norm(q), 1e-300):
            raise ValueError("q_op must be Hermitian")
        return cls(InnerProductKind.Q_WEIGHTED, q)


def eigendecompose(h, tol: float = DEFAULT_RESIDUAL_TOL,
                   cond_ceiling: float = DEFAULT_COND_CEILING) -> SpectralData:
    """Eigendecompose a dense complex matrix.

    Returns unit-norm right eigenvectors with relative residual
    ``||H v - lambda v|| / ||H||`` at most ``tol`` for every pair.
    Raises NotDiagonalizable when the eigenvector matrix condition number
    exceeds ``cond_ceiling`` (e.g. for defective matrices).
    """
    h = as_square_matrix(h)
    lam, p = np.linalg.eig(h)

    # descending Im, ties by descending Re
    order = np.lexsort((-lam.real, -lam.imag))
    lam = lam[order]
    p = p[:, order]
    p = p / np.linalg.norm(p, axis=0, keepdims=True)

    cond = float(np.linalg.cond(p))
    if not np.isfinite(cond) or cond > cond_ceiling:
        raise NotDiagonalizable(
            f"eigenvector matrix condition {cond:.3e} exceeds ceiling {cond_ceiling:.1e}")

    h_norm = np.linalg.norm(h)
    if h_norm > 0.0:
        residual = np.linalg.norm(h @ p - p * lam, axis=0) / h_norm
        worst = float(residual.max())
        if worst > tol:
            raise NotDiagonalizable(
                f"eigenpair residual {worst:.3e} exceeds tolerance {tol:.1e}")

    return SpectralData(eigenvalues=lam, eigvec_matrix=p, cond_estimate=cond)


def construct_q(spectral: SpectralData,
                cond_ceiling: float = DEFAULT_COND_CEILING) -> np.ndarray:
    """Build the Hermitian positive-definite Q with Q = (P P^dag)^{-1}.

    P^dag Q P is then exactly the identity, so the eigenstates are
    orthonormal in the Q-weighted inner product.  Reduces to the identity
    whenever P is unitary (normal Hamiltonian).  The result is also stored
    into ``spectral.q_op``.
    """
    p = spectral.eigvec_matrix
    if spectral.cond_estimate > cond_ceiling:
        raise NotDiagonalizable(
            f"eigenvector condition {spectral.cond_estimate:.3e} above ceiling")
    p_inv = np.linalg.inv(p)
    q = p_inv.conj().T @ p_inv
    q = 0.5 * (q + q.conj().T)  # enforce exact hermiticity against roundoff
    spectral.q_op = q
    return q


def q_inner(u, v, tag: InnerProductTag) -> complex:
    """Inner product <u|v> (Euclidean) or <u|Q|v> (Q-weighted)."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if u.shape != v.shape:
        raise DimensionMismatch(f"shapes {u.shape} and {v.shape} differ")
    if tag.kind is InnerProductKind.EUCLIDEAN:
        return complex(np.vdot(u, v))
    q = tag.q_op
    if q is None or q.shape[0] != u.shape[0]:
        raise DimensionMismatch("q_op missing or of wrong dimension")
    return complex(np.vdot(u, q @ v))


def hermitian_split(h) -> tuple[np.ndarray, np.ndarray]:
    """Split H into Hermitian and anti-Hermitian parts, H = H_h + H_a."""
    h = as_square_matrix(h)
    h_dag = h.conj().T
    h_h = 0.5 * (h + h_dag)
    h_a = 0.5 * (h - h_dag)
    return h_h, h_a


def q_orthonormal_eigenbasis(spectral: SpectralData) -> np.ndarray:
    """Columns rescaled to unit Q-norm: U^dag Q U = I.

    With Q = (P P^dag)^{-1} and unit-Euclidean-norm columns this is exactly
    P, but the rescale keeps the contract under any column scaling.
    """
    if spectral.q_op is None:
        construct_q(spectral)
    p = spectral.eigvec_matrix
    q = spectral.q_op
    norms = np.sqrt(np.real(np.einsum("ij,jk,ki->i", p.conj().T, q, p)))
    return p / norms[np.newaxis, :]


def is_q_hermitian(o, q, rtol: float = 1e-10) -> bool:
    """True when Q O = O^dag Q within relative tolerance."""
    o = as_square_matrix(o)
    q = as_square_matrix(q)
    lhs = q @ o
    rhs = o.conj().T @ q
    scale = max(np.linalg.norm(lhs), np.linalg.norm(rhs), 1e-300)
    return np.linalg.norm(lhs - rhs) <= rtol * scale


def q_hermitian_operator(q, hermitian_seed) -> np.ndarray:
    """Return a Q-Hermitian operator Q^{-1} G from a Hermitian seed G."""
    q = as_square_matrix(q)
    g = as_square_matrix(hermitian_seed)
    g = 0.5 * (g + g.conj().T)
    return np.linalg.solve(q, g)


def matrix_to_json(h) -> str:
    """Serialize a matrix to {dim, entries: [[re, im], ...]} row-major."""
    h = as_square_matrix(h)
    entries = [[float(z.real), float(z.imag)] for z in h.reshape(-1)]
    return json.dumps({"dim": h.shape[0], "entries": entries})


def matrix_from_json(text: str) -> np.ndarray:
    obj = json.loads(text) if isinstance(text, str) else text
    dim = int(obj["dim"])
    entries = obj["entries"]
    if len(entries) != dim * dim:
        raise DimensionMismatch(
            f"expected {dim * dim} entries for dim {dim}, got {len(entries)}")
    flat = np.array([complex(re, im) for re, im in entries])
    return flat.reshape(dim, dim)
