"""Dense states, channels and superoperators over a computational/leakage
direct sum.

Superoperators use the column-stacking convention throughout: ``vec(A)``
stacks the columns of ``A`` so that ``vec(A X B) = (B^T kron A) vec(X)``.
Computational basis states occupy the first ``d1`` indices, leakage states
the trailing ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy.stats import unitary_group

HERM_TOL = 1e-9
CP_TOL = 1e-8


class ValidationError(ValueError):
    """Raised when an input violates a physical or dimensional constraint."""


# ---------------------------------------------------------------------------
# Partitions


@dataclass(frozen=True)
class SubspacePartition:
    """Direct sum of a ``d1``-dimensional computational subspace and one or
    more leakage subspaces ``Y_1 ... Y_m`` of dimensions ``leak_dims``."""

    d1: int
    leak_dims: tuple[int, ...] = (1,)

    def __post_init__(self):
        if isinstance(self.leak_dims, int):
            object.__setattr__(self, "leak_dims", (self.leak_dims,))
        else:
            object.__setattr__(self, "leak_dims", tuple(int(x) for x in self.leak_dims))
        if int(self.d1) < 1:
            raise ValidationError(f"computational dimension must be >= 1, got {self.d1}")
        if any(x < 1 for x in self.leak_dims):
            raise ValidationError(f"leakage dimensions must be >= 1, got {self.leak_dims}")

    @classmethod
    def qutrit(cls) -> "SubspacePartition":
        return cls(2, (1,))

    @classmethod
    def no_leakage(cls, d1: int) -> "SubspacePartition":
        return cls(d1, ())

    @property
    def d2(self) -> int:
        return sum(self.leak_dims)

    @property
    def dim(self) -> int:
        return self.d1 + self.d2

    def _diag_projector(self, start: int, stop: int) -> np.ndarray:
        p = np.zeros((self.dim, self.dim))
        p[np.arange(start, stop), np.arange(start, stop)] = 1.0
        return p

    @cached_property
    def p_comp(self) -> np.ndarray:
        return self._diag_projector(0, self.d1)

    @cached_property
    def p_leak(self) -> np.ndarray:
        return self._diag_projector(self.d1, self.dim)

    @cached_property
    def leak_projectors(self) -> tuple[np.ndarray, ...]:
        out = []
        start = self.d1
        for dj in self.leak_dims:
            out.append(self._diag_projector(start, start + dj))
            start += dj
        return tuple(out)

    @property
    def comp_indices(self) -> np.ndarray:
        return np.arange(self.d1)

    @property
    def leak_indices(self) -> np.ndarray:
        return np.arange(self.d1, self.dim)

    def merged(self) -> "SubspacePartition":
        """Same space with all leakage parts merged into one."""
        return SubspacePartition(self.d1, (self.d2,) if self.d2 else ())


# ---------------------------------------------------------------------------
# Vectorization


def vec(mat: np.ndarray) -> np.ndarray:
    """Column-stacking vectorization."""
    return np.asarray(mat).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    if dim is None:
        dim = int(round(np.sqrt(v.size)))
    return v.reshape((dim, dim), order="F")


def sandwich_superop(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Superoperator of ``X -> left @ X @ right``."""
    return np.kron(np.asarray(right).T, np.asarray(left))


def hamiltonian_superop(h: np.ndarray) -> np.ndarray:
    """Generator of ``rho -> -i[H, rho]``."""
    eye = np.eye(h.shape[0])
    return -1j * (np.kron(eye, h) - np.kron(h.T, eye))


def dissipator_superop(a: np.ndarray, rate: float = 1.0) -> np.ndarray:
    """Generator of ``rate * (A rho A^dag - {A^dag A, rho}/2)``."""
    a = np.asarray(a, dtype=complex)
    eye = np.eye(a.shape[0])
    ada = a.conj().T @ a
    return rate * (np.kron(a.conj(), a) - 0.5 * np.kron(eye, ada) - 0.5 * np.kron(ada.T, eye))


# ---------------------------------------------------------------------------
# Channels


@dataclass(frozen=True, eq=False)
class Channel:
    """A linear map on operators over ``partition``'s full space, stored as a
    column-stacking superoperator."""

    sop: np.ndarray
    partition: SubspacePartition = field(default_factory=SubspacePartition.qutrit)

    def __post_init__(self):
        sop = np.array(self.sop, dtype=complex)
        d = self.partition.dim
        if sop.shape != (d * d, d * d):
            raise ValidationError(
                f"superoperator shape {sop.shape} does not match partition dimension {d}"
            )
        sop.setflags(write=False)
        object.__setattr__(self, "sop", sop)

    @property
    def dim(self) -> int:
        return self.partition.dim

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return apply(self, rho)

    def __matmul__(self, other: "Channel") -> "Channel":
        return compose(self, other)

    def adjoint(self) -> "Channel":
        return Channel(self.sop.conj().T, self.partition)

    def allclose(self, other: "Channel", atol: float = 1e-10) -> bool:
        return np.allclose(self.sop, other.sop, atol=atol, rtol=0)


def identity_channel(part: SubspacePartition) -> Channel:
    return Channel(np.eye(part.dim**2), part)


def _check_same_space(a: Channel, b: Channel):
    if a.partition != b.partition:
        raise ValidationError(
            f"channels act on different partitions: {a.partition} vs {b.partition}"
        )


def compose(second: Channel, first: Channel) -> Channel:
    """``second`` after ``first``."""
    _check_same_space(second, first)
    return Channel(second.sop @ first.sop, second.partition)


def power(chan: Channel, m: int) -> Channel:
    if m < 0:
        raise ValidationError(f"channel power must be non-negative, got {m}")
    return Channel(np.linalg.matrix_power(chan.sop, int(m)), chan.partition)


def apply(chan: Channel, rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho)
    if rho.shape != (chan.dim, chan.dim):
        raise ValidationError(f"state shape {rho.shape} does not match channel dimension {chan.dim}")
    return unvec(chan.sop @ vec(rho), chan.dim)


def superop_of_unitary(u: np.ndarray, part: SubspacePartition | None = None, tol: float = HERM_TOL) -> Channel:
    """Channel ``rho -> U rho U^dag`` with superoperator ``conj(U) kron U``."""
    u = np.asarray(u, dtype=complex)
    if part is None:
        part = SubspacePartition.qutrit() if u.shape[0] == 3 else SubspacePartition.no_leakage(u.shape[0])
    dev = np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0]))
    if dev > tol:
        raise ValidationError(f"matrix is not unitary: ||U^dag U - I||_F = {dev:.3e}")
    return Channel(np.kron(u.conj(), u), part)


def superop_from_kraus(kraus: Sequence[np.ndarray], part: SubspacePartition) -> Channel:
    return Channel(sum(np.kron(np.asarray(k).conj(), np.asarray(k)) for k in kraus), part)


def superop_from_map(fn, part: SubspacePartition) -> Channel:
    """Tabulate a linear map given as a python callable on matrices."""
    d = part.dim
    cols = []
    for j in range(d):
        for i in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, j] = 1.0
            cols.append(vec(fn(e)))
    # column index i + j*d is vec(|i><j|), which the loop order above produces
    return Channel(np.array(cols).T, part)


def choi_matrix(chan: Channel) -> np.ndarray:
    """Choi matrix ``sum_ij |i><j| kron E(|i><j|)``."""
    d = chan.dim
    s4 = chan.sop.reshape(d, d, d, d)  # [b, a, j, i] -> E(|i><j|)[a, b]
    return s4.transpose(3, 1, 2, 0).reshape(d * d, d * d)


@dataclass(frozen=True)
class CptpReport:
    tp_defect: float
    min_choi_eig: float
    ok: bool


def check_cptp(chan: Channel, tol: float = CP_TOL) -> CptpReport:
    """Trace-preservation defect ``||S^dag vec(I) - vec(I)||`` and the
    smallest eigenvalue of the Hermitian part of the Choi matrix."""
    d = chan.dim
    vid = vec(np.eye(d))
    tp_defect = float(np.linalg.norm(chan.sop.conj().T @ vid - vid))
    choi = choi_matrix(chan)
    min_eig = float(np.linalg.eigvalsh(0.5 * (choi + choi.conj().T)).min())
    return CptpReport(tp_defect, min_eig, tp_defect <= tol and min_eig >= -tol)


# ---------------------------------------------------------------------------
# States and norms


def validate_density(rho: np.ndarray, tol: float = HERM_TOL) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValidationError(f"density matrix must be square, got shape {rho.shape}")
    herm = np.linalg.norm(rho - rho.conj().T)
    if herm > tol:
        raise ValidationError(f"density matrix is not Hermitian (defect {herm:.3e})")
    tr = np.trace(rho)
    if abs(tr - 1) > tol:
        raise ValidationError(f"density matrix trace is {tr.real:.12g}, expected 1")
    min_eig = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
    if min_eig < -tol:
        raise ValidationError(f"density matrix has negative eigenvalue {min_eig:.3e}")
    return rho


def basis_state(dim: int, index: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def trace_norm(m: np.ndarray) -> float:
    """Schatten 1-norm (sum of singular values)."""
    return float(np.linalg.svd(np.asarray(m), compute_uv=False).sum())


def haar_random_state(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unit vector via a normalized complex Gaussian."""
    if dim < 1:
        raise ValidationError(f"dimension must be >= 1, got {dim}")
    z = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return z / np.linalg.norm(z)


def haar_random_states(dim: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` Haar states as rows of an ``(n, dim)`` array."""
    z = rng.standard_normal((n, dim)) + 1j * rng.standard_normal((n, dim))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def haar_random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    if dim == 1:
        return np.exp(2j * np.pi * rng.random()).reshape(1, 1)
    return unitary_group.rvs(dim, random_state=rng)


def embed_block(mat: np.ndarray, part: SubspacePartition, block: int) -> np.ndarray:
    """Place a square matrix on the computational (``block=1``) or leakage
    (``block=2``) diagonal block of the full space, zero elsewhere."""
    out = np.zeros((part.dim, part.dim), dtype=complex)
    idx = part.comp_indices if block == 1 else part.leak_indices
    out[np.ix_(idx, idx)] = mat
    return out


def direct_sum(u1: np.ndarray, u2: np.ndarray) -> np.ndarray:
    d1, d2 = u1.shape[0], u2.shape[0]
    out = np.zeros((d1 + d2, d1 + d2), dtype=complex)
    out[:d1, :d1] = u1
    out[d1:, d1:] = u2
    return out


def two_qutrit_partition() -> tuple[SubspacePartition, np.ndarray]:
    """Partition of two qutrits into the two-qubit space and the leakage
    parts ``1_2 x 1_1``, ``1_1 x 1_2`` and ``1_2 x 1_2``.

    Returns ``(partition, P)`` where the permutation ``P`` maps the product
    basis ``|a b>`` (index ``3a + b``) to the partition ordering, so an
    operator ``A`` on the product space becomes ``P A P^T``.
    """
    comp = [3 * a + b for a in (0, 1) for b in (0, 1)]
    y1 = [3 * 2 + b for b in (0, 1)]
    y2 = [3 * a + 2 for a in (0, 1)]
    order = comp + y1 + y2 + [8]
    perm = np.zeros((9, 9))
    perm[np.arange(9), order] = 1.0
    return SubspacePartition(4, (2, 2, 1)), perm
