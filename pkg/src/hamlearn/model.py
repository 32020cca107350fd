"""Parallel-learnable ZZ Hamiltonians, their invariant subspaces and recovery matrices.

Qubits are labelled 1..n, qubit 1 being the leftmost character of a bitstring and
the most significant bit of its integer code.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    InvalidSelectionError,
    InvalidSpecError,
    NotBlockDiagonalError,
    SingularSelectionError,
)

__all__ = [
    "HamiltonianSpec",
    "SubspacePair",
    "BlockIntegrals",
    "CoefficientMatrix",
    "bit",
    "to_bitstring",
    "from_bitstring",
    "enumerate_subspaces",
    "make_pair",
    "project_block",
    "select_subspaces",
    "coefficient_matrix",
    "canonical_matrix",
    "exact_rank",
    "exact_det",
    "block_decompose",
]


def bit(code: int, q: int, n: int) -> int:
    """Value of qubit ``q`` (1-based) in integer basis state ``code``."""
    return (code >> (n - q)) & 1


def to_bitstring(code: int, n: int) -> str:
    return format(code, f"0{n}b")


def from_bitstring(s: str) -> int:
    if not s or set(s) - {"0", "1"}:
        raise InvalidSelectionError(f"not a bitstring: {s!r}")
    return int(s, 2)


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    """X-driven all-to-all ZZ Hamiltonian.

    Parameters
    ----------
    a : array_like, shape (n,)
        X-drive coefficient of each qubit (rad/us).
    c : array_like, shape (n, n)
        Symmetric coupling matrix with zero diagonal (rad/us).
    phi : float
        Drive phase (rad); the drive term is ``a (cos(phi) X - sin(phi) Y)``.
    """

    a: np.ndarray
    c: np.ndarray
    phi: float = 0.0

    def __post_init__(self) -> None:
        a = np.array(self.a, dtype=float).reshape(-1)
        c = np.array(self.c, dtype=float)
        n = a.size
        if n < 2:
            raise InvalidSpecError("need at least two qubits")
        if c.shape != (n, n):
            raise InvalidSpecError(f"coupling matrix must be {n}x{n}, got {c.shape}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(c)) and np.isfinite(self.phi)):
            raise InvalidSpecError("non-finite Hamiltonian coefficient")
        if np.any(np.diag(c) != 0):
            raise InvalidSpecError("coupling matrix must have zero diagonal")
        if not np.array_equal(c, c.T):
            raise InvalidSpecError("coupling matrix must be symmetric")
        a.flags.writeable = False
        c.flags.writeable = False
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "phi", float(self.phi))

    @property
    def n(self) -> int:
        return self.a.size

    def coupling(self, p: int, q: int) -> float:
        """c_pq with 1-based labels."""
        return float(self.c[p - 1, q - 1])

    def drive_amplitude(self, q: int) -> float:
        return float(self.a[q - 1])

    def edges(self) -> list[tuple[int, int]]:
        return list(combinations(range(1, self.n + 1), 2))

    def with_drive(self, a: Sequence[float] | np.ndarray) -> "HamiltonianSpec":
        return HamiltonianSpec(a=np.asarray(a, dtype=float), c=self.c, phi=self.phi)

    @classmethod
    def from_couplings(
        cls, n: int, a: float | Sequence[float], couplings: dict[tuple[int, int], float], phi: float = 0.0
    ) -> "HamiltonianSpec":
        """Build from a ``{(p, q): c_pq}`` map with 1-based labels."""
        c = np.zeros((n, n))
        for (p, q), val in couplings.items():
            if p == q:
                raise InvalidSpecError("self-coupling not allowed")
            c[p - 1, q - 1] = c[q - 1, p - 1] = val
        a_arr = np.full(n, float(a)) if np.isscalar(a) else np.asarray(a, dtype=float)
        return cls(a=a_arr, c=c, phi=phi)

    def to_dict(self) -> dict:
        return {"n": self.n, "a": self.a.tolist(), "c": self.c.tolist(), "phi": self.phi}

    @classmethod
    def from_dict(cls, data: dict) -> "HamiltonianSpec":
        spec = cls(a=data["a"], c=data["c"], phi=data.get("phi", 0.0))
        if "n" in data and int(data["n"]) != spec.n:
            raise InvalidSpecError(f"n={data['n']} does not match coefficient length {spec.n}")
        return spec


@dataclass(frozen=True)
class SubspacePair:
    """Invariant two-dimensional subspace spanned by ``v_m`` (logical zero) and ``v_n``."""

    drive: int
    v_m: str
    v_n: str
    lam: dict[tuple[int, int], int] = field(compare=False, repr=False)

    @property
    def n(self) -> int:
        return len(self.v_m)

    @property
    def m_code(self) -> int:
        return int(self.v_m, 2)

    @property
    def n_code(self) -> int:
        return int(self.v_n, 2)

    def lam_on(self, code: int) -> dict[tuple[int, int], int]:
        """ZZ eigenvalues on an arbitrary basis state."""
        n = self.n
        return {
            (p, q): 1 if bit(code, p, n) == bit(code, q, n) else -1
            for p, q in combinations(range(1, n + 1), 2)
        }


def make_pair(v_m: str | int, drive: int, n: int | None = None) -> SubspacePair:
    """Pair whose logical zero is ``v_m``; ``v_n`` flips the drive bit."""
    if isinstance(v_m, str):
        n = len(v_m)
        code = from_bitstring(v_m)
    else:
        if n is None:
            raise InvalidSelectionError("n is required for an integer logical state")
        code = int(v_m)
    if not 1 <= drive <= n:
        raise InvalidSelectionError(f"drive {drive} outside 1..{n}")
    if bit(code, drive, n):
        raise InvalidSelectionError("logical zero must have the drive bit equal to 0")
    other = code | (1 << (n - drive))
    lam = {
        (p, q): 1 if bit(code, p, n) == bit(code, q, n) else -1
        for p, q in combinations(range(1, n + 1), 2)
    }
    return SubspacePair(drive=drive, v_m=to_bitstring(code, n), v_n=to_bitstring(other, n), lam=lam)


def _n_of(spec_or_n: HamiltonianSpec | int) -> int:
    return spec_or_n.n if isinstance(spec_or_n, HamiltonianSpec) else int(spec_or_n)


def enumerate_subspaces(spec: HamiltonianSpec | int, drive: int) -> list[SubspacePair]:
    """All 2^(n-1) invariant pairs of the Hamiltonian driven on ``drive``, ordered by v_m."""
    n = _n_of(spec)
    if not 1 <= drive <= n:
        raise InvalidSelectionError(f"drive {drive} outside 1..{n}")
    mask = 1 << (n - drive)
    return [make_pair(code, drive, n) for code in range(2**n) if not code & mask]


@dataclass(frozen=True)
class BlockIntegrals:
    """Time-integrated content of one 2x2 block, ``[[C+B, A e^{i phi}], [A e^{-i phi}, C-B]]``."""

    A: float
    B: float
    C: float
    T: float
    phi: float = 0.0


def project_block(spec: HamiltonianSpec, pair: SubspacePair, T: float) -> BlockIntegrals:
    """Restrict the drive-``pair.drive`` Hamiltonian to ``pair`` and integrate over ``T``."""
    if T <= 0:
        raise ValueError("evolution time must be positive")
    if pair.n != spec.n:
        raise InvalidSelectionError("pair and spec have different qubit counts")
    i = pair.drive
    B = 0.0
    C = 0.0
    for (p, q), lam in pair.lam.items():
        val = lam * spec.coupling(p, q)
        if i in (p, q):
            B += val
        else:
            C += val
    return BlockIntegrals(A=spec.drive_amplitude(i) * T, B=B * T, C=C * T, T=T, phi=spec.phi)


def select_subspaces(n: int, drive: int, count: int) -> list[SubspacePair]:
    """Canonical linearly independent subspace set for ``drive``.

    The all-zero logical state comes first, then single-one logical states at
    positions after ``drive + 1`` and finally positions before ``drive``.  With
    this order the first ``count`` rows restricted to the couplings c_(drive, j),
    j > drive, form an invertible matrix, which is what the round-by-round
    recovery needs.
    """
    if not 1 <= drive <= n:
        raise InvalidSelectionError(f"drive {drive} outside 1..{n}")
    if not 1 <= count <= n - 1:
        raise InvalidSelectionError(f"count must be in 1..{n - 1}, got {count}")
    positions = list(range(drive + 2, n + 1)) + list(range(1, drive))
    codes = [0] + [1 << (n - k) for k in positions]
    return [make_pair(code, drive, n) for code in codes[:count]]


@dataclass(frozen=True, eq=False)
class CoefficientMatrix:
    """±1 matrix relating per-subspace B_k / T to couplings c_(drive, j)."""

    rows: tuple[str, ...]
    cols: tuple[tuple[int, int], ...]
    entries: np.ndarray

    @property
    def rank(self) -> int:
        return exact_rank(self.entries)

    def det(self) -> int:
        return exact_det(self.entries)


def exact_rank(m: np.ndarray) -> int:
    import sympy

    return int(sympy.Matrix(np.asarray(m, dtype=np.int64).tolist()).rank())


def exact_det(m: np.ndarray) -> int:
    import sympy

    m = np.asarray(m, dtype=np.int64)
    if m.shape[0] != m.shape[1]:
        raise ValueError("determinant needs a square matrix")
    return int(sympy.Matrix(m.tolist()).det())


def coefficient_matrix(
    pairs: Sequence[SubspacePair], drive: int, columns: Iterable[int] | None = None
) -> CoefficientMatrix:
    """Rows are ``pairs``, columns the couplings (drive, j) for j in ``columns``.

    ``columns`` defaults to every j != drive.  Raises ``SingularSelectionError``
    unless the matrix has full rank min(rows, cols).
    """
    if not pairs:
        raise InvalidSelectionError("no subspaces selected")
    if any(p.drive != drive for p in pairs):
        raise InvalidSelectionError("all pairs must share the drive qubit")
    n = pairs[0].n
    if columns is None:
        columns = [j for j in range(1, n + 1) if j != drive]
    cols = tuple((drive, j) for j in columns)
    entries = np.array(
        [[p.lam[tuple(sorted(col))] for col in cols] for p in pairs], dtype=np.int64
    )
    cm = CoefficientMatrix(rows=tuple(p.v_m for p in pairs), cols=cols, entries=entries)
    if cm.rank < min(entries.shape):
        raise SingularSelectionError(
            f"selection of {len(pairs)} subspaces has rank {cm.rank} < {min(entries.shape)}"
        )
    return cm


def canonical_matrix(n: int, drive: int = 1) -> CoefficientMatrix:
    """The (n-1)x(n-1) canonical recovery matrix W_s."""
    return coefficient_matrix(select_subspaces(n, drive, n - 1), drive)


def block_decompose(H: np.ndarray, U: np.ndarray, tol: float = 1e-10) -> list[np.ndarray]:
    """Return the consecutive 2x2 diagonal blocks of ``U^dagger H U``."""
    H = np.asarray(H, dtype=complex)
    U = np.asarray(U, dtype=complex)
    dim = H.shape[0]
    if H.shape != (dim, dim) or U.shape != (dim, dim) or dim % 2:
        raise ValueError("H and U must be square with matching even dimension")
    if np.max(np.abs(H - H.conj().T)) > 1e-10:
        raise ValueError("H is not Hermitian")
    if np.max(np.abs(U.conj().T @ U - np.eye(dim))) > 1e-10:
        raise ValueError("U is not unitary")
    M = U.conj().T @ H @ U
    mask = np.kron(np.eye(dim // 2, dtype=bool), np.ones((2, 2), dtype=bool))
    off = np.where(mask, 0.0, np.abs(M))
    r, c = np.unravel_index(np.argmax(off), off.shape)
    if off[r, c] > tol:
        raise NotBlockDiagonalError(
            f"entry ({r}, {c}) has magnitude {off[r, c]:.3e} outside the 2x2 blocks",
            int(r),
            int(c),
            float(off[r, c]),
        )
    return [M[k : k + 2, k : k + 2].copy() for k in range(0, dim, 2)]
