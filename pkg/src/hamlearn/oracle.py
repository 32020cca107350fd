"""Dense 2^n brute-force reference used to check the block simulation."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .errors import OracleSizeError
from .model import HamiltonianSpec, SubspacePair
from .noise import coherent_prep

__all__ = [
    "MAX_QUBITS",
    "pauli_on",
    "dense_hamiltonian",
    "dense_propagator",
    "verify_block_structure",
    "dense_circuit_distribution",
]

MAX_QUBITS = 10

_I = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.diag([1.0, -1.0]).astype(complex)
_PAULI = {"I": _I, "X": _X, "Y": _Y, "Z": _Z}


def pauli_on(n: int, ops: dict[int, str]) -> np.ndarray:
    """Kronecker product with Pauli ``ops[q]`` on qubit q (1-based, leftmost first)."""
    out = np.ones((1, 1), dtype=complex)
    for q in range(1, n + 1):
        out = np.kron(out, _PAULI[ops.get(q, "I")])
    return out


def dense_hamiltonian(spec: HamiltonianSpec, drive: Optional[int]) -> np.ndarray:
    """``a_drive (cos phi X - sin phi Y)_drive + sum_{p<q} c_pq Z_p Z_q``; ``drive=None`` drops the drive."""
    n = spec.n
    if n > MAX_QUBITS:
        raise OracleSizeError(f"dense oracle limited to {MAX_QUBITS} qubits")
    H = np.zeros((2**n, 2**n), dtype=complex)
    for p, q in spec.edges():
        c = spec.coupling(p, q)
        if c:
            H += c * pauli_on(n, {p: "Z", q: "Z"})
    if drive is not None:
        a = spec.drive_amplitude(drive)
        H += a * np.cos(spec.phi) * pauli_on(n, {drive: "X"})
        H -= a * np.sin(spec.phi) * pauli_on(n, {drive: "Y"})
    return H


def dense_propagator(H: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i H t)`` from the Hermitian eigendecomposition."""
    H = np.asarray(H, dtype=complex)
    if np.max(np.abs(H - H.conj().T), initial=0.0) > 1e-10:
        raise ValueError("H is not Hermitian")
    w, V = np.linalg.eigh(H)
    return (V * np.exp(-1j * w * t)) @ V.conj().T


def verify_block_structure(U: np.ndarray, pairs: Sequence[SubspacePair]) -> float:
    """Largest |U[x, y]| with x and y in different pairs (states outside all pairs count as their own block)."""
    dim = U.shape[0]
    label = np.arange(dim) + len(pairs)
    for k, p in enumerate(pairs):
        label[p.m_code] = k
        label[p.n_code] = k
    cross = label[:, None] != label[None, :]
    return float(np.max(np.abs(U) * cross, initial=0.0))


def dense_circuit_distribution(
    spec: HamiltonianSpec,
    pairs: Sequence[SubspacePair],
    d: int,
    T: float,
    omega: float,
    kind: str,
    prep_alpha: Optional[float] = None,
) -> np.ndarray:
    """Full-statevector pipeline: prepare, d x (exp(-i H T), exp(-i omega Z_drive)), Born rule."""
    n = spec.n
    drive = pairs[0].drive
    k = len(pairs)
    if prep_alpha is None:
        base = np.array([1.0, 1.0 if kind == "plus" else 1j], dtype=complex) / np.sqrt(2.0)
    else:
        base = coherent_prep(np.pi / 4, prep_alpha, kind)
    psi = np.zeros(2**n, dtype=complex)
    for p in pairs:
        psi[p.m_code] = base[0] / np.sqrt(k)
        psi[p.n_code] = base[1] / np.sqrt(k)
    U = dense_propagator(dense_hamiltonian(spec, drive), T)
    zdiag = np.diag(dense_propagator(omega * pauli_on(n, {drive: "Z"}), 1.0))
    for _ in range(d):
        psi = zdiag * (U @ psi)
    return np.abs(psi) ** 2
