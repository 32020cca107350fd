"""Exact block-structured simulation of QSPE circuits and multinomial sampling."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .errors import InvalidSelectionError, ModeViolationError
from .model import BlockIntegrals, HamiltonianSpec, SubspacePair, project_block, to_bitstring
from .noise import coherent_prep

__all__ = [
    "MODES",
    "KINDS",
    "ExperimentConfig",
    "SubspaceState",
    "OutcomeDistribution",
    "ShotRecord",
    "make_rng",
    "block_propagator",
    "block_propagators",
    "prepare_state",
    "apply_logical_z",
    "emulated_z_field",
    "global_detuning_diagonal",
    "circuit_amplitudes",
    "run_circuit",
    "sample",
    "transition_probabilities",
]

MODES = ("hybrid", "analog")
KINDS = ("plus", "i")
_SMALL_OMEGA = 1e-8

SeedLike = Union[int, Sequence[int], np.random.Generator, None]


@dataclass(frozen=True)
class ExperimentConfig:
    """QSPE hyper-parameters: cycles ``d``, shots per circuit ``N``, cycle time ``T`` (us)."""

    d: int
    N: int
    T: float
    mode: str = "hybrid"
    seed: int = 0

    def __post_init__(self) -> None:
        if int(self.d) != self.d or self.d < 2:
            raise ValueError("d must be an integer >= 2")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        if not (np.isfinite(self.T) and self.T > 0):
            raise ValueError("T must be positive")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def n_omega(self) -> int:
        return 2 * self.d - 1

    def omegas(self) -> np.ndarray:
        return np.arange(self.n_omega) * np.pi / self.n_omega

    def to_dict(self) -> dict:
        return {"d": self.d, "N": self.N, "T": self.T, "mode": self.mode, "seed": self.seed}


def make_rng(seed: SeedLike) -> np.random.Generator:
    """Counter-based generator keyed by an integer or a tuple ``(seed, *stream_key)``."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        return np.random.Generator(np.random.Philox())
    if isinstance(seed, (int, np.integer)):
        key: tuple[int, ...] = (int(seed),)
    else:
        key = tuple(int(s) for s in seed)
    ss = np.random.SeedSequence(entropy=key[0], spawn_key=key[1:])
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class SubspaceState:
    """State supported on a set of invariant pairs; ``amps[k] = (zero, one)`` amplitudes."""

    pairs: list[SubspacePair]
    amps: np.ndarray

    @property
    def n(self) -> int:
        return self.pairs[0].n

    def norm(self) -> float:
        return float(np.sum(np.abs(self.amps) ** 2))

    def as_dict(self) -> dict[str, complex]:
        out: dict[str, complex] = {}
        for p, (z, o) in zip(self.pairs, self.amps):
            out[p.v_m] = complex(z)
            out[p.v_n] = complex(o)
        return out

    def dense(self) -> np.ndarray:
        vec = np.zeros(2**self.n, dtype=complex)
        for p, (z, o) in zip(self.pairs, self.amps):
            vec[p.m_code] = z
            vec[p.n_code] = o
        return vec


@dataclass
class OutcomeDistribution:
    """Probabilities over integer-coded basis states of ``n`` qubits."""

    n: int
    codes: np.ndarray
    probs: np.ndarray

    def as_dict(self) -> dict[str, float]:
        return {to_bitstring(int(c), self.n): float(p) for c, p in zip(self.codes, self.probs)}

    def dense(self) -> np.ndarray:
        out = np.zeros(2**self.n)
        np.add.at(out, self.codes, self.probs)
        return out


@dataclass
class ShotRecord:
    """Outcome counts of one circuit keyed by bitstring."""

    counts: dict[str, int]
    total: int = field(default=-1)

    def __post_init__(self) -> None:
        s = sum(self.counts.values())
        if self.total < 0:
            self.total = s
        if any(v < 0 for v in self.counts.values()):
            raise ValueError("counts must be nonnegative")
        if s != self.total:
            raise ValueError(f"counts sum to {s}, expected {self.total}")

    def count(self, bitstring: str) -> int:
        return self.counts.get(bitstring, 0)

    def dense(self, n: int) -> np.ndarray:
        out = np.zeros(2**n, dtype=np.int64)
        for b, v in self.counts.items():
            out[int(b, 2)] += v
        return out

    @classmethod
    def from_dense(cls, counts: np.ndarray, n: int) -> "ShotRecord":
        counts = np.asarray(counts)
        nz = np.flatnonzero(counts)
        return cls({to_bitstring(int(c), n): int(counts[c]) for c in nz}, int(counts.sum()))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bitstring", "count"])
        for b in sorted(self.counts):
            w.writerow([b, self.counts[b]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ShotRecord":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [h.strip() for h in rows[0]] != ["bitstring", "count"]:
            raise ValueError("expected header 'bitstring,count'")
        counts: dict[str, int] = {}
        for row in rows[1:]:
            if not row:
                continue
            counts[row[0].strip()] = counts.get(row[0].strip(), 0) + int(row[1])
        return cls(counts)


def block_propagators(A, B, C=0.0, phi=0.0) -> np.ndarray:
    """Stacked block propagators ``exp(-i C) exp(-i (A (cos phi X - sin phi Y) + B Z))``.

    Inputs broadcast against each other; the result has shape ``broadcast + (2, 2)``.
    """
    A, B, C, phi = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (A, B, C, phi)))
    w = np.hypot(A, B)
    small = w < _SMALL_OMEGA
    ws = np.where(small, 1.0, w)
    sinc = np.where(small, 1.0 - w**2 / 6.0, np.sin(ws) / ws)
    cw = np.cos(w)
    off = -1j * sinc * A
    U = np.empty(A.shape + (2, 2), dtype=complex)
    U[..., 0, 0] = cw - 1j * sinc * B
    U[..., 1, 1] = cw + 1j * sinc * B
    U[..., 0, 1] = off * np.exp(1j * phi)
    U[..., 1, 0] = off * np.exp(-1j * phi)
    return U * np.exp(-1j * C)[..., None, None]


def block_propagator(block: BlockIntegrals, include_common_phase: bool = False) -> np.ndarray:
    """2x2 propagator of one block; the common phase ``exp(-i C)`` is optional."""
    C = block.C if include_common_phase else 0.0
    return block_propagators(block.A, block.B, C, block.phi)


def _check_pairs(pairs: Sequence[SubspacePair]) -> None:
    if not pairs:
        raise InvalidSelectionError("no subspaces given")
    seen: set[str] = set()
    for p in pairs:
        for b in (p.v_m, p.v_n):
            if b in seen:
                raise InvalidSelectionError(f"bitstring {b} appears in more than one pair")
            seen.add(b)
    if len({p.n for p in pairs}) != 1:
        raise InvalidSelectionError("pairs have different qubit counts")


def _initial_amps(k: int, kind: str, prep_alpha: Optional[float]) -> np.ndarray:
    if prep_alpha is None:
        one = {"plus": 1.0, "i": 1j}.get(kind)
        if one is None:
            raise ValueError(f"unknown preparation kind {kind!r}")
        base = np.array([1.0, one], dtype=complex) / np.sqrt(2.0)
    else:
        base = coherent_prep(np.pi / 4, prep_alpha, kind)
    return np.tile(base / np.sqrt(k), (k, 1))


def prepare_state(
    pairs: Sequence[SubspacePair], kind: str, mode: str = "hybrid", prep_alpha: Optional[float] = None
) -> SubspaceState:
    """Equal superposition of logical plus (or i) states over ``pairs``."""
    _check_pairs(pairs)
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if mode == "analog" and len(pairs) != 1:
        raise ModeViolationError("analog mode prepares exactly one subspace")
    return SubspaceState(list(pairs), _initial_amps(len(pairs), kind, prep_alpha))


def _coupling_energy(spec: HamiltonianSpec, code: int) -> float:
    n = spec.n
    bits = np.array([(code >> (n - q)) & 1 for q in range(1, n + 1)])
    z = 1 - 2 * bits
    return float(z @ np.triu(spec.c, 1) @ z)


def emulated_z_field(spec: HamiltonianSpec, pair: SubspacePair, omega: float, t: float = 1.0) -> float:
    """Z field b for which ``exp(-i t (b Z_drive + sum c ZZ))`` acts as Z_L(omega) on ``pair``.

    Requires the true couplings.  The relative phase between v_n and v_m is
    ``t (2 b + L_plus - L_minus)``, set equal to ``2 omega``.
    """
    lp = _coupling_energy(spec, pair.m_code)
    lm = _coupling_energy(spec, pair.n_code)
    return omega / t - (lp - lm) / 2.0


def apply_logical_z(
    state: SubspaceState,
    omega: float,
    mode: str = "hybrid",
    spec: Optional[HamiltonianSpec] = None,
    emulate: bool = False,
    t: float = 1.0,
) -> SubspaceState:
    """Logical ``exp(-i omega Z)`` on every active subspace.

    In analog mode with ``emulate`` the rotation is generated by the diagonal
    Hamiltonian ``b Z_drive + sum c ZZ`` for time ``t``; it matches the ideal
    gate up to a common phase.
    """
    if mode == "analog" and len(state.pairs) != 1:
        raise ModeViolationError("analog logical Z targets exactly one subspace")
    amps = state.amps.copy()
    if mode == "analog" and emulate:
        if spec is None:
            raise ValueError("emulated analog Z needs the Hamiltonian")
        pair = state.pairs[0]
        b = emulated_z_field(spec, pair, omega, t)
        amps[0, 0] *= np.exp(-1j * t * (b + _coupling_energy(spec, pair.m_code)))
        amps[0, 1] *= np.exp(-1j * t * (-b + _coupling_energy(spec, pair.n_code)))
    else:
        amps[:, 0] *= np.exp(-1j * omega)
        amps[:, 1] *= np.exp(1j * omega)
    return SubspaceState(state.pairs, amps)


def global_detuning_diagonal(n: int, c: float) -> np.ndarray:
    """Diagonal of ``exp(-i c sum_q Z_q)`` in the computational basis."""
    codes = np.arange(2**n)
    ones = np.array([bin(x).count("1") for x in codes])
    return np.exp(-1j * c * (n - 2 * ones))


def circuit_amplitudes(A, B, C, phi, omegas, d: int, amps0: np.ndarray) -> np.ndarray:
    """Final amplitudes after ``d`` cycles of (block propagator, Z(omega)).

    ``A, B, C, phi`` broadcast to shape ``(M, k)`` with M the number of omegas;
    ``amps0`` has shape ``(k, 2)``.  Returns shape ``(M, k, 2)``.
    """
    omegas = np.asarray(omegas, dtype=float)
    U = block_propagators(A, B, C, phi)
    U = np.broadcast_to(U, (omegas.size,) + U.shape[-3:]) if U.ndim < 4 else U
    z = np.stack([np.exp(-1j * omegas), np.exp(1j * omegas)], axis=-1)
    W = z[:, None, :, None] * U
    Wd = np.linalg.matrix_power(W, d)
    return np.einsum("mkab,kb->mka", Wd, amps0)


def run_circuit(
    spec: HamiltonianSpec,
    pairs: Sequence[SubspacePair],
    config: ExperimentConfig,
    omega: float,
    kind: str,
    prep_alpha: Optional[float] = None,
) -> OutcomeDistribution:
    """Exact Born distribution of one QSPE circuit at logical-Z angle ``omega``."""
    state = prepare_state(pairs, kind, config.mode, prep_alpha)
    blocks = [project_block(spec, p, config.T) for p in pairs]
    A = np.array([b.A for b in blocks])
    B = np.array([b.B for b in blocks])
    C = np.array([b.C for b in blocks])
    out = circuit_amplitudes(A, B, C, spec.phi, [omega], config.d, state.amps)[0]
    codes = np.array([[p.m_code, p.n_code] for p in pairs]).reshape(-1)
    return OutcomeDistribution(spec.n, codes, (np.abs(out) ** 2).reshape(-1))


def sample(dist: OutcomeDistribution | Mapping[str, float], N: int, seed: SeedLike) -> ShotRecord:
    """Draw ``N`` shots from ``dist``."""
    if isinstance(dist, OutcomeDistribution):
        labels = [to_bitstring(int(c), dist.n) for c in dist.codes]
        p = np.asarray(dist.probs, dtype=float)
    else:
        labels = list(dist)
        p = np.array([dist[k] for k in labels], dtype=float)
    if abs(p.sum() - 1.0) > 1e-9 or np.any(p < -1e-15):
        raise ValueError("distribution must be nonnegative and sum to 1")
    p = np.clip(p, 0.0, None)
    counts = make_rng(seed).multinomial(N, p / p.sum())
    out: dict[str, int] = {}
    for lab, c in zip(labels, counts):
        if c:
            out[lab] = out.get(lab, 0) + int(c)
    return ShotRecord(out, int(N))


def transition_probabilities(record: ShotRecord, pairs: Iterable[SubspacePair], rescale: int = 1) -> np.ndarray:
    """Rescaled frequency of each pair's logical zero, ``rescale * count(v_m) / N``."""
    return np.array([rescale * record.count(p.v_m) / record.total for p in pairs])
