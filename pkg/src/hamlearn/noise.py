"""Error channels applied along the simulated pipeline, and their mitigations."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import MitigationWarning, SingularReadoutError
from .model import HamiltonianSpec

__all__ = [
    "NoiseConfig",
    "depolarize",
    "depolarize_distribution",
    "coherent_prep",
    "readout_matrix",
    "confusion_matrix",
    "apply_readout",
    "apply_readout_local",
    "mitigate",
    "mitigate_local",
    "drift",
]


@dataclass(frozen=True)
class NoiseConfig:
    """Noise sources to simulate; ``None`` disables a source.

    ``drift_schedule`` optionally maps a circuit index to a relative drive shift
    and overrides ``drift_gamma`` circuit by circuit.
    """

    depol_alpha: Optional[float] = None
    prep_alpha: Optional[float] = None
    readout: Optional[tuple[float, float]] = None
    drift_gamma: Optional[float] = None
    drift_schedule: Optional[Callable[[int], float]] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.depol_alpha is not None and not 0.0 <= self.depol_alpha <= 1.0:
            raise ValueError("depol_alpha must lie in [0, 1]")
        if self.prep_alpha is not None and not abs(2 * self.prep_alpha) < np.pi / 2:
            raise ValueError("prep_alpha must satisfy |2 alpha| < pi/2")
        if self.readout is not None:
            pl, pa = self.readout
            if not (0.0 <= pl <= 1.0 and 0.0 <= pa <= 1.0):
                raise ValueError("readout probabilities must lie in [0, 1]")
            object.__setattr__(self, "readout", (float(pl), float(pa)))
        if self.drift_gamma is not None and not np.isfinite(self.drift_gamma):
            raise ValueError("drift_gamma must be finite")

    @property
    def is_noiseless(self) -> bool:
        return (
            self.depol_alpha is None
            and self.prep_alpha is None
            and self.readout is None
            and self.drift_gamma is None
            and self.drift_schedule is None
        )

    def to_dict(self) -> dict:
        return {
            "depol_alpha": self.depol_alpha,
            "prep_alpha": self.prep_alpha,
            "readout": list(self.readout) if self.readout is not None else None,
            "drift_gamma": self.drift_gamma,
        }

    @classmethod
    def from_dict(cls, data: Optional[dict]) -> "NoiseConfig":
        data = data or {}
        ro = data.get("readout")
        return cls(
            depol_alpha=data.get("depol_alpha"),
            prep_alpha=data.get("prep_alpha"),
            readout=tuple(ro) if ro is not None else None,
            drift_gamma=data.get("drift_gamma"),
        )


def depolarize(p, alpha: float):
    """Depolarized transition probability ``alpha p + (1 - alpha)/4``."""
    return alpha * np.asarray(p, dtype=float) + (1.0 - alpha) / 4.0


def depolarize_distribution(
    probs: np.ndarray, zero_codes: np.ndarray, alpha: float
) -> np.ndarray:
    """Depolarize a full outcome distribution whose active logical zeros are ``zero_codes``.

    Each of the k active subspaces has logical-zero probability p_k / k, where
    p_k is its standard transition probability.  The channel maps that to
    ``depolarize(p_k, alpha) / k`` and spreads the remaining mass of the white
    part uniformly over all other outcomes, so the result stays normalized.
    The last axis of ``probs`` indexes basis states.
    """
    probs = np.asarray(probs, dtype=float)
    dim = probs.shape[-1]
    k = len(zero_codes)
    out = alpha * probs
    others = np.ones(dim, dtype=bool)
    others[zero_codes] = False
    out[..., zero_codes] += (1.0 - alpha) / (4.0 * k)
    if others.any():
        out[..., others] += 0.75 * (1.0 - alpha) / others.sum()
    else:
        out[..., zero_codes] += 0.75 * (1.0 - alpha) / k
    return out


def coherent_prep(theta_p: float = np.pi / 4, alpha: float = 0.0, kind: str = "plus") -> np.ndarray:
    """Two amplitudes (logical zero, logical one) after a miscalibrated prep pulse.

    The plus-kind pulse over-rotates, ``(cos(theta_p + alpha), sin(theta_p + alpha))``;
    the i-kind pulse under-rotates, ``(cos(theta_p - alpha), i sin(theta_p - alpha))``.
    """
    if kind == "plus":
        return np.array([np.cos(theta_p + alpha), np.sin(theta_p + alpha)], dtype=complex)
    if kind == "i":
        return np.array([np.cos(theta_p - alpha), 1j * np.sin(theta_p - alpha)], dtype=complex)
    raise ValueError(f"unknown preparation kind {kind!r}")


def readout_matrix(p_loss: float, p_anti: float) -> np.ndarray:
    """Single-qubit confusion matrix, rows true state, columns observed state."""
    r = np.array([[1.0 - p_loss, p_loss], [p_anti, 1.0 - p_anti]])
    if abs(np.linalg.det(r)) < 1e-14:
        raise SingularReadoutError("P_loss + P_anti = 1 makes readout non-invertible")
    return r


def confusion_matrix(n: int, p_loss: float, p_anti: float) -> np.ndarray:
    """Dense 2^n x 2^n row-stochastic confusion matrix for independent qubits."""
    r = readout_matrix(p_loss, p_anti)
    out = np.ones((1, 1))
    for _ in range(n):
        out = np.kron(out, r)
    return out


def apply_readout(dist: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Observed distribution ``q = R^T p``."""
    return np.asarray(R).T @ np.asarray(dist, dtype=float)


def _apply_each_qubit(vec: np.ndarray, m: np.ndarray, n: int) -> np.ndarray:
    # contract m (2x2) with every qubit axis of vec; leading axes are batch dims
    lead = vec.shape[:-1]
    t = vec.reshape(lead + (2,) * n)
    nb = len(lead)
    for q in range(n):
        t = np.moveaxis(np.tensordot(t, m, axes=([nb + q], [0])), -1, nb + q)
    return t.reshape(lead + (2**n,))


def apply_readout_local(dist: np.ndarray, p_loss: float, p_anti: float, n: int) -> np.ndarray:
    """Same as ``apply_readout`` with the tensor-product matrix, without forming it."""
    return _apply_each_qubit(np.asarray(dist, dtype=float), readout_matrix(p_loss, p_anti), n)


def _clip(p: np.ndarray, clip: bool, stats: Optional[dict]) -> np.ndarray:
    if not clip:
        return p
    neg = p < 0
    n_neg = int(neg.sum())
    if n_neg:
        p = np.where(neg, 0.0, p)
        p = p / p.sum(axis=-1, keepdims=True)
        if stats is not None:
            stats["clipped"] = stats.get("clipped", 0) + n_neg
        else:
            warnings.warn(f"clipped {n_neg} negative mitigated probabilities", MitigationWarning, stacklevel=3)
    return p


def mitigate(q: np.ndarray, R: np.ndarray, clip: bool = False, stats: Optional[dict] = None) -> np.ndarray:
    """Invert readout, ``p = (R^T)^{-1} q``.

    With ``clip`` negative entries are set to zero and the result renormalized;
    the number of clipped entries is added to ``stats['clipped']`` if a dict is
    given, otherwise a ``MitigationWarning`` is issued.
    """
    R = np.asarray(R, dtype=float)
    try:
        p = np.linalg.solve(R.T, np.asarray(q, dtype=float))
    except np.linalg.LinAlgError as exc:
        raise SingularReadoutError(str(exc)) from exc
    return _clip(p, clip, stats)


def mitigate_local(
    q: np.ndarray, p_loss: float, p_anti: float, n: int, clip: bool = False, stats: Optional[dict] = None
) -> np.ndarray:
    """Tensor-product inverse readout on the last axis of ``q``."""
    inv = np.linalg.inv(readout_matrix(p_loss, p_anti))
    return _clip(_apply_each_qubit(np.asarray(q, dtype=float), inv, n), clip, stats)


def drift(spec: HamiltonianSpec, gamma: float) -> HamiltonianSpec:
    """Scale every X-drive coefficient by ``1 + gamma``; couplings are unchanged."""
    if not np.isfinite(gamma):
        raise ValueError("gamma must be finite")
    return spec.with_drive(spec.a * (1.0 + gamma))
