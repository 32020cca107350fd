"""QSPE inference: reconstruction series, Fourier coefficients, angle estimators,
noise-rescaled estimators, the (theta, zeta) <-> (A, B) mapping and variance predictions.

Estimators accept coefficient arrays whose last axis holds the 2d-1 folded
coefficients (k = 0..d-1, then -d+1..-1); leading axes are treated as a batch.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import (
    BranchError,
    ConvergenceError,
    PhaseWrapWarning,
    RegimeWarning,
    UndefinedPhaseError,
    UnusableFidelityError,
)

__all__ = [
    "ReconstructionSeries",
    "FourierCoeffs",
    "AngleEstimate",
    "omega_grid",
    "build_series",
    "fourier",
    "inverse_fourier",
    "phase_differences",
    "laplacian_weights",
    "unwrap_to_median",
    "estimate_theta",
    "estimate_zeta",
    "estimate_chi",
    "estimate",
    "rescaled_estimators",
    "correct_coefficients",
    "prep_offset",
    "scaled_prep_estimator",
    "prep_bound",
    "forward_mapping",
    "invert_mapping",
    "analytic_variance",
    "fisher_information",
    "cr_bound",
]

log = logging.getLogger(__name__)

WRAP_THRESHOLD = 0.75 * np.pi


def omega_grid(d: int) -> np.ndarray:
    """Angles ``j pi / (2d - 1)`` for j = 0..2d-2."""
    if d < 2:
        raise ValueError("d must be >= 2")
    m = 2 * d - 1
    return np.arange(m) * np.pi / m


@dataclass
class ReconstructionSeries:
    omegas: np.ndarray
    h: np.ndarray

    @property
    def d(self) -> int:
        return (self.h.shape[-1] + 1) // 2


@dataclass
class FourierCoeffs:
    """Folded coefficients ``c`` (last axis: k = 0..d-1, then -d+1..-1)."""

    c: np.ndarray

    @property
    def d(self) -> int:
        return (self.c.shape[-1] + 1) // 2

    def coeff(self, k: int) -> np.ndarray:
        return self.c[..., k % self.c.shape[-1]]

    @property
    def nonnegative(self) -> np.ndarray:
        return self.c[..., : self.d]

    @property
    def negative(self) -> np.ndarray:
        return self.c[..., self.d :]


@dataclass
class AngleEstimate:
    theta_hat: Union[float, np.ndarray]
    zeta_hat: Union[float, np.ndarray]
    alpha_hat: Optional[Union[float, np.ndarray]] = None
    chi_hat: Optional[Union[float, np.ndarray]] = None


Coeffs = Union[FourierCoeffs, np.ndarray]


def _arr(coeffs: Coeffs) -> np.ndarray:
    return coeffs.c if isinstance(coeffs, FourierCoeffs) else np.asarray(coeffs)


def _check_d(c: np.ndarray, d: Optional[int]) -> int:
    m = c.shape[-1]
    if m % 2 == 0:
        raise ValueError(f"need an odd number 2d-1 of coefficients, got {m}")
    dd = (m + 1) // 2
    if d is not None and d != dd:
        raise ValueError(f"{m} coefficients do not match d={d}")
    return dd


def build_series(p_x: np.ndarray, p_y: np.ndarray) -> ReconstructionSeries:
    """``h_j = p_X(omega_j) - 1/2 + i (p_Y(omega_j) - 1/2)``."""
    p_x = np.asarray(p_x, dtype=float)
    p_y = np.asarray(p_y, dtype=float)
    h = (p_x - 0.5) + 1j * (p_y - 0.5)
    _check_d(h, None)
    return ReconstructionSeries(omega_grid((h.shape[-1] + 1) // 2), h)


def fourier(series: Union[ReconstructionSeries, np.ndarray]) -> FourierCoeffs:
    """``c_k = (1/(2d-1)) sum_j h_j exp(-2 pi i j k / (2d-1))`` in folded order."""
    h = series.h if isinstance(series, ReconstructionSeries) else np.asarray(series, dtype=complex)
    _check_d(h, None)
    return FourierCoeffs(np.fft.fft(h, axis=-1) / h.shape[-1])


def inverse_fourier(coeffs: Coeffs) -> np.ndarray:
    c = _arr(coeffs)
    return np.fft.ifft(c, axis=-1) * c.shape[-1]


def phase_differences(coeffs: Coeffs, d: Optional[int] = None) -> np.ndarray:
    """``Delta_k = phase(c_k conj(c_{k+1}))`` for k = 0..d-2, principal value."""
    c = _arr(coeffs)
    d = _check_d(c, d)
    pos = c[..., :d]
    if np.any(pos == 0):
        raise UndefinedPhaseError("a Fourier coefficient is exactly zero")
    return np.angle(pos[..., :-1] * np.conj(pos[..., 1:]))


def laplacian_weights(d: int) -> np.ndarray:
    """``D^{-1} 1`` for the (d-1)x(d-1) tridiagonal Laplacian (2 on the diagonal, -1 beside it)."""
    m = d - 1
    D = 2.0 * np.eye(m) - np.eye(m, k=1) - np.eye(m, k=-1)
    return np.linalg.solve(D, np.ones(m))


def estimate_theta(coeffs: Coeffs, d: Optional[int] = None) -> np.ndarray:
    """Mean magnitude of c_0..c_{d-1}."""
    c = _arr(coeffs)
    d = _check_d(c, d)
    return np.mean(np.abs(c[..., :d]), axis=-1)


def _weighted_zeta(delta: np.ndarray, d: int) -> np.ndarray:
    w = laplacian_weights(d)
    return 0.5 * (delta @ w) / w.sum()


def unwrap_to_median(delta: np.ndarray) -> np.ndarray:
    """Shift each phase difference by a multiple of 2 pi to within pi of the median.

    All differences estimate the same 2 zeta, so a value more than pi away from
    the others has wrapped.  Leaves the input unchanged when no such outlier exists.
    """
    med = np.median(delta, axis=-1, keepdims=True)
    return delta + 2 * np.pi * np.round((med - delta) / (2 * np.pi))


def estimate_zeta(coeffs: Coeffs, d: Optional[int] = None, unwrap: bool = True) -> np.ndarray:
    """Half of the ``D^{-1}``-weighted mean of the phase differences.

    With ``unwrap`` the differences are first moved to within pi of their median.
    """
    c = _arr(coeffs)
    d = _check_d(c, d)
    delta = phase_differences(c, d)
    if unwrap:
        delta = unwrap_to_median(delta)
    zeta = _weighted_zeta(delta, d)
    if np.any(np.abs(2 * zeta) > WRAP_THRESHOLD):
        warnings.warn(
            "phase differences approach the wrap at pi; shorten the evolution time",
            PhaseWrapWarning,
            stacklevel=2,
        )
    return zeta


def estimate_chi(coeffs: Coeffs, zeta, d: Optional[int] = None) -> np.ndarray:
    """Drive phase from ``c_0 ~ i theta exp(-i (chi + zeta))``."""
    c = _arr(coeffs)
    _check_d(c, d)
    return np.angle(np.exp(1j * (np.pi / 2 - zeta - np.angle(c[..., 0]))))


def estimate(coeffs: Coeffs, d: Optional[int] = None, with_chi: bool = False) -> AngleEstimate:
    theta = estimate_theta(coeffs, d)
    zeta = estimate_zeta(coeffs, d)
    chi = estimate_chi(coeffs, zeta, d) if with_chi else None
    return AngleEstimate(theta, zeta, chi_hat=chi)


def _preliminary_zeta(c: np.ndarray, d: int) -> np.ndarray:
    # Delta_0 involves c_0, which carries the noise offsets; use k >= 1 only
    return 0.5 * np.mean(phase_differences(c, d)[..., 1:], axis=-1)


def rescaled_estimators(coeffs: Coeffs, d: Optional[int] = None, method: str = "phase_aligned"):
    """Depolarizing fidelity and rescaled theta from coefficients ``alpha c_k - delta_k0 (1-alpha)(1+i)/4``.

    ``method='magnitude'`` uses ``1 - 2 sqrt(2) (|c_0| - mean_{k>=1} |c_k|)``,
    which is biased whenever the signal in c_0 is not collinear with the
    offset.  ``method='phase_aligned'`` (default) subtracts the predicted
    signal ``i m exp(-i zeta~)`` from c_0, with m the mean magnitude of
    c_1..c_{d-1} and zeta~ from the phase differences not involving c_0, and
    projects the residual on the offset direction (1+i)/sqrt(2).  Offsets
    along (1-i), such as the one left by a coherent prep error, drop out.

    Returns ``(alpha_hat, theta_hat)`` with ``theta_hat = mean_{k>=1} |c_k| / alpha_hat``.
    """
    c = _arr(coeffs)
    d = _check_d(c, d)
    if d < 3:
        raise ValueError("rescaled estimators need d >= 3")
    m = np.mean(np.abs(c[..., 1:d]), axis=-1)
    if method == "magnitude":
        alpha = 1.0 - 2.0 * np.sqrt(2.0) * (np.abs(c[..., 0]) - m)
    elif method == "phase_aligned":
        r = c[..., 0] - 1j * m * np.exp(-1j * _preliminary_zeta(c, d))
        alpha = 1.0 + 2.0 * (r.real + r.imag)
    else:
        raise ValueError(f"unknown method {method!r}")
    if np.any(alpha <= 0):
        raise UnusableFidelityError("estimated fidelity is not positive")
    return alpha, m / alpha


def prep_offset(prep_alpha: float) -> complex:
    """Constant added to c_0 by a coherent prep over-rotation: ``-(sin 2 alpha / 2)(1 - i)``."""
    return -0.5 * np.sin(2 * prep_alpha) * (1 - 1j)


def correct_coefficients(
    coeffs: Coeffs, d: Optional[int] = None, alpha_hat=None, prep_alpha: Optional[float] = None
) -> np.ndarray:
    """Remove known additive offsets from c_0 and divide by the fidelity.

    The depolarizing offset is ``-(1-alpha)(1+i)/4``; the prep offset is
    ``alpha prep_offset(prep_alpha)``.  The prep rescaling by ``cos 2 alpha`` is
    left to ``scaled_prep_estimator`` and does not affect phases.
    """
    c = np.array(_arr(coeffs), dtype=complex, copy=True)
    _check_d(c, d)
    a = 1.0 if alpha_hat is None else np.asarray(alpha_hat, dtype=float)
    if alpha_hat is not None:
        c[..., 0] += (1.0 - a) * (1 + 1j) / 4.0
    if prep_alpha is not None:
        c[..., 0] -= a * prep_offset(prep_alpha)
    if alpha_hat is not None:
        c = c / np.asarray(a)[..., None]
    return c


def scaled_prep_estimator(coeffs: Coeffs, d: Optional[int] = None, prep_alpha: float = 0.0,
                          remove_offset: bool = True) -> np.ndarray:
    """``(1 / cos 2 alpha) mean_k |c_k|`` over k = 0..d-1.

    With ``remove_offset`` the constant prep offset of c_0 is removed first;
    without it the c_0 term carries an O(alpha) error that does not vanish
    with theta.
    """
    if not np.cos(2 * prep_alpha) > 0:
        raise ValueError("cos(2 alpha) must be positive")
    c = _arr(coeffs)
    if remove_offset:
        c = correct_coefficients(c, d, prep_alpha=prep_alpha)
    return estimate_theta(c, d) / np.cos(2 * prep_alpha)


def prep_bound(d: int, alpha: float, theta: float, scaled: bool = True) -> float:
    """Bound on the prep-error discrepancy of the (scaled) theta estimator."""
    if scaled:
        return np.sqrt(2.0) * (d + 1) ** 2 * np.tan(2 * alpha) * np.sin(theta) ** 2
    return np.sqrt(2.0) * (d + 1) ** 2 * np.sin(2 * alpha) * np.sin(theta) ** 2 + (np.cos(2 * alpha) - 1) * theta


def forward_mapping(A, B):
    """Gate angles of the block propagator: ``sin theta = (A/w) sin w``, ``tan zeta = (B/w) tan w``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    w = np.hypot(A, B)
    ws = np.where(w == 0, 1.0, w)
    sinc = np.where(w == 0, 1.0, np.sin(ws) / ws)
    theta = np.arcsin(np.clip(A * sinc, -1.0, 1.0))
    zeta = np.arctan2(B * sinc, np.cos(w))
    return theta, zeta


def _newton(theta, zeta, A, B, tol, max_iter):
    h = 1e-7
    for _ in range(max_iter):
        t0, z0 = forward_mapping(A, B)
        f1 = t0 - theta
        f2 = z0 - zeta
        if np.all(np.maximum(np.abs(f1), np.abs(f2)) <= tol):
            return A, B
        ta, za = forward_mapping(A + h, B)
        tb, zb = forward_mapping(A - h, B)
        tc, zc = forward_mapping(A, B + h)
        td, zd = forward_mapping(A, B - h)
        j11 = (ta - tb) / (2 * h)
        j21 = (za - zb) / (2 * h)
        j12 = (tc - td) / (2 * h)
        j22 = (zc - zd) / (2 * h)
        det = j11 * j22 - j12 * j21
        A = A - (j22 * f1 - j12 * f2) / det
        B = B - (-j21 * f1 + j11 * f2) / det
    raise ConvergenceError(f"Newton iteration did not converge in {max_iter} steps")


def invert_mapping(theta, zeta, method: str = "newton", tol: float = 1e-12, max_iter: int = 50):
    """Recover block integrals ``(A, B)`` from gate angles ``(theta, zeta)``.

    ``small_angle`` returns ``(theta, zeta)``.  ``newton`` refines that seed with
    a two-dimensional Newton solve of the forward mapping on the branch A >= 0,
    sign(B) = sign(zeta), ``sqrt(A^2 + B^2) < pi/2``.
    """
    theta = np.asarray(theta, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    if np.any(theta < 0) or np.any(np.abs(zeta) >= np.pi / 2) or np.any(theta >= np.pi / 2):
        raise BranchError("theta must lie in [0, pi/2) and |zeta| < pi/2")
    if np.any(np.cos(theta) * np.cos(zeta) <= 0):
        raise BranchError("angles outside the principal branch")
    if method == "small_angle":
        return theta.copy(), zeta.copy()
    if method != "newton":
        raise ValueError(f"unknown method {method!r}")
    A, B = _newton(theta, zeta, theta.copy(), zeta.copy(), tol, max_iter)
    return A, B


def _check_regime(d: int, theta) -> None:
    if np.any(d * np.abs(np.asarray(theta)) > 0.2):
        warnings.warn("d * theta exceeds 0.2; small-angle variance formulas may be inaccurate",
                      RegimeWarning, stacklevel=3)


def _check_args(N: int, d: int, theta, mode: str, n: int) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if mode not in ("analog", "hybrid"):
        raise ValueError("mode must be 'analog' or 'hybrid'")
    if N < 1 or d < 2:
        raise ValueError("need N >= 1 and d >= 2")
    if mode == "hybrid" and n < 2:
        raise ValueError("hybrid mode needs n >= 2")
    if np.any(theta == 0):
        raise ValueError("zeta variance is undefined at theta = 0")
    _check_regime(d, theta)
    return theta


def analytic_variance(N: int, d: int, theta, mode: str = "analog", n: int = 2):
    """Leading-order estimator variances ``(Var theta_hat, Var zeta_hat)``.

    Analog: ``1/(8 N d^2)`` and ``3/(8 N d^4 theta^2)``.  Hybrid with n qubits
    (n-1 superposed subspaces): ``n/(4 N d^2)`` and ``3n/(4 N d^4 theta^2)``.
    """
    theta = _check_args(N, d, theta, mode, n)
    if mode == "analog":
        return 1.0 / (8 * N * d**2), 3.0 / (8 * N * d**4 * theta**2)
    return n / (4 * N * d**2), 3.0 * n / (4 * N * d**4 * theta**2)


def fisher_information(N: int, d: int, theta: float, mode: str = "analog", n: int = 2) -> np.ndarray:
    """Pre-asymptotic Fisher information of ``(theta, zeta, chi)`` for one subspace.

    Uses ``c_k ~ i theta exp(-i chi) exp(-i (2k+1) zeta)`` for k >= 0 and a
    per-sample variance of the rescaled probability of ``(2k-1)/4`` with k the
    number of superposed subspaces (k = 1 in analog mode).
    """
    k = 1 if mode == "analog" else n - 1
    pref = 4.0 * N * (2 * d - 1) / (2 * k - 1)
    t2 = theta**2
    return pref * np.array(
        [[d, 0.0, 0.0], [0.0, d * (4 * d**2 - 1) * t2 / 3.0, d**2 * t2], [0.0, d**2 * t2, d * t2]]
    )


def cr_bound(N: int, d: int, theta, mode: str = "analog", n: int = 2, exact: bool = False):
    """Cramer-Rao variances ``(Var theta_hat, Var zeta_hat)``.

    By default the closed-form optimum (analog ``1/(8Nd^2)``, ``3/(8Nd^4 theta^2)``;
    hybrid ``n/(4Nd^2)``, ``3n/(4Nd^4 theta^2)``).  With ``exact`` the diagonal of
    the inverse of ``fisher_information``.
    """
    theta = _check_args(N, d, theta, mode, n)
    if exact:
        inv = np.linalg.inv(fisher_information(N, d, float(theta), mode, n))
        return float(inv[0, 0]), float(inv[1, 1])
    scale = 0.5 if mode == "analog" else float(n)
    return scale / (4 * N * d**2), 3.0 * scale / (4 * N * d**4 * theta**2)
