"""Round-by-round coupling recovery from simulated (or replayed) QSPE experiments.

Each round drives one qubit i and learns the couplings c_ij, j > i, from a set of
invariant subspaces.  In hybrid mode the subspaces are superposed and measured in
one batch of 2(2d-1) circuits; in analog mode every subspace is its own batch.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from . import qspe
from .errors import BranchError, InvalidSpecError, UnusableFidelityError
from .model import (
    HamiltonianSpec,
    SubspacePair,
    coefficient_matrix,
    make_pair,
    project_block,
    select_subspaces,
)
from .noise import NoiseConfig, apply_readout_local, depolarize_distribution, mitigate_local
from .sim import ExperimentConfig, ShotRecord, _initial_amps, circuit_amplitudes, make_rng

__all__ = [
    "RoundPlan",
    "Batch",
    "BatchInference",
    "LearnReport",
    "plan_rounds",
    "simulate_batch",
    "sample_batch",
    "infer_batch",
    "bootstrap_variance",
    "propagate_covariance",
    "resource_accounting",
    "proposal_timing",
    "learn_all_hybrid",
    "learn_all_analog",
    "learn_pair",
    "learn_targeted",
]

log = logging.getLogger(__name__)

AUTO_RESCALE_THRESHOLD = 0.98
_STREAM_SHOTS = 0
_STREAM_BOOT = 1
_BOOT_CHUNK_ELEMENTS = 4_000_000


@dataclass
class RoundPlan:
    """Drive qubit, active subspaces and their grouping into circuit batches."""

    drive: int
    pairs: list[SubspacePair]
    mode: str
    config: ExperimentConfig
    unknown: list[int]

    @property
    def batches(self) -> list[list[SubspacePair]]:
        if self.mode == "hybrid":
            return [list(self.pairs)]
        return [[p] for p in self.pairs]


def plan_rounds(n: int, config: ExperimentConfig) -> list[RoundPlan]:
    """Rounds i = 1..n-1, each with n-i canonical subspaces for the unknowns c_ij, j > i."""
    plans = []
    for i in range(1, n):
        pairs = select_subspaces(n, i, n - i)
        plans.append(RoundPlan(i, pairs, config.mode, config, list(range(i + 1, n + 1))))
    return plans


@dataclass
class Batch:
    """Outcome data of one batch: axis 0 is the prep kind (plus, i), axis 1 the omega index."""

    drive: int
    pairs: list[SubspacePair]
    data: np.ndarray
    shots: Optional[int]

    @property
    def rescale(self) -> int:
        return len(self.pairs)

    @property
    def zero_codes(self) -> np.ndarray:
        return np.array([p.m_code for p in self.pairs])

    def records(self) -> list[ShotRecord]:
        if self.shots is None:
            raise ValueError("exact batches carry probabilities, not shot records")
        n = self.pairs[0].n
        return [ShotRecord.from_dense(row, n) for row in self.data.reshape(-1, self.data.shape[-1])]

    @classmethod
    def from_records(cls, drive: int, pairs: Sequence[SubspacePair], records: Sequence[ShotRecord], d: int) -> "Batch":
        m = 2 * d - 1
        if len(records) != 2 * m:
            raise ValueError(f"expected {2 * m} shot records, got {len(records)}")
        n = pairs[0].n
        data = np.stack([r.dense(n) for r in records]).reshape(2, m, 2**n)
        totals = {r.total for r in records}
        if len(totals) != 1:
            raise ValueError("all circuits must have the same number of shots")
        return cls(drive, list(pairs), data, totals.pop())


def _drive_schedule(spec: HamiltonianSpec, drive: int, noise: NoiseConfig, n_circuits: int) -> np.ndarray:
    a = spec.drive_amplitude(drive)
    if noise.drift_schedule is not None:
        gam = np.array([noise.drift_schedule(c) for c in range(n_circuits)], dtype=float)
    else:
        gam = np.full(n_circuits, noise.drift_gamma or 0.0)
    return a * (1.0 + gam)


def simulate_batch(
    spec: HamiltonianSpec, pairs: Sequence[SubspacePair], config: ExperimentConfig, noise: Optional[NoiseConfig] = None
) -> np.ndarray:
    """Exact outcome distributions, shape ``(2, 2d-1, 2^n)``, including configured noise.

    The logical rotation of omega-grid point j is applied with angle ``-omega_j``,
    which places the signal on the nonnegative Fourier indices under the
    ``exp(-i omega Z)`` gate convention; h is pi-periodic so the grid is unchanged.
    """
    noise = noise or NoiseConfig()
    n = spec.n
    drive = pairs[0].drive
    M = config.n_omega
    omegas = -qspe.omega_grid(config.d)
    blocks = [project_block(spec, p, config.T) for p in pairs]
    B = np.array([b.B for b in blocks])
    C = np.array([b.C for b in blocks])
    a = _drive_schedule(spec, drive, noise, 2 * M)
    if np.any(a <= 0):
        raise InvalidSpecError(f"drive amplitude on qubit {drive} must be positive")
    out = np.zeros((2, M, 2**n))
    m_codes = np.array([p.m_code for p in pairs])
    n_codes = np.array([p.n_code for p in pairs])
    for kk, kind in enumerate(("plus", "i")):
        amps0 = _initial_amps(len(pairs), kind, noise.prep_alpha)
        A = (a[kk * M : (kk + 1) * M] * config.T)[:, None] * np.ones(len(pairs))
        amps = circuit_amplitudes(A, B, C, spec.phi, omegas, config.d, amps0)
        prob = np.abs(amps) ** 2
        out[kk][:, m_codes] = prob[..., 0]
        out[kk][:, n_codes] = prob[..., 1]
    if noise.depol_alpha is not None:
        out = depolarize_distribution(out, m_codes, noise.depol_alpha)
    if noise.readout is not None:
        out = apply_readout_local(out, *noise.readout, n)
    out = np.clip(out, 0.0, None)
    return out / out.sum(axis=-1, keepdims=True)


def sample_batch(probs: np.ndarray, N: int, key: Sequence[int]) -> np.ndarray:
    """Multinomial counts for every circuit; circuit c uses the stream ``(*key, c)``."""
    flat = probs.reshape(-1, probs.shape[-1])
    counts = np.empty(flat.shape, dtype=np.int64)
    for c, p in enumerate(flat):
        counts[c] = make_rng((*key, c)).multinomial(N, p)
    return counts.reshape(probs.shape)


def _resample(counts: np.ndarray, n_boot: int, key: Sequence[int], keep: Optional[np.ndarray] = None) -> np.ndarray:
    """Bootstrap counts, shape ``(n_boot,) + counts.shape``; with ``keep`` only those
    categories (plus an implicit remainder) are resampled and returned."""
    flat = counts.reshape(-1, counts.shape[-1])
    if keep is not None:
        rest = flat.sum(axis=1) - flat[:, keep].sum(axis=1)
        flat = np.concatenate([flat[:, keep], rest[:, None]], axis=1)
    out = np.empty((n_boot,) + flat.shape, dtype=np.int64)
    for c, row in enumerate(flat):
        tot = int(row.sum())
        out[:, c] = make_rng((*key, c)).multinomial(tot, row / tot, size=n_boot)
    if keep is not None:
        out = out[..., :-1]
        return out.reshape((n_boot,) + counts.shape[:-1] + (len(keep),))
    return out.reshape((n_boot,) + counts.shape)


def bootstrap_variance(
    counts: np.ndarray,
    pipeline: Callable[[np.ndarray], np.ndarray],
    n_boot: int = 1000,
    seed: int = 0,
    infinite: bool = False,
    return_replicates: bool = False,
):
    """Variance of ``pipeline`` estimates under multinomial resampling of ``counts``.

    ``counts`` has circuits on the leading axes and outcomes on the last.  The
    pipeline receives frequencies of shape ``(n_boot,) + counts.shape`` and returns
    estimates of shape ``(n_boot, P)``.  With ``infinite`` the observed
    frequencies are treated as exact and every replicate equals them.
    """
    if n_boot < 100:
        raise ValueError("n_boot must be at least 100")
    counts = np.asarray(counts)
    tot = counts.sum(axis=-1, keepdims=True)
    if infinite:
        freq = np.broadcast_to(counts / tot, (n_boot,) + counts.shape)
    else:
        freq = _resample(counts, n_boot, (seed, _STREAM_BOOT)) / tot
    est = np.asarray(pipeline(freq), dtype=float).reshape(n_boot, -1)
    var = np.zeros(est.shape[1]) if infinite else np.nanvar(est, axis=0, ddof=1)
    return (var, est) if return_replicates else var


@dataclass
class BatchInference:
    """Per-subspace estimates; arrays have a leading replicate axis when bootstrapped."""

    theta: np.ndarray
    zeta: np.ndarray
    A: np.ndarray
    B: np.ndarray
    alpha: Optional[np.ndarray]
    rescaled: bool


def _fidelity(c: np.ndarray, d: int) -> np.ndarray:
    m = np.mean(np.abs(c[..., 1:d]), axis=-1)
    r = c[..., 0] - 1j * m * np.exp(-1j * qspe._preliminary_zeta(c, d))
    return 1.0 + 2.0 * (r.real + r.imag)


def infer_batch(
    zero_probs: np.ndarray,
    d: int,
    noise: Optional[NoiseConfig] = None,
    rescale: Optional[bool] = None,
    strict: bool = True,
) -> BatchInference:
    """Estimate (theta, zeta, A, B) of every subspace from logical-zero probabilities.

    ``zero_probs`` has shape ``(..., 2, 2d-1, k)`` and holds rescaled transition
    probabilities.  ``rescale=None`` decides automatically: rescaled estimators
    are used when depolarization is configured or the mean estimated fidelity
    falls below 0.98.
    """
    noise = noise or NoiseConfig()
    p = np.moveaxis(zero_probs, -1, -3)
    h = (p[..., 0, :] - 0.5) + 1j * (p[..., 1, :] - 0.5)
    c = qspe.fourier(h).c
    alpha = None
    if rescale is None:
        rescale = noise.depol_alpha is not None
        if not rescale and d >= 3:
            rescale = bool(np.mean(_fidelity(c, d)) < AUTO_RESCALE_THRESHOLD)
    if rescale:
        if d < 3:
            raise ValueError("depolarization rescaling needs d >= 3")
        alpha = _fidelity(c, d)
        if strict and np.any(alpha <= 0):
            raise UnusableFidelityError("estimated fidelity is not positive")
        alpha = np.where(alpha > 0, alpha, np.nan)
    cc = qspe.correct_coefficients(c, d, alpha_hat=alpha, prep_alpha=noise.prep_alpha)
    if noise.prep_alpha is not None:
        theta = qspe.scaled_prep_estimator(cc, d, noise.prep_alpha, remove_offset=False)
    elif rescale:
        theta = np.mean(np.abs(cc[..., 1:d]), axis=-1)
    else:
        theta = qspe.estimate_theta(cc, d)
    zeta = qspe.estimate_zeta(cc, d)
    bad = ~np.isfinite(theta) | ~np.isfinite(zeta) | (np.abs(zeta) >= np.pi / 2)
    if strict and np.any(bad):
        raise BranchError("estimated angles fall outside the principal branch; shorten T")
    theta = np.clip(np.where(bad, 0.0, theta), 0.0, np.pi / 2 - 1e-9)
    zeta = np.where(bad, 0.0, zeta)
    A, B = qspe.invert_mapping(theta, zeta, method="newton")
    if np.any(bad):
        A = np.where(bad, np.nan, A)
        B = np.where(bad, np.nan, B)
    return BatchInference(theta, zeta, A, B, alpha, rescale)


def _zero_probs(batch: Batch, data: np.ndarray, noise: NoiseConfig, stats: dict) -> np.ndarray:
    """Rescaled logical-zero probabilities from counts or distributions ``data``."""
    n = batch.pairs[0].n
    freq = data / data.sum(axis=-1, keepdims=True)
    if noise.readout is not None:
        freq = mitigate_local(freq, *noise.readout, n, clip=True, stats=stats)
    return freq[..., batch.zero_codes] * batch.rescale


def propagate_covariance(
    Lambda: np.ndarray,
    var_m: np.ndarray,
    known: Optional[tuple[np.ndarray, np.ndarray]] = None,
) -> np.ndarray:
    """Covariance of ``x = Lambda^{-1} (m - L_k c_k)``.

    ``var_m`` holds the independent per-subspace variances of m; ``known`` is an
    optional ``(L_k, Sigma_k)`` for previously estimated parameters reused on the
    right-hand side.
    """
    Lambda = np.asarray(Lambda, dtype=float)
    S = np.diag(np.asarray(var_m, dtype=float))
    if known is not None:
        Lk, Sk = known
        S = S + Lk @ Sk @ Lk.T
    try:
        Li = np.linalg.inv(Lambda)
    except np.linalg.LinAlgError as exc:
        from .errors import SingularSelectionError

        raise SingularSelectionError("recovery matrix is singular") from exc
    return Li @ S @ Li.T


def resource_accounting(n: int, d: int, N: int, mode: str, T_cycle: float = 1.0) -> dict:
    """Experiment rounds, circuit batches and total evolution time.

    Each batch runs 2(2d-1) circuits of d cycles with N shots; hybrid mode needs
    n-1 batches, analog mode n(n-1)/2.
    """
    if mode not in ("hybrid", "analog"):
        raise ValueError("mode must be 'hybrid' or 'analog'")
    batches = n - 1 if mode == "hybrid" else n * (n - 1) // 2
    circuits = 2 * (2 * d - 1)
    return {
        "mode": mode,
        "rounds": batches,
        "drive_rounds": n - 1,
        "batches": batches,
        "circuits_per_batch": circuits,
        "circuits": batches * circuits,
        "shots": batches * circuits * N,
        "parameters": n * (n - 1) // 2,
        "total_time": batches * circuits * d * N * T_cycle,
    }


def proposal_timing(d: int, t_prep: float, t_evolve: float, t_phase: float) -> tuple[float, float]:
    """Single-omega circuit time ``t_prep + d (t_evolve + t_phase)`` and round time ``2(2d-1)`` times it."""
    single = t_prep + d * (t_evolve + t_phase)
    return single, 2 * (2 * d - 1) * single


@dataclass
class LearnReport:
    """Recovered couplings and drives with their bootstrap and predicted variances."""

    c_hat: np.ndarray
    a_hat: np.ndarray
    var_boot: dict
    var_pred: dict
    resources: dict
    rounds: list = field(default_factory=list)
    cov_pred: Optional[np.ndarray] = None
    c_boot: Optional[np.ndarray] = None
    clipped: int = 0
    batches: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        def clean(x):
            if isinstance(x, np.ndarray):
                return clean(x.tolist())
            if isinstance(x, (list, tuple)):
                return [clean(v) for v in x]
            if isinstance(x, dict):
                return {k: clean(v) for k, v in x.items()}
            if isinstance(x, (float, np.floating)):
                return None if not np.isfinite(x) else float(x)
            if isinstance(x, np.integer):
                return int(x)
            return x

        return clean(
            {
                "c_hat": self.c_hat,
                "a_hat": self.a_hat,
                "var_boot": self.var_boot,
                "var_pred": self.var_pred,
                "resources": self.resources,
                "rounds": self.rounds,
                "mitigation_clipped": self.clipped,
            }
        )


def _edge_index(n: int) -> dict[tuple[int, int], int]:
    return {e: k for k, e in enumerate(combinations(range(1, n + 1), 2))}


def _predicted_vars(config: ExperimentConfig, theta: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Analytic (Var theta, Var zeta) per subspace; k is the number of superposed subspaces.

    A batch holding a single subspace is an analog experiment whatever the mode.
    """
    mode = "analog" if k == 1 else "hybrid"
    out = np.array([qspe.analytic_variance(config.N, config.d, float(t), mode, k + 1) for t in theta])
    return out[:, 0], out[:, 1]


class _Runner:
    """Shared simulate / sample / infer / bootstrap machinery for one experiment."""

    def __init__(self, spec, config, noise, n_boot, exact, records, seed):
        self.spec = spec
        self.config = config
        self.noise = noise or NoiseConfig()
        self.n_boot = int(n_boot)
        self.exact = exact
        self.records = records or {}
        self.seed = config.seed if seed is None else int(seed)
        self.stats: dict = {}
        self.batches: list[Batch] = []
        if self.n_boot and self.n_boot < 100 and not exact:
            raise ValueError("n_boot must be 0 or at least 100")

    def batch(self, r: int, b: int, pairs: list[SubspacePair]) -> Batch:
        drive = pairs[0].drive
        if (r, b) in self.records:
            rec = self.records[(r, b)]
            batch = rec if isinstance(rec, Batch) else Batch.from_records(drive, pairs, rec, self.config.d)
        else:
            probs = simulate_batch(self.spec, pairs, self.config, self.noise)
            if self.exact:
                batch = Batch(drive, pairs, probs, None)
            else:
                data = sample_batch(probs, self.config.N, (self.seed, _STREAM_SHOTS, r, b))
                batch = Batch(drive, pairs, data, self.config.N)
        self.batches.append(batch)
        return batch

    def infer(self, r: int, b: int, batch: Batch) -> tuple[BatchInference, Optional[BatchInference]]:
        point = infer_batch(_zero_probs(batch, batch.data, self.noise, self.stats), self.config.d, self.noise)
        if self.exact or not self.n_boot or batch.shots is None:
            return point, None
        keep = None if self.noise.readout is not None else batch.zero_codes
        width = batch.data.shape[-1] if keep is None else len(keep) + 1
        chunk = max(1, _BOOT_CHUNK_ELEMENTS // (batch.data[..., 0].size * width))
        parts = []
        rng_key = (self.seed, _STREAM_BOOT, r, b)
        counts = _resample(batch.data, self.n_boot, rng_key, keep)
        for s in range(0, self.n_boot, chunk):
            sub = counts[s : s + chunk]
            if keep is None:
                zp = _zero_probs(batch, sub, self.noise, self.stats)
            else:
                zp = sub / batch.shots * batch.rescale
            parts.append(infer_batch(zp, self.config.d, self.noise, rescale=point.rescaled, strict=False))
        boot = BatchInference(
            *(np.concatenate([getattr(p, f) for p in parts]) for f in ("theta", "zeta", "A", "B")),
            alpha=np.concatenate([p.alpha for p in parts]) if point.rescaled else None,
            rescaled=point.rescaled,
        )
        return point, boot


def _solve(W: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``W x = rhs`` for stacked right-hand sides (last axis), with a residual check."""
    x = np.linalg.solve(W, rhs.T).T
    resid = np.abs(x @ W.T - rhs).max(initial=0.0)
    scale = np.abs(rhs).max(initial=0.0)
    if np.isfinite(resid) and resid > 1e-10 * max(scale, 1e-300):
        raise np.linalg.LinAlgError(f"linear solve residual {resid:.2e} too large")
    return x


def _learn(spec: HamiltonianSpec, config: ExperimentConfig, noise, n_boot, exact, records, seed) -> LearnReport:
    n = spec.n
    T = config.T
    run = _Runner(spec, config, noise, n_boot, exact, records, seed)
    eidx = _edge_index(n)
    n_e = len(eidx)
    c_vec = np.full(n_e, np.nan)
    cov = np.zeros((n_e, n_e))
    boot = run.n_boot and not exact
    c_rep = np.full((run.n_boot, n_e), np.nan) if boot else None
    a_hat = np.full(n, np.nan)
    a_var_pred = np.full(n, np.nan)
    a_var_boot = np.full(n, np.nan)
    rounds = []
    for r, plan in enumerate(plan_rounds(n, config)):
        i = plan.drive
        if spec.drive_amplitude(i) <= 0:
            raise InvalidSpecError(f"drive amplitude on qubit {i} must be positive")
        points, boots = [], []
        for b, pairs in enumerate(plan.batches):
            pt, bt = run.infer(r, b, run.batch(r, b, pairs))
            points.append(pt)
            boots.append(bt)
        Bk = np.concatenate([p.B for p in points])
        Ak = np.concatenate([p.A for p in points])
        theta = np.concatenate([p.theta for p in points])
        k_sup = len(plan.batches[0])
        var_theta, var_zeta = _predicted_vars(config, theta, k_sup)

        cm_u = coefficient_matrix(plan.pairs, i, plan.unknown)
        W_u = cm_u.entries.astype(float)
        known_cols = [j for j in range(1, i)]
        W_k = np.array([[p.lam[(j, i)] for j in known_cols] for p in plan.pairs], dtype=float).reshape(len(plan.pairs), -1)
        k_idx = [eidx[(j, i)] for j in known_cols]
        u_idx = [eidx[(i, j)] for j in plan.unknown]

        rhs = Bk / T - (W_k @ c_vec[k_idx] if k_idx else 0.0)
        x = _solve(W_u, rhs[None, :])[0]
        c_vec[u_idx] = x
        # predicted covariance including the reused earlier estimates
        Wi = np.linalg.inv(W_u)
        S_kk = cov[np.ix_(k_idx, k_idx)]
        cov_uu = Wi @ (np.diag(var_zeta / T**2) + W_k @ S_kk @ W_k.T) @ Wi.T
        cov[np.ix_(u_idx, u_idx)] = cov_uu
        if k_idx:
            all_k = [q for q in range(n_e) if np.isfinite(c_vec[q]) and q not in u_idx]
            cross = -Wi @ W_k @ cov[np.ix_(k_idx, all_k)]
            cov[np.ix_(u_idx, all_k)] = cross
            cov[np.ix_(all_k, u_idx)] = cross.T

        a_hat[i - 1] = np.mean(Ak) / T
        a_var_pred[i - 1] = np.mean(var_theta) / len(Ak) / T**2
        if boot:
            Bb = np.concatenate([bt.B for bt in boots], axis=-1)
            Ab = np.concatenate([bt.A for bt in boots], axis=-1)
            rhs_b = Bb / T - (c_rep[:, k_idx] @ W_k.T if k_idx else 0.0)
            c_rep[:, u_idx] = _solve(W_u, rhs_b)
            a_rep = np.mean(Ab, axis=-1) / T
            a_var_boot[i - 1] = np.nanvar(a_rep, ddof=1)
        rounds.append(
            {
                "drive": i,
                "logical_zeros": [p.v_m for p in plan.pairs],
                "batches": len(plan.batches),
                "theta_hat": theta,
                "zeta_hat": np.concatenate([p.zeta for p in points]),
                "A_hat": Ak,
                "B_hat": Bk,
                "alpha_hat": np.concatenate([p.alpha for p in points]) if points[0].alpha is not None else None,
                "rescaled": bool(points[0].rescaled),
                "var_zeta_pred": var_zeta,
            }
        )

    def to_matrix(vec):
        m = np.zeros((n, n))
        for (p, q), k in eidx.items():
            m[p - 1, q - 1] = m[q - 1, p - 1] = vec[k]
        return m

    var_boot_c = np.nanvar(c_rep, axis=0, ddof=1) if boot else (np.zeros(n_e) if exact else np.full(n_e, np.nan))
    if exact:
        a_var_boot = np.where(np.isfinite(a_hat), 0.0, np.nan)
    res = resource_accounting(n, config.d, config.N, config.mode, config.T)
    report = LearnReport(
        c_hat=to_matrix(c_vec),
        a_hat=a_hat,
        var_boot={"c": to_matrix(var_boot_c), "a": a_var_boot},
        var_pred={"c": to_matrix(np.diag(cov)), "a": a_var_pred},
        resources=res,
        rounds=rounds,
        cov_pred=cov,
        c_boot=c_rep,
        clipped=int(run.stats.get("clipped", 0)),
        batches=run.batches,
    )
    return report


def _with_mode(config: ExperimentConfig, mode: str) -> ExperimentConfig:
    return config if config.mode == mode else ExperimentConfig(config.d, config.N, config.T, mode, config.seed)


def learn_all_hybrid(
    spec: HamiltonianSpec,
    config: ExperimentConfig,
    noise: Optional[NoiseConfig] = None,
    n_boot: int = 0,
    exact: bool = False,
    records: Optional[Mapping] = None,
    seed: Optional[int] = None,
) -> LearnReport:
    """Learn every coupling with n-1 rounds of superposed subspaces.

    ``records`` maps ``(round, batch)`` to a ``Batch`` or to the 2(2d-1) shot
    records of that batch for replay; missing batches are simulated.
    """
    return _learn(spec, _with_mode(config, "hybrid"), noise, n_boot, exact, records, seed)


def learn_all_analog(
    spec: HamiltonianSpec,
    config: ExperimentConfig,
    noise: Optional[NoiseConfig] = None,
    n_boot: int = 0,
    exact: bool = False,
    records: Optional[Mapping] = None,
    seed: Optional[int] = None,
) -> LearnReport:
    """Learn every coupling measuring one subspace per batch (n(n-1)/2 batches)."""
    return _learn(spec, _with_mode(config, "analog"), noise, n_boot, exact, records, seed)


def learn_pair(
    spec: HamiltonianSpec,
    config: ExperimentConfig,
    noise: Optional[NoiseConfig] = None,
    n_boot: int = 0,
    exact: bool = False,
    report: bool = False,
    seed: Optional[int] = None,
):
    """Two-qubit learning of ``(a_1, c_12)`` from the subspace (00, 10).

    Returns ``(a_hat, c12_hat)``, or the full ``LearnReport`` with ``report=True``.
    """
    if spec.n != 2:
        raise InvalidSpecError("learn_pair needs a two-qubit Hamiltonian")
    rep = _learn(spec, _with_mode(config, "analog"), noise, n_boot, exact, None, seed)
    return rep if report else (float(rep.a_hat[0]), float(rep.c_hat[0, 1]))


@dataclass
class TargetedEstimate:
    c_hat: float
    var_pred: float
    var_boot: float
    B_hat: np.ndarray


def learn_targeted(
    spec: HamiltonianSpec,
    i: int,
    j: int,
    config: ExperimentConfig,
    noise: Optional[NoiseConfig] = None,
    n_boot: int = 0,
    exact: bool = False,
    seed: Optional[int] = None,
) -> TargetedEstimate:
    """Single coupling c_ij from two subspaces of the drive-i Hamiltonian.

    The all-zero logical state gives ``B_1 = T sum_q c_iq`` and the single-one
    state at j gives ``B_2 = B_1 - 2 T c_ij``, so ``c_ij = (B_1 - B_2) / (2T)``.
    Each subspace is measured in its own (analog) batch.
    """
    n = spec.n
    if i == j or not (1 <= i <= n and 1 <= j <= n):
        raise ValueError("need two distinct qubits")
    config = _with_mode(config, "analog")
    run = _Runner(spec, config, noise, n_boot, exact, None, seed)
    pairs = [make_pair(0, i, n), make_pair(1 << (n - j), i, n)]
    pts, bts = [], []
    for b, p in enumerate(pairs):
        pt, bt = run.infer(0, b, run.batch(0, b, [p]))
        pts.append(pt)
        bts.append(bt)
    B = np.concatenate([p.B for p in pts])
    theta = np.concatenate([p.theta for p in pts])
    c_hat = (B[0] - B[1]) / (2 * config.T)
    var_pred = float(np.sum(_predicted_vars(config, theta, 1)[1]) / (4 * config.T**2))
    var_boot = np.nan
    if bts[0] is not None:
        reps = (bts[0].B[:, 0] - bts[1].B[:, 0]) / (2 * config.T)
        var_boot = float(np.nanvar(reps, ddof=1))
    elif exact:
        var_boot = 0.0
    return TargetedEstimate(float(c_hat), var_pred, var_boot, B)
