"""Rydberg interaction units and the atom-distance benchmark."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Optional

import numpy as np

from .learner import learn_all_analog, learn_pair
from .model import HamiltonianSpec
from .noise import NoiseConfig
from .sim import ExperimentConfig

__all__ = [
    "C6",
    "RydbergCase",
    "coupling_from_distance",
    "distance_from_coupling",
    "variance_convert",
    "load_benchmark",
    "DistanceEstimate",
    "run_benchmark",
]

# um^6 rad / us
C6 = 5_420_503


def coupling_from_distance(R: float) -> float:
    """Van der Waals coupling ``C6 / R^6`` (rad/us) at distance R (um)."""
    if not R > 0:
        raise ValueError("distance must be positive")
    return C6 / R**6


def distance_from_coupling(b_hat: float, T: float) -> float:
    """Distance ``(C6 / (b_hat / T))^(1/6)`` from an accumulated coupling angle b_hat (rad)."""
    if not b_hat > 0:
        raise ValueError("coupling angle must be positive")
    if not T > 0:
        raise ValueError("evolution time must be positive")
    return (C6 / (b_hat / T)) ** (1.0 / 6.0)


def variance_convert(var_b: float, b: float, R: float) -> float:
    """Linearized ``Var(R) = Var(b) (R / (6 b))^2``."""
    if not (b > 0 and R > 0):
        raise ValueError("b and R must be positive")
    return var_b * (R / (6.0 * b)) ** 2


@dataclass(frozen=True)
class RydbergCase:
    label: str
    R: float
    T: float
    V_nominal: Optional[float] = None
    b_nominal: Optional[float] = None

    @property
    def V(self) -> float:
        return coupling_from_distance(self.R)

    @property
    def b(self) -> float:
        return self.V * self.T


def load_benchmark() -> tuple[list[RydbergCase], float]:
    """Benchmark cases and the drive integral a T (rad) they are run at."""
    text = resources.files("hamlearn").joinpath("data/rydberg_benchmark.json").read_text()
    data = json.loads(text)
    if data.get("schema") != 1:
        raise ValueError(f"unsupported benchmark schema {data.get('schema')}")
    cases = [
        RydbergCase(c["label"], float(c["R"]), float(c["T"]), c.get("V_nominal"), c.get("b_nominal"))
        for c in data["cases"]
    ]
    return cases, float(data["drive_integral"])


@dataclass
class DistanceEstimate:
    label: str
    R_true: float
    R_hat: float
    b_hat: float
    var_b: float
    var_R: float

    @property
    def rel_error(self) -> float:
        return abs(self.R_hat - self.R_true) / self.R_true

    @property
    def rel_sigma(self) -> float:
        return float(np.sqrt(self.var_R) / self.R_hat)


def run_benchmark(
    d: int = 10,
    N: int = 100_000,
    n_boot: int = 1000,
    seed: int = 0,
    mode: str = "pairwise",
    noise: Optional[NoiseConfig] = None,
    cases: Optional[list[RydbergCase]] = None,
    drive_integral: Optional[float] = None,
    exact: bool = False,
) -> list[DistanceEstimate]:
    """Learn each benchmark distance end to end.

    ``pairwise`` runs every case as its own two-atom experiment.  ``insitu``
    places three atoms with the three case distances as R12, R13, R23 and learns
    all couplings at once with one subspace per batch; all cases must then share T.
    ``var_b`` is the bootstrap variance of the learned coupling angle.
    """
    if cases is None:
        cases, default_drive = load_benchmark()
        drive_integral = drive_integral if drive_integral is not None else default_drive
    if drive_integral is None:
        raise ValueError("drive_integral is required with custom cases")
    out = []
    if mode == "pairwise":
        for k, case in enumerate(cases):
            spec = HamiltonianSpec(a=[drive_integral / case.T] * 2, c=[[0.0, case.V], [case.V, 0.0]])
            cfg = ExperimentConfig(d=d, N=N, T=case.T, mode="analog", seed=seed)
            rep = learn_pair(spec, cfg, noise, n_boot=n_boot, exact=exact, report=True, seed=seed + k)
            b_hat = rep.c_hat[0, 1] * case.T
            var_b = rep.var_boot["c"][0, 1] * case.T**2
            R_hat = distance_from_coupling(b_hat, case.T)
            out.append(DistanceEstimate(case.label, case.R, R_hat, b_hat, var_b, variance_convert(var_b, b_hat, R_hat)))
        return out
    if mode != "insitu":
        raise ValueError("mode must be 'pairwise' or 'insitu'")
    if len(cases) != 3 or len({c.T for c in cases}) != 1:
        raise ValueError("in-situ mode needs three cases with a common T")
    T = cases[0].T
    pairs = [(1, 2), (1, 3), (2, 3)]
    spec = HamiltonianSpec.from_couplings(3, drive_integral / T, {p: c.V for p, c in zip(pairs, cases)})
    cfg = ExperimentConfig(d=d, N=N, T=T, mode="analog", seed=seed)
    rep = learn_all_analog(spec, cfg, noise, n_boot=n_boot, exact=exact)
    for (p, q), case in zip(pairs, cases):
        b_hat = rep.c_hat[p - 1, q - 1] * T
        var_b = rep.var_boot["c"][p - 1, q - 1] * T**2
        R_hat = distance_from_coupling(b_hat, T)
        out.append(DistanceEstimate(case.label, case.R, R_hat, b_hat, var_b, variance_convert(var_b, b_hat, R_hat)))
    return out
