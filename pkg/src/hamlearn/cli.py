"""Config-driven batch runner.

Usage::

    hamlearn validate config.json
    hamlearn run config.json [--seed S] [--threads K] [--output DIR]

``run`` also accepts a ``manifest.json`` written by an earlier run and replays it.
Exit status is 0 on success, 1 when a scenario fails and 2 for configuration errors.
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Optional

import jsonschema
import numpy as np

from . import __version__, qspe
from .errors import HamLearnError
from .learner import learn_all_analog, learn_all_hybrid, learn_pair, plan_rounds
from .model import HamiltonianSpec, enumerate_subspaces, make_pair, project_block
from .noise import NoiseConfig
from .oracle import dense_circuit_distribution, dense_hamiltonian, dense_propagator, verify_block_structure
from .rydberg import run_benchmark
from .sim import ExperimentConfig, make_rng, run_circuit

log = logging.getLogger("hamlearn")

SCHEMA_VERSION = 1
OUTPUT_ENV = "HAMLEARN_OUTPUT"
DEFAULT_OUTPUT = "hamlearn-out"
SCENARIOS = ("learn-pair", "learn-all", "robustness", "rydberg", "sweep-d", "decompose-check")
REGIME_LIMIT = 0.2
# warn once |2 zeta| is within 10% of pi/2
ZETA_LIMIT = 0.9 * np.pi / 2

EXIT_OK, EXIT_SCENARIO, EXIT_CONFIG = 0, 1, 2

_number = {"type": "number"}
_prob = {"type": "number", "minimum": 0, "maximum": 1}

CONFIG_SCHEMA: dict = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "type": "object",
    "required": ["schema_version", "scenario", "seed"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "scenario": {"enum": list(SCENARIOS)},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "spec": {
            "oneOf": [
                {
                    "type": "object",
                    "required": ["a", "c"],
                    "additionalProperties": False,
                    "properties": {
                        "n": {"type": "integer", "minimum": 2},
                        "a": {"type": "array", "items": _number, "minItems": 2},
                        "c": {"type": "array", "items": {"type": "array", "items": _number}},
                        "phi": _number,
                    },
                },
                {
                    "type": "object",
                    "required": ["generator"],
                    "additionalProperties": False,
                    "properties": {
                        "generator": {
                            "type": "object",
                            "required": ["n", "c_range", "a"],
                            "additionalProperties": False,
                            "properties": {
                                "n": {"type": "integer", "minimum": 2, "maximum": 16},
                                "c_range": {"type": "array", "items": _number, "minItems": 2, "maxItems": 2},
                                "a": {"type": "number", "exclusiveMinimum": 0},
                                "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
                            },
                        }
                    },
                },
            ]
        },
        "experiment": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "d": {"type": "integer", "minimum": 2},
                "N": {"type": "integer", "minimum": 1},
                "T": {"oneOf": [{"type": "number", "exclusiveMinimum": 0}, {"const": "auto"}]},
                "aT": {"type": "number", "exclusiveMinimum": 0},
                "mode": {"enum": ["hybrid", "analog"]},
            },
        },
        "noise": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "depol_alpha": {"oneOf": [_prob, {"type": "null"}]},
                "prep_alpha": {"oneOf": [_number, {"type": "null"}]},
                "readout": {"oneOf": [{"type": "array", "items": _prob, "minItems": 2, "maxItems": 2}, {"type": "null"}]},
                "drift_gamma": {"oneOf": [_number, {"type": "null"}]},
            },
        },
        "n_boot": {"type": "integer", "minimum": 0},
        "exact": {"type": "boolean"},
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["d"],
            "properties": {"d": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 2}},
        },
        "rydberg": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"mode": {"enum": ["pairwise", "insitu"]}, "aT": {"type": "number", "exclusiveMinimum": 0}},
        },
        "output": {"type": "string"},
        "write_shots": {"type": "boolean"},
    },
    "allOf": [
        {
            "if": {"properties": {"scenario": {"enum": ["learn-pair", "learn-all", "robustness", "sweep-d"]}}},
            "then": {
                "required": ["spec", "experiment"],
                "properties": {"experiment": {"required": ["d", "N", "T"]}},
            },
        },
        {
            "if": {"properties": {"scenario": {"enum": ["robustness", "sweep-d"]}}},
            "then": {"required": ["sweep"]},
        },
        {
            "if": {"properties": {"scenario": {"const": "decompose-check"}}},
            "then": {"required": ["spec", "experiment"], "properties": {"experiment": {"required": ["d", "T"]}}},
        },
        {
            "if": {"properties": {"scenario": {"const": "rydberg"}}},
            "then": {"required": ["experiment"], "properties": {"experiment": {"required": ["d", "N"]}}},
        },
    ],
}


class ConfigError(Exception):
    """Invalid configuration; carries one diagnostic line per problem."""

    def __init__(self, messages: list[str]):
        super().__init__("; ".join(messages))
        self.messages = messages


# ---------------------------------------------------------------- config


def _path(err: jsonschema.ValidationError) -> str:
    return ".".join(str(p) for p in err.absolute_path) or "<root>"


def load_config(path: str | os.PathLike) -> dict:
    """Parse a config or manifest file; a manifest yields its recorded config."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror or exc}"]) from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}"]) from exc
    if isinstance(data, dict) and "manifest_version" in data:
        data = data.get("config")
    return data


def schema_errors(cfg: Any) -> list[str]:
    validator = jsonschema.Draft7Validator(CONFIG_SCHEMA)
    errs = sorted(validator.iter_errors(cfg), key=lambda e: (list(e.absolute_path), e.message))
    return [f"{_path(e)}: {e.message}" for e in errs]


def generate_spec(gen: dict, fallback_seed: int) -> HamiltonianSpec:
    """Random all-to-all spec with couplings uniform in ``c_range`` and a common drive."""
    n = int(gen["n"])
    lo, hi = gen["c_range"]
    rng = make_rng((int(gen.get("seed", fallback_seed)), 2))
    c = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    c[iu] = rng.uniform(lo, hi, size=len(iu[0]))
    return HamiltonianSpec(a=np.full(n, float(gen["a"])), c=c + c.T)


def build(cfg: dict) -> dict:
    """Turn a schema-valid config into domain objects; raises ``ConfigError``."""
    out: dict = {"seed": int(cfg["seed"])}
    try:
        if "spec" in cfg:
            s = cfg["spec"]
            spec = generate_spec(s["generator"], out["seed"]) if "generator" in s else HamiltonianSpec.from_dict(s)
            out["spec"] = spec
        ex = cfg.get("experiment", {})
        T = ex.get("T", 1e-3)
        if T == "auto":
            if "spec" not in out:
                raise ConfigError(["experiment.T: 'auto' needs a spec"])
            T = ex.get("aT", 0.01) / float(np.max(out["spec"].a))
        out["T"] = float(T)
        if "d" in ex:
            out["experiment"] = ExperimentConfig(
                d=ex["d"], N=ex.get("N", 1), T=out["T"], mode=ex.get("mode", "hybrid"), seed=out["seed"]
            )
        out["noise"] = NoiseConfig.from_dict(cfg.get("noise"))
    except (HamLearnError, ValueError, TypeError) as exc:
        raise ConfigError([f"{type(exc).__name__}: {exc}"]) from exc
    scen = cfg["scenario"]
    if scen in ("learn-pair", "sweep-d", "robustness") and out["spec"].n != 2:
        raise ConfigError([f"spec: scenario {scen} needs a two-qubit spec, got n={out['spec'].n}"])
    return out


def _drive_angles(spec: HamiltonianSpec, T: float, mode: str) -> tuple[float, float]:
    """Largest theta and |zeta| over every subspace the learner would measure."""
    cfg = ExperimentConfig(d=2, N=1, T=T, mode=mode)
    th, ze = [], []
    for plan in plan_rounds(spec.n, cfg):
        for p in plan.pairs:
            blk = project_block(spec, p, T)
            t, z = qspe.forward_mapping(blk.A, blk.B)
            th.append(abs(float(t)))
            ze.append(abs(float(z)))
    return max(th), max(ze)


def diagnostics(cfg: Any) -> tuple[list[str], list[str]]:
    """(errors, warnings) for a parsed config, without running anything."""
    errors = schema_errors(cfg)
    if errors:
        return errors, []
    try:
        built = build(cfg)
    except ConfigError as exc:
        return exc.messages, []
    warns: list[str] = []
    spec = built.get("spec")
    ex = cfg.get("experiment", {})
    if spec is not None and "d" in ex:
        ds = cfg.get("sweep", {}).get("d", []) + [ex["d"]]
        mode = "analog" if spec.n == 2 else ex.get("mode", "hybrid")
        theta, zeta = _drive_angles(spec, built["T"], mode)
        dt = max(ds) * theta
        if dt > REGIME_LIMIT:
            warns.append(f"regime: d*theta = {dt:.3g} exceeds {REGIME_LIMIT}; the variance formulas assume d*theta << 1")
        if 2 * zeta > ZETA_LIMIT:
            warns.append(f"regime: |2 zeta| = {2 * zeta:.3g} approaches pi/2; phase estimates may wrap")
    return [], warns


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------- scenarios


def _clean(x):
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x) if np.isfinite(x) else None
    return x


def _sub_seed(seed: int, *keys: int) -> int:
    st = np.random.SeedSequence([seed, *keys]).generate_state(2, np.uint32)
    return int(st[0]) | (int(st[1]) << 32)


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _shots_csv(batches, prefix: str = "") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["experiment", "batch", "kind", "omega_index", "bitstring", "count"])
    for b, batch in enumerate(batches):
        if batch.shots is None:
            continue
        m = batch.data.shape[1]
        for idx, rec in enumerate(batch.records()):
            kind = ("plus", "i")[idx // m]
            for bits in sorted(rec.counts):
                w.writerow([prefix, b, kind, idx % m, bits, rec.counts[bits]])
    return buf.getvalue()


def pair_prediction(spec: HamiltonianSpec, d: int, N: int, T: float) -> tuple[float, float, float]:
    """True theta of the (00, 10) subspace and predicted / Cramer-Rao Var(c12_hat)."""
    blk = project_block(spec, make_pair(0, 1, 2), T)
    theta = float(qspe.forward_mapping(blk.A, blk.B)[0])
    var_pred = qspe.analytic_variance(N, d, theta, "analog")[1] / T**2
    cr = qspe.cr_bound(N, d, theta, "analog")[1] / T**2
    return theta, float(var_pred), float(cr)


def _sweep(spec, built, ds, n_boot, noise, threads, tag: int) -> dict:
    ex = built["experiment"]
    seed = built["seed"]

    def point(d):
        cfg = ExperimentConfig(d=d, N=ex.N, T=ex.T, mode="analog", seed=seed)
        rep = learn_pair(spec, cfg, noise, n_boot=n_boot, report=True, seed=_sub_seed(seed, tag, d))
        _, var_pred, cr = pair_prediction(spec, d, ex.N, ex.T)
        return {
            "d": d,
            "c_hat": float(rep.c_hat[0, 1]),
            "a_hat": float(rep.a_hat[0]),
            "var_boot": float(rep.var_boot["c"][0, 1]),
            "var_pred": var_pred,
            "cr_bound": cr,
        }

    rows = _map(point, list(ds), threads)
    vb = np.array([r["var_boot"] for r in rows])
    slope = float("nan")
    if np.all(np.isfinite(vb)) and np.all(vb > 0):
        slope = float(np.polyfit(np.log([r["d"] for r in rows]), np.log(vb), 1)[0])
    c_true = spec.coupling(1, 2)
    for r in rows:
        r["z"] = (r["c_hat"] - c_true) / np.sqrt(r["var_boot"]) if r["var_boot"] > 0 else float("nan")
    return {"points": rows, "slope_fit": slope, "c_true": c_true}


def sweep_csv(result: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["d", "var_boot", "var_pred", "cr_bound", "slope_fit"])
    for r in result["points"]:
        w.writerow([r["d"]] + ["%.17g" % v for v in (r["var_boot"], r["var_pred"], r["cr_bound"], result["slope_fit"])])
    return buf.getvalue()


def _learn_summary(rep, spec) -> dict:
    out = rep.to_dict()
    out["c_true"] = spec.c
    out["a_true"] = spec.a
    return out


def run_scenario(cfg: dict, built: dict, threads: int = 1) -> tuple[dict, dict[str, str]]:
    """Execute one scenario; returns the report and any extra text files."""
    scen = cfg["scenario"]
    seed = built["seed"]
    noise = built["noise"]
    n_boot = int(cfg.get("n_boot", 1000))
    exact = bool(cfg.get("exact", False))
    extra: dict[str, str] = {}
    spec = built.get("spec")
    if spec is not None:
        result: dict = {"spec": spec.to_dict()}
    else:
        result = {}

    if scen == "learn-pair":
        rep = learn_pair(spec, built["experiment"], noise, n_boot=n_boot, exact=exact, report=True)
        result["learn"] = _learn_summary(rep, spec)
        if cfg.get("write_shots") and not exact:
            extra["shots.csv"] = _shots_csv(rep.batches)
    elif scen == "learn-all":
        ex = built["experiment"]
        fn = learn_all_hybrid if ex.mode == "hybrid" else learn_all_analog
        rep = fn(spec, ex, noise, n_boot=n_boot, exact=exact)
        result["learn"] = _learn_summary(rep, spec)
        if cfg.get("write_shots") and not exact:
            extra["shots.csv"] = _shots_csv(rep.batches)
    elif scen == "sweep-d":
        sw = _sweep(spec, built, cfg["sweep"]["d"], n_boot, noise, threads, 0)
        result["sweep"] = sw
        extra["sweep.csv"] = sweep_csv(sw)
    elif scen == "robustness":
        settings = {"noiseless": NoiseConfig()}
        nd = noise.to_dict()
        active = {k: v for k, v in nd.items() if v is not None}
        for k, v in active.items():
            settings[k] = NoiseConfig.from_dict({k: v})
        if len(active) > 1:
            settings["joint"] = noise
        result["settings"] = {}
        for tag, (label, nc) in enumerate(settings.items()):
            sw = _sweep(spec, built, cfg["sweep"]["d"], n_boot, nc, threads, tag + 1)
            sw["noise"] = nc.to_dict()
            result["settings"][label] = sw
            extra[f"sweep_{label}.csv"] = sweep_csv(sw)
    elif scen == "rydberg":
        ex = cfg["experiment"]
        ry = cfg.get("rydberg", {})
        est = run_benchmark(
            d=ex["d"], N=ex["N"], n_boot=n_boot, seed=seed, mode=ry.get("mode", "pairwise"),
            noise=None if noise.is_noiseless else noise, drive_integral=ry.get("aT"), exact=exact,
        )
        result["distances"] = [
            {
                "label": e.label,
                "R_true": e.R_true,
                "R_hat": e.R_hat,
                "b_hat": e.b_hat,
                "var_b": e.var_b,
                "var_R": e.var_R,
                "rel_sigma": e.rel_sigma,
                "rel_error": e.rel_error,
            }
            for e in est
        ]
        result["ordered"] = bool(all(x.R_hat < y.R_hat for x, y in zip(est, est[1:])))
    elif scen == "decompose-check":
        result["decompose"] = decompose_check(spec, built["experiment"])
    return result, extra


def decompose_check(spec: HamiltonianSpec, config: ExperimentConfig) -> dict:
    """Compare the block simulation with the dense oracle for every drive qubit."""
    n = spec.n
    off, dev = [], []
    omegas = config.omegas()[:3]
    for i in range(1, n + 1):
        pairs = enumerate_subspaces(spec, i)
        U = dense_propagator(dense_hamiltonian(spec, i), config.T)
        off.append(verify_block_structure(U, pairs))
    for plan in plan_rounds(n, config):
        for pairs in plan.batches:
            for w in omegas:
                for kind in ("plus", "i"):
                    dense = dense_circuit_distribution(spec, pairs, config.d, config.T, w, kind)
                    dist = run_circuit(spec, pairs, config, w, kind)
                    blk = np.zeros(2**n)
                    blk[dist.codes] = dist.probs
                    dev.append(float(np.max(np.abs(blk - dense))))
    return {"max_off_block": max(off), "max_distribution_deviation": max(dev), "drives": n}


# ---------------------------------------------------------------- output


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def output_dir(cli_value: Optional[str], cfg: dict) -> Path:
    return Path(cli_value or cfg.get("output") or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT)


def cmd_run(path: str, seed: Optional[int], threads: int, output: Optional[str]) -> int:
    try:
        cfg = load_config(path)
        if isinstance(cfg, dict) and seed is not None:
            cfg = copy.deepcopy(cfg)
            cfg["seed"] = seed
        errors = schema_errors(cfg)
        if errors:
            raise ConfigError(errors)
        built = build(cfg)
    except ConfigError as exc:
        for m in exc.messages:
            print(f"config error: {m}", file=sys.stderr)
        return EXIT_CONFIG
    # the output location does not influence results, so it is not part of the replay config
    replay_cfg = {k: v for k, v in cfg.items() if k != "output"}
    digest = config_hash(replay_cfg)
    try:
        result, extra = run_scenario(cfg, built, threads=max(1, int(threads)))
    except (HamLearnError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"scenario {cfg['scenario']} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    report = {
        "scenario": cfg["scenario"],
        "seed": built["seed"],
        "config_sha256": digest,
        "version": __version__,
        "result": result,
    }
    files = {"report.json": _dumps(report), **extra}
    manifest = {
        "manifest_version": 1,
        "seed": built["seed"],
        "config_sha256": digest,
        "config": replay_cfg,
        "version": __version__,
        "files": {name: hashlib.sha256(text.encode()).hexdigest() for name, text in sorted(files.items())},
    }
    files["manifest.json"] = _dumps(manifest)
    out = output_dir(output, cfg)
    out.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        _atomic_write(out / name, text)
    print(f"{cfg['scenario']}: wrote {', '.join(sorted(files))} to {out}")
    return EXIT_OK


def cmd_validate(path: str) -> int:
    try:
        cfg = load_config(path)
    except ConfigError as exc:
        for m in exc.messages:
            print(f"error: {m}")
        return EXIT_CONFIG
    errors, warns = diagnostics(cfg)
    for m in errors:
        print(f"error: {m}")
    for m in warns:
        print(f"warning: {m}")
    return EXIT_CONFIG if errors else EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hamlearn", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario config (or replay a manifest)")
    r.add_argument("config")
    r.add_argument("--seed", type=int, default=None, help="override the config seed")
    r.add_argument("--threads", type=int, default=1, help="worker threads for sweep points")
    r.add_argument("--output", default=None, help=f"output directory (default ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})")
    v = sub.add_parser("validate", help="check a config without running it")
    v.add_argument("config")
    return p


def main(argv: Optional[list[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return cmd_run(args.config, args.seed, args.threads, args.output)
    return cmd_validate(args.config)


if __name__ == "__main__":
    raise SystemExit(main())
