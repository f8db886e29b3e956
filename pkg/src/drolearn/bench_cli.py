"""Experiment front end: config files, synthetic streams, and the CLI.

Configs are flat ``key = value`` text with dotted section keys (see
demos/ref1d.cfg for a complete example).  The CLI exposes four verbs:

    run       stream an experiment, writing a trace table and a summary
    oracle    one-shot worst-case solve on a given sample file
    validate  brute-force comparison suite at desk scale
    w1        exact transport distance between two atom files

Exit codes: 0 success, 2 config error, 3 scale-guard violation, 4 numeric
failure.  Atom files hold one atom per line, whitespace-separated
coordinates with an optional trailing weight column (uniform when absent);
files written here carry a ``# dim=M`` header so the weight column is
unambiguous on read.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import learner, reference
from .budget import DiscreteDistribution, empirical_distribution, wasserstein_oracle
from .model import (
    AbsDevPart,
    AffinePart,
    AmbiguitySpec,
    DecisionSpace,
    LossModel,
    RadialPart,
    SampleBuffer,
    SeparablePiece,
    make_separable_loss,
)
from .reference import GridSpec, ScaleError, brute_force_master, robust_risk
from .utility import ToleranceConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SCALE = 3
EXIT_NUMERIC = 4

TRACE_COLUMNS = ("t", "f_current", "f_comparator", "oracle_value", "budget_total", "lambda_hat", "eta")


class ConfigError(ValueError):
    """Malformed or inconsistent experiment configuration."""


# ---------------------------------------------------------------------------
# flat dotted-key config format


def parse_config_text(text: str) -> dict:
    """Parse ``key = value`` lines; '#' lines are comments."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = _parse_value(val.strip())
    return out


def _parse_value(text: str):
    low = text.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    if "," in text:
        try:
            return [float(part) for part in text.split(",")]
        except ValueError:
            return text
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def serialize_config(cfg: dict) -> str:
    lines = []
    for key in sorted(cfg):
        lines.append(f"{key} = {_format_value(cfg[key])}")
    return "\n".join(lines) + "\n"


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (list, tuple, np.ndarray)):
        return ",".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def load_config(path) -> dict:
    return parse_config_text(Path(path).read_text())


def _as_list(v) -> list[float]:
    if isinstance(v, (list, tuple, np.ndarray)):
        return [float(x) for x in v]
    return [float(v)]


# ---------------------------------------------------------------------------
# builders


@dataclass
class ExperimentConfig:
    loss: LossModel
    space: DecisionSpace
    amb: AmbiguitySpec
    tol: ToleranceConfig
    horizon: int
    stream: dict
    seed: int
    x0: np.ndarray | None
    comparator: np.ndarray | None
    validate: bool
    raw: dict = field(repr=False, default_factory=dict)


def build_loss(cfg: dict) -> LossModel:
    n = cfg.get("loss.pieces")
    if not isinstance(n, int) or n < 1:
        raise ConfigError("loss.pieces must be a positive integer")
    pieces = []
    for idx in range(1, n + 1):
        prefix = f"loss.piece{idx}"
        pieces.append(SeparablePiece(x_part=_build_x_part(cfg, prefix), xi_part=_build_xi_part(cfg, prefix)))
    try:
        return make_separable_loss(pieces)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _req(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"missing config key {key!r}")
    return cfg[key]


def _build_x_part(cfg: dict, prefix: str):
    kind = _req(cfg, f"{prefix}.x.kind")
    if kind == "affine":
        return AffinePart(coef=_as_list(_req(cfg, f"{prefix}.x.coef")), offset=float(cfg.get(f"{prefix}.x.offset", 0.0)))
    if kind == "absdev":
        return AbsDevPart(scale=float(_req(cfg, f"{prefix}.x.scale")), anchor=_as_list(_req(cfg, f"{prefix}.x.anchor")))
    raise ConfigError(f"unknown decision-part kind {kind!r} (expected affine or absdev)")


def _build_xi_part(cfg: dict, prefix: str):
    kind = _req(cfg, f"{prefix}.xi.kind")
    if kind in ("cone", "smooth"):
        return RadialPart(
            peak=float(_req(cfg, f"{prefix}.xi.peak")),
            slope=float(_req(cfg, f"{prefix}.xi.slope")),
            center=_as_list(_req(cfg, f"{prefix}.xi.center")),
            smooth=(kind == "smooth"),
        )
    raise ConfigError(
        f"unknown sample-part kind {kind!r}: only the bounded-above families "
        "'cone' and 'smooth' are supported (unbounded growth breaks the worst-case problem)"
    )


def build_space(cfg: dict) -> DecisionSpace:
    kind = _req(cfg, "space.kind")
    try:
        if kind == "box":
            return DecisionSpace.box(_as_list(_req(cfg, "space.lower")), _as_list(_req(cfg, "space.upper")))
        if kind == "ball":
            return DecisionSpace.ball(_as_list(_req(cfg, "space.center")), float(_req(cfg, "space.radius")))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown space kind {kind!r}")


def build_experiment(cfg: dict, seed_override: int | None = None) -> ExperimentConfig:
    loss = build_loss(cfg)
    space = build_space(cfg)
    radius = float(_req(cfg, "ambiguity.radius"))
    if radius < 0:
        raise ConfigError("ambiguity.radius must be nonnegative")
    amb = AmbiguitySpec(radius=radius)
    delta = float(_req(cfg, "tolerance.delta"))
    if delta <= 0:
        raise ConfigError("tolerance.delta must be positive")
    try:
        tol = ToleranceConfig.from_delta(delta, loss.lip_xi, eta_out=float(cfg.get("tolerance.eta_out", 1e-4)))
        tol.check_loss(loss.lip_xi)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    horizon = cfg.get("run.horizon")
    if not isinstance(horizon, int) or horizon < 1:
        raise ConfigError("run.horizon must be a positive integer")
    stream = {k.split(".", 1)[1]: v for k, v in cfg.items() if k.startswith("stream.")}
    if "family" not in stream:
        raise ConfigError("missing config key 'stream.family'")
    if "dim" not in stream or not isinstance(stream["dim"], int):
        raise ConfigError("stream.dim must be an integer")
    seed = int(seed_override if seed_override is not None else cfg.get("stream.seed", 0))
    x0 = np.asarray(_as_list(cfg["run.x0"])) if "run.x0" in cfg else None
    comp = np.asarray(_as_list(cfg["run.comparator"])) if "run.comparator" in cfg else None
    return ExperimentConfig(
        loss=loss, space=space, amb=amb, tol=tol, horizon=horizon,
        stream=stream, seed=seed, x0=x0, comparator=comp,
        validate=bool(cfg.get("validate", False)), raw=dict(cfg),
    )


# ---------------------------------------------------------------------------
# synthetic streams


def generate_stream(spec: dict, seed: int, horizon: int) -> np.ndarray:
    """Deterministic i.i.d. samples, shape (horizon, dim)."""
    if horizon < 0:
        raise ConfigError("horizon must be nonnegative")
    dim = int(spec["dim"])
    family = spec["family"]
    rng = np.random.default_rng(seed)
    if horizon == 0:
        return np.zeros((0, dim))
    if family == "gaussian":
        mean = np.resize(_as_list(spec.get("mean", 0.0)), dim)
        std = np.resize(_as_list(spec.get("std", 1.0)), dim)
        return mean + std * rng.standard_normal((horizon, dim))
    if family == "uniform-box":
        low = np.resize(_as_list(spec.get("low", 0.0)), dim)
        high = np.resize(_as_list(spec.get("high", 1.0)), dim)
        return rng.uniform(low, high, size=(horizon, dim))
    if family == "mixture-of-gaussians":
        comps = []
        idx = 1
        while f"component{idx}.weight" in spec:
            comps.append(
                (
                    float(spec[f"component{idx}.weight"]),
                    np.resize(_as_list(spec.get(f"component{idx}.mean", 0.0)), dim),
                    np.resize(_as_list(spec.get(f"component{idx}.std", 1.0)), dim),
                )
            )
            idx += 1
        if not comps:
            raise ConfigError("mixture-of-gaussians needs stream.component1.* keys")
        weights = np.array([c[0] for c in comps])
        weights = weights / weights.sum()
        choice = rng.choice(len(comps), size=horizon, p=weights)
        noise = rng.standard_normal((horizon, dim))
        means = np.stack([c[1] for c in comps])
        stds = np.stack([c[2] for c in comps])
        return means[choice] + stds[choice] * noise
    raise ConfigError(f"unknown stream family {family!r}")


# ---------------------------------------------------------------------------
# atom files


def write_atoms(path, dist: DiscreteDistribution) -> None:
    lines = [f"# dim={dist.dim}"]
    for atom, w in zip(dist.atoms, dist.weights):
        coords = " ".join(repr(float(c)) for c in atom)
        lines.append(f"{coords} {float(w)!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_atoms(path) -> DiscreteDistribution:
    """Atom file reader; without a '# dim=' header all columns are coordinates."""
    dim = None
    rows = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if "dim=" in line:
                dim = int(line.split("dim=")[1].split()[0])
            continue
        rows.append([float(tok) for tok in line.split()])
    if not rows:
        raise ConfigError(f"no atoms in {path}")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ConfigError(f"ragged rows in {path}")
    arr = np.asarray(rows)
    if dim is None:
        atoms, weights = arr, np.full(arr.shape[0], 1.0 / arr.shape[0])
    elif width == dim:
        atoms, weights = arr, np.full(arr.shape[0], 1.0 / arr.shape[0])
    elif width == dim + 1:
        atoms, weights = arr[:, :dim], arr[:, dim]
        weights = weights / weights.sum()
    else:
        raise ConfigError(f"rows of width {width} do not match dim={dim}")
    return DiscreteDistribution(atoms, weights)


# ---------------------------------------------------------------------------
# experiment orchestration


def _resolve_comparator(exp: ExperimentConfig, stream: np.ndarray) -> np.ndarray:
    """Config comparator, or the offline grid minimizer over the full-stream ball."""
    if exp.comparator is not None:
        return exp.comparator
    if exp.space.dim > 2:
        raise ConfigError("run.comparator is required for decision dimension > 2")
    points = int(exp.raw.get("comparator.grid", 41))
    buffer = SampleBuffer(stream)
    best_val, best_x = math.inf, None
    for g in exp.space.axis_grid(points):
        val = robust_risk(exp.loss, g, buffer, exp.amb, exp.tol)
        if val < best_val:
            best_val, best_x = val, g
    return best_x


def write_trace(path, trace: learner.RunTrace) -> None:
    """Fixed column order; wall time is kept out so reruns are byte-identical."""
    lines = ["# " + "\t".join(TRACE_COLUMNS)]
    for r in trace.rows:
        lines.append(
            "\t".join(
                [str(r.t)]
                + [repr(float(v)) for v in (r.f_current, r.f_comparator, r.oracle_value, r.budget_total, r.lam, r.eta)]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def write_summary(path, summary: dict) -> None:
    Path(path).write_text(serialize_config(summary))


def run_experiment(cfg: dict, out_dir, seed_override: int | None = None, quiet: bool = False) -> dict:
    """Run the configured experiment; returns the artifact paths and summary."""
    exp = build_experiment(cfg, seed_override=seed_override)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t_start = time.perf_counter()
    stream = generate_stream(exp.stream, exp.seed, exp.horizon)
    comparator = _resolve_comparator(exp, stream)
    trace = learner.run(
        exp.loss, exp.space, exp.amb, exp.tol, stream, exp.horizon, comparator, x0=exp.x0
    )
    wall = time.perf_counter() - t_start

    trace_path = out / str(exp.raw.get("output.trace", "trace.tsv"))
    summary_path = out / str(exp.raw.get("output.summary", "summary.txt"))
    write_trace(trace_path, trace)
    bound = exp.space.diameter * exp.loss.lip_x * (1.0 + math.log(exp.horizon)) / math.sqrt(exp.horizon)
    summary = {
        "horizon": exp.horizon,
        "dim": int(exp.stream["dim"]),
        "radius": exp.amb.radius,
        "delta": exp.tol.delta,
        "seed": exp.seed,
        "comparator": list(comparator),
        "x_bar": list(trace.x_bar),
        "avg_regret": trace.avg_regret,
        "regret_bound": bound + 2.0 * exp.tol.delta,
        "wall_time_seconds": wall,
    }
    artifacts = {"trace": str(trace_path), "summary": str(summary_path), "summary_data": summary}

    if bool(exp.raw.get("gap.enable", False)):
        holdout_n = int(exp.raw.get("gap.holdout", 10_000))
        grid_points = int(exp.raw.get("gap.grid", 33))
        # hold-out drawn from the same stream family at a shifted seed
        holdout = SampleBuffer(generate_stream(exp.stream, exp.seed + 10**6, holdout_n))
        summary["gap_proxy"] = reference.gap_estimate(
            trace.x_bar, holdout, exp.loss, exp.space, exp.amb, exp.tol,
            points_per_axis=grid_points,
        )
        if int(exp.stream["dim"]) == 1:
            emp = empirical_distribution(SampleBuffer(stream))
            hold_emp = empirical_distribution(holdout)
            summary["w1_stream_holdout"] = reference.discrete_w1(emp, hold_emp)

    if exp.validate:
        report_path = out / str(exp.raw.get("output.report", "validation.txt"))
        report = validation_report(exp, stream)
        Path(report_path).write_text(report["text"])
        artifacts["report"] = str(report_path)
        artifacts["validation_passed"] = report["passed"]
        summary["validation_passed"] = report["passed"]
    write_summary(summary_path, summary)
    if not quiet:
        print(f"trace:   {trace_path}")
        print(f"summary: {summary_path}")
        if "report" in artifacts:
            print(f"report:  {artifacts['report']}")
    return artifacts


def validation_report(exp: ExperimentConfig, stream: np.ndarray) -> dict:
    """Oracle vs brute force on stream prefixes within desk scale."""
    dim = stream.shape[1]
    if dim > 2 or exp.loss.num_pieces > 3:
        raise ScaleError("validation needs dim <= 2 and at most 3 pieces")
    t_max = min(4, stream.shape[0])
    if t_max == 0:
        raise ConfigError("validation needs at least one stream sample")
    x_eval = exp.x0 if exp.x0 is not None else exp.space.midpoint()
    frozen = exp.loss.at(x_eval)
    q_points = int(exp.raw.get("validate.q_points", 1001 if dim == 1 else 201))
    grid = GridSpec(
        alpha_points=int(exp.raw.get("validate.alpha_points", 201)),
        beta_points=int(exp.raw.get("validate.beta_points", 201)),
        q_points=q_points,
        b_points=int(exp.raw.get("validate.b_points", 201)),
    )
    lines = ["# t\toracle\tbrute_force\tdeviation\ttolerance\tstatus"]
    passed = True
    worst = 0.0
    for t in range(1, t_max + 1):
        buffer = SampleBuffer(stream[:t])
        _, value = wasserstein_oracle(frozen, buffer, exp.amb, exp.tol)
        brute = brute_force_master(frozen, buffer, exp.amb.radius, grid)
        xi_norm = float(np.max(np.linalg.norm(buffer.samples, axis=1)))
        res = grid.value_resolution(exp.loss.lip_xi, dim, exp.amb.radius * t, xi_norm)
        tolerance = exp.tol.delta + res
        dev = abs(value - brute)
        worst = max(worst, dev)
        ok = dev <= tolerance
        passed = passed and ok
        lines.append(
            "\t".join([str(t), repr(value), repr(brute), repr(dev), repr(tolerance), "ok" if ok else "FAIL"])
        )
    lines.append(f"# max_deviation = {worst!r}")
    lines.append(f"# overall = {'pass' if passed else 'fail'}")
    return {"text": "\n".join(lines) + "\n", "passed": passed, "max_deviation": worst}


# ---------------------------------------------------------------------------
# CLI


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="drolearn", description="Streaming distributionally robust learning bench")
    sub = parser.add_subparsers(dest="verb", required=True)

    p_run = sub.add_parser("run", help="run a streaming experiment")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=None, help="override stream.seed")
    p_run.add_argument("--out", default="out")
    p_run.add_argument("--quiet", action="store_true")

    p_oracle = sub.add_parser("oracle", help="one-shot worst-case solve on a sample file")
    p_oracle.add_argument("samples")
    p_oracle.add_argument("--config", required=True)
    p_oracle.add_argument("--out", default="out")
    p_oracle.add_argument("--quiet", action="store_true")

    p_val = sub.add_parser("validate", help="brute-force comparison at desk scale")
    p_val.add_argument("--config", required=True)
    p_val.add_argument("--seed", type=int, default=None)
    p_val.add_argument("--out", default="out")
    p_val.add_argument("--quiet", action="store_true")

    p_w1 = sub.add_parser("w1", help="transport distance between two atom files")
    p_w1.add_argument("file_a")
    p_w1.add_argument("file_b")
    p_w1.add_argument("--quiet", action="store_true")

    args = parser.parse_args(argv)
    try:
        return _dispatch(args)
    except (ConfigError, FileNotFoundError) as exc:
        _error("config", exc)
        return EXIT_CONFIG
    except ScaleError as exc:
        _error("scale-guard", exc)
        return EXIT_SCALE
    except (ArithmeticError, RuntimeError) as exc:
        _error("numeric", exc)
        return EXIT_NUMERIC


def _error(kind: str, exc: Exception) -> None:
    # machine-readable error record in the same key-value format as configs
    print(f"error.kind = {kind}", file=sys.stderr)
    print(f"error.message = {exc}", file=sys.stderr)


def _dispatch(args) -> int:
    if args.verb == "run":
        cfg = load_config(args.config)
        run_experiment(cfg, args.out, seed_override=args.seed, quiet=args.quiet)
        return EXIT_OK
    if args.verb == "oracle":
        cfg = load_config(args.config)
        exp = build_experiment(cfg)
        dist_in = read_atoms(args.samples)
        if np.ptp(dist_in.weights) > 1e-12:
            raise ConfigError("oracle expects uniformly weighted sample files")
        buffer = SampleBuffer(dist_in.atoms)
        x_eval = np.asarray(_as_list(exp.raw["oracle.x"])) if "oracle.x" in exp.raw else (
            exp.x0 if exp.x0 is not None else exp.space.midpoint()
        )
        frozen = exp.loss.at(x_eval)
        worst, value = wasserstein_oracle(frozen, buffer, exp.amb, exp.tol)
        if not math.isfinite(value):
            raise RuntimeError("oracle value is not finite")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        atoms_path = out / str(exp.raw.get("output.atoms", "worst_case.atoms"))
        write_atoms(atoms_path, worst)
        if not args.quiet:
            print(f"value:  {value!r}")
            print(f"atoms:  {atoms_path}")
        return EXIT_OK
    if args.verb == "validate":
        cfg = load_config(args.config)
        exp = build_experiment(cfg, seed_override=args.seed)
        stream = generate_stream(exp.stream, exp.seed, min(exp.horizon, 4))
        report = validation_report(exp, stream)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        report_path = out / str(exp.raw.get("output.report", "validation.txt"))
        report_path.write_text(report["text"])
        if not args.quiet:
            print(report["text"], end="")
        return EXIT_OK if report["passed"] else EXIT_NUMERIC
    if args.verb == "w1":
        a = read_atoms(args.file_a)
        b = read_atoms(args.file_b)
        print(repr(reference.discrete_w1(a, b)))
        return EXIT_OK
    raise ConfigError(f"unknown verb {args.verb!r}")


if __name__ == "__main__":
    sys.exit(main())
