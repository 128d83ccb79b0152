"""Config-driven experiment drivers behind the command-line front end.

Four experiment kinds: ``score-error`` (error-vs-N curve with a log-log
slope fit), ``generate`` (backward sampling with exact and dataset-optimal
scores), ``kde-compare`` (two-sample test of backward sampling against the
matched KDE), and ``bounds-check`` (a pass/fail table of the closed-form
distance bounds).

Every output file embeds the resolved config and master seed, floats are
written in shortest round-trip form, and all parallelism is replicate-level
with derived seeds, so a rerun with the same config and seed is
byte-identical regardless of thread count.
"""

from __future__ import annotations

import importlib.resources
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

import numpy as np

from . import rng as rngmod
from .dataio import format_float, load_dataset, save_batch
from .estimators import (
    ErrorCurve,
    energy_distance_test,
    equal_mixture_sampler,
    loglog_slope,
    nn_distance_stats,
    score_error_protocol,
    tv_mc,
)
from .kde import KdeModel, forward_mixture, kde_log_density, kde_sample
from .ou import coefficients
from .rng import derived_seed, substream
from .samplers import SamplerConfig, backward_sample
from .scores import (
    Dataset,
    IsotropicGaussianTarget,
    empirical_mixture_log_density_lower_bound,
    empirical_optimal_score,
    exact_gaussian_score,
    gaussian_mixture_logpdf,
    sample_dataset,
    softmax_weights,
    weighted_average_bounds_check,
)

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "BoundRow",
    "KINDS",
    "preset_names",
    "load_config",
    "run_score_error",
    "run_generate",
    "run_kde_compare",
    "run_bounds_check",
]


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names section and key."""


KINDS = ("score-error", "generate", "kde-compare", "bounds-check")

_SECTION_FOR_KIND = {
    "score-error": "score_error",
    "generate": "generate",
    "kde-compare": "kde_compare",
    "bounds-check": "bounds",
}


@dataclass(frozen=True)
class ScoreErrorParams:
    sample_sizes: tuple[int, ...] = (100, 200, 500, 1000, 2000)
    delta: float = 0.02
    horizon: float = 5.0
    grid_step: float = 0.02
    mc_points: int = 1000
    repetitions: int = 10


@dataclass(frozen=True)
class GenerateParams:
    n_train: int = 100
    horizon: float = 5.0
    step_size: float = 0.0005
    early_stop: float = 0.01
    count: int = 1000
    scores: tuple[str, ...] = ("empirical", "exact")


@dataclass(frozen=True)
class KdeCompareParams:
    n_train: int = 100
    horizon: float = 5.0
    step_size: float = 0.0005
    early_stop: float = 0.01
    count: int = 1000
    permutations: int = 500
    alpha: float = 0.01
    bandwidth_scale: float = 1.0  # diagnostic knob; 1.0 is the matched KDE


@dataclass(frozen=True)
class BoundsParams:
    n_train: int = 100
    radius: float = 2.0
    deltas: tuple[float, ...] = (0.01, 0.1)
    horizons: tuple[float, ...] = (3.0, 5.0)
    mc_samples: int = 100_000
    probes: int = 200


_PARAM_TYPES = {
    "score-error": ScoreErrorParams,
    "generate": GenerateParams,
    "kde-compare": KdeCompareParams,
    "bounds-check": BoundsParams,
}


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int
    out_dir: Path
    params: object
    threads: int = 1
    target: IsotropicGaussianTarget | None = None
    dataset_path: str | None = None


def preset_names() -> list[str]:
    root = importlib.resources.files("scorekde") / "presets"
    return sorted(p.name[: -len(".toml")] for p in root.iterdir() if p.name.endswith(".toml"))


def _read_config_text(source) -> tuple[str, str]:
    source = str(source)
    path = Path(source)
    if path.exists():
        return path.read_text(), source
    resource = importlib.resources.files("scorekde") / "presets" / f"{source}.toml"
    if resource.is_file():
        return resource.read_text(), f"preset:{source}"
    raise ConfigError(
        f"config {source!r} is neither a file nor one of the presets {preset_names()}"
    )


def _expect(mapping: dict, section: str, known: set[str]) -> None:
    unknown = set(mapping) - known
    if unknown:
        raise ConfigError(f"[{section}] unknown keys: {sorted(unknown)}")


def _number(mapping, section, key, default=None, positive=False):
    if key not in mapping:
        if default is None:
            raise ConfigError(f"[{section}] {key} is required")
        return default
    value = mapping[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"[{section}] {key} must be a number, got {value!r}")
    value = float(value)
    if positive and not value > 0.0:
        raise ConfigError(f"[{section}] {key} must be positive, got {value}")
    return value


def _integer(mapping, section, key, default=None, minimum=1):
    if key not in mapping:
        if default is None:
            raise ConfigError(f"[{section}] {key} is required")
        return default
    value = mapping[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"[{section}] {key} must be an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(f"[{section}] {key} must be at least {minimum}, got {value}")
    return value


def _number_list(mapping, section, key, default, positive=True):
    if key not in mapping:
        return default
    value = mapping[key]
    if not isinstance(value, list) or not value:
        raise ConfigError(f"[{section}] {key} must be a nonempty list")
    out = []
    for item in value:
        if isinstance(item, bool) or not isinstance(item, (int, float)):
            raise ConfigError(f"[{section}] {key} must contain numbers, got {item!r}")
        if positive and not float(item) > 0.0:
            raise ConfigError(f"[{section}] {key} entries must be positive, got {item}")
        out.append(float(item))
    return tuple(out)


def _parse_params(kind: str, mapping: dict):
    section = _SECTION_FOR_KIND[kind]
    if kind == "score-error":
        _expect(mapping, section, {"sample_sizes", "delta", "horizon", "grid_step", "mc_points", "repetitions"})
        sizes = mapping.get("sample_sizes", list(ScoreErrorParams.sample_sizes))
        if not isinstance(sizes, list) or not sizes:
            raise ConfigError(f"[{section}] sample_sizes must be a nonempty list")
        for item in sizes:
            if isinstance(item, bool) or not isinstance(item, int) or item < 1:
                raise ConfigError(
                    f"[{section}] sample_sizes must contain positive integers, got {item!r}"
                )
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ConfigError(f"[{section}] sample_sizes must be strictly increasing")
        params = ScoreErrorParams(
            sample_sizes=tuple(sizes),
            delta=_number(mapping, section, "delta", ScoreErrorParams.delta, positive=True),
            horizon=_number(mapping, section, "horizon", ScoreErrorParams.horizon, positive=True),
            grid_step=_number(mapping, section, "grid_step", ScoreErrorParams.grid_step, positive=True),
            mc_points=_integer(mapping, section, "mc_points", ScoreErrorParams.mc_points),
            repetitions=_integer(mapping, section, "repetitions", ScoreErrorParams.repetitions),
        )
        if not params.delta < params.horizon:
            raise ConfigError(f"[{section}] delta must be smaller than horizon")
        return params
    if kind == "generate":
        _expect(mapping, section, {"n_train", "horizon", "step_size", "early_stop", "count", "scores"})
        scores = mapping.get("scores", list(GenerateParams.scores))
        if not isinstance(scores, list) or not scores:
            raise ConfigError(f"[{section}] scores must be a nonempty list")
        for name in scores:
            if name not in ("empirical", "exact"):
                raise ConfigError(
                    f"[{section}] scores entries must be 'empirical' or 'exact', got {name!r}"
                )
        params = GenerateParams(
            n_train=_integer(mapping, section, "n_train", GenerateParams.n_train),
            horizon=_number(mapping, section, "horizon", GenerateParams.horizon, positive=True),
            step_size=_number(mapping, section, "step_size", GenerateParams.step_size, positive=True),
            early_stop=_number(mapping, section, "early_stop", GenerateParams.early_stop, positive=False),
            count=_integer(mapping, section, "count", GenerateParams.count),
            scores=tuple(scores),
        )
        if not 0.0 <= params.early_stop < params.horizon:
            raise ConfigError(f"[{section}] early_stop must lie in [0, horizon)")
        return params
    if kind == "kde-compare":
        _expect(
            mapping,
            section,
            {"n_train", "horizon", "step_size", "early_stop", "count", "permutations", "alpha", "bandwidth_scale"},
        )
        params = KdeCompareParams(
            n_train=_integer(mapping, section, "n_train", KdeCompareParams.n_train),
            horizon=_number(mapping, section, "horizon", KdeCompareParams.horizon, positive=True),
            step_size=_number(mapping, section, "step_size", KdeCompareParams.step_size, positive=True),
            early_stop=_number(mapping, section, "early_stop", KdeCompareParams.early_stop, positive=True),
            count=_integer(mapping, section, "count", KdeCompareParams.count),
            permutations=_integer(mapping, section, "permutations", KdeCompareParams.permutations, minimum=200),
            alpha=_number(mapping, section, "alpha", KdeCompareParams.alpha, positive=True),
            bandwidth_scale=_number(mapping, section, "bandwidth_scale", KdeCompareParams.bandwidth_scale, positive=True),
        )
        if not params.early_stop < params.horizon:
            raise ConfigError(f"[{section}] early_stop must be smaller than horizon")
        if not params.alpha < 1.0:
            raise ConfigError(f"[{section}] alpha must lie in (0, 1)")
        return params
    if kind == "bounds-check":
        _expect(mapping, section, {"n_train", "radius", "deltas", "horizons", "mc_samples", "probes"})
        return BoundsParams(
            n_train=_integer(mapping, section, "n_train", BoundsParams.n_train),
            radius=_number(mapping, section, "radius", BoundsParams.radius, positive=True),
            deltas=_number_list(mapping, section, "deltas", BoundsParams.deltas),
            horizons=_number_list(mapping, section, "horizons", BoundsParams.horizons),
            mc_samples=_integer(mapping, section, "mc_samples", BoundsParams.mc_samples),
            probes=_integer(mapping, section, "probes", BoundsParams.probes),
        )
    raise ConfigError(f"unknown experiment kind {kind!r}")


def load_config(source, *, seed=None, out=None, threads=None) -> ExperimentConfig:
    """Build an :class:`ExperimentConfig` from a TOML file or preset name.

    ``seed``, ``out``, and ``threads`` override the corresponding config
    entries (command-line flags). The seed is mandatory: it must come from
    the file or the override, never the wall clock.
    """
    text, origin = _read_config_text(source)
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{origin}: {exc}") from None

    _expect(data, "top level", {"experiment", "target", "dataset"} | set(_SECTION_FOR_KIND.values()))
    exp = data.get("experiment")
    if not isinstance(exp, dict):
        raise ConfigError("[experiment] section is required")
    _expect(exp, "experiment", {"kind", "seed", "out", "threads"})
    kind = exp.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"[experiment] kind must be one of {KINDS}, got {kind!r}")

    if seed is None:
        seed = exp.get("seed")
    if seed is None:
        raise ConfigError("[experiment] seed is required (no wall-clock seeding)")
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError(f"[experiment] seed must be a nonnegative integer, got {seed!r}")

    out_dir = Path(out) if out is not None else Path(exp.get("out", f"results/{kind}"))
    if threads is None:
        threads = _integer(exp, "experiment", "threads", default=1)
    elif threads < 1:
        raise ConfigError(f"--threads must be at least 1, got {threads}")

    target = None
    if "target" in data:
        tsec = data["target"]
        _expect(tsec, "target", {"mean", "variance"})
        mean = tsec.get("mean")
        if not isinstance(mean, list) or not mean or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in mean
        ):
            raise ConfigError("[target] mean must be a nonempty list of numbers")
        variance = _number(tsec, "target", "variance", positive=True)
        target = IsotropicGaussianTarget(np.asarray(mean, dtype=float), variance)

    dataset_path = None
    if "dataset" in data:
        dsec = data["dataset"]
        _expect(dsec, "dataset", {"path"})
        dataset_path = dsec.get("path")
        if not isinstance(dataset_path, str) or not dataset_path:
            raise ConfigError("[dataset] path must be a nonempty string")
        if not Path(dataset_path).exists():
            raise ConfigError(f"[dataset] path {dataset_path!r} does not exist")

    if target is None and dataset_path is None:
        raise ConfigError("either a [target] or a [dataset] section is required")
    if kind == "score-error" and target is None:
        raise ConfigError("score-error requires a [target] section (Gaussian target)")

    section = _SECTION_FOR_KIND[kind]
    params_map = data.get(section, {})
    if not isinstance(params_map, dict):
        raise ConfigError(f"[{section}] must be a table")
    params = _parse_params(kind, params_map)
    if kind == "generate" and "exact" in params.scores and target is None:
        raise ConfigError("[generate] the 'exact' score requires a [target] section")

    return ExperimentConfig(
        kind=kind,
        seed=int(seed),
        out_dir=out_dir,
        params=params,
        threads=int(threads),
        target=target,
        dataset_path=dataset_path,
    )


def resolved_dict(config: ExperimentConfig) -> dict:
    """JSON-serializable echo of the fully resolved configuration.

    The worker-thread count is deliberately absent: outputs are identical
    for any thread count, so it is an execution detail, not part of the
    experiment's identity.
    """
    out = {
        "kind": config.kind,
        "seed": config.seed,
        "out": str(config.out_dir),
        "params": {
            k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(config.params).items()
        },
    }
    if config.target is not None:
        out["target"] = {
            "mean": [float(v) for v in config.target.mean],
            "variance": config.target.variance,
        }
    if config.dataset_path is not None:
        out["dataset"] = config.dataset_path
    return out


def _config_json(config: ExperimentConfig) -> str:
    return json.dumps(resolved_dict(config), sort_keys=True)


def _write_lines(path: Path, lines) -> None:
    path.write_text("\n".join(lines) + "\n")


def _training_dataset(config: ExperimentConfig, n_train: int) -> Dataset:
    if config.dataset_path is not None:
        return load_dataset(config.dataset_path)
    rng = substream(config.seed, rngmod.DATASET)
    return sample_dataset(config.target, n_train, rng, seed=config.seed)


def run_score_error(config: ExperimentConfig) -> ErrorCurve:
    """Estimate the score error for every configured N and fit the log-log
    slope; writes ``score_error.csv`` and ``score_error_summary.json``."""
    p = config.params
    if config.target is None:
        raise ConfigError("score-error requires a Gaussian target")
    entries = []
    for i, n in enumerate(p.sample_sizes):
        report = score_error_protocol(
            config.target,
            n,
            delta=p.delta,
            horizon=p.horizon,
            grid_step=p.grid_step,
            mc_points=p.mc_points,
            repetitions=p.repetitions,
            seed=derived_seed(config.seed, i),
            threads=config.threads,
        )
        entries.append((n, report))

    slope = intercept = None
    if len(entries) >= 3:
        slope, intercept = loglog_slope(entries)
    curve = ErrorCurve(entries, slope, intercept)

    config.out_dir.mkdir(parents=True, exist_ok=True)
    rows = [f"# config = {_config_json(config)}", "N,error,std_error"]
    rows.extend(
        f"{n},{format_float(r.value)},{format_float(r.std_error)}" for n, r in entries
    )
    _write_lines(config.out_dir / "score_error.csv", rows)

    summary = {
        "experiment": "score-error",
        "seed": config.seed,
        "config": resolved_dict(config),
        "entries": [
            {"N": n, "error": r.value, "std_error": r.std_error} for n, r in entries
        ],
        "slope": slope,
        "intercept": intercept,
    }
    (config.out_dir / "score_error_summary.json").write_text(
        json.dumps(summary, sort_keys=True, indent=2) + "\n"
    )
    return curve


def _score_field(label: str, dataset: Dataset, config: ExperimentConfig):
    if label == "empirical":
        return empirical_optimal_score(dataset)
    if label == "exact":
        return exact_gaussian_score(config.target)
    raise ConfigError(f"unknown score label {label!r}")


def run_generate(config: ExperimentConfig) -> dict:
    """Backward-sample with each configured score and write training,
    initial, and terminal point CSVs."""
    p = config.params
    dataset = _training_dataset(config, p.n_train)
    config.out_dir.mkdir(parents=True, exist_ok=True)
    echo = f"config = {_config_json(config)}"

    paths = {"training": config.out_dir / "training.csv"}
    save_batch(dataset.points, paths["training"], comments=[echo])
    sampler_config = SamplerConfig(
        horizon=p.horizon,
        step_size=p.step_size,
        early_stop=p.early_stop,
        seed=config.seed,
    )
    for label in p.scores:
        batch = backward_sample(_score_field(label, dataset, config), sampler_config, p.count)
        init_path = config.out_dir / f"{label}_initial.csv"
        term_path = config.out_dir / f"{label}_terminal.csv"
        save_batch(batch.initial, init_path, comments=[echo, f"score = {label} (initial)"])
        save_batch(batch.points, term_path, comments=[echo, f"score = {label} (terminal)"])
        paths[f"{label}_initial"] = init_path
        paths[f"{label}_terminal"] = term_path
    return paths


def run_kde_compare(config: ExperimentConfig) -> dict:
    """Compare backward sampling under the dataset-optimal score with the
    matched KDE; writes ``kde_compare.json`` and returns the report."""
    p = config.params
    dataset = _training_dataset(config, p.n_train)
    sampler_config = SamplerConfig(
        horizon=p.horizon,
        step_size=p.step_size,
        early_stop=p.early_stop,
        seed=config.seed,
    )
    ddpm = backward_sample(empirical_optimal_score(dataset), sampler_config, p.count)
    matched = forward_mixture(dataset, p.early_stop)
    model = KdeModel(
        dataset,
        bandwidth=matched.bandwidth * p.bandwidth_scale,
        center_scale=matched.center_scale,
    )
    kde_batch = kde_sample(model, p.count, substream(config.seed, rngmod.DRAW))
    test = energy_distance_test(
        ddpm, kde_batch, permutations=p.permutations, rng=substream(config.seed, rngmod.PERMUTE)
    )
    ddpm_nn = nn_distance_stats(ddpm, dataset)
    kde_nn = nn_distance_stats(kde_batch, dataset)

    report = {
        "experiment": "kde-compare",
        "seed": config.seed,
        "config": resolved_dict(config),
        "bandwidth": model.bandwidth,
        "center_scale": model.center_scale,
        "stop_time": ddpm.stop_time,
        "energy_statistic": test.statistic,
        "p_value": test.p_value,
        "alpha": p.alpha,
        "reject": test.p_value < p.alpha,
        "ddpm_nn_median": ddpm_nn.median,
        "kde_nn_median": kde_nn.median,
    }
    config.out_dir.mkdir(parents=True, exist_ok=True)
    (config.out_dir / "kde_compare.json").write_text(
        json.dumps(report, sort_keys=True, indent=2) + "\n"
    )
    return report


@dataclass(frozen=True)
class BoundRow:
    bound_id: str
    lhs: float
    rhs: float
    std_error: float
    passed: bool


def _gaussian_logpdf_std(x: np.ndarray) -> np.ndarray:
    d = x.shape[1]
    return -0.5 * (np.sum(x * x, axis=1) + d * np.log(2.0 * np.pi))


def run_bounds_check(config: ExperimentConfig) -> tuple[list[BoundRow], bool]:
    """Evaluate every closed-form bound as lhs-estimate vs rhs and write the
    pass/fail table ``bounds.csv``; a row passes when
    lhs <= rhs + 3 * std_error."""
    p = config.params
    dataset = _training_dataset(config, p.n_train).rescaled(p.radius)
    d = dataset.dim
    rows: list[BoundRow] = []
    row_index = 0

    def tv_row(bound_id, model_f_logpdf, draw_f, log_g, draw_g, rhs):
        nonlocal row_index
        rng = substream(config.seed, rngmod.DRAW, row_index)
        row_index += 1
        sampler = equal_mixture_sampler(draw_f, draw_g)
        est = tv_mc(model_f_logpdf, log_g, sampler, p.mc_samples, rng)
        rows.append(
            BoundRow(
                bound_id,
                est.value,
                rhs,
                est.std_error,
                est.value <= rhs + 3.0 * est.std_error,
            )
        )

    # Early-stopped mixture vs plain KDE at the same bandwidth:
    # TV <= d sqrt(delta) / 2 when every ||y_i|| <= d and radius is d.
    for delta in p.deltas:
        c = coefficients(delta)
        shifted = forward_mixture(dataset, delta)
        plain = KdeModel(dataset, bandwidth=c.sigma, center_scale=1.0)
        tv_row(
            f"kde-shift-tv(delta={format_float(delta)})",
            lambda x, m=shifted: kde_log_density(m, x),
            lambda n, r, m=shifted: kde_sample(m, n, r).points,
            lambda x, m=plain: kde_log_density(m, x),
            lambda n, r, m=plain: kde_sample(m, n, r).points,
            d * math.sqrt(delta) / 2.0,
        )

    # Forward law at time T vs the standard Gaussian: TV <= (d/2) exp(-T).
    for horizon in p.horizons:
        mix = forward_mixture(dataset, horizon)
        tv_row(
            f"forward-convergence-tv(T={format_float(horizon)})",
            lambda x, m=mix: kde_log_density(m, x),
            lambda n, r, m=mix: kde_sample(m, n, r).points,
            _gaussian_logpdf_std,
            lambda n, r: r.standard_normal((n, d)),
            0.5 * d * math.exp(-horizon),
        )

    # Weighted-average and log-density bounds at random probe points.
    probe_rng = substream(config.seed, rngmod.PROBE)
    times = np.exp(probe_rng.uniform(np.log(0.01), np.log(5.0), size=p.probes))
    radius_sq = p.radius * p.radius
    max_weighted = 0.0
    max_canonical_gap = -np.inf
    max_lower_bound_gap = -np.inf
    for t in times:
        t = float(t)
        x = kde_sample(forward_mixture(dataset, t), 1, probe_rng).points[0]
        x = x + probe_rng.standard_normal(d)  # push probes off-center as well
        lhs, bound_uniform, bound_radius = weighted_average_bounds_check(dataset, t, x)
        max_weighted = max(max_weighted, lhs)
        w = softmax_weights(dataset, t, x)
        z = (x - coefficients(t).mu * dataset.points) / (
            math.sqrt(2.0) * coefficients(t).sigma
        )
        max_canonical_gap = max(max_canonical_gap, float(np.sum((w @ z) ** 2)) - bound_uniform)
        logp = gaussian_mixture_logpdf(
            coefficients(t).mu * dataset.points, coefficients(t).sigma2, x
        )
        bound = empirical_mixture_log_density_lower_bound(dataset, t, x)
        max_lower_bound_gap = max(max_lower_bound_gap, bound - logp)

    rows.append(
        BoundRow(
            "weighted-mean-radius", max_weighted, radius_sq, 0.0, max_weighted <= radius_sq
        )
    )
    rows.append(
        BoundRow(
            "softmax-uniform-average",
            max_canonical_gap,
            0.0,
            0.0,
            max_canonical_gap <= 1e-12,
        )
    )
    rows.append(
        BoundRow(
            "mixture-density-lower-bound",
            max_lower_bound_gap,
            0.0,
            0.0,
            max_lower_bound_gap <= 1e-12,
        )
    )

    config.out_dir.mkdir(parents=True, exist_ok=True)
    lines = [f"# config = {_config_json(config)}", "bound_id,lhs,rhs,std_error,pass"]
    lines.extend(
        f"{r.bound_id},{format_float(r.lhs)},{format_float(r.rhs)},"
        f"{format_float(r.std_error)},{'true' if r.passed else 'false'}"
        for r in rows
    )
    _write_lines(config.out_dir / "bounds.csv", lines)
    return rows, all(r.passed for r in rows)
