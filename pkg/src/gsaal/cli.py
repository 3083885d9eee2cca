"""``gsaal`` command line: data generation, training, scoring and experiments.

Every command takes ``--seed``. When the flag is absent the seed comes from
the config file, then from ``GSAAL_SEED``, then defaults to 42.

A config file (``--config``, JSON) supplies option defaults. Top-level
scalars apply to every command; a table named after a command applies to
that command only. Flags on the command line always win.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import click
import numpy as np

from . import csvio
from .datagen import (
    InlierDistribution,
    IaSpec,
    LabeledDataset,
    OutlierType,
    Shape,
    ShapeSpec,
    feature_names,
    generate_ia_dataset,
    generate_shape,
    myopicity_mmd,
    off_curve_points,
)
from .errors import GsaalError, ParseError, ShapeError
from .evaluation import (
    evaluate_baseline,
    evaluate_gsaal,
    export_grid_csv,
    occ_split,
    scalability_run,
    write_report_csv,
    write_timing_csv,
)
from .model import TrainConfig, fit, load_model, save_model, score
from .subspace import default_k, draw_masks

DEFAULT_SEED = 42
SEED_ENV = "GSAAL_SEED"

USAGE_EXIT = 2
DATA_EXIT = 3


def resolve_seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return DEFAULT_SEED
    try:
        return int(env)
    except ValueError:
        raise click.UsageError(f"{SEED_ENV}={env!r} is not an integer") from None


def _int_list(ctx, param, value):
    if value is None or value == "":
        return ()
    if isinstance(value, (list, tuple)):
        return tuple(int(v) for v in value)
    try:
        return tuple(int(v) for v in str(value).split(","))
    except ValueError:
        raise click.BadParameter(f"expected comma separated integers, got {value!r}") from None


def _option_names(command: click.Command) -> dict[str, str]:
    """Config key (long flag without dashes, ``-`` as ``_``) -> click parameter name."""
    names = {}
    for param in command.params:
        names[param.name] = param.name
        for opt in param.opts:
            if opt.startswith("--"):
                names[opt[2:].replace("-", "_")] = param.name
    return names


def _load_config(path: str, commands: dict[str, click.Command]) -> dict:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise click.BadParameter(f"cannot read config {path}: {exc}", param_hint="--config") from None
    except json.JSONDecodeError as exc:
        raise click.BadParameter(f"config {path} is not valid JSON: {exc}", param_hint="--config") from None
    if not isinstance(raw, dict):
        raise click.BadParameter("config must be a JSON object", param_hint="--config")
    shared = {k.replace("-", "_"): v for k, v in raw.items() if not isinstance(v, dict)}
    unknown = [k for k, v in raw.items() if isinstance(v, dict) and k not in commands]
    if unknown:
        raise click.BadParameter(f"unknown command section(s) {unknown}", param_hint="--config")
    out = {}
    for name, command in commands.items():
        names = _option_names(command)
        section = {k.replace("-", "_"): v for k, v in raw.get(name, {}).items()}
        bad = sorted(set(section) - set(names))
        if bad:
            raise click.BadParameter(f"section {name!r} has unknown option(s) {bad}", param_hint="--config")
        # shared keys apply wherever the command has such an option
        merged = {names[k]: v for k, v in shared.items() if k in names}
        merged.update({names[k]: v for k, v in section.items()})
        out[name] = merged
    return out


class _Cli(click.Group):
    """Group that maps library errors onto the documented exit codes."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except GsaalError as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(exc.exit_code)
        except OSError as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(DATA_EXIT)
        except ValueError as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(USAGE_EXIT)


def _set_config(ctx, param, value):
    if value is not None:
        ctx.default_map = _load_config(value, ctx.command.commands)
    return value


@click.group(cls=_Cli)
@click.option(
    "--config",
    type=click.Path(dir_okay=False),
    callback=_set_config,
    is_eager=True,
    expose_value=False,
    help="JSON file with option defaults.",
)
def main():
    """Generative subspace adversarial outlier detection."""


seed_option = click.option("--seed", type=int, default=None, help="RNG seed (default: $GSAAL_SEED or 42).")


def _train_options(f):
    f = click.option("--epochs", type=int, default=500, show_default=True)(f)
    f = click.option("--stop-epoch", type=int, default=None, help="First generator-frozen epoch [80% of epochs].")(f)
    f = click.option("--detector-lr", type=float, default=0.01, show_default=True)(f)
    f = click.option("--generator-lr", type=float, default=0.001, show_default=True)(f)
    f = click.option("--batch-size", type=int, default=500, show_default=True)(f)
    f = click.option("--spread", type=float, default=TrainConfig.generator_spread, show_default=True,
                     help="Initial std of generated points in z-scored space.")(f)
    f = click.option("--k", "k", type=int, default=None, help="Number of detectors.")(f)
    f = click.option("--k-default", is_flag=True, help="Use k = ceil(2 sqrt(d)) (the default when --k is absent).")(f)
    return f


def _train_config(seed, epochs, stop_epoch, detector_lr, generator_lr, batch_size, spread) -> TrainConfig:
    return TrainConfig(
        epochs=epochs,
        stop_epoch=stop_epoch,
        detector_lr=detector_lr,
        generator_lr=generator_lr,
        batch_size=batch_size,
        generator_spread=spread,
        seed=seed,
    )


def _choose_k(k: int | None, k_default: bool, d: int) -> int:
    if k is not None and k_default:
        raise click.UsageError("--k and --k-default are mutually exclusive")
    return default_k(d) if k is None else k


def _read(path) -> tuple[np.ndarray, np.ndarray | None, list[str]]:
    return csvio.read_matrix(path)


@main.command()
@click.option("--shape", type=click.Choice([s.value for s in Shape]), required=True)
@click.option("--n", "n_points", type=int, default=960, show_default=True)
@click.option("--noise-features", type=int, default=58, show_default=True)
@click.option("--noise-scale", type=float, default=1.0, show_default=True)
@click.option("--outliers", type=int, default=0, show_default=True,
              help="Append this many off-curve points, labelled 1, with inlier-like noise features.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@seed_option
def generate(shape, n_points, noise_features, noise_scale, outliers, out_path, seed):
    """Synthetic 2-D shape padded with Gaussian noise features."""
    seed = resolve_seed(seed)
    data = generate_shape(ShapeSpec(Shape(shape), n_points, noise_features, seed, noise_scale))
    points, labels = data.points, data.labels
    if outliers > 0:
        d = points.shape[1]
        planted = off_curve_points(shape, outliers, d, seed + 1)
        planted[:, 2:] = np.random.default_rng([seed, 2]).standard_normal((outliers, d - 2))
        points = np.vstack([points, planted])
        labels = np.concatenate([labels, np.ones(outliers, dtype=np.int64)])
        csvio.write_matrix(out_path, points, feature_names(d), labels)
    else:
        csvio.write_matrix(out_path, points, feature_names(points.shape[1]))
    click.echo(f"wrote {points.shape[0]} rows x {points.shape[1]} features to {out_path}")


@main.command("generate-ia")
@click.option("--inliers", "inlier_distribution", type=click.Choice([s.value for s in InlierDistribution]),
              default="gaussian", show_default=True)
@click.option("--outlier-type", type=click.Choice([s.value for s in OutlierType]), default="cluster", show_default=True)
@click.option("--n-inliers", type=int, default=2000, show_default=True)
@click.option("--n-outliers", type=int, default=400, show_default=True)
@click.option("--d", type=int, default=20, show_default=True)
@click.option("--batches", "n_batches", type=int, default=10, show_default=True)
@click.option("--cluster-shift", type=float, default=6.0, show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@seed_option
def generate_ia(inlier_distribution, outlier_type, n_inliers, n_outliers, d, n_batches, cluster_shift, out_dir, seed):
    """Inlier-assumption benchmark: one train file and one test file per outlier batch."""
    spec = IaSpec(
        inlier_distribution=InlierDistribution(inlier_distribution),
        outlier_type=OutlierType(outlier_type),
        n_inliers=n_inliers,
        n_outliers=n_outliers,
        d=d,
        seed=resolve_seed(seed),
        n_batches=n_batches,
        cluster_shift=cluster_shift,
    )
    train, tests = generate_ia_dataset(spec)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = feature_names(d)
    csvio.write_matrix(out / "train.csv", train, names)
    for i, test in enumerate(tests, start=1):
        csvio.write_matrix(out / f"test_{i:02d}.csv", test.points, names, test.labels)
    click.echo(f"wrote train.csv ({train.shape[0]} rows) and {len(tests)} test files to {out}")


@main.command("fit")
@click.argument("data", type=click.Path(dir_okay=False))
@click.option("--model", "model_path", type=click.Path(dir_okay=False), required=True)
@click.option("--trace", "trace_path", type=click.Path(dir_okay=False), default=None,
              help="Per-epoch loss CSV [MODEL with .trace.csv suffix].")
@_train_options
@seed_option
def fit_cmd(data, model_path, trace_path, k, k_default, epochs, stop_epoch, detector_lr, generator_lr,
            batch_size, spread, seed):
    """Train on DATA (rows labelled 1 are dropped) and save the model."""
    seed = resolve_seed(seed)
    points, labels, _ = _read(data)
    if labels is not None:
        points = points[labels == 0]
    d = points.shape[1]
    k = _choose_k(k, k_default, d)
    cfg = _train_config(seed, epochs, stop_epoch, detector_lr, generator_lr, batch_size, spread)
    model, trace = fit(points, draw_masks(d, k, seed), cfg)
    save_model(model, model_path)
    trace_path = trace_path or str(Path(model_path).with_suffix(".trace.csv"))
    rows = trace.to_rows()
    csvio.write_rows(trace_path, list(rows[0]), (r.values() for r in rows))
    frozen = int(trace.detectors_frozen[-1].sum())
    click.echo(f"trained k={k} detectors on {points.shape[0]}x{d} for {epochs} epochs ({frozen} frozen)")
    click.echo(f"model: {model_path}  trace: {trace_path}")


@main.command("score")
@click.argument("model_path", type=click.Path(dir_okay=False))
@click.argument("data", type=click.Path(dir_okay=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None, help="Scores CSV [stdout].")
def score_cmd(model_path, data, out_path):
    """One outlier score per DATA row, in input order."""
    model = load_model(model_path)
    points, _, _ = _read(data)
    if points.shape[1] != model.d:
        raise ShapeError(f"model expects d={model.d} columns, data has {points.shape[1]}")
    scores = score(model, points)
    rows = ([s] for s in scores)
    if out_path:
        csvio.write_rows(out_path, ["score"], rows)
    else:
        click.echo("score")
        for s in scores:
            click.echo(csvio.format_value(s))


@main.command("eval")
@click.argument("data", type=click.Path(dir_okay=False))
@click.option("--baselines", default="", help="Comma separated subset of knn,lof.")
@click.option("--train-fraction", type=float, default=0.8, show_default=True)
@click.option("--report", "report_path", type=click.Path(dir_okay=False), default=None)
@_train_options
@seed_option
def eval_cmd(data, baselines, train_fraction, report_path, k, k_default, epochs, stop_epoch, detector_lr,
             generator_lr, batch_size, spread, seed):
    """One-class evaluation on a labelled DATA file; prints an AUC table."""
    seed = resolve_seed(seed)
    names = [b.strip() for b in baselines.split(",") if b.strip()]
    bad = [b for b in names if b not in ("knn", "lof")]
    if bad:
        raise click.BadParameter(f"unknown baseline(s) {bad}", param_hint="--baselines")
    points, labels, _ = _read(data)
    if labels is None:
        raise ParseError(f"{data}: eval needs a 'label' column")
    split = occ_split(LabeledDataset(points, labels), train_fraction, seed)
    k = _choose_k(k, k_default, points.shape[1])
    cfg = _train_config(seed, epochs, stop_epoch, detector_lr, generator_lr, batch_size, spread)
    reports = [evaluate_gsaal(split, k, cfg)[0]] + [evaluate_baseline(split, b) for b in names]
    click.echo(f"{'method':<8} {'auc':>8}")
    for r in reports:
        click.echo(f"{r.method_name:<8} {r.auc:>8.4f}")
    if report_path:
        write_report_csv(report_path, [(Path(data).stem, r.method_name, r.auc, seed) for r in reports])


@main.command()
@click.option("--n-sweep", callback=_int_list, default="", help="Training sizes at fixed d, e.g. 500,1000.")
@click.option("--d-sweep", callback=_int_list, default="", help="Dimensions at fixed n.")
@click.option("--k", type=int, default=30, show_default=True)
@click.option("--n-test", type=int, default=10_000, show_default=True)
@click.option("--fixed-d", type=int, default=100, show_default=True)
@click.option("--fixed-n", type=int, default=500, show_default=True)
@click.option("--epochs", type=int, default=1, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@seed_option
def bench(n_sweep, d_sweep, k, n_test, fixed_d, fixed_n, epochs, out_path, seed):
    """Inference timing over training size and dimension."""
    if not n_sweep and not d_sweep:
        raise click.UsageError("give --n-sweep and/or --d-sweep")
    rows = scalability_run(n_sweep, d_sweep, k, n_test, fixed_d=fixed_d, fixed_n=fixed_n, epochs=epochs,
                           seed=resolve_seed(seed))
    click.echo(f"{'n':>6} {'d':>5} {'k':>4} {'fit_s':>9} {'score_s':>9} {'per_point_s':>12}")
    for r in rows:
        click.echo(f"{r['n']:>6} {r['d']:>5} {r['k']:>4} {r['fit_s']:>9.3f} {r['score_s']:>9.4f} "
                   f"{r['per_point_s']:>12.3e}")
    if out_path:
        write_timing_csv(out_path, rows)


@main.command()
@click.argument("model_path", type=click.Path(dir_okay=False))
@click.option("--bounds", default=None,
              help="x1_min,x1_max,x2_min,x2_max [training mean +- 3 std of x1 and x2].")
@click.option("--resolution", type=int, default=100, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
def grid(model_path, bounds, resolution, out_path):
    """Score a regular grid over (x1, x2) with all other features at 0."""
    model = load_model(model_path)
    if bounds is None:
        lo = model.norm_mean[:2] - 3 * model.norm_std[:2]
        hi = model.norm_mean[:2] + 3 * model.norm_std[:2]
        b = [lo[0], hi[0], lo[1], hi[1]]
    else:
        try:
            b = [float(v) for v in bounds.split(",")]
        except ValueError:
            raise click.BadParameter(f"bounds must be four numbers, got {bounds!r}") from None
        if len(b) != 4:
            raise click.BadParameter(f"bounds must be four numbers, got {bounds!r}")
    export_grid_csv(model, b, resolution, out_path)
    click.echo(f"wrote {resolution * resolution} grid rows to {out_path}")


@main.command()
@click.option("--population", type=click.Choice(["myopic", "quadratic"]), required=True)
@click.option("--n", type=int, default=2000, show_default=True)
@seed_option
def mmd(population, n, seed):
    """Linear-kernel MMD^2 between a sample and its (1,1,0) view-padded copy."""
    click.echo(f"{myopicity_mmd(population, n, resolve_seed(seed)):.6g}")


if __name__ == "__main__":
    main()
