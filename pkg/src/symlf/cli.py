"""Command-line surface.

Subcommands: ingest, train, eval, predict, search, xval.  Exit codes
partition error classes: 1 usage, 2 data/IO, 3 divergence, 4 shape
mismatch.  ``--json`` switches machine-readable output on; every JSON
payload carries the tool version.  The default output directory comes
from ``SYMLF_OUTPUT_DIR`` when set.
"""

from __future__ import annotations

import os
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__, jsonio
from .config import TrainConfig
from .errors import DataFormatError, DivergenceError, ShapeMismatchError, SymlfError
from .harness import (
    DEFAULT_SEARCH_GRID,
    hyperparameter_search,
    run_experiment,
    train_once,
)
from .manifest import RunManifest
from .matrix import (
    ShdiMatrix,
    ingest_edge_list,
    ingest_matrix_market,
    load_dataset,
    save_dataset,
    save_id_map,
)
from .split import SplitPlan, load_split, make_split, save_split
from .state import load_factors, save_factors

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DIVERGENCE = 3
EXIT_SHAPE = 4


@click.group()
@click.version_option(__version__, prog_name="symlf")
def cli():
    """Learn symmetric nonnegative latent factors of weighted networks."""


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="symlf", standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except DivergenceError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DIVERGENCE
    except ShapeMismatchError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_SHAPE
    except (DataFormatError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DATA
    except (ValueError, IndexError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_USAGE


# -- shared helpers -----------------------------------------------------------


def _read_dataset(path, fmt="auto") -> tuple[ShdiMatrix, str]:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if fmt == "auto":
        head = text.lstrip()[:15].lower()
        fmt = "mm" if head.startswith("%%matrixmarket") else "edges"
    if fmt == "mm":
        return ingest_matrix_market(text), "mm"
    node_count = None
    for line in text.splitlines():
        stripped = line.strip()
        if stripped.startswith("# nodes:"):
            node_count = int(stripped.split(":", 1)[1])
            break
        if stripped and not stripped.startswith("#"):
            break
    return ingest_edge_list(text, node_count=node_count), "edges"


_CONFIG_FLAGS = ("dim", "lam", "beta1", "beta2", "eta", "max_iters", "tol",
                 "seed", "init_scale")


def config_options(fn):
    """Attach the TrainConfig flags (CLI flag > config file > default)."""
    options = [
        click.option("--config", "config_path", default=None,
                     help="JSON file of config fields."),
        click.option("--dim", type=int, default=None, help="Latent dimension D."),
        click.option("--lambda", "lam", type=float, default=None,
                     help="L2 regularization coefficient."),
        click.option("--beta1", type=float, default=None, help="Penalty constant 1."),
        click.option("--beta2", type=float, default=None, help="Penalty constant 2."),
        click.option("--eta", type=float, default=None, help="Dual ascent step."),
        click.option("--max-iters", type=int, default=None,
                     help="Outer iteration cap."),
        click.option("--tol", type=float, default=None,
                     help="Early-stop threshold on validation RMSE delta."),
        click.option("--seed", type=int, default=None, help="Master RNG seed."),
        click.option("--init-scale", type=float, default=None,
                     help="Upper bound of the uniform initialization."),
    ]
    for opt in reversed(options):
        fn = opt(fn)
    return fn


def resolve_config(config_path, **flags) -> TrainConfig:
    data = TrainConfig().to_dict()
    if config_path:
        import json as _json

        with open(config_path, "r", encoding="utf-8") as fh:
            file_data = _json.load(fh)
        unknown = set(file_data) - set(data)
        if unknown:
            raise click.UsageError(f"unknown config fields: {sorted(unknown)}")
        data.update(file_data)
    for key in _CONFIG_FLAGS:
        if flags.get(key) is not None:
            data[key] = flags[key]
    try:
        return TrainConfig.from_dict(data)
    except ValueError as exc:
        raise click.UsageError(str(exc))


def _out_dir(out) -> Path:
    path = Path(out) if out else Path(os.environ.get("SYMLF_OUTPUT_DIR", "symlf-out"))
    path.mkdir(parents=True, exist_ok=True)
    return path


def _resolve_split(matrix, split_path, split_seed, rotation, config) -> SplitPlan:
    if split_path:
        plan = load_split(split_path)
        if plan.entry_count != matrix.entry_count:
            raise ShapeMismatchError(
                f"split covers {plan.entry_count} entries but dataset has "
                f"{matrix.entry_count}"
            )
        return plan.with_rotation(rotation) if rotation is not None else plan
    seed = split_seed if split_seed is not None else config.seed
    return make_split(matrix, seed, rotation=rotation or 0)


def _echo_json(payload):
    payload = dict(payload)
    payload["version"] = __version__
    click.echo(jsonio.dumps(payload))


# -- ingest -------------------------------------------------------------------


@cli.command()
@click.argument("input_path")
@click.option("--format", "fmt", type=click.Choice(["auto", "edges", "mm"]),
              default="auto", help="Input format (auto-detected by default).")
@click.option("--dedupe", type=click.Choice(["error", "last", "mean"]),
              default="error",
              help="Policy for the same pair appearing with different weights.")
@click.option("-o", "--output", default=None,
              help="Canonical dataset output path (default: INPUT.canonical).")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable stats.")
def ingest(input_path, fmt, dedupe, output, as_json):
    """Canonicalize a dataset file and report its shape."""
    with open(input_path, "r", encoding="utf-8") as fh:
        text = fh.read()
    if fmt == "auto":
        head = text.lstrip()[:15].lower()
        fmt = "mm" if head.startswith("%%matrixmarket") else "edges"
    if fmt == "mm":
        matrix = ingest_matrix_market(text)
    else:
        matrix = ingest_edge_list(text, dedupe=dedupe)

    out = Path(output) if output else Path(str(input_path) + ".canonical")
    save_dataset(matrix, out)
    save_id_map(matrix, Path(str(out) + ".ids.json"))

    stats = {
        "nodes": matrix.node_count,
        "entries": matrix.entry_count,
        "density": matrix.density,
        "format": fmt,
        "output": str(out),
    }
    if as_json:
        _echo_json(stats)
    else:
        click.echo(f"nodes: {stats['nodes']}")
        click.echo(f"entries: {stats['entries']}")
        click.echo(f"density: {stats['density']:.6g}")
        click.echo(f"wrote: {out}")


# -- train --------------------------------------------------------------------


@cli.command()
@click.argument("dataset")
@click.option("--model", type=click.Choice(["msnl", "nlf"]), default="msnl",
              help="msnl: constrained symmetric trainer; nlf: plain baseline.")
@config_options
@click.option("--split", "split_path", default=None,
              help="Existing split file (default: derive from seed).")
@click.option("--split-seed", type=int, default=None,
              help="Seed for a fresh split (default: --seed).")
@click.option("--rotation", type=int, default=0, help="Fold-role rotation 0..9.")
@click.option("-o", "--out-dir", default=None, envvar="SYMLF_OUTPUT_DIR",
              help="Artifact directory (env SYMLF_OUTPUT_DIR).")
@click.option("--json", "as_json", is_flag=True)
def train(dataset, model, config_path, split_path, split_seed, rotation,
          out_dir, as_json, **flags):
    """Train a model and write factors, report, trace, split and manifest."""
    config = resolve_config(config_path, **flags)
    matrix, fmt = _read_dataset(dataset)
    split = _resolve_split(matrix, split_path, split_seed, rotation, config)
    out = _out_dir(out_dir)

    paths = {
        "factors": out / "factors.slf",
        "report": out / "report.json",
        "trace": out / "trace.csv",
        "split": out / "split.txt",
        "manifest": out / "manifest.json",
    }
    save_split(split, paths["split"])
    run_manifest = RunManifest(
        command="train",
        dataset=str(dataset),
        dataset_format=fmt,
        model=model,
        config=config.to_dict(),
        seed=config.seed,
        split={"path": str(paths["split"]), "seed": split.seed,
               "rotation": split.rotation},
        artifacts={k: str(v) for k, v in paths.items() if k != "manifest"},
    )

    try:
        report, state = train_once(matrix, split, config, model=model)
    except DivergenceError as exc:
        if exc.report is not None:
            exc.report.write_json(paths["report"])
            exc.report.write_trace_csv(paths["trace"])
            run_manifest.write(paths["manifest"])
        raise

    save_factors(paths["factors"], state, config, dataset_ref=str(dataset))
    report.write_json(paths["report"])
    report.write_trace_csv(paths["trace"])
    run_manifest.write(paths["manifest"])

    if as_json:
        _echo_json({
            "model": model,
            "iterations": len(report.per_iteration),
            "termination": report.termination,
            "final_test_rmse": report.final_test_rmse,
            "final_validation_rmse": report.final_validation_rmse,
            "out_dir": str(out),
        })
    else:
        click.echo(f"model: {model}")
        click.echo(f"iterations: {len(report.per_iteration)} "
                   f"({report.termination})")
        click.echo(f"validation rmse: {report.final_validation_rmse:.6g}")
        click.echo(f"test rmse: {report.final_test_rmse:.6g}")
        click.echo(f"artifacts: {out}")


# -- eval ---------------------------------------------------------------------


def _fold_positions(split: SplitPlan, folds: str) -> np.ndarray:
    role_map = {
        "train": split.train_entries,
        "validation": split.validation_entries,
        "test": split.test_entries,
    }
    if folds in role_map:
        return role_map[folds]()
    try:
        wanted = [int(f) for f in folds.split(",")]
    except ValueError:
        raise click.UsageError(
            f"--folds must be train/validation/test or fold indices, got {folds!r}"
        )
    bad = [f for f in wanted if not 0 <= f < 10]
    if bad:
        raise click.UsageError(f"fold indices out of range: {bad}")
    return np.nonzero(np.isin(split.fold_of_entry, wanted))[0]


@cli.command("eval")
@click.argument("factors_path")
@click.argument("dataset")
@click.option("--split", "split_path", required=True, help="Split file to use.")
@click.option("--folds", default="test", show_default=True,
              help="Role name or comma-separated fold indices.")
@click.option("--json", "as_json", is_flag=True)
def eval_cmd(factors_path, dataset, split_path, folds, as_json):
    """RMSE of saved factors over designated folds of a dataset."""
    state, _, _ = load_factors(factors_path)
    matrix, _ = _read_dataset(dataset)
    if state.node_count != matrix.node_count:
        raise ShapeMismatchError(
            f"factors cover {state.node_count} nodes but dataset has "
            f"{matrix.node_count}"
        )
    split = load_split(split_path)
    if split.entry_count != matrix.entry_count:
        raise ShapeMismatchError(
            f"split covers {split.entry_count} entries but dataset has "
            f"{matrix.entry_count}"
        )
    positions = _fold_positions(split, folds)
    if len(positions) == 0:
        raise click.UsageError(f"no entries in folds {folds!r}")
    preds = state.predict_pairs(matrix.ent_rows[positions], matrix.ent_cols[positions])
    from .metrics import rmse as _rmse

    value = _rmse(matrix.ent_weights[positions], preds)
    if as_json:
        _echo_json({"rmse": value, "entries": int(len(positions)), "folds": folds})
    else:
        click.echo(f"rmse: {value!r}")


# -- predict ------------------------------------------------------------------


@cli.command()
@click.argument("factors_path")
@click.option("--dataset", required=True,
              help="Canonical dataset (defines observed pairs).")
@click.option("--pair", "pairs", nargs=2, type=int, multiple=True,
              help="Score one (m, n) pair; repeatable.")
@click.option("--pairs-file", default=None, help="File of 'm n' lines to score.")
@click.option("--node", type=int, default=None,
              help="Rank unobserved partners of this node.")
@click.option("--top-k", type=int, default=None,
              help="How many top partners to print (with --node).")
@click.option("--json", "as_json", is_flag=True)
def predict(factors_path, dataset, pairs, pairs_file, node, top_k, as_json):
    """Score pairs, or rank the strongest unobserved partners of a node.

    Observed pairs are still scored (the model output is a prediction
    either way) and flagged; --top-k excludes them from rankings.
    """
    state, _, _ = load_factors(factors_path)
    matrix, _ = _read_dataset(dataset)
    if state.node_count != matrix.node_count:
        raise ShapeMismatchError(
            f"factors cover {state.node_count} nodes but dataset has "
            f"{matrix.node_count}"
        )
    n = matrix.node_count

    wanted = list(pairs)
    if pairs_file:
        with open(pairs_file, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, 1):
                stripped = line.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                parts = stripped.split()
                if len(parts) != 2:
                    raise DataFormatError("expected 'm n'", line_no=line_no)
                wanted.append((int(parts[0]), int(parts[1])))

    if node is None and not wanted:
        raise click.UsageError("give --pair/--pairs-file or --node with --top-k")
    if (node is None) != (top_k is None):
        raise click.UsageError("--node and --top-k go together")

    if wanted:
        for m, k in wanted:
            if not (0 <= m < n and 0 <= k < n):
                raise click.UsageError(f"unknown node id in pair ({m}, {k})")
        rows = [
            {"m": m, "n": k, "score": state.predict(m, k),
             "observed": matrix.is_observed(m, k)}
            for m, k in wanted
        ]
        if as_json:
            _echo_json({"pairs": rows})
        else:
            for row in rows:
                click.echo(
                    f"{row['m']} {row['n']} {row['score']!r} "
                    f"observed={str(row['observed']).lower()}"
                )
        return

    if not 0 <= node < n:
        raise click.UsageError(f"unknown node id {node}")
    if top_k < 1:
        raise click.UsageError("--top-k must be positive")
    observed, _ = matrix.neighbors(node)
    candidates = np.setdiff1d(np.arange(n, dtype=np.int64), observed)
    scores = state.predict_pairs(np.full(len(candidates), node), candidates)
    order = np.lexsort((candidates, -scores))[:top_k]
    rows = [
        {"node": int(candidates[i]), "score": float(scores[i])} for i in order
    ]
    if as_json:
        _echo_json({"node": node, "top": rows})
    else:
        for row in rows:
            click.echo(f"{row['node']} {row['score']!r}")


# -- search -------------------------------------------------------------------


def _parse_grid_values(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise click.UsageError(f"cannot parse grid values {text!r}")


@cli.command()
@click.argument("dataset")
@click.option("--model", type=click.Choice(["msnl", "nlf"]), default="msnl")
@config_options
@click.option("--split", "split_path", default=None)
@click.option("--split-seed", type=int, default=None)
@click.option("--rotation", type=int, default=0)
@click.option("--grid-lambda", default=None,
              help="Comma-separated lambda values "
                   "(default 0.005,0.01,0.05,0.1,0.5).")
@click.option("--grid-beta", default=None,
              help="Comma-separated values for beta1=beta2 (msnl only).")
@click.option("--grid-eta", default=None, help="Comma-separated eta values.")
@click.option("--budget", type=int, default=None,
              help="Evaluate at most this many grid points.")
@click.option("-o", "--out-dir", default=None, envvar="SYMLF_OUTPUT_DIR")
@click.option("--json", "as_json", is_flag=True)
def search(dataset, model, config_path, split_path, split_seed, rotation,
           grid_lambda, grid_beta, grid_eta, budget, out_dir, as_json, **flags):
    """Grid-search hyperparameters by validation RMSE."""
    config = resolve_config(config_path, **flags)
    matrix, fmt = _read_dataset(dataset)
    split = _resolve_split(matrix, split_path, split_seed, rotation, config)
    out = _out_dir(out_dir)

    grid = {}
    grid["lam"] = (_parse_grid_values(grid_lambda) if grid_lambda
                   else list(DEFAULT_SEARCH_GRID["lam"]))
    if grid_beta:
        grid["beta"] = _parse_grid_values(grid_beta)
    elif model == "msnl":
        grid["beta"] = list(DEFAULT_SEARCH_GRID["beta"])
    if grid_eta:
        grid["eta"] = _parse_grid_values(grid_eta)

    result = hyperparameter_search(matrix, split, config, grid,
                                   model=model, budget=budget)
    paths = {
        "search": out / "search.json",
        "best_config": out / "best_config.json",
        "manifest": out / "manifest.json",
    }
    jsonio.dump(result.to_dict(), paths["search"])
    jsonio.dump(result.best_config.to_dict(), paths["best_config"])
    RunManifest(
        command="search",
        dataset=str(dataset),
        dataset_format=fmt,
        model=model,
        config=config.to_dict(),
        seed=config.seed,
        split={"seed": split.seed, "rotation": split.rotation},
        artifacts={k: str(v) for k, v in paths.items() if k != "manifest"},
        extra={"grid": grid, "budget": budget},
    ).write(paths["manifest"])

    if as_json:
        _echo_json({
            "best_config": result.best_config.to_dict(),
            "best_validation_rmse": result.best_validation_rmse,
            "evaluated": len(result.trace),
            "out_dir": str(out),
        })
    else:
        click.echo(f"evaluated {len(result.trace)} configurations")
        click.echo(f"best validation rmse: {result.best_validation_rmse:.6g}")
        for key, value in sorted(result.best_config.to_dict().items()):
            click.echo(f"  {key}: {value}")


# -- xval ---------------------------------------------------------------------


@cli.command()
@click.argument("dataset")
@click.option("--model", type=click.Choice(["msnl", "nlf"]), default="msnl")
@config_options
@click.option("--restarts", type=int, default=10, show_default=True)
@click.option("--rotation-policy", type=click.Choice(["rotate", "fixed"]),
              default="rotate", show_default=True,
              help="rotate: fold roles rotate per restart; fixed: roles constant.")
@click.option("-o", "--out-dir", default=None, envvar="SYMLF_OUTPUT_DIR")
@click.option("--json", "as_json", is_flag=True)
def xval(dataset, model, config_path, restarts, rotation_policy, out_dir,
         as_json, **flags):
    """Full tenfold protocol: restarts, rotation, aggregate RMSE and time."""
    config = resolve_config(config_path, **flags)
    matrix, fmt = _read_dataset(dataset)
    out = _out_dir(out_dir)

    summary = run_experiment(matrix, config, restarts=restarts,
                             rotation_policy=rotation_policy, model=model)
    paths = {
        "summary": out / "summary.json",
        "manifest": out / "manifest.json",
    }
    summary.write_json(paths["summary"])
    RunManifest(
        command="xval",
        dataset=str(dataset),
        dataset_format=fmt,
        model=model,
        config=config.to_dict(),
        seed=config.seed,
        split={"seed": config.seed},
        artifacts={"summary": str(paths["summary"])},
        extra={"restarts": restarts, "rotation_policy": rotation_policy},
    ).write(paths["manifest"])

    if as_json:
        _echo_json({
            "mean_rmse": summary.mean_rmse,
            "std_rmse": summary.std_rmse,
            "mean_time_s": summary.mean_time_s,
            "std_time_s": summary.std_time_s,
            "restarts": restarts,
            "diverged_restarts": summary.diverged_restarts,
            "rotation_policy": rotation_policy,
            "out_dir": str(out),
        })
    else:
        click.echo(
            f"mean test rmse: {summary.mean_rmse:.6g} "
            f"(std {summary.std_rmse:.3g}, {restarts} restarts, "
            f"{rotation_policy} roles)"
        )
        if summary.diverged_restarts:
            click.echo(f"diverged restarts: {summary.diverged_restarts}")
        click.echo(f"mean time per restart: {summary.mean_time_s:.3g}s")
        click.echo(f"artifacts: {out}")


if __name__ == "__main__":
    sys.exit(main())
