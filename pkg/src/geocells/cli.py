"""Command line entry point.

One binary, eight subcommands covering the pipeline end to end:
partition, label, split, train-baseline, predict, evaluate, serve,
inspect.  Machine-readable results go to stdout; diagnostics, including
the parameter record every run prints, go to stderr.

Exit codes: 0 success, 1 usage error, 2 data error (unreadable or
invalid inputs), 3 internal error.
"""

from __future__ import annotations

import json
import os
import sys
import traceback

import click

from . import dataset, decode, labelcodec, metrics
from .cellgeo import (
    CellError,
    DEFAULT_MAX_LEVEL,
    LatLon,
    cell_area_km2,
    cell_center,
    cell_vertices,
    latlon_to_cell,
)
from .dataset import DatasetError, SplitSpec
from .decode import DecodeError
from .geojson import GeoJsonError, cell_geometry, cell_latlon_bounds
from .metrics import MetricsError
from .partition import (
    DEFAULT_MAX_CELL_SAMPLES,
    PartitionError,
    PartitionParams,
    build_partition,
    leaf_for,
    load_partition,
    partition_checksum,
    save_partition,
)
from .service import ServiceConfig, ServiceError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

_DATA_ERRORS = (
    CellError,
    DatasetError,
    DecodeError,
    GeoJsonError,
    MetricsError,
    PartitionError,
    ServiceError,
    labelcodec.InvalidLabel,
)


def _announce(command: str, **params) -> None:
    """Print the parameter record for this run to stderr."""
    record = {"command": command, "params": params}
    click.echo(json.dumps(record, sort_keys=True), err=True)


def _emit(payload: dict) -> None:
    click.echo(json.dumps(payload, sort_keys=True))


def _sniff_format(path: str, fmt: str | None) -> str:
    if fmt is not None:
        return fmt
    ext = os.path.splitext(path)[1].lower()
    return "tsv" if ext in (".tsv", ".tab", ".txt") else "jsonl"


@click.group(name="geocells")
def cli():
    """Adaptive cube-sphere geocoding toolkit."""


@cli.command("partition")
@click.option("--input", "input_path", required=True, type=click.Path(), help="TSV or JSONL records.")
@click.option("--format", "fmt", type=click.Choice(dataset.FORMATS), default=None,
              help="Input format; default sniffs the file extension.")
@click.option("--max-cell-samples", type=click.IntRange(min=1), default=DEFAULT_MAX_CELL_SAMPLES,
              show_default=True, help="Split any cell holding more points than this.")
@click.option("--max-level", type=click.IntRange(min=0, max=30), default=DEFAULT_MAX_LEVEL,
              show_default=True, help="Deepest level a leaf may reach.")
@click.option("--output", "output_path", required=True, type=click.Path())
def partition_cmd(input_path, fmt, max_cell_samples, max_level, output_path):
    """Build a density-adaptive partition from point records."""
    fmt = _sniff_format(input_path, fmt)
    _announce("partition", input=input_path, format=fmt, max_cell_samples=max_cell_samples,
              max_level=max_level, output=output_path)
    records, report = dataset.parse_records(input_path, fmt)
    params = PartitionParams(max_cell_samples=max_cell_samples, max_level=max_level)
    part = build_partition((dataset.to_point(r) for r in records), params)
    save_partition(part, output_path)
    if report.rejected:
        click.echo(json.dumps({"rejections": report.to_dict()}, sort_keys=True), err=True)
    _emit({
        "leaves": part.leaf_count(),
        "total_points": part.total_points,
        "rejected": report.rejected,
        "checksum": partition_checksum(part),
        "output": output_path,
    })


@cli.command("label")
@click.option("--input", "input_path", required=True, type=click.Path())
@click.option("--format", "fmt", type=click.Choice(dataset.FORMATS), default=None)
@click.option("--partition", "partition_path", required=True, type=click.Path())
@click.option("--output", "output_path", required=True, type=click.Path())
def label_cmd(input_path, fmt, partition_path, output_path):
    """Tag each record with the label of its containing leaf."""
    fmt = _sniff_format(input_path, fmt)
    _announce("label", input=input_path, format=fmt, partition=partition_path,
              output=output_path)
    part = load_partition(partition_path)
    records, report = dataset.parse_records(input_path, fmt)
    written = dataset.write_labeled_records(dataset.label_records(records, part), output_path)
    if report.rejected:
        click.echo(json.dumps({"rejections": report.to_dict()}, sort_keys=True), err=True)
    _emit({"labeled": written, "rejected": report.rejected, "output": output_path})


@cli.command("split")
@click.option("--input", "input_path", required=True, type=click.Path(),
              help="Labeled JSONL records.")
@click.option("--train-fraction", type=click.FloatRange(min=0, max=1, min_open=True, max_open=True),
              default=0.8, show_default=True)
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--train-output", required=True, type=click.Path())
@click.option("--test-output", required=True, type=click.Path())
def split_cmd(input_path, train_fraction, seed, train_output, test_output):
    """Deterministic id-hash split into train and test files."""
    _announce("split", input=input_path, train_fraction=train_fraction, seed=seed,
              train_output=train_output, test_output=test_output)
    spec = SplitSpec(train_fraction=train_fraction, seed=seed)
    train, test = [], []
    for rec in dataset.read_labeled_records(input_path):
        (train if dataset.assign_split(rec.id, spec) else test).append(rec)
    n_train = dataset.write_labeled_records(train, train_output)
    n_test = dataset.write_labeled_records(test, test_output)
    total = n_train + n_test
    _emit({
        "train": n_train,
        "test": n_test,
        "observed_fraction": (n_train / total) if total else None,
        "train_output": train_output,
        "test_output": test_output,
    })


@cli.command("train-baseline")
@click.option("--input", "input_path", required=True, type=click.Path(),
              help="Labeled JSONL training records.")
@click.option("--partition", "partition_path", required=True, type=click.Path())
@click.option("--alpha", type=click.FloatRange(min=0, min_open=True), default=decode.DEFAULT_ALPHA,
              show_default=True, help="Additive smoothing for token likelihoods.")
@click.option("--output", "output_path", required=True, type=click.Path())
def train_baseline_cmd(input_path, partition_path, alpha, output_path):
    """Train the naive Bayes baseline scorer."""
    _announce("train-baseline", input=input_path, partition=partition_path, alpha=alpha,
              output=output_path)
    part = load_partition(partition_path)
    model = decode.train_baseline(dataset.read_labeled_records(input_path), part, alpha=alpha)
    decode.save_baseline(model, output_path)
    _emit({
        "records": sum(model.record_counts.values()),
        "leaves": part.leaf_count(),
        "vocabulary": len(model.vocabulary),
        "partition_checksum": model.partition_checksum,
        "output": output_path,
    })


@cli.command("predict")
@click.option("--model", "model_path", required=True, type=click.Path(),
              help="Baseline model or external scores file.")
@click.option("--partition", "partition_path", required=True, type=click.Path())
@click.option("--text", default=None, help="Single query; prints one JSON line per prediction.")
@click.option("--input", "input_path", default=None, type=click.Path(),
              help="Labeled JSONL records to predict in batch.")
@click.option("--output", "output_path", default=None, type=click.Path(),
              help="Predictions JSONL for batch mode.")
@click.option("--beam", type=click.IntRange(min=1), default=decode.DEFAULT_BEAM_WIDTH,
              show_default=True)
@click.option("--top-k", type=click.IntRange(min=1), default=decode.DEFAULT_TOP_K,
              show_default=True)
def predict_cmd(model_path, partition_path, text, input_path, output_path, beam, top_k):
    """Rank cells for a query text (or a file of records)."""
    if top_k > beam:
        raise click.UsageError(f"--top-k {top_k} exceeds --beam {beam}")
    if (text is None) == (input_path is None):
        raise click.UsageError("exactly one of --text or --input is required")
    if input_path is not None and output_path is None:
        raise click.UsageError("--input requires --output")
    _announce("predict", model=model_path, partition=partition_path, text=text,
              input=input_path, output=output_path, beam=beam, top_k=top_k)
    part = load_partition(partition_path)
    scorer, kind = decode.load_scorer(model_path, part)
    trie = decode.trie_for(part)
    if text is not None:
        for pred in decode.beam_search(scorer, text, trie, beam_width=beam, top_k=top_k):
            click.echo(json.dumps({"label": pred.label, "probability": pred.probability}))
        return
    rows = []
    for rec in dataset.read_labeled_records(input_path):
        rows.append((rec.id, decode.beam_search(scorer, rec.text, trie,
                                                beam_width=beam, top_k=top_k)))
    decode.write_predictions(output_path, rows)
    summary = {"predicted": len(rows), "scorer": kind, "output": output_path}
    if kind == "replay":
        summary["replay_misses"] = scorer.misses
    _emit(summary)


@cli.command("evaluate")
@click.option("--pred", "pred_path", required=True, type=click.Path(),
              help="Predictions JSONL from `predict`.")
@click.option("--gold", "gold_path", required=True, type=click.Path(),
              help="Labeled JSONL, or raw TSV with --partition.")
@click.option("--format", "fmt", type=click.Choice(dataset.FORMATS), default=None)
@click.option("--partition", "partition_path", default=None, type=click.Path(),
              help="Needed when the gold file is raw (unlabeled).")
@click.option("--report", "report_path", required=True, type=click.Path())
@click.pass_context
def evaluate_cmd(ctx, pred_path, gold_path, fmt, partition_path, report_path):
    """Score predictions against gold labels joined on record id."""
    fmt = _sniff_format(gold_path, fmt)
    _announce("evaluate", pred=pred_path, gold=gold_path, format=fmt,
              partition=partition_path, report=report_path)
    predictions = decode.read_predictions(pred_path)
    if fmt == "jsonl":
        gold = {rec.id: rec for rec in dataset.read_labeled_records(gold_path)}
    else:
        if partition_path is None:
            raise click.UsageError("a raw TSV gold file needs --partition to derive labels")
        part = load_partition(partition_path)
        records, _ = dataset.parse_records(gold_path, fmt)
        gold = {rec.id: rec for rec in dataset.label_records(records, part)}

    pairs = []
    missing = []
    for record_id, ranked in predictions.items():
        rec = gold.get(record_id)
        if rec is None or not ranked:
            missing.append(record_id)
            continue
        pairs.append(metrics.EvalPair(
            predicted=ranked[0].label,
            gold=rec.label,
            gold_loc=LatLon(rec.latitude, rec.longitude),
        ))
    for record_id in missing:
        click.echo(f"no gold record (or empty prediction) for id {record_id!r}", err=True)
    unpredicted = len(gold) - (len(predictions) - len(missing))
    if unpredicted:
        click.echo(f"{unpredicted} gold records had no prediction", err=True)

    report = metrics.evaluate(pairs)
    doc = report.to_dict()
    doc["missing"] = len(missing)
    data = json.dumps(doc, sort_keys=True).encode() + b"\n"
    tmp = f"{report_path}.tmp.{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, report_path)
    click.echo(report.to_text(), err=True)
    _emit(doc)
    if missing:
        ctx.exit(EXIT_DATA)


@cli.command("serve")
@click.option("--partition", "partition_path", default=None, type=click.Path())
@click.option("--model", "model_path", default=None, type=click.Path())
@click.option("--host", default=None)
@click.option("--port", type=int, default=None)
@click.option("--beam-width", type=int, default=None)
@click.option("--top-k", type=int, default=None)
@click.option("--cors", default=None, help="Comma-separated allowed origins.")
@click.option("--edge-samples", type=click.IntRange(min=1), default=None,
              help="Boundary points per cell edge; default adapts to cell level.")
@click.option("--check", is_flag=True, help="Load everything, print the resolved config, exit.")
def serve_cmd(partition_path, model_path, host, port, beam_width, top_k, cors, edge_samples, check):
    """Run the REST service.

    Each setting resolves as environment variable over flag over
    default: GEOCELLS_PARTITION, GEOCELLS_MODEL, GEOCELLS_HOST,
    GEOCELLS_PORT, GEOCELLS_BEAM_WIDTH, GEOCELLS_TOP_K,
    GEOCELLS_CORS_ORIGINS.
    """
    env = os.environ

    def resolve(env_key, flag_value, default, cast=str):
        if env_key in env:
            raw = env[env_key]
            try:
                return cast(raw)
            except (TypeError, ValueError):
                raise click.UsageError(f"cannot parse {env_key}={raw!r}")
        return flag_value if flag_value is not None else default

    partition_path = resolve("GEOCELLS_PARTITION", partition_path, None)
    model_path = resolve("GEOCELLS_MODEL", model_path, None)
    if not partition_path or not model_path:
        raise click.UsageError("--partition and --model are required (flag or environment)")
    config = ServiceConfig(
        partition_path=partition_path,
        model_path=model_path,
        host=resolve("GEOCELLS_HOST", host, "127.0.0.1"),
        port=resolve("GEOCELLS_PORT", port, 8000, int),
        beam_width=resolve("GEOCELLS_BEAM_WIDTH", beam_width, decode.DEFAULT_BEAM_WIDTH, int),
        top_k=resolve("GEOCELLS_TOP_K", top_k, decode.DEFAULT_TOP_K, int),
        cors_origins=tuple(
            resolve("GEOCELLS_CORS_ORIGINS", cors, "*").split(",")
        ),
        edge_samples=edge_samples,
    )
    _announce("serve", partition=config.partition_path, model=config.model_path,
              host=config.host, port=config.port, beam_width=config.beam_width,
              top_k=config.top_k, cors_origins=list(config.cors_origins), check=check)
    if check:
        from .service import load_engine

        engine = load_engine(config)
        _emit({
            "host": config.host,
            "port": config.port,
            "partition_checksum": engine.partition_checksum,
            "model_id": engine.model_id,
            "leaves": engine.partition.leaf_count(),
        })
        return
    from .service import run_service

    run_service(config)


@cli.command("inspect")
@click.option("--label", "label_arg", default=None, help="Cell label to describe.")
@click.option("--lat", type=float, default=None)
@click.option("--lon", type=float, default=None)
@click.option("--level", type=click.IntRange(min=0, max=30), default=None,
              help="Cell level for --lat/--lon; defaults to the partition leaf or level 9.")
@click.option("--partition", "partition_path", default=None, type=click.Path(),
              help="Adds leaf membership and counts to the output.")
def inspect_cmd(label_arg, lat, lon, level, partition_path):
    """Describe a cell by label or by coordinates."""
    by_point = lat is not None and lon is not None
    if (label_arg is None) == (not by_point):
        raise click.UsageError("pass either --label or both --lat and --lon")
    _announce("inspect", label=label_arg, lat=lat, lon=lon, level=level,
              partition=partition_path)
    part = load_partition(partition_path) if partition_path else None
    if label_arg is not None:
        cell = labelcodec.decode(label_arg)
    else:
        point = LatLon(lat, lon)
        if level is not None:
            cell = latlon_to_cell(point, level)
        elif part is not None:
            cell = leaf_for(part, point)
        else:
            cell = latlon_to_cell(point, DEFAULT_MAX_LEVEL)
    center = cell_center(cell)
    bounds = cell_latlon_bounds(cell)
    doc = {
        "label": labelcodec.encode(cell),
        "level": cell.level,
        "face": cell.face,
        "center": {"lat": center.lat, "lon": center.lon},
        "area_km2": cell_area_km2(cell),
        "vertices": [{"lat": v.lat, "lon": v.lon} for v in cell_vertices(cell)],
        "bounds": {
            "lat_min": bounds.lat_min,
            "lat_max": bounds.lat_max,
            "lon_intervals": [list(iv) for iv in bounds.lon_intervals],
        },
        "geometry": cell_geometry(cell),
    }
    if part is not None:
        leaf = leaf_for(part, center)
        doc["partition"] = {
            "is_leaf": labelcodec.encode(cell) in set(part.leaf_labels()),
            "containing_leaf": labelcodec.encode(leaf),
            "leaf_count": part.count_of(leaf),
        }
    _emit(doc)


def main(argv=None) -> int:
    """Entry point mapping exceptions to stable exit codes."""
    try:
        # In non-standalone mode click returns the code from ctx.exit()
        # instead of raising, so the return value matters.
        rv = cli.main(args=argv, standalone_mode=False)
        if isinstance(rv, int):
            return rv
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return EXIT_USAGE
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except _DATA_ERRORS as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DATA
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
