"""Command line entry point.

Every failure exits non-zero and writes ``{"error": kind, "message": ...}``
to stderr. Exit codes: 2 validation, 3 missing store, 4 unknown user,
5 storage, 1 anything else.
"""
from __future__ import annotations

import functools
import json
import os
import sys
from pathlib import Path

import click

from .abtest import Experiment, compare
from .dedup import DEFAULT_THRESHOLD, ProductClusterMap, cluster_products
from .engine import Engine, outcome_payload, parse_window
from .errors import StorageError, StoreMissingError, SwipecfError, UnknownUserError, ValidationError
from .eventstore import EventStore, read_catalogue_file
from .service.schemas import RecommendationResponse
from .simulator import SimulationConfig, write_store

STORE_ENV = "SWIPECF_STORE"
EXIT_CODES = {ValidationError: 2, StoreMissingError: 3, UnknownUserError: 4, StorageError: 5}


def emit(payload) -> None:
    click.echo(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False))


def fail(kind: str, message: str, code: int):
    click.echo(json.dumps({"error": kind, "message": message}), err=True)
    sys.exit(code)


def reports_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except SwipecfError as exc:
            code = next((c for cls, c in EXIT_CODES.items() if isinstance(exc, cls)), 1)
            fail(exc.kind, str(exc), code)
        except (OSError, json.JSONDecodeError) as exc:
            fail("io", str(exc), 1)

    return wrapper


store_option = click.option(
    "--store",
    "store_dir",
    type=click.Path(file_okay=False, path_type=Path),
    default=lambda: os.environ.get(STORE_ENV, "store"),
    show_default=f"${STORE_ENV} or ./store",
    help="Event store directory.",
)
clusters_option = click.option(
    "--clusters", type=click.Path(exists=True, dir_okay=False, path_type=Path), help="Cluster map from `dedup`."
)
window_option = click.option("--window", help="FROM..TO, epoch ms or ISO dates; TO is exclusive.")


def _clusters(path):
    return ProductClusterMap.read(path) if path else None


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Collaborative filtering recommender and evaluation harness for swipe feedback."""


@main.command()
@click.argument("events_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@store_option
@click.option("--catalogue", type=click.Path(exists=True, dir_okay=False, path_type=Path), help="Also install a catalogue.")
@click.option("--users", type=click.Path(exists=True, dir_okay=False, path_type=Path), help="Also install a user registry.")
@reports_errors
def ingest(events_file, store_dir, catalogue, users):
    """Validate EVENTS_FILE (JSON-lines envelopes) and append the valid events."""
    store = EventStore(store_dir, create=True)
    accepted, rejected = 0, []
    with open(events_file, encoding="utf-8") as fh:
        batch, linenos = [], []
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                batch.append(json.loads(line))
                linenos.append(lineno)
            except json.JSONDecodeError as exc:
                rejected.append({"line": lineno, "reason": f"malformed JSON: {exc.msg}"})
    positions, bad = store.append_many(batch)
    accepted = len(positions)
    rejected += [{"line": linenos[i], "reason": r} for i, r in bad]
    rejected.sort(key=lambda r: r["line"])
    if catalogue:
        store.write_catalogue(read_catalogue_file(catalogue))
    if users:
        store.write_users([l.strip() for l in users.read_text(encoding="utf-8").splitlines() if l.strip()])
    emit({"accepted": accepted, "rejected": len(rejected), "rejections": rejected[:100]})


@main.command()
@click.argument("catalogue_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--threshold", type=float, default=DEFAULT_THRESHOLD, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default="clusters.tsv", show_default=True)
@reports_errors
def dedup(catalogue_file, threshold, out):
    """Cluster near-duplicate product titles and write the cluster map."""
    products = read_catalogue_file(catalogue_file)
    cmap = cluster_products(products, threshold)
    cmap.write(out)
    emit({"products": len(cmap), "clusters": cmap.n_clusters, "threshold": threshold, "out": str(out)})


@main.command()
@click.option("--user", "user_id", required=True)
@click.option("--n", type=click.IntRange(min=1), default=5, show_default=True)
@store_option
@clusters_option
@reports_errors
def recommend(user_id, n, store_dir, clusters):
    """Print a recommendation for one user. No recommendation is not an error."""
    engine = Engine(EventStore(store_dir), _clusters(clusters))
    outcome = engine.recommend(user_id, n)
    emit(RecommendationResponse(**outcome_payload(outcome)).model_dump())


@main.command()
@window_option
@store_option
@clusters_option
@click.option("--bucket-width", type=float, default=0.05, show_default=True)
@reports_errors
def evaluate(window, store_dir, clusters, bucket_width):
    """Dataset, system and user metrics for the store."""
    engine = Engine(EventStore(store_dir), _clusters(clusters))
    emit(engine.evaluate(parse_window(window), bucket_width))


@main.command()
@click.option("--experiment", "experiment_file", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@window_option
@store_option
@reports_errors
def abtest(experiment_file, window, store_dir):
    """Compare experiment variants over one shared window."""
    experiment = Experiment.load(experiment_file)
    events = EventStore(store_dir).replay()
    emit(compare(events, experiment, parse_window(window)).to_dict())


@main.command()
@click.option("--config", "config_file", required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False, path_type=Path))
@reports_errors
def simulate(config_file, out_dir):
    """Write a synthetic store (events, catalogue, users) generated from CONFIG."""
    config = SimulationConfig.load(config_file)
    store = write_store(config, out_dir)
    emit({"out": str(out_dir), "events": store.position, "users": config.n_users, "products": config.n_products})


@main.command()
@store_option
@click.option("--listen", default="127.0.0.1:8000", show_default=True, help="HOST:PORT")
@clusters_option
@click.option("--refresh-seconds", type=float, default=30.0, show_default=True)
@reports_errors
def serve(store_dir, listen, clusters, refresh_seconds):
    """Run the HTTP service."""
    import uvicorn

    from .service import create_app

    if not store_dir.is_dir():
        raise StoreMissingError(f"no event store at {store_dir}")
    host, _, port = listen.rpartition(":")
    if not port.isdigit():
        raise ValidationError(f"--listen must be HOST:PORT, got {listen!r}")
    app = create_app(store_dir, clusters_path=clusters, refresh_seconds=refresh_seconds)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))


if __name__ == "__main__":
    main()
