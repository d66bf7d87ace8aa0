"""Operator command line.

Subcommands: serve, put, lookup, eval, calibrate, synthgen, bench, export.
Exit codes are script-friendly: 0 success, 2 input/data error, 3 provider
or LLM (upstream) error. put/lookup are HTTP clients against a running
serve instance and print exactly the server's JSON.
"""

from __future__ import annotations

import dataclasses
import json
import signal
import sys
import threading
from importlib.metadata import version as pkg_version

import click
import requests

from . import benchlat, evalkit, synthgen
from .config import (
    load_gen_config,
    load_provider_config,
    load_server_config,
)
from .errors import DataError, UpstreamError
from .provider import MOCK_KIND, ProviderConfig
from .server import CacheServer

EXIT_OK = 0
EXIT_DATA = 2
EXIT_UPSTREAM = 3


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guard(fn):
    """Run fn, mapping error families to the exit-code convention."""
    try:
        return fn()
    except UpstreamError as exc:
        _fail(EXIT_UPSTREAM, str(exc))
    except (DataError, OSError, ValueError, KeyError) as exc:
        _fail(EXIT_DATA, str(exc))


def _provider_config(spec: str, mock_seed: int | None, mock_dim: int | None) -> ProviderConfig:
    """Load a provider config from a TOML path, or the literal "mock"."""
    if spec == "mock":
        config = ProviderConfig(kind=MOCK_KIND, model_name="mock")
    else:
        config = load_provider_config(spec)
    if mock_seed is not None:
        config = dataclasses.replace(config, mock_seed=mock_seed)
    if mock_dim is not None:
        config = dataclasses.replace(config, expected_dim=mock_dim)
    if config.kind == MOCK_KIND:
        dim = config.expected_dim or 256
        click.echo(f"mock provider: seed={config.mock_seed} dim={dim}", err=True)
    return config


mock_options = [
    click.option("--mock-seed", type=int, default=None, help="Seed for the mock provider."),
    click.option("--mock-dim", type=int, default=None, help="Dimension for the mock provider."),
]


def _with_mock_options(fn):
    for opt in reversed(mock_options):
        fn = opt(fn)
    return fn


@click.group()
@click.version_option(version=pkg_version("langcache"), prog_name="langcache")
def main():
    """Semantic cache toolchain: cache server, evaluation, calibration,
    synthetic pair generation, and latency benchmarking."""


# -- eval / calibrate ----------------------------------------------------


@main.command(name="eval")
@click.option("--pairs", "pairs_path", required=True, help="Labeled pair CSV.")
@click.option("--provider", "provider_spec", required=True, help="Provider TOML path or 'mock'.")
@click.option("--out", "out_path", default=None, help="Write the report JSON here.")
@_with_mock_options
def cli_eval(pairs_path, provider_spec, out_path, mock_seed, mock_dim):
    """Evaluate a provider on a labeled pair dataset."""

    def run():
        config = _provider_config(provider_spec, mock_seed, mock_dim)
        pairs = evalkit.load_pairs_csv(pairs_path)
        report = evalkit.evaluate(pairs, config)
        click.echo(f"Precision: {report.precision:.6f}")
        click.echo(f"Recall: {report.recall:.6f}")
        click.echo(f"F1: {report.f1:.6f}")
        click.echo(f"Accuracy: {report.accuracy:.6f}")
        click.echo(f"Avg. Precision: {report.average_precision:.6f}")
        if out_path:
            with open(out_path, "w", encoding="utf-8") as fh:
                fh.write(report.to_json())
                fh.write("\n")

    _guard(run)


@main.command()
@click.option("--pairs", "pairs_path", required=True, help="Labeled pair CSV.")
@click.option("--provider", "provider_spec", required=True, help="Provider TOML path or 'mock'.")
@_with_mock_options
def calibrate(pairs_path, provider_spec, mock_seed, mock_dim):
    """Search the similarity thresholds that maximize F1 and accuracy."""

    def run():
        config = _provider_config(provider_spec, mock_seed, mock_dim)
        pairs = evalkit.load_pairs_csv(pairs_path)
        scored = evalkit.score_pairs(pairs, config)
        theta_f1, precision, recall, f1 = evalkit.best_threshold_f1(scored)
        theta_acc, accuracy = evalkit.best_threshold_accuracy(scored)
        click.echo(f"f1_threshold: {theta_f1!r} (precision {precision:.6f}, "
                   f"recall {recall:.6f}, f1 {f1:.6f})")
        click.echo(f"accuracy_threshold: {theta_acc!r} (accuracy {accuracy:.6f})")

    _guard(run)


# -- synthgen ------------------------------------------------------------


@main.command(name="synthgen")
@click.option("--seeds", "seeds_path", required=True, help="Seed queries (.jsonl or text lines).")
@click.option("--config", "config_path", required=True, help="Generation TOML config.")
@click.option("--out", "out_path", required=True, help="Output JSONL path.")
@click.option("--export-csv", "csv_path", default=None, help="Also export labeled-pair CSV.")
def cli_synthgen(seeds_path, config_path, out_path, csv_path):
    """Generate paraphrase/distinct pairs for a seed query corpus."""

    def run():
        config = load_gen_config(config_path)
        seeds = synthgen.load_seeds(seeds_path)
        summary = synthgen.run_pipeline(seeds, config, out_path)
        click.echo(json.dumps(summary.to_dict()))
        if csv_path:
            synthgen.export_pairs_csv(out_path, csv_path)

    _guard(run)


# -- bench ---------------------------------------------------------------


@main.command()
@click.option("--provider", "provider_spec", required=True, help="Provider TOML path or 'mock'.")
@click.option("--queries", "queries_path", required=True, help="One query per line.")
@click.option("--warmup", type=int, default=1, show_default=True)
@click.option("--repeats", type=int, default=3, show_default=True)
@click.option("--scatter", "scatter_path", default=None,
              help="Append an (x=mean_s, y=avg precision, Model) row to this CSV.")
@click.option("--ap", "avg_precision", type=float, default=None,
              help="Average precision to pair with the latency in the scatter row.")
@_with_mock_options
def bench(provider_spec, queries_path, warmup, repeats, scatter_path, avg_precision,
          mock_seed, mock_dim):
    """Measure sequential single-text embedding latency."""

    def run():
        config = _provider_config(provider_spec, mock_seed, mock_dim)
        with open(queries_path, "r", encoding="utf-8") as fh:
            queries = [line.strip() for line in fh if line.strip()]
        if not queries:
            raise ValueError(f"{queries_path}: no queries")
        stats = benchlat.measure_latency(config, queries, warmup=warmup, repeats=repeats)
        click.echo(json.dumps(stats.to_dict()))
        if scatter_path:
            if avg_precision is None:
                raise ValueError("--scatter requires --ap")
            _append_scatter_row(scatter_path, stats.model, stats.mean_s, avg_precision)

    _guard(run)


def _append_scatter_row(path: str, model: str, mean_s: float, ap: float) -> None:
    import csv
    import os

    entries = []
    if os.path.exists(path):
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is not None and header != ["x", "y", "Model"]:
                raise ValueError(f"{path}: not a scatter CSV")
            entries = [(row[2], float(row[0]), float(row[1])) for row in reader if row]
    entries.append((model, mean_s, ap))
    benchlat.emit_scatter_csv(entries, path)


# -- export --------------------------------------------------------------


@main.command()
@click.option("--report", "report_path", required=True, help="EvalReport JSON file.")
@click.option("--model", required=True, help="Model column value.")
@click.option("--source", default="Open", show_default=True, help="Source column value.")
@click.option("--out", "out_path", required=True, help="Comparison-table CSV path.")
@click.option("--append", is_flag=True, help="Append to an existing table.")
def export(report_path, model, source, out_path, append):
    """Emit a comparison-table CSV row from a saved report."""

    def run():
        with open(report_path, "r", encoding="utf-8") as fh:
            report = evalkit.EvalReport.from_dict(json.load(fh))
        evalkit.write_table_row(out_path, model, source, report, append=append)
        click.echo(f"wrote row for {model} to {out_path}")

    _guard(run)


# -- server and clients --------------------------------------------------


@main.command()
@click.option("--config", "config_path", default=None, help="Server TOML config.")
def serve(config_path):
    """Run the cache HTTP server until SIGINT/SIGTERM."""

    def run():
        server = CacheServer(load_server_config(config_path))

        def on_sigterm(*_):
            # shutdown() blocks until the serve loop acknowledges, so it must
            # not run on the thread the signal interrupted.
            threading.Thread(target=server.shutdown, daemon=True).start()

        signal.signal(signal.SIGTERM, on_sigterm)
        click.echo(f"listening on {server.url}", err=True)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
        server.shutdown()

    _guard(run)


def _client_call(server_url: str, path: str, payload: dict):
    try:
        resp = requests.post(f"{server_url.rstrip('/')}{path}", json=payload, timeout=60)
    except requests.RequestException as exc:
        _fail(EXIT_UPSTREAM, f"server unreachable: {exc}")
    click.echo(json.dumps(resp.json()))
    if resp.status_code >= 500:
        sys.exit(EXIT_UPSTREAM)
    if resp.status_code >= 400:
        sys.exit(EXIT_DATA)


@main.command()
@click.option("--server", "server_url", default="http://127.0.0.1:8080", show_default=True)
@click.option("--query", required=True)
@click.option("--response", "response_text", required=True)
def put(server_url, query, response_text):
    """Store a (query, response) pair in a running server."""
    _client_call(server_url, "/v1/entries", {"query": query, "response": response_text})


@main.command()
@click.option("--server", "server_url", default="http://127.0.0.1:8080", show_default=True)
@click.option("--query", required=True)
@click.option("--threshold", type=float, default=None,
              help="Per-call threshold override in [-1, 1].")
def lookup(server_url, query, threshold):
    """Look a query up in a running server; prints the server's JSON."""
    payload = {"query": query}
    if threshold is not None:
        payload["threshold"] = threshold
    _client_call(server_url, "/v1/lookup", payload)


if __name__ == "__main__":
    main()
