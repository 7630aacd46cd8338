"""Command-line client for the experiment service.

By default commands talk to an in-process instance of the FastAPI app, so no
server needs to be running; pass --server URL to use a remote one.  `run`
executes a config file and persists the CSV table plus a `<table>.meta.json`
sidecar; `summarize` prints pass/fail counts for a table and exits nonzero
iff any row failed its check.
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click


def _client(server: str | None):
    if server:
        import httpx

        return httpx.Client(base_url=server, timeout=None)
    from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app)


def _post(client, path: str, payload: dict):
    resp = client.post(path, json=payload)
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except Exception:
            detail = resp.text
        click.echo(f"error: {detail}", err=True)
        sys.exit(2)
    return resp.json()


@click.group()
def main():
    """Experiment runner for high-dimensional testing studies."""


@main.command()
@click.argument("config_path", type=click.Path(path_type=Path))
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--out", type=click.Path(path_type=Path), default=None,
              help="Output CSV path (default: config's 'out' or '<config>.csv').")
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--server", default=None, help="Remote service URL; in-process if omitted.")
def run(config_path: Path, seed, out, workers, server):
    """Run the experiment described by CONFIG_PATH and persist its table."""
    try:
        config_text = config_path.read_text()
    except OSError as e:
        click.echo(f"error: cannot read config: {e}", err=True)
        sys.exit(2)
    started = time.monotonic()
    result = _post(_client(server), "/experiments/run",
                   {"config_text": config_text, "seed": seed, "workers": workers})
    wall = time.monotonic() - started
    if out is None:
        declared = json.loads(result["meta"]["config_text"]).get("out")
        out = Path(declared) if declared else config_path.with_suffix(".csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(result["csv"])
    meta = dict(result["meta"], wall_time_s=wall)
    Path(f"{out}.meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    click.echo(f"wrote {out} ({meta['rows']} rows, config {meta['config_hash']}, {wall:.1f}s)")


@main.command()
@click.argument("table_path", type=click.Path(path_type=Path))
@click.option("--server", default=None, help="Remote service URL; in-process if omitted.")
def summarize(table_path: Path, server):
    """Print pass/fail counts for a results table; exit nonzero on failures."""
    try:
        csv_text = table_path.read_text()
    except OSError as e:
        click.echo(f"error: cannot read table: {e}", err=True)
        sys.exit(2)
    summary = _post(_client(server), "/experiments/summarize", {"csv": csv_text})
    for kind, agg in sorted(summary["kinds"].items()):
        click.echo(
            f"{kind}: {agg['rows']} rows, {agg['pass']} pass, "
            f"{agg['fail']} fail, {agg['errors']} errors"
        )
    if summary["worst_margin"] is not None:
        click.echo(f"worst bound margin: {summary['worst_margin']:.6g}")
    if not summary["kinds"]:
        click.echo("empty table")
    sys.exit(1 if summary["any_fail"] else 0)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve(host, port):
    """Start the HTTP service."""
    import uvicorn

    uvicorn.run("seqlab.service:app", host=host, port=port)


if __name__ == "__main__":
    main()
