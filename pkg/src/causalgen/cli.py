"""Command-line client for the service.

Every subcommand is a thin client: it resolves its inputs from the config
file, environment overrides, and flags, posts one request to the service
(in process by default, over a socket-free ASGI transport), and prints the
JSON response.  ``serve`` starts the same app over real HTTP.

Exit codes: 0 success, 2 invalid input or usage, 3 numerical failure
during training, 4 checkpoint version mismatch.
"""

from __future__ import annotations

import asyncio
import json
import os
import sys

import click

from .config import Config, apply_env_overrides, load_config
from .service import create_app

EXIT_INPUT = 2


def _post(path: str, payload: dict) -> dict:
    """Send one request through the in-process app; exit on error bodies."""
    from httpx import ASGITransport, AsyncClient

    async def go():
        transport = ASGITransport(app=create_app())
        async with AsyncClient(transport=transport,
                               base_url="http://causalgen") as client:
            return await client.post(path, json=payload)

    resp = asyncio.run(go())
    try:
        body = resp.json()
    except ValueError:
        body = {"detail": resp.text}
    if resp.status_code == 200:
        return body
    detail = body.get("detail", str(body))
    click.echo(f"error: {detail}", err=True)
    sys.exit(int(body.get("exit_code", EXIT_INPUT)))


def _echo(body: dict) -> None:
    click.echo(json.dumps(body, sort_keys=True))


def _default_out(cfg: Config, name: str) -> str:
    return os.path.join(cfg.output_dir, name)


@click.group()
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="YAML config file; flags override its values.")
@click.pass_context
def main(ctx, config_path):
    """Train, sample, extend, and evaluate causal path generators."""
    try:
        if config_path is None:
            cfg = apply_env_overrides(Config()).validate()
        else:
            cfg = load_config(config_path)
    except (ValueError, FileNotFoundError, OSError) as exc:
        raise click.UsageError(str(exc))
    ctx.obj = cfg


@main.command()
@click.option("--model", default=None, help="bs | heston | pdv4")
@click.option("--n", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", default=None)
@click.pass_obj
def simulate(cfg: Config, model, n, seed, out):
    """Simulate a market model and write a wide paths CSV."""
    body = _post("/simulate", {
        "model": model if model is not None else cfg.simulate.model,
        "n": n if n is not None else cfg.simulate.n,
        "seed": seed if seed is not None else cfg.simulate.seed,
        "params": cfg.simulate.params,
        "out": out if out is not None else _default_out(cfg, "paths.csv"),
    })
    _echo(body)


@main.command()
@click.option("--data", default=None, help="Training data file (CSV).")
@click.option("--out", "out_dir", default=None, help="Output directory.")
@click.option("--resume", default=None, help="Checkpoint directory to resume from.")
@click.option("--epochs", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.pass_obj
def train(cfg: Config, data, out_dir, resume, epochs, seed):
    """Train the generator and write a checkpoint plus loss history."""
    if data is not None:
        cfg.data.source = data
    if epochs is not None:
        cfg.train.epochs = epochs
    if seed is not None:
        cfg.train.seed = seed
    body = _post("/train", {
        "config": cfg.to_dict(),
        "out_dir": out_dir if out_dir is not None else _default_out(cfg, "train"),
        "resume": resume,
    })
    _echo(body)


@main.command()
@click.option("--checkpoint", required=True)
@click.option("--n", type=int, default=100)
@click.option("--seed", type=int, default=None)
@click.option("--condition", default=None,
              help="Comma-separated floats for conditional checkpoints.")
@click.option("--out", default=None)
@click.pass_obj
def generate(cfg: Config, checkpoint, n, seed, condition, out):
    """Sample paths from a trained checkpoint."""
    cond = None
    if condition is not None:
        try:
            cond = [float(v) for v in condition.split(",") if v.strip()]
        except ValueError:
            raise click.UsageError(f"cannot parse condition {condition!r}")
    body = _post("/generate", {
        "checkpoint": checkpoint,
        "n": n,
        "seed": seed if seed is not None else cfg.model.seed,
        "condition": cond,
        "out": out if out is not None else _default_out(cfg, "generated.csv"),
    })
    _echo(body)


@main.command()
@click.option("--checkpoint", required=True)
@click.option("--data", required=True, help="Series CSV holding the history.")
@click.option("--column", default=None)
@click.option("--blocks", type=int, default=1)
@click.option("--seed", type=int, default=None)
@click.option("--out", default=None)
@click.pass_obj
def extend(cfg: Config, checkpoint, data, column, blocks, seed, out):
    """Extend an observed series block by block with a conditional model."""
    body = _post("/extend", {
        "checkpoint": checkpoint,
        "source": data,
        "column": column if column is not None else (cfg.data.column or "close"),
        "n_blocks": blocks,
        "seed": seed if seed is not None else cfg.model.seed,
        "out": out if out is not None else _default_out(cfg, "extended.csv"),
    })
    _echo(body)


@main.command()
@click.option("--real", required=True, help="Wide paths CSV.")
@click.option("--fake", required=True, help="Wide paths CSV.")
@click.option("--metrics", default=None, help="Subset of swd,mmd,sigmmd,saw.")
@click.option("--n-proj", type=int, default=None)
@click.option("--sig-level", type=int, default=None)
@click.option("--saw-len", type=int, default=None)
@click.option("--saw-slices", type=int, default=None)
@click.option("--saw-samples", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", default=None, help="Report path prefix.")
@click.pass_obj
def evaluate(cfg: Config, real, fake, metrics, n_proj, sig_level, saw_len,
             saw_slices, saw_samples, seed, out):
    """Compare two path sets under the selected distances."""
    chosen = cfg.eval.metrics
    if metrics is not None:
        chosen = tuple(s.strip() for s in metrics.split(",") if s.strip())
    body = _post("/evaluate", {
        "real": real,
        "fake": fake,
        "metrics": list(chosen),
        "n_proj": n_proj if n_proj is not None else cfg.eval.n_proj,
        "sig_level": sig_level if sig_level is not None else cfg.eval.sig_level,
        "saw_len": saw_len if saw_len is not None else cfg.eval.saw_len,
        "saw_slices": saw_slices if saw_slices is not None else cfg.eval.saw_slices,
        "saw_samples": saw_samples if saw_samples is not None else cfg.eval.saw_samples,
        "seed": seed if seed is not None else cfg.eval.seed,
        "out": out if out is not None else _default_out(cfg, "evaluation"),
    })
    _echo(body)


@main.command()
@click.option("--data", required=True, help="Series CSV.")
@click.option("--column", default=None)
@click.option("--max-lag", type=int, default=None)
@click.option("--out", default=None, help="Report path prefix.")
@click.pass_obj
def stylized(cfg: Config, data, column, max_lag, out):
    """Report stylized facts of the return series of one price path."""
    body = _post("/stylized", {
        "source": data,
        "column": column if column is not None else (cfg.data.column or "close"),
        "max_lag": max_lag if max_lag is not None else cfg.eval.max_lag,
        "out": out if out is not None else _default_out(cfg, "stylized"),
    })
    _echo(body)


@main.command()
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve(host, port):
    """Run the service over HTTP."""
    import uvicorn

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
