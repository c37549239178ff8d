"""Command-line interface: a thin client of the HTTP service.

Every command builds a request model, sends it over HTTP and renders the
response.  With ``--server URL`` (or HYGRAPH_SERVER) requests go to a
running instance; otherwise the service app is mounted in-process via an
ASGI transport, so the CLI works standalone with identical semantics.

Exit codes: 0 success, 2 usage/config errors, 3 training divergence,
4 geometry tolerance breach.
"""

from __future__ import annotations

import asyncio
import json
import sys

import click
import httpx

EXIT_USAGE = 2
EXIT_DIVERGED = 3
EXIT_GEOMETRY = 4


def _call(server: str | None, path: str, payload: dict) -> dict:
    """POST to a remote server or to the in-process app; return the JSON body."""
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            response = client.post(path, json=payload)
    else:
        from .service import create_app

        async def in_process():
            transport = httpx.ASGITransport(app=create_app())
            async with httpx.AsyncClient(transport=transport,
                                         base_url="http://hygraph",
                                         timeout=None) as client:
                return await client.post(path, json=payload)

        response = asyncio.run(in_process())

    if response.status_code >= 400:
        try:
            detail = response.json().get("detail")
        except Exception:
            detail = response.text
        click.echo(f"error: {detail}", err=True)
        sys.exit(EXIT_USAGE)
    return response.json()


def _echo_json(obj: dict, label: str | None = None) -> None:
    if label:
        click.echo(f"--- {label} ---")
    click.echo(json.dumps(obj, indent=2, sort_keys=True))


def _dataset_payload(dataset, fmt, symmetrize, depth, branching, classes, noise,
                     feature_dim, data_seed) -> dict:
    return {
        "dataset": dataset,
        "format": fmt,
        "symmetrize": symmetrize,
        "hierarchy": {
            "depth": depth, "branching": branching, "classes": classes,
            "noise": noise, "feature_dim": feature_dim, "data_seed": data_seed,
        },
    }


def dataset_options(fn):
    fn = click.option("--data-seed", default=0, show_default=True,
                      help="Seed of the synthetic hierarchy dataset.")(fn)
    fn = click.option("--feature-dim", default=16, show_default=True,
                      help="Feature dimension of the synthetic hierarchy.")(fn)
    fn = click.option("--noise", default=3.0, show_default=True,
                      help="Feature noise of the synthetic hierarchy.")(fn)
    fn = click.option("--classes", default=3, show_default=True,
                      help="Class count of the synthetic hierarchy.")(fn)
    fn = click.option("--branching", default=3, show_default=True,
                      help="Branching factor of the synthetic hierarchy.")(fn)
    fn = click.option("--depth", default=4, show_default=True,
                      help="Depth of the synthetic hierarchy.")(fn)
    fn = click.option("--symmetrize", is_flag=True,
                      help="Add reverse edges before building relations.")(fn)
    fn = click.option("--format", "fmt", default="auto", show_default=True,
                      type=click.Choice(["auto", "planetoid", "json", "hierarchy"]))(fn)
    fn = click.option("--dataset", required=True,
                      help="Dataset path or name ('hierarchy' for the synthetic tree; "
                           "names resolve under $HYGRAPH_DATA_DIR or ./data).")(fn)
    return fn


@click.group()
@click.option("--server", envvar="HYGRAPH_SERVER", default=None,
              help="Base URL of a running hygraph service; default runs in-process.")
@click.pass_context
def main(ctx, server):
    """Hyperbolic multi-order graph convolution: train, evaluate, self-check."""
    ctx.obj = {"server": server}


@main.command()
@dataset_options
@click.option("--task", required=True, type=click.Choice(["supervised", "unsupervised"]))
@click.option("--space", default="poincare", show_default=True,
              type=click.Choice(["poincare", "lorentz", "euclidean"]))
@click.option("--k", "--orders", "orders", default=None, type=int,
              help="Aggregation orders K (default: 4 unsupervised, 2 supervised).")
@click.option("--layers", default=None, type=int,
              help="Encoder layers L (default: 1 unsupervised, 2 supervised).")
@click.option("--dim", "--hidden-dim", "hidden_dim", default=512, show_default=True)
@click.option("--lr", default=0.1, show_default=True)
@click.option("--epochs", default=200, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--dropout", default=None, type=float,
              help="Tangent-feature dropout (default: 0.1 unsupervised, 0 supervised).")
@click.option("--patience", default=20, show_default=True)
@click.option("--curvature", default=-1.0, show_default=True)
@click.option("--idleness", default=0.5, show_default=True,
              help="Random-walk idleness of the edge-curvature measure.")
@click.option("--eval", "eval_mode", default="probe", show_default=True,
              type=click.Choice(["probe", "clustering"]))
@click.option("--out", "out_dir", default="runs/train", show_default=True)
@click.pass_context
def train(ctx, dataset, fmt, symmetrize, depth, branching, classes, noise, feature_dim,
          data_seed, task, space, orders, layers, hidden_dim, lr, epochs, seed, dropout,
          patience, curvature, idleness, eval_mode, out_dir):
    """Train a model; writes config.json, history.jsonl, params.npz, metrics.json."""
    payload = {
        "data": _dataset_payload(dataset, fmt, symmetrize, depth, branching, classes,
                                 noise, feature_dim, data_seed),
        "task": task, "space": space, "orders": orders, "layers": layers,
        "hidden_dim": hidden_dim, "lr": lr, "epochs": epochs, "seed": seed,
        "dropout": dropout, "patience": patience, "curvature": curvature,
        "idleness": idleness, "eval_mode": eval_mode, "out_dir": out_dir,
    }
    body = _call(ctx.obj["server"], "/train", payload)
    _echo_json(body["config"], "effective config")
    if body["status"] == "diverged":
        click.echo(f"training diverged after {body['epochs_run']} epochs "
                   f"(history: {body['history_path']})", err=True)
        sys.exit(EXIT_DIVERGED)
    _echo_json(body["metrics"] or {}, "metrics")
    click.echo(f"run dir: {body['run_dir']}")


@main.command("eval")
@dataset_options
@click.option("--checkpoint", required=True, help="Path to a params.npz checkpoint.")
@click.option("--eval", "eval_mode", default="probe", show_default=True,
              type=click.Choice(["probe", "clustering"]))
@click.option("--seed", default=0, show_default=True)
@click.option("--out", "out_dir", default=None)
@click.pass_context
def eval_cmd(ctx, dataset, fmt, symmetrize, depth, branching, classes, noise,
             feature_dim, data_seed, checkpoint, eval_mode, seed, out_dir):
    """Evaluate a checkpoint on a dataset."""
    payload = {
        "checkpoint": checkpoint,
        "data": _dataset_payload(dataset, fmt, symmetrize, depth, branching, classes,
                                 noise, feature_dim, data_seed),
        "eval_mode": eval_mode, "seed": seed, "out_dir": out_dir,
    }
    body = _call(ctx.obj["server"], "/eval", payload)
    _echo_json(body["metrics"], "metrics")


@main.command()
@dataset_options
@click.option("--task", required=True, type=click.Choice(["supervised", "unsupervised"]))
@click.option("--k-grid", default="1,2,3,4,5,6", show_default=True,
              help="Comma-separated aggregation orders.")
@click.option("--dim-grid", default="64,512", show_default=True,
              help="Comma-separated hidden dimensions.")
@click.option("--space-grid", default="poincare", show_default=True,
              help="Comma-separated spaces (poincare,lorentz,euclidean).")
@click.option("--seeds", default="0", show_default=True, help="Comma-separated seeds.")
@click.option("--layers", default=None, type=int)
@click.option("--lr", default=0.1, show_default=True)
@click.option("--epochs", default=200, show_default=True)
@click.option("--dropout", default=None, type=float)
@click.option("--patience", default=20, show_default=True)
@click.option("--curvature", default=-1.0, show_default=True)
@click.option("--idleness", default=0.5, show_default=True)
@click.option("--eval", "eval_mode", default="probe", show_default=True,
              type=click.Choice(["probe", "clustering"]))
@click.option("--jobs", default=1, show_default=True, help="Parallel grid cells.")
@click.option("--out", "out_dir", default="runs/ablate", show_default=True)
@click.pass_context
def ablate(ctx, dataset, fmt, symmetrize, depth, branching, classes, noise, feature_dim,
           data_seed, task, k_grid, dim_grid, space_grid, seeds, layers, lr, epochs,
           dropout, patience, curvature, idleness, eval_mode, jobs, out_dir):
    """Run a K x dim x space x seed grid; writes ablation.csv."""

    def ints(text):
        return [int(v) for v in text.split(",") if v.strip()]

    payload = {
        "data": _dataset_payload(dataset, fmt, symmetrize, depth, branching, classes,
                                 noise, feature_dim, data_seed),
        "task": task, "orders_grid": ints(k_grid), "dim_grid": ints(dim_grid),
        "space_grid": [s.strip() for s in space_grid.split(",") if s.strip()],
        "seeds": ints(seeds), "layers": layers, "lr": lr, "epochs": epochs,
        "dropout": dropout, "patience": patience, "curvature": curvature,
        "idleness": idleness, "eval_mode": eval_mode, "jobs": jobs, "out_dir": out_dir,
    }
    body = _call(ctx.obj["server"], "/ablate", payload)
    click.echo(f"{body['cells']} cells -> {body['rows']} rows "
               f"({body['failures']} failed): {body['csv_path']}")


@main.command("geometry-check")
@click.option("--model", default="both", show_default=True,
              type=click.Choice(["poincare", "lorentz", "both"]))
@click.option("--curvature", default=-1.0, show_default=True)
@click.option("--trials", default=10000, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--dim", default=8, show_default=True)
@click.pass_context
def geometry_check(ctx, model, curvature, trials, seed, dim):
    """Run the manifold property suite on random inputs; exit 4 on breach."""
    payload = {"model": model, "curvature": curvature, "trials": trials,
               "seed": seed, "dim": dim}
    body = _call(ctx.obj["server"], "/geometry-check", payload)
    for name in sorted(body["max_errors"]):
        err = body["max_errors"][name]
        tol = body["tolerances"][name]
        mark = "ok " if name not in body["failing"] else "FAIL"
        click.echo(f"{mark} {name:32s} max_err={err:.3e} tol={tol:.0e}")
    if not body["ok"]:
        click.echo(f"geometry check failed: {', '.join(body['failing'])}", err=True)
        sys.exit(EXIT_GEOMETRY)
    click.echo("geometry check passed")


@main.command("curvature-dump")
@dataset_options
@click.option("--alpha", default=0.5, show_default=True, help="Random-walk idleness.")
@click.option("--out", "out_path", default="curvature.csv", show_default=True)
@click.pass_context
def curvature_dump(ctx, dataset, fmt, symmetrize, depth, branching, classes, noise,
                   feature_dim, data_seed, alpha, out_path):
    """Write per-edge Ollivier-Ricci curvature as CSV (i,j,kappa)."""
    payload = {
        "data": _dataset_payload(dataset, fmt, symmetrize, depth, branching, classes,
                                 noise, feature_dim, data_seed),
        "alpha": alpha, "out_path": out_path,
    }
    body = _call(ctx.obj["server"], "/curvature-dump", payload)
    click.echo(f"{body['edges']} edges -> {body['csv_path']}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8471, show_default=True)
def serve(host, port):
    """Start the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
