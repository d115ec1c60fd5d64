"""Thin command-line client: simulate / replay / bench / serve.

Runs execute in-process by default; pass --server to hand the same config to
a running service instead.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
import urllib.error
import urllib.request
from pathlib import Path

from . import runner
from .feeds import FeedFormatError


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("-c", "--config", required=True, help="YAML or JSON run config")
    parser.add_argument("-o", "--out", default=None, help="output directory (default: ./runs/<config stem>)")
    parser.add_argument("--seed", type=int, default=None, help="override the master seed")
    parser.add_argument("--alpha", type=float, default=None, help="override the target miscoverage rate")
    parser.add_argument("--beta-hat", type=int, default=None, help="override the adversary budget")
    parser.add_argument("--warmup", type=int, default=None, help="override the warm-up step count")
    parser.add_argument("--server", default=None, help="base URL of a running service to run against")
    parser.add_argument("--quiet", action="store_true", help="only print the summary path")


def post_run(server: str, config: dict, out_dir: str | None) -> dict:
    """Submit a run to a service and return its response body."""
    body = json.dumps({"config": config, "out_dir": out_dir}).encode()
    request = urllib.request.Request(
        server.rstrip("/") + "/runs",
        data=body,
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    try:
        with urllib.request.urlopen(request) as response:
            return json.loads(response.read())
    except urllib.error.HTTPError as exc:
        detail = exc.read().decode(errors="replace")
        raise RuntimeError(f"server rejected the run ({exc.code}): {detail}") from None


def _apply_overrides(raw: dict, args: argparse.Namespace, mode: str) -> dict:
    raw = dict(raw)
    raw["mode"] = mode
    for key in ("seed", "alpha", "warmup"):
        value = getattr(args, key)
        if value is not None:
            raw[key] = value
    if args.beta_hat is not None:
        raw["beta_hat"] = args.beta_hat
    if mode == "replay" and getattr(args, "csv", None):
        raw["csv"] = args.csv
    return raw


def _print_summary(summary: dict, where: str, quiet: bool, summary_path: str) -> None:
    if quiet:
        print(summary_path)
        return
    post = summary["miscoverage_post_warmup"]
    print(f"steps:                  {summary['steps']}")
    print(f"miscoverage:            {summary['miscoverage']:.6f}")
    print(f"miscoverage (post-warm):{'n/a' if post is None else f'{post:.6f}'}")
    print(f"idk fraction:           {summary['idk_fraction']:.6f}")
    if summary["size"]:
        print(f"median set size:        {summary['size']['quantiles']['0.5']:.6g}")
    print(f"artifacts:              {where}")


def _run(args: argparse.Namespace, mode: str) -> int:
    try:
        raw = runner.load_config(args.config)
        merged = _apply_overrides(raw, args, mode)
        if args.server:
            runner.build_config(merged)  # validate locally before shipping it off
            response = post_run(args.server, merged, args.out)
            _print_summary(
                response["summary"], response["out_dir"], args.quiet,
                response["paths"]["summary"],
            )
            return 0
        cfg = runner.build_config(merged)
        out_dir = args.out or str(Path("runs") / Path(args.config).stem)
        result = runner.run(cfg, out_dir)
    except (runner.ConfigError, FeedFormatError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FileNotFoundError, urllib.error.URLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    _print_summary(result.summary, str(result.out_dir), args.quiet, result.paths["summary"])
    return 0


def _bench(args: argparse.Namespace) -> int:
    from .amm import SimConfig, simulate
    from .mvp import initial_mvp_state, mvp_update
    from .kalman import initial_state, score

    import numpy as np

    t0 = time.time()
    state = initial_mvp_state(alpha_k=0.1, seed=args.seed)
    ys = np.random.default_rng(args.seed).standard_normal(args.steps)
    well_specified = initial_state(mu=0.0, sigma2=1.0 - 2e-12, w_bar=-14.0, w_bar_floor=-14.0)
    misses = 0
    for y in ys:
        covered = score(well_specified, float(y)) >= state.tau
        misses += 0 if covered else 1
        state = mvp_update(state, covered)
    t_mvp = time.time() - t0
    print(f"threshold calibration: {args.steps} steps in {t_mvp:.2f}s "
          f"({args.steps / t_mvp:,.0f}/s), miscoverage {misses / args.steps:.4f}")

    t0 = time.time()
    ticks = simulate(SimConfig(n_pools=3, steps=args.steps, seed=args.seed))
    t_sim = time.time() - t0
    print(f"market simulation:     {len(ticks)} steps x 3 pools in {t_sim:.2f}s "
          f"({len(ticks) / t_sim:,.0f}/s)")
    return 0


def _serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(data_dir=args.data_dir), host=args.host, port=args.port)
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="conoracle",
        description="Byzantine-robust streaming price consensus toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run the AMM market simulation pipeline")
    _add_common(p_sim)

    p_rep = sub.add_parser("replay", help="replay a tick CSV through the pipeline")
    _add_common(p_rep)
    p_rep.add_argument("--csv", default=None, help="override the input tick file")

    p_bench = sub.add_parser("bench", help="quick throughput and calibration check")
    p_bench.add_argument("--steps", type=int, default=20_000)
    p_bench.add_argument("--seed", type=int, default=0)

    p_serve = sub.add_parser("serve", help="start the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument("--data-dir", default=None, help="directory for run artifacts")

    args = parser.parse_args(argv)
    if args.command == "simulate":
        return _run(args, "simulate")
    if args.command == "replay":
        return _run(args, "replay")
    if args.command == "bench":
        return _bench(args)
    return _serve(args)


if __name__ == "__main__":
    sys.exit(main())
