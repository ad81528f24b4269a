"""Command-line entry points: run simulated campaigns, validate configs,
serve the human-in-the-loop session API.

Exit codes: 0 success, 1 config error, 2 trial failures.
"""

from __future__ import annotations

import argparse
import os
import sys

from .harness import (
    ConfigError,
    apply_profile,
    emit_results,
    load_config,
    run_trials,
)


def _build_parser():
    parser = argparse.ArgumentParser(prog="symdisc")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run seeded simulated campaigns and write CSVs")
    run.add_argument("--config", required=True)
    run.add_argument("--profile", choices=["desk", "full"], default=None)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out", default=None)
    run.add_argument("--criterion", choices=["re", "js", "logdet"], default=None)
    run.add_argument("--backend", choices=["quad", "conv"], default=None)
    run.add_argument("--trials", type=int, default=None)
    run.add_argument("--rounds", type=int, default=None)
    run.add_argument("--jobs", type=int, default=1, help="parallel trial processes")

    val = sub.add_parser("validate", help="validate a config file")
    val.add_argument("--config", required=True)

    serve = sub.add_parser("serve", help="serve the session HTTP API")
    serve.add_argument("--addr", default=None, help="bind address (env SYMDISC_ADDR)")
    serve.add_argument("--port", type=int, default=None, help="bind port (env SYMDISC_PORT)")
    serve.add_argument("--store", default=None, help="session persistence dir (env SYMDISC_STORE)")
    return parser


def _cmd_run(args):
    from dataclasses import replace

    from .criteria import Criterion

    cfg = load_config(args.config, require_truth=True)
    if args.profile:
        cfg = apply_profile(cfg, args.profile)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.criterion is not None:
        overrides["criterion"] = Criterion(kind=args.criterion)
    if args.backend is not None:
        overrides["backend"] = args.backend
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.rounds is not None:
        overrides["rounds"] = args.rounds
    if overrides:
        cfg = replace(cfg, **overrides)
    out_dir = args.out or cfg.out_dir or "results"

    traces = run_trials(cfg, n_jobs=args.jobs)
    paths = emit_results(traces, out_dir, cfg)
    failures = [tr for tr in traces if tr.failed]
    print(f"wrote {len(paths['trials'])} trial CSVs and {paths['aggregate']}")
    for tr in failures:
        print(f"trial {tr.trial + 1} FAILED: {tr.error}", file=sys.stderr)
    return 2 if failures else 0


def _cmd_validate(args):
    cfg = load_config(args.config)
    print(
        f"ok: {len(cfg.models)} models, {cfg.rounds} rounds x {cfg.trials} trials, "
        f"criterion={cfg.criterion.kind}, backend={cfg.backend}"
    )
    return 0


def _cmd_serve(args):
    import uvicorn

    from .service import create_app

    addr = args.addr or os.environ.get("SYMDISC_ADDR", "127.0.0.1")
    port = args.port if args.port is not None else int(os.environ.get("SYMDISC_PORT", "8321"))
    store = args.store or os.environ.get("SYMDISC_STORE", "sessions")
    uvicorn.run(create_app(store), host=addr, port=port)
    return 0


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            code = _cmd_run(args)
        elif args.command == "validate":
            code = _cmd_validate(args)
        else:
            code = _cmd_serve(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        code = 1
    sys.exit(code)


if __name__ == "__main__":
    main()
