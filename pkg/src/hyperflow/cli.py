"""Command-line entry point: ``hyperflow <subcommand> [--config FILE] [--set KEY=VALUE ...]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np
from threadpoolctl import threadpool_limits

from .config import ConfigError, load_config, parse_value
from .graph import GraphError
from .io import DataError
from .pipeline import Pipeline, StageError

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("hyperflow")


def _overrides(args) -> dict:
    out = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        out[key.strip()] = parse_value(raw)
    if args.seed is not None:
        out["seed"] = args.seed
    if args.output is not None:
        out["output"] = args.output
    return out


def _print(obj):
    print(json.dumps(obj, indent=2, sort_keys=True, default=str))


def cmd_envs(p: Pipeline, args):
    g = p.envs()
    p.write_manifest()
    print(f"{g.edge_count} environments over {g.node_count} nodes -> {p.path('hyperedges.txt')}")


def cmd_linegraph(p: Pipeline, args):
    lg = p.line_graph()
    p.write_manifest()
    print(f"line graph: {lg.node_count} nodes, {len(lg.edges)} edges -> {p.path('line_graph.tsv')}")


def cmd_train(p: Pipeline, args):
    hist = p.train()["history"]
    p.write_manifest()
    print(f"trained {len(hist)} epochs, final loss {hist[-1]['loss']:.6g}"
          if hist else "no epochs run")


def cmd_embed(p: Pipeline, args):
    p.embed()
    p.write_manifest()
    print(f"embeddings -> {p.path('embeddings.csv')}")


def cmd_metrics(p: Pipeline, args):
    report = p.metrics()
    p.write_manifest()
    _print({k: report[k] for k in ("conformity", "equivalence")})
    sys.stdout.write(p.path("group_entropy.tsv").read_text(encoding="utf-8"))


def cmd_eval(p: Pipeline, args):
    if p.cfg["train.task"] is None:
        raise ConfigError("eval needs train.task")
    res = p.evaluate()
    p.write_manifest()
    _print(res)


def cmd_run(p: Pipeline, args):
    manifest = p.run()
    print(f"run complete: {len(manifest['artifacts'])} artifacts in {p.out}")


def cmd_grad_check(p: Pipeline | None, args):
    from .gradcheck import random_instance_check
    res = random_instance_check(points=args.points, seed=args.seed or 0)
    _print(res)
    if res["max_rel_error"] >= args.tol:
        raise FloatingPointError(f"gradient check failed: {res['max_rel_error']:.3g} >= {args.tol}")


COMMANDS = {
    "envs": (cmd_envs, "build social environments (hyperedges)"),
    "linegraph": (cmd_linegraph, "estimate the line graph by random walks"),
    "train": (cmd_train, "train the influence model"),
    "embed": (cmd_embed, "export user embeddings"),
    "metrics": (cmd_metrics, "sociological criteria report and figures"),
    "eval": (cmd_eval, "downstream evaluation reading the embedding file"),
    "run": (cmd_run, "full pipeline"),
    "grad-check": (cmd_grad_check, "finite-difference gradient verification"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hyperflow", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", help="flat JSON config file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--output", help="output directory")
        if name == "grad-check":
            sp.add_argument("--points", type=int, default=20)
            sp.add_argument("--tol", type=float, default=1e-4)
        elif name != "run":
            sp.add_argument("--fresh", action="store_true",
                            help="recompute stages instead of reusing artifacts on disk")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler, _ = COMMANDS[args.command]
    try:
        if args.command == "grad-check":
            with threadpool_limits(limits=1):
                handler(None, args)
            return EXIT_OK
        cfg = load_config(args.config, _overrides(args))
        reuse = args.command != "run" and not getattr(args, "fresh", False)
        with threadpool_limits(limits=1):
            handler(Pipeline(cfg, reuse=reuse), args)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _code_for(exc.cause) or 1
    except Exception as exc:  # noqa: BLE001
        code = _code_for(exc)
        if code is None:
            raise
        print(f"error: {exc}", file=sys.stderr)
        return code


def _code_for(exc: BaseException) -> int | None:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (DataError, GraphError, FileNotFoundError, KeyError)):
        return EXIT_DATA
    if isinstance(exc, (FloatingPointError, np.linalg.LinAlgError)):
        return EXIT_NUMERIC
    if isinstance(exc, ValueError):
        return EXIT_DATA
    return None


if __name__ == "__main__":
    sys.exit(main())
