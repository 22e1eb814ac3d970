"""Command line: ``assaygen <command> --config run.json [--seed N] [--mock-llm] [--targets F] [--parallel N]``.

Exit status is 0 on success, 1 for configuration or ordering problems, and
2 when a provider or external tool fails.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Sequence

from .config import ConfigError, QueryConfig, load_config, load_targets
from .context import NoUsableBlocks
from .evaluation import EvalError
from .llm import GatewayError, set_global_parallelism
from .pipeline import (
    Context,
    MissingArtifact,
    cmd_evaluate,
    cmd_index,
    cmd_ingest,
    generate_target,
    optimize_target,
    retrieve_target,
)
from .store import StoreError

COMMANDS = ("ingest", "index", "retrieve", "generate", "optimize", "evaluate", "run")
EXIT_OK, EXIT_CONFIG, EXIT_PROVIDER = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="assaygen", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "ingest": "validate raw assay dumps into the store",
        "index": "embed every stored assay and write the vector index",
        "retrieve": "retrieve, filter and relevance-vote assays per target",
        "generate": "summarize assays, build the prompt and generate molecules",
        "optimize": "rewrite generated molecules against the counter-target",
        "evaluate": "score molecules and aggregate metrics across targets",
        "run": "ingest, index, retrieve, generate and evaluate in one go",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--mock-llm", action="store_true", help="use the offline mock for every provider")
        p.add_argument("--targets", help="JSON-lines file with one query per line (batch mode)")
        p.add_argument("--parallel", type=int, default=1, help="targets processed concurrently")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _targets(ctx: Context, path: str | None) -> list[QueryConfig]:
    if path:
        return load_targets(path)
    if ctx.config.query is None:
        raise ConfigError("query", "no query in config and no --targets file")
    return [ctx.config.query]


def _run(args: argparse.Namespace) -> str:
    config = load_config(args.config)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    if args.mock_llm:
        config = config.with_mock_providers()
    if args.parallel < 1:
        raise ConfigError("--parallel", "must be >= 1")
    ctx = Context(config, parallel=args.parallel)
    ctx.write_run_manifest(args.command)
    cmd = args.command
    if cmd == "ingest":
        m = cmd_ingest(ctx)
        return f"ingested {m['count']} assays ({m['rows']} rows, {len(m['skipped'])} skipped) into {config.store_dir}"
    if cmd == "index":
        path = cmd_index(ctx)
        return f"indexed {len(ctx.index())} assays (dim {ctx.index().dim}) into {path}"
    targets = _targets(ctx, args.targets)
    if cmd == "retrieve":
        results = ctx.map_targets(lambda q: retrieve_target(ctx, q), targets)
        kept = sum(len(r.records) for r in results)
        return f"retrieved {kept} assays for {len(results)} target(s) under {ctx.run_dir}"
    if cmd == "generate":
        manifests = ctx.map_targets(lambda q: generate_target(ctx, q), targets)
        _raise_partial(manifests)
        n = sum(m["n_unique_valid"] for m in manifests)
        return f"generated {n} unique valid molecules for {len(manifests)} target(s) under {ctx.run_dir}"
    if cmd == "optimize":
        outs = ctx.map_targets(lambda q: optimize_target(ctx, q), targets)
        pairs = sum(len(o["pairs"]) for o in outs)
        return f"optimized {pairs} molecules ({sum(o['n_fallback'] for o in outs)} fallbacks) under {ctx.run_dir}"
    if cmd == "evaluate":
        agg = cmd_evaluate(ctx, targets)
        return f"evaluated {len(targets)} target(s); vina_avg mean {agg['vina_avg']['avg']} -> {ctx.run_dir / 'aggregate.json'}"
    # run: every stage in order
    if config.raw_dir:
        cmd_ingest(ctx)
    cmd_index(ctx)
    ctx.map_targets(lambda q: retrieve_target(ctx, q), targets)
    manifests = ctx.map_targets(lambda q: generate_target(ctx, q), targets)
    _raise_partial(manifests)
    if config.counter_query is not None:
        ctx.map_targets(lambda q: optimize_target(ctx, q), targets)
    agg = cmd_evaluate(ctx, targets)
    return f"pipeline done for {len(targets)} target(s); vina_avg mean {agg['vina_avg']['avg']} -> {ctx.run_dir}"


class PartialRun(GatewayError):
    pass


def _raise_partial(manifests: Sequence[dict]) -> None:
    errors = [f"{m['target_id']}: {m['error']}" for m in manifests if m.get("error")]
    if errors:
        raise PartialRun("; ".join(errors))


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    set_global_parallelism(max(4, args.parallel))
    try:
        print(_run(args))
        return EXIT_OK
    except MissingArtifact as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConfigError, StoreError, NoUsableBlocks, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GatewayError, EvalError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PROVIDER


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
