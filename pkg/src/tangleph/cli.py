"""Command-line entry point.

Subcommands mirror the pipeline stages: ingest, ph, compare, test, generator,
noise. Every subcommand takes --config plus flags that override config keys.
Exit codes: 0 success, 1 structure/pipeline failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigError, ConnectivityError, PipelineError
from .pipeline import (
    METRICS,
    cmd_compare,
    cmd_generator,
    cmd_ingest,
    cmd_noise,
    cmd_ph,
    cmd_test,
    load_config,
    parse_sigma_list,
)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", required=True, help="path to key=value config file")
    sub.add_argument("--seed", type=int, default=None, help="override config seed")
    sub.add_argument("--out", default=None, help="override config output_dir")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tangleph",
        description="Degree-1 persistent homology pipeline for open curves",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse .xyz backbones and write clouds")
    _add_common(p)
    p.add_argument("--input-dir", default=None, help="override config input_dir")
    p.add_argument("--annotation", default=None, help="override config annotation_path")
    p.add_argument(
        "--interp-factor", type=int, default=None, help="points inserted per segment"
    )

    p = sub.add_parser("ph", help="compute diagrams and landscapes")
    _add_common(p)
    p.add_argument("--max-scale", default=None, help="AUTO or a positive number")
    p.add_argument("--workers", type=int, default=None, help="parallel lanes (0=auto)")

    p = sub.add_parser("compare", help="distance matrix, Isomap, silhouettes")
    _add_common(p)
    p.add_argument("--metric", choices=METRICS, required=True)
    p.add_argument("--n-neighbors", type=int, default=None)

    p = sub.add_parser("test", help="randomization test between two classes")
    _add_common(p)
    p.add_argument("--class-a", required=True)
    p.add_argument("--class-b", required=True)
    p.add_argument("--k", type=int, default=None, help="randomization draws")
    p.add_argument(
        "--layers",
        default=None,
        help="comma-separated layer indices for the restricted heat map",
    )

    p = sub.add_parser("generator", help="cycle representative for a landscape peak")
    _add_common(p)
    p.add_argument("--id", required=True, dest="struct_id")
    p.add_argument("--k", type=int, default=1, help="landscape layer")
    p.add_argument("--t-star", type=float, default=None, help="peak search anchor")

    p = sub.add_parser("noise", help="perturbation sweep over sigma grid")
    _add_common(p)
    p.add_argument("--sigmas", default=None, help="comma-separated sigma values")
    p.add_argument("--metric", choices=METRICS, default="landscape")

    return parser


def _overrides(args: argparse.Namespace) -> dict:
    mapping = {
        "seed": "seed",
        "out": "output_dir",
        "input_dir": "input_dir",
        "annotation": "annotation_path",
        "interp_factor": "interp_factor",
        "max_scale": "max_scale",
        "workers": "workers",
        "n_neighbors": "n_neighbors",
        "k": "k",
    }
    over = {}
    for attr, key in mapping.items():
        value = getattr(args, attr, None)
        if value is not None:
            over[key] = value
    return over


def _parse_layers(text: str) -> list[int]:
    try:
        layers = [int(f) for f in text.split(",") if f.strip()]
    except ValueError:
        raise ConfigError(f"bad layer list {text!r}") from None
    if not layers or any(s < 1 for s in layers):
        raise ConfigError(f"layers must be integers >= 1, got {text!r}")
    return layers


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    over = _overrides(args)
    if args.command == "generator":
        over.pop("k", None)  # generator's --k is the landscape layer, not config k
    try:
        cfg = load_config(args.config, over)
        warnings: list[str] = []
        if args.command == "ingest":
            manifest = cmd_ingest(cfg)
            print(f"ingested {len(manifest.structures)} structures -> {cfg.output_dir}")
        elif args.command == "ph":
            manifest = cmd_ph(cfg)
            print(f"computed {len(manifest.structures)} diagrams")
        elif args.command == "compare":
            _, warnings = cmd_compare(cfg, args.metric)
            print(f"compare ({args.metric}) written to {cfg.output_dir}/compare")
        elif args.command == "test":
            layers = _parse_layers(args.layers) if args.layers else None
            _, warnings = cmd_test(cfg, args.class_a, args.class_b, layers)
            print(f"randomization test written to {cfg.output_dir}/test")
        elif args.command == "generator":
            _, result = cmd_generator(cfg, args.struct_id, args.k, args.t_star)
            overlap = result["overlap"]
            print(
                f"cycle for {args.struct_id}: {result['n_edges']} edges, "
                f"core overlap {'NA' if overlap is None else '%.3f' % overlap}"
            )
        elif args.command == "noise":
            sigmas = parse_sigma_list(args.sigmas) if args.sigmas else None
            _, warnings = cmd_noise(cfg, sigmas, args.metric)
            print(f"noise sweep written to {cfg.output_dir}/noise")
        for w in warnings:
            print(f"warning: {w}", file=sys.stderr)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ConnectivityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(
            "hint: the neighborhood graph is disconnected; raise n_neighbors "
            "(config key n_neighbors or --n-neighbors)",
            file=sys.stderr,
        )
        return 1
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
