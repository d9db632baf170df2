"""Command-line entrypoint: ``python -m app.cli <command> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Callable, Sequence
from typing import TypeVar

from app.core.config import Settings, get_settings
from app.core.logging_utils import configure_logging, log_event
from app.planner import formats
from app.planner.bench import BASELINE, compare, metrics_frame, write_report
from app.planner.clustering import representation_vectors_all
from app.planner.combinations import Strategy
from app.planner.datagen import (
    DEFAULT_PALETTE,
    RestrictionPalette,
    assign_restrictions,
    assign_traffic_cells,
    gen_network,
    gen_queries,
    gen_traffic,
    load_palette,
)
from app.planner.errors import InvalidParam, MismatchedIndex, PlannerError
from app.planner.model import Query, Vehicle
from app.planner.partitioner import from_assignment, partition
from app.planner.pipeline import (
    QUERY_SEED_OFFSET,
    RESTRICTION_SEED_OFFSET,
    DatasetParams,
    build_params_from_settings,
    build_strategy_index,
    generate_dataset,
)
from app.planner.query import plan, plan_exact
from app.planner.shortcuts import build_index, load_index, save_index, storage_stats

logger = logging.getLogger("app.cli")

EXIT_INVALID = 2

# Index strategy label for combinations read from a file.
FILE_STRATEGY = "file"


T = TypeVar("T")


def _csv(kind: Callable[[str], T]) -> Callable[[str], list[T]]:
    def parse(text: str) -> list[T]:
        try:
            return [kind(part) for part in text.split(",") if part]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from exc

    return parse


def _cmd_gen_graph(args: argparse.Namespace) -> None:
    palette = DEFAULT_PALETTE
    if args.palette:
        palette = load_palette(formats.read_bytes(args.palette).decode("utf-8"))
    fractions = {
        f"{kind}_fraction": value
        for kind, value in (("he", args.he_fraction), ("wi", args.wi_fraction), ("wt", args.wt_fraction))
        if value is not None
    }
    if fractions:
        palette = RestrictionPalette.model_validate({**palette.model_dump(), **fractions})
    net = gen_network(args.n, args.avg_degree, args.seed)
    net = assign_restrictions(net, palette, args.seed + RESTRICTION_SEED_OFFSET)
    formats.write_text(args.out, formats.dump_graph(net))


def _cmd_gen_traffic(args: argparse.Namespace) -> None:
    traffic = gen_traffic(args.n, seed=args.seed)
    if args.cells is not None:
        traffic = assign_traffic_cells(traffic, args.cells, args.seed)
    formats.write_text(args.out, formats.dump_traffic(traffic))


def _cmd_partition(args: argparse.Namespace) -> None:
    net = formats.load_graph(formats.read_bytes(args.graph))
    decomp = partition(net, args.target, args.seed)
    formats.write_text(args.out, formats.dump_partition(decomp))


def _cmd_gen_queries(args: argparse.Namespace) -> None:
    net = formats.load_graph(formats.read_bytes(args.graph))
    decomp = formats.load_partition(net, formats.read_bytes(args.partition))
    traffic = formats.load_traffic(formats.read_bytes(args.traffic))
    queries = gen_queries(net, decomp, traffic, args.n, args.seed)
    formats.write_text(args.out, formats.dump_queries(queries))


def _cmd_build(args: argparse.Namespace, settings: Settings) -> None:
    net = formats.load_graph(formats.read_bytes(args.graph))
    decomp = formats.load_partition(net, formats.read_bytes(args.partition))
    traffic = formats.load_traffic(formats.read_bytes(args.traffic)) if args.traffic else None
    params = build_params_from_settings(
        settings,
        strategy=Strategy(args.strategy),
        k=args.k,
        f=args.f,
        max_iters=args.max_iters,
        random_budget=args.random_budget,
        seed=args.seed,
    )
    workers = args.workers or settings.workers
    if args.combinations:
        combos = formats.load_combinations(formats.read_bytes(args.combinations), decomp.n_cells)
        index = build_index(decomp, combos, strategy=FILE_STRATEGY, seed=params.seed, workers=workers)
    else:
        index = build_strategy_index(decomp, traffic, params, workers)
    save_index(index, args.out)
    if args.dump_combinations:
        combos = [cell.combinations for cell in index.cells]
        formats.write_text(args.dump_combinations, formats.dump_combinations(combos))
    if args.dump_vectors:
        if traffic is None:
            raise InvalidParam("--dump-vectors needs --traffic")
        rvs = representation_vectors_all(decomp, traffic, params.k, params.seed, params.max_iters)
        formats.write_text(args.dump_vectors, formats.dump_vectors(rvs))
    stats = storage_stats(index)
    print(
        f"entries={stats.total_entries} distinct_paths={stats.distinct_paths} "
        f"path_vertices={stats.total_path_vertices}"
    )


def _cmd_query(args: argparse.Namespace) -> None:
    net = formats.load_graph(formats.read_bytes(args.graph))
    index = load_index(args.index)
    if len(index.cell_of) != net.n_vertices:
        raise MismatchedIndex(
            f"index covers {len(index.cell_of)} vertices, graph has {net.n_vertices}"
        )
    decomp = from_assignment(net, index.cell_of)
    if decomp.fingerprint != index.meta.fingerprint:
        raise MismatchedIndex(
            f"index built for partition {index.meta.fingerprint}, got {decomp.fingerprint}"
        )
    if args.partition:
        given = formats.load_partition(net, formats.read_bytes(args.partition))
        if given.fingerprint != index.meta.fingerprint:
            raise MismatchedIndex(
                f"index built for partition {index.meta.fingerprint}, got {given.fingerprint}"
            )
    query = Query(args.s, args.d, Vehicle(args.he, args.wi, args.wt))
    result = plan_exact(net, query) if args.exact else plan(net, decomp, index, query)
    distance = "-" if result.distance is None else str(result.distance)
    print(f"distance={distance} status={result.status.value} scanned={result.scanned_entries}")
    if result.path is not None:
        print(" ".join(map(str, result.path.vertices)))


def _cmd_bench(args: argparse.Namespace, settings: Settings) -> None:
    params = build_params_from_settings(
        settings, k=args.k, f=args.f, random_budget=args.random_budget
    )
    for seed in args.seeds or [settings.seed]:
        dataset = generate_dataset(
            DatasetParams.from_settings(
                settings,
                n_vertices=args.n_vertices,
                target_cell_size=args.target,
                n_vehicles=args.vehicles,
                seed=seed,
            )
        )
        queries = gen_queries(
            dataset.net,
            dataset.decomp,
            dataset.traffic,
            args.queries if args.queries is not None else settings.n_queries,
            seed + QUERY_SEED_OFFSET,
        )
        report = compare(
            args.strategies,
            dataset.net,
            dataset.decomp,
            dataset.traffic,
            queries,
            params.model_copy(update={"seed": seed}),
            workers=args.workers or settings.workers,
            warmup=args.warmup if args.warmup is not None else settings.warmup_queries,
            match_trapp_budget=not args.fixed_random_budget,
        )
        csv_path, json_path = write_report(report, args.out_dir, tag=f"_seed{seed}")
        log_event(logger, "bench_seed_done", seed=seed, csv=csv_path, json=json_path)
        print(metrics_frame(report).drop(columns=["params"]).to_string(index=False))


def build_parser(settings: Settings) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trapp", description="Restriction-aware route planning.")
    parser.add_argument("--log-level", default=settings.log_level)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-graph", help="generate a restricted road network")
    p.add_argument("--n", type=int, default=settings.n_vertices)
    p.add_argument("--avg-degree", type=float, default=settings.avg_degree)
    p.add_argument("--seed", type=int, default=settings.seed)
    p.add_argument("--palette", help="JSON restriction palette")
    p.add_argument("--he-fraction", type=float)
    p.add_argument("--wi-fraction", type=float)
    p.add_argument("--wt-fraction", type=float)
    p.add_argument("--out", required=True)

    p = sub.add_parser("gen-traffic", help="generate a vehicle traffic flow")
    p.add_argument("--n", type=int, default=settings.n_vehicles)
    p.add_argument("--seed", type=int, default=settings.seed)
    p.add_argument("--cells", type=int, help="attach random cell ids in 0..cells-1")
    p.add_argument("--out", required=True)

    p = sub.add_parser("partition", help="split a network into cells")
    p.add_argument("--graph", required=True)
    p.add_argument("--target", type=int, default=settings.target_cell_size)
    p.add_argument("--seed", type=int, default=settings.seed)
    p.add_argument("--out", required=True)

    p = sub.add_parser("gen-queries", help="generate cross-cell queries")
    p.add_argument("--graph", required=True)
    p.add_argument("--partition", required=True)
    p.add_argument("--traffic", required=True)
    p.add_argument("--n", type=int, default=settings.n_queries)
    p.add_argument("--seed", type=int, default=settings.seed)
    p.add_argument("--out", required=True)

    p = sub.add_parser("build", help="build a shortcut index")
    p.add_argument("--graph", required=True)
    p.add_argument("--partition", required=True)
    p.add_argument("--traffic")
    p.add_argument("--strategy", choices=[s.value for s in Strategy], default=Strategy.trapp.value)
    p.add_argument("--k", type=int)
    p.add_argument("--f", type=float)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--random-budget", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--combinations", help="build over per-cell combinations read from this file")
    p.add_argument("--dump-combinations")
    p.add_argument("--dump-vectors", help="write the representation vectors (needs --traffic)")
    p.add_argument("--out", required=True)

    p = sub.add_parser("query", help="answer one route query")
    p.add_argument("--index", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--partition", help="reject the index unless it was built for this partition")
    p.add_argument("--exact", action="store_true", help="use the exact search only")
    p.add_argument("s", type=int)
    p.add_argument("d", type=int)
    p.add_argument("he", type=float)
    p.add_argument("wi", type=float)
    p.add_argument("wt", type=float)

    p = sub.add_parser("bench", help="compare strategies on generated datasets")
    p.add_argument(
        "--strategies",
        type=_csv(str),
        default=[BASELINE, Strategy.random.value, Strategy.all.value, Strategy.trapp.value],
    )
    p.add_argument("--seeds", type=_csv(int))
    p.add_argument("--n-vertices", type=int)
    p.add_argument("--target", type=int)
    p.add_argument("--vehicles", type=int)
    p.add_argument("--queries", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--f", type=float)
    p.add_argument("--random-budget", type=int)
    p.add_argument("--fixed-random-budget", action="store_true")
    p.add_argument("--warmup", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out-dir", default=str(settings.data_dir / "bench"))
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    settings = get_settings()
    args = build_parser(settings).parse_args(argv)
    configure_logging(args.log_level)
    handlers = {
        "gen-graph": _cmd_gen_graph,
        "gen-traffic": _cmd_gen_traffic,
        "partition": _cmd_partition,
        "gen-queries": _cmd_gen_queries,
        "query": _cmd_query,
    }
    try:
        if args.command == "build":
            _cmd_build(args, settings)
        elif args.command == "bench":
            _cmd_bench(args, settings)
        else:
            handlers[args.command](args)
    except (PlannerError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return 0


if __name__ == "__main__":
    sys.exit(main())
