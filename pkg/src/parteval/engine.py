"""Coordinator: wires matching, assembly, and the table algebra, and
exposes the command line.

A database is a directory holding a canonical N-Triples copy of the data
plus an optional partition map; fragments are rebuilt at load time.
Matching runs per fragment (thread pool capped by PARTEVAL_THREADS),
crossing matches come from the configured assembly strategy, and results
print as deterministically sorted TSV.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import assembly_bsp, assembly_central, fragmenter, matcher
from .fragmenter import PartitionError, PartitionMap
from .general_sparql import evaluate_bgp, evaluate_general
from .query_model import QuerySyntaxError, UnsupportedFeatureError, parse_sparql
from .rdf_model import BLANK, IRI, NTriplesSyntaxError, parse_ntriples


class TimeoutExceeded(Exception):
    pass


@dataclass
class EngineConfig:
    assembly: str = "centralized"        # or "distributed"
    join: str = "partitioned"            # or "naive"
    transport: str = "inproc"            # or "tcp"
    threads: int = 0                     # 0: PARTEVAL_THREADS or cpu count
    timeout_seconds: float = 0.0         # 0: no limit


@dataclass
class QueryStats:
    lpm_counts: dict = field(default_factory=dict)
    inner_matches: int = 0
    crossing_matches: int = 0
    partial_eval_seconds: float = 0.0
    assembly_seconds: float = 0.0
    supersteps: int = 0
    messages_sent: int = 0
    bytes_sent: int = 0
    join_cost: int = 0

    def to_dict(self):
        return {
            "lpm_counts": {str(k): v for k, v in sorted(self.lpm_counts.items())},
            "inner_matches": self.inner_matches,
            "crossing_matches": self.crossing_matches,
            "partial_eval_seconds": self.partial_eval_seconds,
            "assembly_seconds": self.assembly_seconds,
            "supersteps": self.supersteps,
            "messages_sent": self.messages_sent,
            "bytes_sent": self.bytes_sent,
            "join_cost": self.join_cost,
        }


def _thread_cap(cfg, k):
    if cfg.threads > 0:
        return min(cfg.threads, k)
    env = os.environ.get("PARTEVAL_THREADS", "")
    if env.isdigit() and int(env) > 0:
        return min(int(env), k)
    return min(k, os.cpu_count() or 1)


class _Deadline:
    def __init__(self, seconds):
        self.limit = seconds
        self.start = time.monotonic()

    def check(self, phase):
        if self.limit and time.monotonic() - self.start > self.limit:
            raise TimeoutExceeded("timed out during %s" % phase)


def _match_component(comp, dg, cfg, stats, deadline):
    """Full pipeline for one connected pattern graph: per-fragment
    matching, then the configured assembly; returns match vectors."""
    gq = matcher.ground(comp, dg.source)

    t0 = time.monotonic()
    workers = _thread_cap(cfg, dg.k)
    def per_fragment(frag):
        return (frag.id,
                matcher.compute_local_partial_matches(gq, frag),
                matcher.compute_inner_matches(gq, frag))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(per_fragment, dg.fragments))
    else:
        rows = [per_fragment(frag) for frag in dg.fragments]
    omega = {fid: lpms for fid, lpms, _ in rows}
    inner = {fid: ims for fid, _, ims in rows}
    stats.partial_eval_seconds += time.monotonic() - t0
    for fid, lpms in omega.items():
        stats.lpm_counts[fid] = stats.lpm_counts.get(fid, 0) + len(lpms)
    deadline.check("partial evaluation")

    t1 = time.monotonic()
    if cfg.assembly == "distributed":
        bsp_stats = {}
        exchange = None
        if cfg.transport == "tcp":
            exchange = assembly_bsp.TcpLoopbackExchange(dg.k)
        try:
            crossing = assembly_bsp.run_bsp(dg, gq, omega, stats=bsp_stats,
                                            exchange=exchange)
        finally:
            if exchange is not None:
                exchange.close()
        stats.supersteps = max(stats.supersteps,
                               bsp_stats.get("supersteps_used", 0))
        stats.messages_sent += bsp_stats.get("messages_sent", 0)
        stats.bytes_sent += bsp_stats.get("bytes_sent", 0)
    else:
        flat = frozenset().union(*omega.values()) if omega else frozenset()
        central_stats = {}
        if cfg.join == "naive":
            crossing = assembly_central.naive_iterative_join(
                flat, gq, dg.source, stats=central_stats)
        else:
            crossing = assembly_central.assemble(
                flat, gq, dg.source, stats=central_stats)
            stats.join_cost += central_stats.get("join_cost", 0)
    stats.assembly_seconds += time.monotonic() - t1
    deadline.check("assembly")

    inner_all = set()
    for ims in inner.values():
        inner_all |= ims
    stats.inner_matches += len(inner_all)
    stats.crossing_matches += len(crossing)
    return frozenset(inner_all) | crossing


def execute(gq, dg, cfg=None):
    """Evaluate a parsed query against a fragmented graph."""
    cfg = cfg or EngineConfig()
    stats = QueryStats()
    deadline = _Deadline(cfg.timeout_seconds)
    match_fn = lambda comp: _match_component(comp, dg, cfg, stats, deadline)
    bgp_eval = lambda graph: evaluate_bgp(graph, match_fn, dg.source)
    table = evaluate_general(gq, bgp_eval)
    return table, stats


# --- persistence ---

DATA_FILE = "data.nt"
MAP_FILE = "partition.tsv"


def load_db(path):
    data = os.path.join(path, DATA_FILE)
    with open(data, "rb") as fh:
        g = parse_ntriples(fh)
    map_path = os.path.join(path, MAP_FILE)
    if os.path.exists(map_path):
        pm = fragmenter.partition_from_file(g, map_path)
    else:
        pm = PartitionMap({vid: 0 for vid in g.vertex_ids()}, 1)
    return g, fragmenter.build_fragments(g, pm)


# --- output ---

def _cell(term):
    if term is None:
        return ""
    if term.kind == IRI:
        return term.lexical
    if term.kind == BLANK:
        return term.ntriples()
    return term.ntriples()


def format_tsv(table, names):
    lines = ["\t".join("?" + n for n in names)]
    rendered = []
    for row in table.rows:
        d = dict(row)
        rendered.append(tuple(_cell(d.get(n)) for n in names))
    for cells in sorted(rendered):
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def _projection_names(gq):
    from .query_model import tree_vars
    if gq.projection is None:
        return sorted(tree_vars(gq.node))
    return list(gq.projection)


# --- CLI ---

def _cmd_load(args):
    with open(args.data, "rb") as fh:
        g = parse_ntriples(fh)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, DATA_FILE), "w", encoding="utf-8") as fh:
        fh.write(g.to_ntriples())
    print("loaded %d triples, %d vertices" % (g.n_edges, g.n_vertices))
    return 0


def _cmd_partition(args):
    data = os.path.join(args.db, DATA_FILE)
    with open(data, "rb") as fh:
        g = parse_ntriples(fh)
    if args.strategy == "uniform":
        pm = fragmenter.partition_uniform_hash(g, args.k, seed=args.seed)
    elif args.strategy == "exponential":
        pm = fragmenter.partition_exponential_hash(g, args.k, seed=args.seed)
    elif args.strategy == "file":
        if not args.map:
            raise PartitionError("--strategy file requires --map")
        pm = fragmenter.partition_from_file(g, args.map)
    else:
        raise PartitionError("unknown strategy %r" % args.strategy)
    fragmenter.write_partition_file(g, pm, os.path.join(args.db, MAP_FILE))
    dg = fragmenter.build_fragments(g, pm)
    topo = fragmenter.topology(dg)
    print("partitioned into %d fragments, topology diameter %d"
          % (dg.k, topo.diameter))
    return 0


_ASSEMBLY = {"c": "centralized", "centralized": "centralized",
             "d": "distributed", "distributed": "distributed"}


def _cmd_query(args):
    with open(args.sparql, "r", encoding="utf-8") as fh:
        text = fh.read()
    gq = parse_sparql(text)
    g, dg = load_db(args.db)
    cfg = EngineConfig(assembly=_ASSEMBLY[args.assembly], join=args.join,
                       transport=args.transport, threads=args.threads,
                       timeout_seconds=args.timeout)
    table, stats = execute(gq, dg, cfg)
    sys.stdout.write(format_tsv(table, _projection_names(gq)))
    if args.stats:
        with open(args.stats, "w", encoding="utf-8") as fh:
            json.dump(stats.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def _cmd_stats(args):
    g, dg = load_db(args.db)
    topo = fragmenter.topology(dg)
    info = {
        "triples": g.n_edges,
        "vertices": g.n_vertices,
        "fragments": [
            {
                "id": frag.id,
                "internal_vertices": len(frag.internal),
                "extended_vertices": len(frag.extended),
                "inner_edges": frag.inner_edge_count(),
                "crossing_edges": frag.crossing_edge_count(),
            }
            for frag in dg.fragments
        ],
        "k": dg.k,
        "topology_diameter": topo.diameter,
    }
    print(json.dumps(info, indent=2, sort_keys=True))
    return 0


def _build_parser():
    p = argparse.ArgumentParser(prog="parteval")
    sub = p.add_subparsers(dest="command", required=True)

    load_p = sub.add_parser("load", help="import an N-Triples file")
    load_p.add_argument("--data", required=True)
    load_p.add_argument("--out", required=True)
    load_p.set_defaults(fn=_cmd_load)

    part_p = sub.add_parser("partition", help="assign vertices to fragments")
    part_p.add_argument("--db", required=True)
    part_p.add_argument("-k", type=int, required=True)
    part_p.add_argument("--strategy", default="uniform",
                        choices=["uniform", "exponential", "file"])
    part_p.add_argument("--map")
    part_p.add_argument("--seed", type=int, default=0)
    part_p.set_defaults(fn=_cmd_partition)

    query_p = sub.add_parser("query", help="run a SPARQL query")
    query_p.add_argument("--db", required=True)
    query_p.add_argument("--sparql", required=True)
    query_p.add_argument("--assembly", default="centralized",
                         choices=sorted(_ASSEMBLY))
    query_p.add_argument("--join", default="partitioned",
                         choices=["naive", "partitioned"])
    query_p.add_argument("--transport", default="inproc",
                         choices=["inproc", "tcp"])
    query_p.add_argument("--threads", type=int, default=0)
    query_p.add_argument("--timeout", type=float, default=0.0)
    query_p.add_argument("--stats")
    query_p.set_defaults(fn=_cmd_query)

    stats_p = sub.add_parser("stats", help="describe a database")
    stats_p.add_argument("--db", required=True)
    stats_p.set_defaults(fn=_cmd_stats)
    return p


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        return args.fn(args)
    except (QuerySyntaxError, UnsupportedFeatureError) as exc:
        print("query error: %s" % exc, file=sys.stderr)
        return 1
    except TimeoutExceeded as exc:
        print("query error: %s" % exc, file=sys.stderr)
        return 1
    except NTriplesSyntaxError as exc:
        print("data error: %s" % exc, file=sys.stderr)
        return 2
    except PartitionError as exc:
        print("partition error: %s" % exc, file=sys.stderr)
        return 2
    except OSError as exc:
        print("io error: %s" % exc, file=sys.stderr)
        return 2


cli = main
