"""Vertex-disjoint fragmentation of an RDF graph.

Every vertex is owned by exactly one fragment.  An edge whose endpoints
share a fragment is an inner edge of that fragment; an edge spanning two
fragments is a crossing edge and is stored in both fragments it touches.
The non-owned endpoints of a fragment's crossing edges form its extended
vertex set.  The fragment topology graph connects two fragments when at
least one crossing edge runs between them.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .rdf_model import term_from_text

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


class PartitionError(Exception):
    pass


class UnknownVertex(PartitionError):
    pass


class MissingVertex(PartitionError):
    pass


class DuplicateAssignment(PartitionError):
    pass


@dataclass(frozen=True)
class PartitionMap:
    assignment: dict          # vertex id -> fragment id
    k: int


def fnv1a64(data):
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & _MASK64
    return h


def _vertex_hash(g, vid, seed):
    raw = g.term(vid).ntriples().encode("utf-8")
    return fnv1a64(raw) ^ (seed & _MASK64)


def partition_uniform_hash(g, k, seed=0):
    if k < 1:
        raise PartitionError("fragment count must be at least 1")
    assignment = {v: _vertex_hash(g, v, seed) % k for v in g.vertex_ids()}
    return PartitionMap(assignment, k)


def partition_exponential_hash(g, k, seed=0):
    """Assign fragment j with probability 0.5^(j+1); the tail mass goes to
    the last fragment."""
    if k < 1:
        raise PartitionError("fragment count must be at least 1")
    assignment = {}
    for v in g.vertex_ids():
        u = _vertex_hash(g, v, seed) / 2.0 ** 64
        frag = k - 1
        for j in range(k - 1):
            if u < 1.0 - 0.5 ** (j + 1):
                frag = j
                break
        assignment[v] = frag
    return PartitionMap(assignment, k)


def partition_from_file(g, path):
    """Read `<term>\t<fragment id>` lines covering every vertex exactly once."""
    assignment = {}
    max_fid = 0
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            try:
                term_text, _, fid_text = line.rpartition("\t")
                term = term_from_text(term_text)
                fid = int(fid_text)
            except Exception:
                raise PartitionError(
                    "line %d: malformed partition record" % line_no) from None
            if fid < 0:
                raise PartitionError("line %d: negative fragment id" % line_no)
            vid = g.term_id(term)
            if vid is None:
                raise UnknownVertex(
                    "line %d: %s is not a graph vertex" % (line_no, term_text))
            if vid in assignment:
                raise DuplicateAssignment(
                    "line %d: %s assigned twice" % (line_no, term_text))
            assignment[vid] = fid
            max_fid = max(max_fid, fid)
    missing = set(g.vertex_ids()) - set(assignment)
    if missing:
        term = g.term(min(missing))
        raise MissingVertex("%s has no fragment assignment" % term.ntriples())
    return PartitionMap(assignment, max_fid + 1)


def write_partition_file(g, pm, path):
    with open(path, "w", encoding="utf-8") as fh:
        for v in sorted(pm.assignment, key=lambda v: g.term(v).sort_key()):
            fh.write("%s\t%d\n" % (g.term(v).ntriples(), pm.assignment[v]))


@dataclass
class Fragment:
    """One fragment: owned vertices, stored edges, and derived indexes.

    edges holds inner and crossing edges together, keyed by the ordered
    vertex pair; nbrs / out_labels / in_labels are per-vertex views over
    the stored edges.  Treat as immutable once built.
    """

    id: int
    internal: frozenset
    extended: frozenset = frozenset()
    inner_pairs: dict = field(default_factory=dict)
    crossing_pairs: dict = field(default_factory=dict)
    edges: dict = field(default_factory=dict)
    labels: frozenset = frozenset()
    nbrs: dict = field(default_factory=dict)
    out_labels: dict = field(default_factory=dict)
    in_labels: dict = field(default_factory=dict)
    vertices: frozenset = frozenset()

    def crossing_edge_count(self):
        return sum(len(ls) for ls in self.crossing_pairs.values())

    def inner_edge_count(self):
        return sum(len(ls) for ls in self.inner_pairs.values())


def _finish_fragment(fid, internal, inner_pairs, crossing_pairs):
    edges = {}
    for pair, labels in inner_pairs.items():
        edges[pair] = frozenset(labels)
    for pair, labels in crossing_pairs.items():
        edges[pair] = edges.get(pair, frozenset()) | frozenset(labels)
    extended = set()
    for (u, v) in crossing_pairs:
        if u not in internal:
            extended.add(u)
        if v not in internal:
            extended.add(v)
    nbrs = {}
    out_labels = {}
    in_labels = {}
    for (u, v), labels in edges.items():
        nbrs.setdefault(u, set()).add(v)
        nbrs.setdefault(v, set()).add(u)
        out_labels.setdefault(u, set()).update(labels)
        in_labels.setdefault(v, set()).update(labels)
    all_vertices = frozenset(internal) | frozenset(extended)
    label_union = frozenset(
        label for labels in edges.values() for label in labels)
    return Fragment(
        id=fid,
        internal=frozenset(internal),
        extended=frozenset(extended),
        inner_pairs={p: frozenset(ls) for p, ls in inner_pairs.items()},
        crossing_pairs={p: frozenset(ls) for p, ls in crossing_pairs.items()},
        edges=edges,
        labels=label_union,
        nbrs={v: frozenset(ns) for v, ns in nbrs.items()},
        out_labels={v: frozenset(ls) for v, ls in out_labels.items()},
        in_labels={v: frozenset(ls) for v, ls in in_labels.items()},
        vertices=all_vertices,
    )


@dataclass
class DistributedGraph:
    fragments: list
    source: object            # the RdfGraph the fragments were cut from
    pm: PartitionMap

    @property
    def k(self):
        return len(self.fragments)

    def home(self, vid):
        return self.pm.assignment[vid]


def build_fragments(g, pm):
    internal = {fid: set() for fid in range(pm.k)}
    for v, fid in pm.assignment.items():
        if not 0 <= fid < pm.k:
            raise PartitionError("fragment id %d out of range" % fid)
        internal[fid].add(v)
    inner = {fid: {} for fid in range(pm.k)}
    crossing = {fid: {} for fid in range(pm.k)}
    for (u, v), labels in g.edges.items():
        fu = pm.assignment[u]
        fv = pm.assignment[v]
        if fu == fv:
            inner[fu][(u, v)] = set(labels)
        else:
            crossing[fu][(u, v)] = set(labels)
            crossing[fv][(u, v)] = set(labels)
    fragments = [
        _finish_fragment(fid, internal[fid], inner[fid], crossing[fid])
        for fid in range(pm.k)
    ]
    return DistributedGraph(fragments, g, pm)


@dataclass
class TopologyGraph:
    nodes: tuple
    adjacency: dict           # fragment id -> frozenset of fragment ids
    diameter: int


def topology(dg):
    nodes = tuple(f.id for f in dg.fragments)
    adj = {fid: set() for fid in nodes}
    for frag in dg.fragments:
        for (u, v) in frag.crossing_pairs:
            fu = dg.pm.assignment[u]
            fv = dg.pm.assignment[v]
            adj[fu].add(fv)
            adj[fv].add(fu)
    for fid in nodes:
        adj[fid].discard(fid)
    diameter = 0
    for start in nodes:
        dist = {start: 0}
        queue = deque([start])
        while queue:
            x = queue.popleft()
            for y in adj[x]:
                if y not in dist:
                    dist[y] = dist[x] + 1
                    queue.append(y)
        if dist:
            diameter = max(diameter, max(dist.values()))
    return TopologyGraph(nodes, {f: frozenset(ns) for f, ns in adj.items()},
                         diameter)
