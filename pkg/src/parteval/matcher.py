"""Per-fragment partial evaluation.

Finds inner matches (complete matches living wholly inside one fragment)
and local partial matches: partial homomorphisms from the query into a
fragment that are grounded on stored edges, cover at least one crossing
edge, give every internally-matched query vertex its complete
neighborhood, and keep the internally-matched vertices connected inside
the query.  Matching is homomorphic: two query vertices may share an
image.  Edge labels map injectively per vertex pair, with variable labels
matching anything.

A local partial match is serialized as the vector [f(v_1)..f(v_n)] with
None for unmatched vertices, tagged with which query vertices landed on
internal vertices and which fragments contributed.  The same structure
carries join intermediates during assembly, where the tags are unions.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class LocalPartialMatch:
    fn: tuple                 # data vertex id or None per query vertex
    internal: frozenset       # query vertex ids matched to internal vertices
    fragments: frozenset      # contributing fragment ids

    def bound(self):
        return [v for v, u in enumerate(self.fn) if u is not None]

    def __repr__(self):
        cells = []
        for v, u in enumerate(self.fn):
            if u is None:
                cells.append("-")
            elif v in self.internal:
                cells.append(str(u))
            else:
                cells.append("(%d)" % u)
        return "LPM[%s]@%s" % (",".join(cells), set(self.fragments))


@dataclass(frozen=True)
class GroundedQuery:
    """A query graph with constant vertices resolved to data vertex ids.

    A constant term absent from the data resolves to -1, which matches
    nothing anywhere.
    """

    graph: object
    const_id: tuple

    @property
    def n(self):
        return self.graph.n

    @property
    def edges(self):
        return self.graph.edges

    @property
    def adj(self):
        return self.graph.adj

    @property
    def incident(self):
        return self.graph.incident


def ground(q, g):
    const_id = []
    for v in q.vertices:
        if v.constant is None:
            const_id.append(None)
        else:
            vid = g.term_id(v.constant)
            const_id.append(-1 if vid is None else vid)
    return GroundedQuery(q, tuple(const_id))


def _label_compatible(query_label, data_labels):
    if query_label is None:
        return len(data_labels) > 0
    return query_label in data_labels


def _injective_feasible(query_labels, data_labels):
    # constants map to themselves, so they must be present and pairwise
    # distinct; variable labels take any leftover distinct label
    consts = [l for l in query_labels if l is not None]
    if len(set(consts)) != len(consts):
        return False
    for label in consts:
        if label not in data_labels:
            return False
    return len(query_labels) <= len(data_labels)


def candidates(q, frag, v):
    """Fragment vertices that could host query vertex v.

    Constants resolve to the one matching vertex if the fragment stores
    it.  A variable needs at least one incident stored edge whose label
    could satisfy one of v's incident query edges, respecting direction.
    """
    qv = q.graph.vertices[v]
    if qv.constant is not None:
        cid = q.const_id[v]
        if cid is not None and cid >= 0 and cid in frag.vertices:
            return [cid]
        return []
    out = []
    for u in frag.vertices:
        for ei in q.incident[v]:
            e = q.edges[ei]
            if e.src == v and _label_compatible(
                    e.label, frag.out_labels.get(u, frozenset())):
                out.append(u)
                break
            if e.dst == v and _label_compatible(
                    e.label, frag.in_labels.get(u, frozenset())):
                out.append(u)
                break
    return sorted(out)


def _realized_flags(q, frag, fn):
    """Per query edge: both endpoints bound and the edge present in the
    fragment with a compatible label."""
    flags = []
    for e in q.edges:
        a = fn[e.src]
        b = fn[e.dst]
        if a is None or b is None:
            flags.append(False)
            continue
        flags.append(_label_compatible(e.label,
                                       frag.edges.get((a, b), frozenset())))
    return flags


def is_local_partial_match(q, frag, fn):
    n = q.n
    if len(fn) != n:
        return False
    bound = [v for v in range(n) if fn[v] is not None]
    if not bound:
        return False
    for v in bound:
        u = fn[v]
        if u not in frag.vertices:
            return False
        if q.graph.vertices[v].constant is not None and q.const_id[v] != u:
            return False
    internal_qvs = {v for v in bound if fn[v] in frag.internal}
    if not internal_qvs:
        return False

    realized = _realized_flags(q, frag, fn)

    # every edge with an internally-matched image must be present with a
    # compatible label; an edge between two extended images may be absent
    must_pairs = {}
    for ei, e in enumerate(q.edges):
        a = fn[e.src]
        b = fn[e.dst]
        if a is None or b is None:
            continue
        if a in frag.internal or b in frag.internal:
            if not realized[ei]:
                return False
            must_pairs.setdefault((a, b), []).append(e.label)
    for pair, query_labels in must_pairs.items():
        if not _injective_feasible(query_labels, frag.edges[pair]):
            return False

    # at least one query edge must sit on an actual crossing edge
    for ei, e in enumerate(q.edges):
        a = fn[e.src]
        b = fn[e.dst]
        if a is None or b is None:
            continue
        if _label_compatible(e.label,
                             frag.crossing_pairs.get((a, b), frozenset())):
            break
    else:
        return False

    # internally-matched vertices need their whole neighborhood
    for v in internal_qvs:
        for ei in q.incident[v]:
            e = q.edges[ei]
            w = e.dst if e.src == v else e.src
            if fn[w] is None or not realized[ei]:
                return False

    # internally-matched vertices stay connected within the query
    if not _connected_through(q, internal_qvs, internal_qvs):
        return False

    # every binding must be witnessed by a stored edge
    for v in bound:
        if not any(realized[ei] for ei in q.incident[v]):
            return False

    # and the realized edges must connect all bound vertices
    realized_adj = {v: set() for v in bound}
    for ei, e in enumerate(q.edges):
        if realized[ei]:
            realized_adj[e.src].add(e.dst)
            realized_adj[e.dst].add(e.src)
    stack = [bound[0]]
    seen = {bound[0]}
    while stack:
        x = stack.pop()
        for y in realized_adj[x]:
            if y not in seen:
                seen.add(y)
                stack.append(y)
    if len(seen) != len(bound):
        return False

    return True


def _connected_through(q, targets, allowed):
    """True if all target vertices are connected in the query using only
    paths through allowed vertices."""
    targets = list(targets)
    if len(targets) <= 1:
        return True
    seen = {targets[0]}
    stack = [targets[0]]
    while stack:
        x = stack.pop()
        for y in q.adj[x]:
            if y in allowed and y not in seen:
                seen.add(y)
                stack.append(y)
    return all(t in seen for t in targets)


def _partial_state_ok(q, frag, fn):
    """Monotone pruning for the search: never rejects a sub-assignment of
    a valid local partial match."""
    bound = [v for v in range(q.n) if fn[v] is not None]
    must_pairs = {}
    for e in q.edges:
        a = fn[e.src]
        b = fn[e.dst]
        if a is None or b is None:
            continue
        if a in frag.internal or b in frag.internal:
            if not _label_compatible(e.label,
                                     frag.edges.get((a, b), frozenset())):
                return False
            must_pairs.setdefault((a, b), []).append(e.label)
    for pair, query_labels in must_pairs.items():
        if not _injective_feasible(query_labels, frag.edges[pair]):
            return False
    # internal images must remain connectable through vertices that are
    # still unmatched or already internally matched
    internal_qvs = {v for v in bound if fn[v] in frag.internal}
    allowed = {v for v in range(q.n)
               if fn[v] is None or fn[v] in frag.internal}
    return _connected_through(q, internal_qvs, allowed)


def compute_local_partial_matches(q, frag):
    """All local partial matches of the query in one fragment.

    Depth-first state search: seed with every (query vertex, candidate)
    pair, grow only into query vertices adjacent to the matched set, prune
    on the monotone conditions, and emit when the full predicate holds.
    A valid state is never extended: no local partial match strictly
    contains another, so extensions of a valid state cannot be valid.
    """
    n = q.n
    cand = {v: candidates(q, frag, v) for v in range(n)}
    results = set()
    seen = set()

    def explore(fn):
        key = tuple(fn)
        if key in seen:
            return
        seen.add(key)
        if is_local_partial_match(q, frag, key):
            internal_qvs = frozenset(
                v for v in range(n)
                if fn[v] is not None and fn[v] in frag.internal)
            results.add(LocalPartialMatch(key, internal_qvs,
                                          frozenset([frag.id])))
            return
        frontier = set()
        for v in range(n):
            if fn[v] is not None:
                frontier.update(w for w in q.adj[v] if fn[w] is None)
        for v in sorted(frontier):
            for u in cand[v]:
                fn[v] = u
                if _partial_state_ok(q, frag, fn):
                    explore(fn)
                fn[v] = None

    for v in range(n):
        for u in cand[v]:
            fn = [None] * n
            fn[v] = u
            if _partial_state_ok(q, frag, fn):
                explore(fn)
    return frozenset(results)


def match_order(q, frag):
    """A connected-prefix vertex ordering, cheapest candidate set first."""
    n = q.n
    counts = {v: len(candidates(q, frag, v)) for v in range(n)}
    start = min(range(n), key=lambda v: (counts[v], v))
    order = [start]
    placed = {start}
    while len(order) < n:
        frontier = [v for v in range(n)
                    if v not in placed and q.adj[v] & placed]
        if not frontier:
            frontier = [v for v in range(n) if v not in placed]
        pick = min(frontier, key=lambda v: (counts[v], v))
        order.append(pick)
        placed.add(pick)
    return order


def is_complete_match(q, fn, labels_of):
    """Full homomorphism check of a totally bound function against an
    edge view (labels_of(u, v) returns the labels on that pair)."""
    if any(u is None for u in fn):
        return False
    for v in range(q.n):
        if q.graph.vertices[v].constant is not None and q.const_id[v] != fn[v]:
            return False
    by_pair = {}
    for e in q.edges:
        by_pair.setdefault((fn[e.src], fn[e.dst]), []).append(e.label)
    for (a, b), query_labels in by_pair.items():
        if not _injective_feasible(query_labels, labels_of(a, b)):
            return False
    return True


def compute_inner_matches(q, frag):
    """Complete matches whose image uses only internal vertices and inner
    edges of the fragment."""
    n = q.n
    cand = {}
    for v in range(n):
        cs = [u for u in candidates(q, frag, v) if u in frag.internal]
        if not cs:
            return frozenset()
        cand[v] = cs
    order = match_order(q, frag)
    inner_labels = lambda a, b: frag.inner_pairs.get((a, b), frozenset())
    results = set()
    fn = [None] * n

    def place(t):
        if t == n:
            if is_complete_match(q, tuple(fn), inner_labels):
                results.add(tuple(fn))
            return
        v = order[t]
        for u in cand[v]:
            ok = True
            for ei in q.incident[v]:
                e = q.edges[ei]
                w = e.dst if e.src == v else e.src
                if fn[w] is None and w != v:
                    continue
                a = u if e.src == v else fn[e.src]
                b = u if e.dst == v else fn[e.dst]
                if not _label_compatible(e.label, inner_labels(a, b)):
                    ok = False
                    break
            if ok:
                fn[v] = u
                place(t + 1)
                fn[v] = None

    place(0)
    return frozenset(results)
