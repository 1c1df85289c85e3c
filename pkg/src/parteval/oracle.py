"""Reference evaluator used to cross-check the engine.

Enumerates complete query matches on an unpartitioned graph by plain
backtracking over all vertex assignments, with no shared code with the
fragment matcher or the assembly stages.  Deliberately small and slow;
guarded by size limits.
"""

from __future__ import annotations

MAX_QUERY_VERTICES = 8
MAX_DATA_VERTICES = 64


class SizeLimit(Exception):
    pass


def _labels_ok(query_labels, data_labels):
    # one distinct stored label per query edge on the same vertex pair;
    # constant labels name their own target
    consts = [l for l in query_labels if l is not None]
    if len(set(consts)) != len(consts):
        return False
    if any(l not in data_labels for l in consts):
        return False
    return len(query_labels) <= len(data_labels)


def enumerate_matches(g, q):
    """All satisfying vertex assignments of q against g, as tuples of
    data vertex ids ordered by query vertex id."""
    n = q.n
    if n > MAX_QUERY_VERTICES:
        raise SizeLimit("query has %d vertices, limit %d"
                        % (n, MAX_QUERY_VERTICES))
    if g.n_vertices > MAX_DATA_VERTICES:
        raise SizeLimit("graph has %d vertices, limit %d"
                        % (g.n_vertices, MAX_DATA_VERTICES))

    const_of = {}
    for v, qv in enumerate(q.vertices):
        if qv.constant is not None:
            vid = g.term_id(qv.constant)
            if vid is None:
                return frozenset()
            const_of[v] = vid

    results = set()
    fn = [None] * n

    def full_check():
        by_pair = {}
        for e in q.edges:
            by_pair.setdefault((fn[e.src], fn[e.dst]), []).append(e.label)
        return all(_labels_ok(ls, g.labels_between(a, b))
                   for (a, b), ls in by_pair.items())

    def place(v):
        if v == n:
            if full_check():
                results.add(tuple(fn))
            return
        domain = [const_of[v]] if v in const_of else range(g.n_vertices)
        for u in domain:
            ok = True
            for ei in q.incident[v]:
                e = q.edges[ei]
                w = e.dst if e.src == v else e.src
                if fn[w] is None and w != v:
                    continue
                a = u if e.src == v else fn[e.src]
                b = u if e.dst == v else fn[e.dst]
                labels = g.labels_between(a, b)
                if e.label is None:
                    if not labels:
                        ok = False
                        break
                elif e.label not in labels:
                    ok = False
                    break
            if ok:
                fn[v] = u
                place(v + 1)
                fn[v] = None

    place(0)
    return frozenset(results)


def classify(matches, dg):
    """Split complete matches into per-fragment inner matches and
    crossing matches.

    A match is inner to fragment i when its whole image lies in that
    fragment's internal vertices; every edge it uses is then an inner
    edge of the fragment.  Everything else touches at least two
    fragments.
    """
    inner = {frag.id: set() for frag in dg.fragments}
    crossing = set()
    for fn in matches:
        homes = {dg.home(u) for u in fn}
        if len(homes) == 1:
            inner[next(iter(homes))].add(fn)
        else:
            crossing.add(fn)
    return {fid: frozenset(ms) for fid, ms in inner.items()}, \
        frozenset(crossing)
