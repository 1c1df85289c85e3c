"""Centralized assembly of local partial matches.

Partial matches from different fragments are merged wherever they share
a crossing edge, flipping internal and extended roles between the two
sides.  Two strategies produce the complete crossing matches: a naive
fixpoint that repeatedly joins everything against everything, and a
partitioning-based pass that groups the partial matches by an anchor
query vertex so that members of one group never join each other.  A
dynamic program picks the anchor order minimizing the modeled cost.
"""

from __future__ import annotations

from dataclasses import dataclass

from .matcher import LocalPartialMatch, is_complete_match


class NotJoinable(Exception):
    pass


class UnassignedLpm(Exception):
    """A partial match with no internally-matched query vertex cannot be
    placed in any part."""


def joinable(a, b, q):
    """True when two partial matches can merge.

    They must agree wherever both bind, and some query edge must be
    realized on the same crossing edge from both sides with the internal
    and extended roles swapped.  Two matches from one fragment give the
    same vertex internal and extended roles at once, so the role swap
    can never hold for them.
    """
    for x, (ua, ub) in enumerate(zip(a.fn, b.fn)):
        if ua is not None and ub is not None and ua != ub:
            return False
    for e in q.edges:
        x, y = e.src, e.dst
        if a.fn[x] is None or a.fn[y] is None:
            continue
        if b.fn[x] is None or b.fn[y] is None:
            continue
        if (x in a.internal and y in b.internal
                and x not in b.internal and y not in a.internal):
            return True
        if (x in b.internal and y in a.internal
                and x not in a.internal and y not in b.internal):
            return True
    return False


def join(a, b, q):
    """Merge two joinable partial matches: bound values win over None,
    internal roles and contributing fragments accumulate."""
    if not joinable(a, b, q):
        raise NotJoinable("%r / %r" % (a, b))
    fn = tuple(ua if ua is not None else ub
               for ua, ub in zip(a.fn, b.fn))
    return LocalPartialMatch(fn, a.internal | b.internal,
                             a.fragments | b.fragments)


def _absorb(merged, q, g, complete, intermediates):
    """Classify a join result: a fully bound function either validates
    into a complete match or dies; anything else stays an intermediate."""
    if all(u is not None for u in merged.fn):
        if is_complete_match(q, merged.fn, g.labels_between):
            complete.add(merged.fn)
        return
    intermediates.add(merged)


def naive_iterative_join(omega, q, g, stats=None):
    """Fixpoint join of all local partial matches against each other.

    The working set starts as the whole input and grows by every new
    intermediate; each round joins the working set against the input.
    A complete crossing match made of m constituents appears after at
    most m-1 rounds, and m never exceeds the query size.
    """
    base = sorted(omega, key=_lpm_key)
    ms = set(base)
    rs = set()
    examined = 0
    for _ in range(max(q.n, 1)):
        new = set()
        for a in sorted(ms, key=_lpm_key):
            for b in base:
                examined += 1
                if not joinable(a, b, q):
                    continue
                merged = join(a, b, q)
                if merged not in ms:
                    _absorb(merged, q, g, rs, new)
        new -= ms
        if not new:
            break
        ms |= new
    if stats is not None:
        stats["pairs_examined"] = stats.get("pairs_examined", 0) + examined
        stats["working_set"] = len(ms)
    return frozenset(rs)


def _lpm_key(pm):
    return (tuple(-2 if u is None else u for u in pm.fn),
            tuple(sorted(pm.internal)), tuple(sorted(pm.fragments)))


@dataclass(frozen=True)
class LpmPartitioning:
    """Ordered grouping of partial matches by anchor query vertex.

    Each part holds the matches whose internal vertices include its
    anchor and that no earlier part claimed.  Parts are disjoint and
    cover the input; empty parts are fine.
    """

    parts: tuple  # of (anchor query vertex id, frozenset[LocalPartialMatch])

    def sizes(self):
        return tuple(len(members) for _, members in self.parts)


def build_partitioning(omega, vertex_order):
    remaining = set(omega)
    parts = []
    for v in vertex_order:
        members = frozenset(pm for pm in remaining if v in pm.internal)
        parts.append((v, members))
        remaining -= members
    if remaining:
        raise UnassignedLpm("%d matches claim no anchor" % len(remaining))
    return LpmPartitioning(tuple(parts))


def join_cost(p):
    """Modeled cost of a partitioning: the product of part sizes, with
    empty parts contributing a neutral factor of one."""
    cost = 1
    for _, members in p.parts:
        cost *= max(len(members), 1)
    return cost


def optimal_partitioning(omega, q, stats=None):
    """Anchor order minimizing the modeled join cost.

    Top-down search over which vertex anchors next, memoized on the set
    of vertices already used: the matches still unassigned are exactly
    those avoiding every used vertex internally, so the used set
    determines the whole subproblem.  Ties fall to the lowest vertex id.
    """
    n = q.n
    if n > 30:
        raise ValueError("query too large for bitmask ordering: %d" % n)
    pms = sorted(omega, key=_lpm_key)
    for pm in pms:
        if not pm.internal:
            raise UnassignedLpm("match with no internal vertex: %r" % pm)
    masks = [0] * len(pms)
    for i, pm in enumerate(pms):
        for v in pm.internal:
            masks[i] |= 1 << v
    memo = {}

    def solve(used):
        left = [i for i in range(len(pms)) if not masks[i] & used]
        if not left:
            tail = tuple(v for v in range(n) if not used & (1 << v))
            return 1, tail
        if used in memo:
            return memo[used]
        best = None
        for v in range(n):
            bit = 1 << v
            if used & bit:
                continue
            size = sum(1 for i in left if masks[i] & bit)
            sub_cost, sub_order = solve(used | bit)
            cost = max(size, 1) * sub_cost
            if best is None or cost < best[0]:
                best = (cost, (v,) + sub_order)
        memo[used] = best
        return best

    cost, order = solve(0)
    if stats is not None:
        stats["memo_keys"] = len(memo)
    return build_partitioning(pms, order), cost


def partitioning_based_join(p, q, g, stats=None):
    """Join pass over an anchor partitioning.

    Members of each part join only against the accumulated working set,
    never against each other.  Intermediates produced inside a part are
    queued and also joined against the working set before the part
    closes, so chains whose pieces straddle one part still complete.
    Part members and processed intermediates then feed the working set
    for later parts.
    """
    ms = []
    ms_seen = set()
    rs = set()
    examined = 0

    def scan(w, new):
        nonlocal examined
        for m in ms:
            examined += 1
            if not joinable(w, m, q):
                continue
            merged = join(w, m, q)
            if merged not in ms_seen:
                _absorb(merged, q, g, rs, new)

    for _, members in p.parts:
        ordered = sorted(members, key=_lpm_key)
        pending = []
        fresh = set()
        for w in ordered:
            scan(w, fresh)
        for w in ordered:
            ms.append(w)
            ms_seen.add(w)
        pending.extend(sorted(fresh - ms_seen, key=_lpm_key))
        while pending:
            w = pending.pop(0)
            if w in ms_seen:
                continue
            fresh = set()
            scan(w, fresh)
            ms.append(w)
            ms_seen.add(w)
            pending.extend(sorted(fresh - ms_seen, key=_lpm_key))
    if stats is not None:
        stats["pairs_examined"] = stats.get("pairs_examined", 0) + examined
        stats["working_set"] = len(ms)
    return frozenset(rs)


def assemble(omega, q, g, stats=None):
    """Optimal partitioning followed by the partitioned join."""
    p, cost = optimal_partitioning(omega, q, stats=stats)
    if stats is not None:
        stats["join_cost"] = cost
    return partitioning_based_join(p, q, g, stats=stats)
