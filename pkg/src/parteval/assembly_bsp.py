"""Bulk-synchronous assembly of local partial matches.

Each fragment acts as a site.  Sites are totally ordered by the size of
their partial-match sets (ties by fragment id), and every message climbs
that order: an item is sent to the topology-adjacent sites ranked above
everything in its provenance.  A site admits a join only when the merged
provenance peaks at the site itself, and a finished match is emitted
only at the highest-ranked fragment among its image vertices' homes, so
each match surfaces at exactly one site.

Supersteps alternate computation and a barriered exchange; the run ends
when an exchange delivers nothing.  The exchange moves encoded byte
records, either through an in-process mailbox or over loopback TCP.
"""

from __future__ import annotations

import socket
import struct
from dataclasses import dataclass

from .matcher import LocalPartialMatch, is_complete_match
from .assembly_central import joinable, join

NULL_ID = 0xFFFFFFFF


class NonTermination(Exception):
    """The superstep guard tripped; indicates a routing or admission bug,
    never expected on any input."""


@dataclass(frozen=True)
class FragmentOrder:
    order: tuple   # fragment ids, lowest rank first
    rank: tuple    # of (fragment id, rank) pairs, mapping-like

    def rank_of(self, fid):
        return dict(self.rank)[fid]


def fragment_order(omega):
    """Total order over fragments: fewer partial matches first, ties by
    fragment id."""
    fids = sorted(omega, key=lambda fid: (len(omega[fid]), fid))
    return FragmentOrder(tuple(fids),
                         tuple((fid, i) for i, fid in enumerate(fids)))


def route(pm, order, topo):
    """Destination sites for an item: strictly above the item's whole
    provenance, and topology-adjacent to some provenance fragment."""
    rank = dict(order.rank)
    top = max(rank[f] for f in pm.fragments)
    dests = set()
    for fid in topo.nodes:
        if rank[fid] <= top:
            continue
        if any(fid in topo.adjacency.get(f, frozenset())
               for f in pm.fragments):
            dests.add(fid)
    return dests


def encode_lpm(pm, src):
    """Fixed wire record: length, vertex count, source fragment,
    provenance bitmap, vertex ids (NULL_ID for unmatched), internal-flag
    bitmap."""
    n = len(pm.fn)
    if n > 32:
        raise ValueError("record format caps queries at 32 vertices")
    prov = 0
    for f in pm.fragments:
        if f >= 32:
            raise ValueError("record format caps fragment ids at 31")
        prov |= 1 << f
    flags = 0
    for v in pm.internal:
        flags |= 1 << v
    body = struct.pack(">HHI", n, src, prov)
    body += struct.pack(">%dI" % n,
                        *(NULL_ID if u is None else u for u in pm.fn))
    body += struct.pack(">I", flags)
    return struct.pack(">I", len(body)) + body


def decode_lpm(data):
    (length,) = struct.unpack_from(">I", data, 0)
    if length != len(data) - 4:
        raise ValueError("bad record length")
    n, src, prov = struct.unpack_from(">HHI", data, 4)
    ids = struct.unpack_from(">%dI" % n, data, 12)
    (flags,) = struct.unpack_from(">I", data, 12 + 4 * n)
    fn = tuple(None if u == NULL_ID else u for u in ids)
    internal = frozenset(v for v in range(n) if flags & (1 << v))
    fragments = frozenset(f for f in range(32) if prov & (1 << f))
    return LocalPartialMatch(fn, internal, fragments), src


class InProcessExchange:
    """Mailbox exchange: payloads accumulate per destination and are
    handed over at the barrier."""

    def __init__(self, k):
        self.k = k
        self._boxes = {i: [] for i in range(k)}

    def post(self, dst, payload):
        self._boxes[dst].append(payload)

    def flush(self):
        out = self._boxes
        self._boxes = {i: [] for i in range(self.k)}
        return out

    def close(self):
        pass


class TcpLoopbackExchange:
    """The same barrier contract carried over real loopback sockets, one
    connection per site.  An empty frame ends each round."""

    _END = struct.pack(">I", 0)

    def __init__(self, k):
        self.k = k
        self._servers = []
        self._senders = []
        self._receivers = []
        for _ in range(k):
            srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            srv.bind(("127.0.0.1", 0))
            srv.listen(1)
            self._servers.append(srv)
        for srv in self._servers:
            snd = socket.create_connection(srv.getsockname())
            self._senders.append(snd)
        for srv in self._servers:
            conn, _ = srv.accept()
            self._receivers.append(conn)

    def post(self, dst, payload):
        self._senders[dst].sendall(struct.pack(">I", len(payload)) + payload)

    def _read_exact(self, sock, size):
        buf = b""
        while len(buf) < size:
            chunk = sock.recv(size - len(buf))
            if not chunk:
                raise ConnectionError("peer closed mid-frame")
            buf += chunk
        return buf

    def flush(self):
        for snd in self._senders:
            snd.sendall(self._END)
        out = {}
        for dst, rcv in enumerate(self._receivers):
            batch = []
            while True:
                (size,) = struct.unpack(">I", self._read_exact(rcv, 4))
                if size == 0:
                    break
                batch.append(self._read_exact(rcv, size))
            out[dst] = batch
        return out

    def close(self):
        for sock in self._senders + self._receivers + self._servers:
            sock.close()


def local_computation(site, delta_in, pool, q, dg, order, seen=None,
                      emitted=None):
    """One site's compute superstep.

    Received items are worked off a queue: each scans the pool, then
    joins it, so every cross pair is attempted once.  Admitted results
    are either emitted (complete, valid, and this site tops the image
    homes), queued for further local joins, or readied for routing.
    Returns (emitted vectors, items for the outbox).
    """
    rank = dict(order.rank)
    site_rank = rank[site]
    if seen is None:
        seen = set(pool)
    if emitted is None:
        emitted = set()
    validate = lambda fn: is_complete_match(q, fn, dg.source.labels_between)
    out = []
    queue = list(delta_in)
    done = set()
    new_emits = set()
    while queue:
        w = queue.pop(0)
        if w in done:
            continue
        done.add(w)
        seen.add(w)
        for m in list(pool):
            if not joinable(w, m, q):
                continue
            merged = join(w, m, q)
            if merged in seen:
                continue
            if max(rank[f] for f in merged.fragments) != site_rank:
                continue
            if all(u is not None for u in merged.fn):
                seen.add(merged)
                if not validate(merged.fn):
                    continue
                top_home = max(rank[dg.home(u)] for u in merged.fn)
                if top_home == site_rank:
                    if merged.fn not in emitted:
                        emitted.add(merged.fn)
                        new_emits.add(merged.fn)
                else:
                    out.append(merged)
                continue
            seen.add(merged)
            out.append(merged)
            queue.append(merged)
        pool.append(w)
    return new_emits, out


def run_bsp(dg, q, omega, stats=None, exchange=None):
    """Drive the sites to quiescence and collect every emission.

    Superstep 0 only broadcasts the initial partial matches along the
    routing rule; compute and exchange then alternate until a barrier
    delivers no messages.  The returned set is the union of all sites'
    emissions, which are pairwise disjoint by the emission rule.
    """
    from .fragmenter import topology

    topo = topology(dg)
    order = fragment_order({fid: omega.get(fid, frozenset())
                            for fid in range(dg.k)})
    rank = dict(order.rank)
    own_exchange = exchange is None
    if exchange is None:
        exchange = InProcessExchange(dg.k)

    pools = {}
    seen = {}
    emitted = {fid: set() for fid in range(dg.k)}
    validate = lambda fn: is_complete_match(q, fn, dg.source.labels_between)
    for fid in range(dg.k):
        base = sorted(omega.get(fid, frozenset()), key=_bsp_key)
        pools[fid] = list(base)
        seen[fid] = set(base)
        for pm in base:
            if all(u is not None for u in pm.fn) and validate(pm.fn):
                if max(rank[dg.home(u)] for u in pm.fn) == rank[fid]:
                    emitted[fid].add(pm.fn)

    messages = 0
    byte_count = 0
    for fid in range(dg.k):
        for pm in pools[fid]:
            for dst in sorted(route(pm, order, topo)):
                payload = encode_lpm(pm, fid)
                exchange.post(dst, payload)
                messages += 1
                byte_count += len(payload)

    productive = 0
    supersteps_run = 0
    superstep = 0
    try:
        while True:
            delivered = exchange.flush()
            if not any(delivered.get(fid) for fid in range(dg.k)):
                break
            superstep += 1
            if superstep > dg.k + 2:
                raise NonTermination("still exchanging after %d supersteps"
                                     % superstep)
            supersteps_run += 1
            was_productive = False
            for fid in range(dg.k):
                batch = [decode_lpm(p)[0] for p in delivered.get(fid, [])]
                arrivals = [pm for pm in batch if pm not in seen[fid]]
                arrivals = sorted(set(arrivals), key=_bsp_key)
                if not arrivals:
                    continue
                new_emits, out = local_computation(
                    fid, arrivals, pools[fid], q, dg, order,
                    seen=seen[fid], emitted=emitted[fid])
                if new_emits or out:
                    was_productive = True
                for pm in out:
                    for dst in sorted(route(pm, order, topo)):
                        payload = encode_lpm(pm, fid)
                        exchange.post(dst, payload)
                        messages += 1
                        byte_count += len(payload)
            if was_productive:
                productive += 1
    finally:
        if own_exchange:
            exchange.close()

    all_vectors = set()
    total = 0
    for fid in range(dg.k):
        all_vectors |= emitted[fid]
        total += len(emitted[fid])
    assert total == len(all_vectors), "a match was emitted at two sites"

    if stats is not None:
        stats["supersteps_used"] = productive
        stats["supersteps_run"] = supersteps_run
        stats["messages_sent"] = messages
        stats["bytes_sent"] = byte_count
        stats["emissions_per_site"] = {fid: len(emitted[fid])
                                       for fid in range(dg.k)}
        stats["topology_diameter"] = topo.diameter
    return frozenset(all_vectors)


def _bsp_key(pm):
    return (tuple(-2 if u is None else u for u in pm.fn),
            tuple(sorted(pm.internal)), tuple(sorted(pm.fragments)))
