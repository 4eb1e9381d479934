"""Per-node reactive-routing behavior for AODV-, DSR-, and DYMO-style models.

Each simulated node owns one :class:`Node` instance.  The event engine feeds
it packet deliveries, timer callbacks, and link-failure signals; the node
replies by calling back into the engine to transmit packets and arm timers.
All three protocol models discover routes with expanding ring search; they
differ in how replies are produced (route table, route cache, destination
only), and in their maintenance machinery (local repair, packet salvaging,
hello link sensing).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .analytics import (
    ErsParams,
    Protocol,
    TtlSchedule,
    UnsupportedFeatureError,
    Variant,
    build_schedule,
    ring_traversal_wait,
)
from .packets import (
    BROADCAST,
    CONTROL_SIZE,
    DataInfo,
    Packet,
    RerrInfo,
    RreqInfo,
    RrepInfo,
)


def discovery_rings(protocol: Protocol, variant: Variant,
                    params: ErsParams) -> tuple[int, ...]:
    """Ring TTLs a discovery attempt actually walks.

    For the source-routing model the canonical two-ring schedule is extended
    with max_main_rexmt extra network-wide retries; the hop-by-hop schedules
    already carry their retries.
    """
    schedule = build_schedule(protocol, variant, params)
    rings = schedule.rings
    if protocol is Protocol.DSR:
        rings = rings + (rings[-1],) * params.max_main_rexmt
    return rings


def ring_wait(protocol: Protocol, params: ErsParams, ring_index: int,
              ttl: int) -> float:
    """Reply timeout armed for one ring.

    Source routing doubles a fixed timeout per ring; the hop-by-hop models
    scale with the ring TTL, capped by the network traversal budget.
    """
    if protocol is Protocol.DSR:
        return params.nonprop_timeout * (2 ** ring_index)
    return min(ring_traversal_wait(ttl, params), params.net_traversal_time)


@dataclass
class RouteEntry:
    destination: int
    next_hop: int
    hop_count: int
    valid_until: float
    seq: int
    # reverse routes learned from passing requests carry no confirmed
    # destination sequence and must not answer discoveries for it
    seq_valid: bool = False
    last_data_use: float = float("-inf")


@dataclass
class DiscoveryState:
    """Progress of one pending route discovery."""

    destination: int
    rings: tuple[int, ...]
    ring_index: int = 0
    wait_deadline: float = 0.0
    request_id: int = -1
    generation: int = 0


@dataclass
class RepairState:
    destination: int
    ttl: int
    deadline: float
    generation: int
    buffer: deque = field(default_factory=deque)


class RouteCache:
    """FIFO-evicting store of source routes, capped at a fixed entry count."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("cache capacity must be >= 1")
        self.capacity = capacity
        self._routes: deque[tuple[int, ...]] = deque()
        self._known: set[tuple[int, ...]] = set()
        self.max_seen = 0

    def __len__(self) -> int:
        return len(self._routes)

    def insert(self, route: tuple[int, ...]) -> None:
        if len(route) < 2 or len(set(route)) != len(route):
            return
        if route in self._known:
            return
        if len(self._routes) >= self.capacity:
            oldest = self._routes.popleft()
            self._known.discard(oldest)
        self._routes.append(route)
        self._known.add(route)
        self.max_seen = max(self.max_seen, len(self._routes))

    def lookup(self, here: int, dest: int) -> tuple[int, ...] | None:
        """Shortest cached sub-route from here to dest, oldest entry on ties."""
        best = None
        for route in self._routes:
            try:
                i = route.index(here)
                j = route.index(dest)
            except ValueError:
                continue
            if i < j:
                sub = route[i:j + 1]
                if best is None or len(sub) < len(best):
                    best = sub
        return best

    def purge_link(self, a: int, b: int) -> int:
        """Drop every route that traverses the (a, b) link in either direction."""
        def uses(route):
            return any((route[k] == a and route[k + 1] == b)
                       or (route[k] == b and route[k + 1] == a)
                       for k in range(len(route) - 1))

        stale = [r for r in self._routes if uses(r)]
        for r in stale:
            self._routes.remove(r)
            self._known.discard(r)
        return len(stale)


class Node:
    """Protocol state machine for a single node."""

    def __init__(self, nid: int, protocol: Protocol, variant: Variant,
                 params: ErsParams, engine, *, route_lifetime: float = 10.0,
                 queue_limit: int = 64, hello_loss_threshold: int = 2):
        self.nid = nid
        self.protocol = protocol
        self.variant = variant
        self.params = params
        self.engine = engine
        self.route_lifetime = route_lifetime
        self.queue_limit = queue_limit
        self.hello_loss_threshold = hello_loss_threshold

        self.rings = discovery_rings(protocol, variant, params)
        self.seq = 0
        self._next_req_id = 0
        self.seen_requests: set[tuple[int, int]] = set()
        self.routes: dict[int, RouteEntry] = {}
        self._last_hops: dict[int, int] = {}
        self.cache = RouteCache(params.tap_cache_size) \
            if protocol is Protocol.DSR else None
        self.pending: dict[int, DiscoveryState] = {}
        self.repairs: dict[int, RepairState] = {}
        self.queues: dict[int, deque] = {}
        self.last_heard: dict[int, float] = {}
        self._grat_sent: dict[tuple[int, int], float] = {}

    # ------------------------------------------------------------------ data

    def send_data(self, pkt: Packet, now: float) -> None:
        """Entry point for locally generated traffic."""
        pkt.info.traveled = (self.nid,)
        self._dispatch_data(pkt, now)

    def _dispatch_data(self, pkt: Packet, now: float) -> None:
        dest = pkt.dst
        if self.protocol is Protocol.DSR:
            info = pkt.info
            if not info.route or info.route[info.pos] != self.nid:
                route = self.cache.lookup(self.nid, dest)
                if route is None:
                    self._enqueue_data(dest, pkt, now)
                    return
                info.route = route
                info.pos = 0
            self._transmit_source_routed(pkt)
            return
        entry = self._valid_route(dest, now)
        if entry is not None:
            entry.valid_until = now + self.route_lifetime
            entry.last_data_use = now
            self.engine.send(self.nid, pkt, next_hop=entry.next_hop)
        elif self.nid == pkt.src:
            self._enqueue_data(dest, pkt, now)
        elif self.protocol is Protocol.AODV:
            self._start_repair(dest, self._last_hops.get(dest, 1), now, pkt)
        else:
            self.engine.drop_data(pkt, "no_route")
            self._broadcast_rerr((dest,), now)

    def _transmit_source_routed(self, pkt: Packet) -> None:
        info = pkt.info
        nxt = info.route[info.pos + 1]
        info.pos += 1
        self.engine.send(self.nid, pkt, next_hop=nxt)

    def _enqueue_data(self, dest: int, pkt: Packet, now: float) -> None:
        queue = self.queues.setdefault(dest, deque())
        if len(queue) >= self.queue_limit:
            self.engine.drop_data(queue.popleft(), "queue_overflow")
        queue.append(pkt)
        # callers only enqueue when no usable route exists, so a discovery is
        # always the drain path
        if dest not in self.pending:
            self._start_discovery(dest, now)

    def _drain_queue(self, dest: int, now: float) -> None:
        queue = self.queues.pop(dest, None)
        if not queue:
            return
        for pkt in queue:
            self._dispatch_data(pkt, now)

    # ------------------------------------------------------------- discovery

    def request_route(self, dest: int, now: float) -> None:
        """Start a discovery without queueing data (probe/measurement use)."""
        if dest not in self.pending:
            self._start_discovery(dest, now)

    def _start_discovery(self, dest: int, now: float) -> None:
        if dest in self.pending:
            return
        self.seq += 1
        state = DiscoveryState(destination=dest, rings=self.rings)
        self.pending[dest] = state
        self._emit_ring(state, now)

    def _emit_ring(self, state: DiscoveryState, now: float) -> None:
        req_id = self._next_req_id
        self._next_req_id += 1
        state.request_id = req_id
        self.seen_requests.add((self.nid, req_id))
        ttl = state.rings[state.ring_index]
        route = (self.nid,) if self.protocol is Protocol.DSR else ()
        info = RreqInfo(orig=self.nid, req_id=req_id, target=state.destination,
                        hop_count=0, ring_ttl=ttl, orig_seq=self.seq, route=route)
        pkt = Packet("RREQ", CONTROL_SIZE, self.nid, state.destination, ttl,
                     now, info)
        self.engine.send(self.nid, pkt)
        wait = ring_wait(self.protocol, self.params, state.ring_index, ttl)
        state.wait_deadline = now + wait
        state.generation += 1
        self.engine.schedule_in(wait, self._discovery_timeout,
                                state.destination, state.generation)

    def _discovery_timeout(self, dest: int, generation: int) -> None:
        state = self.pending.get(dest)
        if state is None or state.generation != generation:
            return
        now = self.engine.now
        state.ring_index += 1
        if state.ring_index >= len(state.rings):
            self._finish_discovery(dest, False, now)
        else:
            self._emit_ring(state, now)

    def _finish_discovery(self, dest: int, success: bool, now: float) -> None:
        state = self.pending.pop(dest, None)
        if state is None:
            return
        self.engine.discovery_finished(success)
        if success:
            self._drain_queue(dest, now)
        else:
            queue = self.queues.pop(dest, None)
            if queue:
                for pkt in queue:
                    self.engine.drop_data(pkt, "discovery_failed")

    # ------------------------------------------------------------ local repair

    def local_repair(self, broken_destination: int, last_hop_count: int,
                     now: float, pkt: Packet | None = None) -> None:
        """Bounded re-discovery next to a broken link (hop-by-hop AODV model only)."""
        if self.protocol is not Protocol.AODV:
            raise UnsupportedFeatureError(
                f"local repair is not defined for {self.protocol.value}")
        self._start_repair(broken_destination, last_hop_count, now, pkt)

    def _start_repair(self, dest: int, last_hop_count: int, now: float,
                      pkt: Packet | None = None) -> None:
        state = self.repairs.get(dest)
        if state is not None:
            if pkt is not None:
                state.buffer.append(pkt)
            return
        ttl = max(1, last_hop_count) + self.params.local_add_ttl
        wait = min(ring_traversal_wait(ttl, self.params),
                   self.params.net_traversal_time)
        state = RepairState(destination=dest, ttl=ttl, deadline=now + wait,
                            generation=self._next_req_id)
        if pkt is not None:
            state.buffer.append(pkt)
        self.repairs[dest] = state
        req_id = self._next_req_id
        self._next_req_id += 1
        self.seen_requests.add((self.nid, req_id))
        self.seq += 1
        info = RreqInfo(orig=self.nid, req_id=req_id, target=dest, hop_count=0,
                        ring_ttl=ttl, orig_seq=self.seq, repair=True)
        self.engine.send(self.nid, Packet("RREQ", CONTROL_SIZE, self.nid, dest,
                                          ttl, now, info))
        self.engine.schedule_in(wait, self._repair_timeout, dest, state.generation)

    def _repair_timeout(self, dest: int, generation: int) -> None:
        state = self.repairs.get(dest)
        if state is None or state.generation != generation:
            return
        now = self.engine.now
        if self._valid_route(dest, now) is not None:
            self._repair_success(dest, now)
            return
        del self.repairs[dest]
        for pkt in state.buffer:
            self.engine.drop_data(pkt, "repair_failed")
        self._broadcast_rerr((dest,), now)

    def _repair_success(self, dest: int, now: float) -> None:
        state = self.repairs.pop(dest, None)
        if state is None:
            return
        for pkt in state.buffer:
            self._dispatch_data(pkt, now)

    # -------------------------------------------------------------- reception

    def on_packet(self, pkt: Packet, frm: int, now: float) -> None:
        kind = pkt.kind
        if kind == "RREQ":
            self._handle_rreq(pkt, frm, now)
        elif kind == "RREP":
            self._handle_rrep(pkt, frm, now)
        elif kind == "RERR":
            self._handle_rerr(pkt, frm, now)
        elif kind == "HELLO":
            if self.protocol is not Protocol.DSR:
                self.last_heard[frm] = now
        elif kind == "DATA":
            self._handle_data(pkt, frm, now)

    def _handle_data(self, pkt: Packet, frm: int, now: float) -> None:
        info = pkt.info
        info.traveled = info.traveled + (self.nid,)
        if self.nid == pkt.dst:
            self.engine.data_delivered(pkt)
            return
        pkt.ttl -= 1
        if pkt.ttl <= 0:
            self.engine.drop_data(pkt, "ttl_expired")
            return
        self._dispatch_data(pkt, now)

    def _handle_rreq(self, pkt: Packet, frm: int, now: float) -> None:
        if pkt.ttl < 0:
            self.engine.protocol_error(self.nid, pkt)
            return
        info = pkt.info
        key = (info.orig, info.req_id)
        if key in self.seen_requests:
            self.engine.record_drop(self.nid, pkt, "duplicate")
            return
        self.seen_requests.add(key)
        hops_here = info.hop_count + 1

        if self.protocol is Protocol.DSR:
            accumulated = info.route + (self.nid,)
            # links are symmetric, so the reversed prefix is a usable route back
            self.cache.insert(tuple(reversed(accumulated)))
        else:
            accumulated = ()
            self._install_route(info.orig, frm, hops_here, info.orig_seq, now)

        if info.target == self.nid:
            if self.protocol is Protocol.DSR:
                self._send_rrep_source_routed(accumulated,
                                              tuple(reversed(accumulated)), now)
            else:
                self.seq += 1
                self._send_rrep(info.orig, self.nid, 0, self.seq, now)
            return

        if self.protocol is Protocol.AODV:
            entry = self._valid_route(info.target, now)
            if entry is not None and entry.seq_valid:
                self._send_rrep(info.orig, info.target, entry.hop_count,
                                entry.seq, now)
                return
        elif self.protocol is Protocol.DSR:
            sub = self.cache.lookup(self.nid, info.target)
            if sub is not None:
                full = accumulated + sub[1:]
                if len(set(full)) == len(full):
                    self._send_rrep_source_routed(
                        full, tuple(reversed(accumulated)), now)
                    return
        # the DYMO model never answers from intermediate state

        new_ttl = pkt.ttl - 1
        if new_ttl > 0 and self.engine.forward_coin():
            fwd = RreqInfo(orig=info.orig, req_id=info.req_id,
                           target=info.target, hop_count=hops_here,
                           ring_ttl=info.ring_ttl, orig_seq=info.orig_seq,
                           route=accumulated, repair=info.repair)
            self.engine.send(self.nid, Packet("RREQ", CONTROL_SIZE, info.orig,
                                              info.target, new_ttl,
                                              pkt.created_at, fwd))

    def _send_rrep(self, orig: int, target: int, hops_from_target: int,
                   target_seq: int, now: float) -> None:
        entry = self._valid_route(orig, now)
        if entry is None:
            return
        entry.valid_until = now + self.route_lifetime
        info = RrepInfo(target=target, orig=orig,
                        hops_from_target=hops_from_target,
                        target_seq=target_seq)
        pkt = Packet("RREP", CONTROL_SIZE, target, orig, 0, now, info)
        self.engine.send(self.nid, pkt, next_hop=entry.next_hop)

    def _send_rrep_source_routed(self, full_route: tuple[int, ...],
                                 return_route: tuple[int, ...], now: float,
                                 gratuitous: bool = False) -> None:
        if len(return_route) < 2:
            return
        info = RrepInfo(target=full_route[-1], orig=full_route[0],
                        hops_from_target=0, target_seq=0, route=full_route,
                        return_route=return_route, pos=1, gratuitous=gratuitous)
        pkt = Packet("RREP", CONTROL_SIZE, full_route[-1], full_route[0], 0,
                     now, info)
        self.engine.send(self.nid, pkt, next_hop=return_route[1])

    def _handle_rrep(self, pkt: Packet, frm: int, now: float) -> None:
        info = pkt.info
        if self.protocol is Protocol.DSR:
            self.cache.insert(info.route)
            if self.nid == info.orig:
                self._finish_discovery(info.target, True, now)
                return
            nxt_index = info.pos + 1
            if nxt_index < len(info.return_route):
                info.pos = nxt_index
                self.engine.send(self.nid, pkt,
                                 next_hop=info.return_route[nxt_index])
            return
        hops = info.hops_from_target + 1
        self._install_route(info.target, frm, hops, info.target_seq, now,
                            seq_valid=True)
        if info.target in self.repairs:
            self._repair_success(info.target, now)
        if self.nid == info.orig:
            self._finish_discovery(info.target, True, now)
            return
        entry = self._valid_route(info.orig, now)
        if entry is None:
            return
        entry.valid_until = now + self.route_lifetime
        fwd = RrepInfo(target=info.target, orig=info.orig,
                       hops_from_target=hops, target_seq=info.target_seq)
        self.engine.send(self.nid, Packet("RREP", CONTROL_SIZE, pkt.src,
                                          pkt.dst, 0, now, fwd),
                         next_hop=entry.next_hop)

    def _handle_rerr(self, pkt: Packet, frm: int, now: float) -> None:
        info = pkt.info
        if self.protocol is Protocol.DSR:
            if info.broken_link is not None:
                self.cache.purge_link(*info.broken_link)
            if self.nid == pkt.dst:
                for dest in info.unreachable:
                    if self.queues.get(dest) and dest not in self.pending:
                        self._start_discovery(dest, now)
                return
            nxt_index = info.pos + 1
            if nxt_index < len(info.return_route):
                info.pos = nxt_index
                self.engine.send(self.nid, pkt,
                                 next_hop=info.return_route[nxt_index])
            return
        affected = []
        for dest in info.unreachable:
            entry = self.routes.get(dest)
            if entry is not None and entry.next_hop == frm:
                del self.routes[dest]
                affected.append(dest)
        if affected:
            self._broadcast_rerr(tuple(affected), now)

    def _broadcast_rerr(self, dests: tuple[int, ...], now: float) -> None:
        info = RerrInfo(unreachable=dests)
        self.engine.send(self.nid, Packet("RERR", CONTROL_SIZE, self.nid,
                                          BROADCAST, 1, now, info))

    def _send_rerr_source_routed(self, data_pkt: Packet, broken: tuple[int, int],
                                 now: float) -> None:
        back = tuple(reversed(data_pkt.info.traveled))
        if len(back) < 2:
            return
        info = RerrInfo(unreachable=(data_pkt.dst,), broken_link=broken,
                        return_route=back, pos=1)
        self.engine.send(self.nid, Packet("RERR", CONTROL_SIZE, self.nid,
                                          data_pkt.src, 0, now, info),
                         next_hop=back[1])

    # ------------------------------------------------------------ link events

    def on_unicast_fail(self, pkt: Packet, next_hop: int, now: float) -> None:
        """The engine could not hand pkt to next_hop: the link is gone."""
        if self.protocol is Protocol.DSR:
            self.cache.purge_link(self.nid, next_hop)
            if pkt.kind == "DATA":
                self._salvage_or_drop(pkt, next_hop, now)
            return
        active = [dest for dest, entry in self.routes.items()
                  if entry.next_hop == next_hop
                  and now - entry.last_data_use <= self.route_lifetime]
        self._invalidate_routes_via(next_hop)
        if pkt.kind == "DATA":
            dest = pkt.dst
            if self.nid == pkt.src:
                self._enqueue_data(dest, pkt, now)
            elif self.protocol is Protocol.AODV:
                self._start_repair(dest, self._last_hops.get(dest, 1), now, pkt)
            else:
                self.engine.drop_data(pkt, "link_break")
                if dest not in active:
                    active.append(dest)
                self._broadcast_rerr(tuple(active), now)

    def _salvage_or_drop(self, pkt: Packet, broken_next: int, now: float) -> None:
        info = pkt.info
        dest = pkt.dst
        if self.nid == pkt.src:
            # the source simply re-resolves: cached alternative or rediscovery
            info.route = ()
            info.pos = 0
            self._dispatch_data(pkt, now)
            return
        if info.salvage_count < self.params.max_main_rexmt:
            alt = self.cache.lookup(self.nid, dest)
            if alt is not None:
                info.salvage_count += 1
                info.route = alt
                info.pos = 0
                self._transmit_source_routed(pkt)
                return
            reason = "link_break"
        else:
            reason = "salvage_exhausted"
        self.engine.drop_data(pkt, reason)
        self._send_rerr_source_routed(pkt, (self.nid, broken_next), now)

    def dsr_cache_update(self, route: tuple[int, ...]) -> None:
        """Record an observed source route, evicting the oldest at capacity."""
        if self.protocol is not Protocol.DSR:
            raise UnsupportedFeatureError(
                f"route caching is not defined for {self.protocol.value}")
        self.cache.insert(route)

    def dsr_salvage(self, pkt: Packet, broken_next: int, now: float) -> None:
        """Reroute a data packet over a cached alternative after a link break."""
        if self.protocol is not Protocol.DSR:
            raise UnsupportedFeatureError(
                f"salvaging is not defined for {self.protocol.value}")
        self._salvage_or_drop(pkt, broken_next, now)

    # -------------------------------------------------------------- overhear

    def on_overhear(self, pkt: Packet, frm: int, now: float) -> None:
        """Promiscuous reception: cache routes and shorten paths when possible."""
        if self.protocol is not Protocol.DSR:
            return
        info = pkt.info
        if pkt.kind == "RREP":
            self.cache.insert(info.route)
            return
        if pkt.kind != "DATA":
            return
        route = info.route
        if len(route) >= 2:
            self.cache.insert(route)
        sender_index = info.pos - 1
        if sender_index < 0 or sender_index >= len(route):
            return
        try:
            own_index = route.index(self.nid)
        except ValueError:
            return
        if own_index > sender_index + 1:
            key = (pkt.src, pkt.dst)
            if now - self._grat_sent.get(key, -1e9) < 1.0:
                return
            self._grat_sent[key] = now
            short = route[:sender_index + 1] + route[own_index:]
            back = (self.nid,) + tuple(reversed(route[:sender_index + 1]))
            self._send_rrep_source_routed(short, back, now, gratuitous=True)

    def dsr_gratuitous_rrep(self, pkt: Packet, frm: int, now: float) -> None:
        if self.protocol is not Protocol.DSR:
            raise UnsupportedFeatureError(
                f"gratuitous replies are not defined for {self.protocol.value}")
        self.on_overhear(pkt, frm, now)

    # ----------------------------------------------------------------- hello

    def on_hello_tick(self, now: float) -> None:
        """Broadcast a hello and declare neighbors silent too long broken."""
        if self.protocol is Protocol.DSR:
            return
        self.engine.send(self.nid, Packet("HELLO", CONTROL_SIZE, self.nid,
                                          BROADCAST, 1, now, None))
        silence = self.hello_loss_threshold * self.params.hello_interval
        broken = [nbr for nbr, heard in self.last_heard.items()
                  if now - heard > silence]
        for nbr in broken:
            del self.last_heard[nbr]
            # only routes that carried data recently are worth maintaining;
            # reverse routes left behind by passing floods just expire
            active = [dest for dest, entry in self.routes.items()
                      if entry.next_hop == nbr
                      and now - entry.last_data_use <= self.route_lifetime]
            self._invalidate_routes_via(nbr)
            if self.protocol is Protocol.AODV:
                for dest in active:
                    self._start_repair(dest, self._last_hops.get(dest, 1), now)
            elif active:
                self._broadcast_rerr(tuple(active), now)

    # ---------------------------------------------------------------- routes

    def _valid_route(self, dest: int, now: float) -> RouteEntry | None:
        entry = self.routes.get(dest)
        if entry is None:
            return None
        if now >= entry.valid_until:
            del self.routes[dest]
            return None
        return entry

    def _install_route(self, dest: int, next_hop: int, hops: int, seq: int,
                       now: float, seq_valid: bool = False) -> None:
        if dest == self.nid:
            return
        current = self.routes.get(dest)
        if current is not None and now < current.valid_until \
                and not (seq_valid and not current.seq_valid):
            if seq < current.seq:
                return
            if seq == current.seq and hops > current.hop_count:
                return
        last_use = current.last_data_use if current is not None else float("-inf")
        self.routes[dest] = RouteEntry(destination=dest, next_hop=next_hop,
                                       hop_count=hops,
                                       valid_until=now + self.route_lifetime,
                                       seq=seq, seq_valid=seq_valid,
                                       last_data_use=last_use)
        self._last_hops[dest] = hops

    def _invalidate_routes_via(self, next_hop: int) -> list[int]:
        affected = [dest for dest, entry in self.routes.items()
                    if entry.next_hop == next_hop]
        for dest in affected:
            del self.routes[dest]
        return affected

    def pending_data_packets(self) -> list[Packet]:
        """Every data packet currently parked in this node (for conservation)."""
        parked = []
        for queue in self.queues.values():
            parked.extend(queue)
        for repair in self.repairs.values():
            parked.extend(repair.buffer)
        return parked
