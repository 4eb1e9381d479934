"""Deterministic discrete-event engine with a unit-disk broadcast link model.

One engine instance simulates one scenario cell: a fixed protocol and ring
variant, one seed, one pause time.  Broadcasts reach every current unit-disk
neighbor after serialization plus a per-hop processing latency; there is no
MAC contention, so the only losses come from mobility and the rebroadcast
coin.  Identical (config, seed) pairs produce bit-identical metrics.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field

from .analytics import ErsParams, Protocol, Variant, default_params
from .packets import CONTROL_KINDS, DATA_SIZE, DataInfo, Packet
from .protocols import Node
from .topology import (
    Arena,
    Graph,
    generate_topology,
    init_waypoint,
    unit_disk_neighbors,
    waypoint_step,
)


@dataclass(frozen=True)
class LinkModel:
    """2 Mbps broadcast links: delay = serialization + per-hop processing."""

    bandwidth: float = 2_000_000.0
    processing_delay: float = 0.001
    p_s: float = 1.0

    def delay(self, size: int) -> float:
        return size * 8 / self.bandwidth + self.processing_delay


@dataclass(frozen=True)
class RunConfig:
    protocol: Protocol = Protocol.AODV
    variant: Variant = Variant.ERS1
    n_nodes: int = 50
    arena: Arena = Arena(1000.0, 1000.0, 250.0)
    v_max: float = 30.0
    pause_time: float = 0.0
    duration: float = 300.0
    warmup: float = 0.0
    traffic_pairs: int = 10
    traffic_rate: float = 4.0
    packet_size: int = DATA_SIZE
    p_s: float = 1.0
    seed: int = 1
    trace: bool = False
    params: ErsParams | None = None
    bandwidth: float = 2_000_000.0
    hop_latency: float = 0.001
    mobility_tick: float = 0.1
    route_lifetime: float = 10.0
    queue_limit: int = 64
    data_hop_limit: int = 64

    def __post_init__(self):
        problems = []
        if self.n_nodes < 1:
            problems.append("n_nodes must be >= 1")
        if self.duration <= 0:
            problems.append("duration must be > 0")
        if not 0 <= self.warmup < self.duration:
            problems.append("warmup must lie in [0, duration)")
        if self.traffic_pairs < 0:
            problems.append("traffic_pairs must be >= 0")
        if self.traffic_pairs > 0 and self.n_nodes < 2:
            problems.append("traffic_pairs needs at least 2 nodes")
        if self.traffic_rate <= 0:
            problems.append("traffic_rate must be > 0")
        if self.packet_size < 1:
            problems.append("packet_size must be >= 1")
        if not 0.0 <= self.p_s <= 1.0:
            problems.append("p_s must lie in [0, 1]")
        if self.v_max < 0:
            problems.append("v_max must be >= 0")
        if self.pause_time < 0:
            problems.append("pause_time must be >= 0")
        if self.bandwidth <= 0:
            problems.append("bandwidth must be > 0")
        if self.hop_latency < 0:
            problems.append("hop_latency must be >= 0")
        if self.mobility_tick <= 0:
            problems.append("mobility_tick must be > 0")
        if self.queue_limit < 1:
            problems.append("queue_limit must be >= 1")
        if self.data_hop_limit < 1:
            problems.append("data_hop_limit must be >= 1")
        if problems:
            raise ValueError("invalid run config: " + "; ".join(problems))


@dataclass
class MetricsRecord:
    """Counters a run accumulates; metric values are derived afterwards."""

    data_sent: int = 0
    data_delivered: int = 0
    data_bytes_delivered: int = 0
    delays: list = field(default_factory=list)
    control_tx: dict = field(default_factory=dict)   # packet kind -> sends
    drops: dict = field(default_factory=dict)        # reason -> count
    discovery_success: int = 0
    discovery_fail: int = 0
    protocol_errors: int = 0
    data_inflight_end: int = 0
    rreq_tx: dict = field(default_factory=dict)      # (orig, req_id) -> sends

    @property
    def control_total(self) -> int:
        return sum(self.control_tx.get(kind, 0) for kind in CONTROL_KINDS)


def compute_throughput(metrics: MetricsRecord, duration: float) -> float:
    """Delivered payload bits per second over the measured window."""
    if duration <= 0:
        raise ValueError("duration must be > 0")
    return metrics.data_bytes_delivered * 8 / duration


def compute_e2ed(metrics: MetricsRecord) -> float | None:
    """Mean end-to-end delay of delivered data packets; None when undefined."""
    if not metrics.delays:
        return None
    return sum(metrics.delays) / len(metrics.delays)


def compute_nrl(metrics: MetricsRecord) -> float | None:
    """Control transmissions (per hop) per delivered data packet; None when undefined."""
    if metrics.data_delivered == 0:
        return None
    return metrics.control_total / metrics.data_delivered


class Engine:
    """Single-threaded event loop owning every node's protocol state."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.now = 0.0
        self._heap: list = []
        self._seq = 0
        self.link = LinkModel(config.bandwidth, config.hop_latency, config.p_s)
        self.params = config.params or default_params(config.protocol,
                                                      config.variant)
        self.metrics = MetricsRecord()
        self.trace: list[tuple] | None = [] if config.trace else None

        seed = config.seed
        self._rng_mobility = random.Random(f"{seed}:mobility")
        self._rng_traffic = random.Random(f"{seed}:traffic")
        self._rng_forward = random.Random(f"{seed}:forward")
        self._rng_proto = random.Random(f"{seed}:proto")

        self.graph0: Graph = generate_topology(seed, config.n_nodes, config.arena)
        self._positions = list(self.graph0.positions)
        self._set_neighbors([list(row) for row in self.graph0.neighbors])

        self.nodes = [
            Node(i, config.protocol, config.variant, self.params, self,
                 route_lifetime=config.route_lifetime,
                 queue_limit=config.queue_limit)
            for i in range(config.n_nodes)
        ]
        self._uid = 0
        if config.v_max > 0:
            self._waypoints = [
                init_waypoint(pos, config.arena, config.v_max, self._rng_mobility)
                for pos in self._positions
            ]
        else:
            self._waypoints = None

    # ------------------------------------------------------------- scheduling

    def schedule_in(self, delay: float, fn, *args) -> None:
        if delay < 0:
            raise ValueError("cannot schedule into the past")
        heapq.heappush(self._heap, (self.now + delay, self._seq, fn, args))
        self._seq += 1

    def _set_neighbors(self, lists: list[list[int]]) -> None:
        self.neighbor_lists = lists
        self.neighbor_sets = [set(row) for row in lists]

    def remove_link(self, a: int, b: int) -> None:
        """Force a link down (test hook; mobility recompute would undo it)."""
        for u, v in ((a, b), (b, a)):
            if v in self.neighbor_sets[u]:
                self.neighbor_sets[u].discard(v)
                self.neighbor_lists[u].remove(v)

    # -------------------------------------------------------------- main loop

    def run(self) -> MetricsRecord:
        cfg = self.config
        if self._waypoints is not None:
            self.schedule_in(cfg.mobility_tick, self._mobility_tick)
        if cfg.protocol is not Protocol.DSR:
            for node in self.nodes:
                offset = self._rng_proto.uniform(0, self.params.hello_interval)
                self.schedule_in(offset, self._hello_tick, node.nid)
        for flow in range(cfg.traffic_pairs):
            src = self._rng_traffic.randrange(cfg.n_nodes)
            dst = self._rng_traffic.randrange(cfg.n_nodes - 1)
            if dst >= src:
                dst += 1
            interval = 1.0 / cfg.traffic_rate
            offset = self._rng_traffic.uniform(0, interval)
            self.schedule_in(offset, self._traffic_tick, flow, src, dst, interval)

        heap = self._heap
        while heap and heap[0][0] <= cfg.duration:
            self.now, _, fn, args = heapq.heappop(heap)
            fn(*args)
        self.now = cfg.duration
        self._account_in_flight()
        return self.metrics

    def _account_in_flight(self) -> None:
        active = set()
        warmup = self.config.warmup
        for node in self.nodes:
            for pkt in node.pending_data_packets():
                info = pkt.info
                if info.state == "active" and pkt.created_at >= warmup:
                    active.add(info.uid)
        for _, _, fn, args in self._heap:
            # bound methods are re-created per access, so compare the function
            if getattr(fn, "__func__", None) is Engine._deliver:
                pkt = args[1]
                if pkt.kind == "DATA" and pkt.info.state == "active" \
                        and pkt.created_at >= warmup:
                    active.add(pkt.info.uid)
        self.metrics.data_inflight_end = len(active)

    # ------------------------------------------------------------ tick events

    def _mobility_tick(self) -> None:
        cfg = self.config
        states = self._waypoints
        for i, state in enumerate(states):
            states[i] = waypoint_step(state, cfg.mobility_tick, cfg.pause_time,
                                      cfg.v_max, cfg.arena, self._rng_mobility)
        self._positions = [s.position for s in states]
        self._set_neighbors(unit_disk_neighbors(self._positions,
                                                cfg.arena.radio_range))
        self.schedule_in(cfg.mobility_tick, self._mobility_tick)

    def _hello_tick(self, nid: int) -> None:
        self.nodes[nid].on_hello_tick(self.now)
        self.schedule_in(self.params.hello_interval, self._hello_tick, nid)

    def _traffic_tick(self, flow: int, src: int, dst: int, interval: float) -> None:
        pkt = Packet("DATA", self.config.packet_size, src, dst,
                     self.config.data_hop_limit, self.now,
                     DataInfo(uid=self._uid, flow=flow))
        self._uid += 1
        if pkt.created_at >= self.config.warmup:
            self.metrics.data_sent += 1
        self.nodes[src].send_data(pkt, self.now)
        self.schedule_in(interval, self._traffic_tick, flow, src, dst, interval)

    # ---------------------------------------------------------- transmissions

    def send(self, sender: int, pkt: Packet, next_hop: int | None = None) -> None:
        now = self.now
        if pkt.kind != "DATA" and now >= self.config.warmup:
            self.metrics.control_tx[pkt.kind] = \
                self.metrics.control_tx.get(pkt.kind, 0) + 1
            if pkt.kind == "RREQ":
                key = (pkt.info.orig, pkt.info.req_id)
                self.metrics.rreq_tx[key] = self.metrics.rreq_tx.get(key, 0) + 1
        if self.trace is not None:
            self._trace("send", sender, pkt, self._send_tag(pkt))
        delay = self.link.delay(pkt.size)
        if next_hop is None:
            for nb in self.neighbor_lists[sender]:
                self.schedule_in(delay, self._deliver, nb, pkt, sender)
            return
        if next_hop in self.neighbor_sets[sender]:
            if self.config.protocol is Protocol.DSR \
                    and pkt.kind in ("DATA", "RREP"):
                # promiscuous listeners must run before the next hop forwards
                for nb in self.neighbor_lists[sender]:
                    if nb != next_hop:
                        self.schedule_in(delay, self._overhear, nb, pkt, sender)
            self.schedule_in(delay, self._deliver, next_hop, pkt, sender)
        else:
            if self.trace is not None:
                self._trace("drop", sender, pkt, "link_fail")
            self.nodes[sender].on_unicast_fail(pkt, next_hop, now)

    @staticmethod
    def _send_tag(pkt: Packet) -> str:
        if pkt.kind == "RREQ":
            info = pkt.info
            return f"q{info.orig}.{info.req_id}r{info.ring_ttl}"
        return "-"

    def _deliver(self, node_id: int, pkt: Packet, frm: int) -> None:
        if self.trace is not None:
            self._trace("recv", node_id, pkt, "-")
        self.nodes[node_id].on_packet(pkt, frm, self.now)

    def _overhear(self, node_id: int, pkt: Packet, frm: int) -> None:
        self.nodes[node_id].on_overhear(pkt, frm, self.now)

    # ------------------------------------------------------- node-facing hooks

    def forward_coin(self) -> bool:
        return self.config.p_s >= 1.0 \
            or self._rng_forward.random() < self.config.p_s

    def data_delivered(self, pkt: Packet) -> None:
        info = pkt.info
        if info.state != "active":
            return
        info.state = "delivered"
        if pkt.created_at >= self.config.warmup:
            self.metrics.data_delivered += 1
            self.metrics.data_bytes_delivered += pkt.size
            self.metrics.delays.append(self.now - pkt.created_at)

    def drop_data(self, pkt: Packet, reason: str) -> None:
        info = pkt.info
        if info.state != "active":
            return
        info.state = "dropped"
        if pkt.created_at >= self.config.warmup:
            self.metrics.drops[reason] = self.metrics.drops.get(reason, 0) + 1
        if self.trace is not None:
            self._trace("drop", pkt.dst, pkt, reason)

    def record_drop(self, node: int, pkt: Packet, reason: str) -> None:
        if self.trace is not None:
            self._trace("drop", node, pkt, reason)

    def protocol_error(self, node: int, pkt: Packet) -> None:
        self.metrics.protocol_errors += 1
        if self.trace is not None:
            self._trace("drop", node, pkt, "bad_ttl")

    def discovery_finished(self, success: bool) -> None:
        if self.now < self.config.warmup:
            return
        if success:
            self.metrics.discovery_success += 1
        else:
            self.metrics.discovery_fail += 1

    # ------------------------------------------------------------------ trace

    def _trace(self, kind: str, node: int, pkt: Packet, reason: str) -> None:
        self.trace.append((self.now, kind, node, pkt.kind, pkt.src, pkt.dst,
                           pkt.ttl, reason))


def format_trace(records: list[tuple]) -> str:
    """Stable text form: `time kind node pkt_kind src dst ttl reason` per line."""
    lines = [
        f"{t:12.6f} {kind} {node} {pkt_kind} {src} {dst} {ttl} {reason}"
        for t, kind, node, pkt_kind, src, dst, ttl, reason in records
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def run(config: RunConfig) -> MetricsRecord:
    """Build an engine, run it to completion, and return its metrics."""
    return Engine(config).run()
