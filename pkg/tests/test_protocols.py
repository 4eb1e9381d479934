"""Protocol state-machine tests driven by a recording fake engine."""

import pytest

from ringsim import Protocol, UnsupportedFeatureError, Variant, default_params
from ringsim.packets import DataInfo, Packet, RreqInfo
from ringsim.protocols import Node, RouteCache, discovery_rings, ring_wait


class FakeEngine:
    def __init__(self):
        self.now = 0.0
        self.sent = []        # (sender, packet, next_hop)
        self.timers = []      # (delay, fn, args)
        self.data_drops = []  # (packet, reason)
        self.delivered = []
        self.finished = []    # success flags
        self.errors = 0
        self.other_drops = []

    def send(self, sender, pkt, next_hop=None):
        self.sent.append((sender, pkt, next_hop))

    def schedule_in(self, delay, fn, *args):
        self.timers.append((delay, fn, args))

    def forward_coin(self):
        return True

    def data_delivered(self, pkt):
        pkt.info.state = "delivered"
        self.delivered.append(pkt)

    def drop_data(self, pkt, reason):
        pkt.info.state = "dropped"
        self.data_drops.append((pkt, reason))

    def discovery_finished(self, success):
        self.finished.append(success)

    def protocol_error(self, node, pkt):
        self.errors += 1

    def record_drop(self, node, pkt, reason):
        self.other_drops.append((node, pkt, reason))

    def sent_kinds(self):
        return [pkt.kind for _, pkt, _ in self.sent]


def make_node(protocol, variant, nid=0):
    engine = FakeEngine()
    params = default_params(protocol, variant)
    node = Node(nid, protocol, variant, params, engine)
    return node, engine


def data_packet(src, dst, uid=0):
    return Packet("DATA", 512, src, dst, 64, 0.0, DataInfo(uid=uid, flow=0))


def rreq_packet(orig, target, req_id, ttl, hop_count=0, route=(), orig_seq=1,
                ring_ttl=None):
    info = RreqInfo(orig=orig, req_id=req_id, target=target,
                    hop_count=hop_count,
                    ring_ttl=ring_ttl if ring_ttl is not None else ttl,
                    orig_seq=orig_seq, route=route)
    return Packet("RREQ", 64, orig, target, ttl, 0.0, info)


# ------------------------------------------------------------ ring sequences

def test_discovery_rings_extend_dsr_retries():
    params = default_params(Protocol.DSR, Variant.ERS1)
    assert discovery_rings(Protocol.DSR, Variant.ERS1, params) == (1, 255, 255, 255)
    params = default_params(Protocol.AODV, Variant.ERS1)
    assert discovery_rings(Protocol.AODV, Variant.ERS1, params) == (2, 4, 6, 35, 35, 35)


def test_ring_wait_values():
    aodv = default_params(Protocol.AODV, Variant.ERS1)
    assert ring_wait(Protocol.AODV, aodv, 0, 2) == 0.32
    # the network traversal budget caps deep rings
    assert ring_wait(Protocol.AODV, aodv, 3, 35) == pytest.approx(2.96)
    aodv2 = default_params(Protocol.AODV, Variant.ERS2)
    assert ring_wait(Protocol.AODV, aodv2, 3, 35) == 1.1
    dsr = default_params(Protocol.DSR, Variant.ERS1)
    assert [ring_wait(Protocol.DSR, dsr, i, 255) for i in range(3)] \
        == [0.030, 0.060, 0.120]


# ----------------------------------------------------------------- discovery

def test_initiate_discovery_first_ring():
    node, engine = make_node(Protocol.AODV, Variant.ERS1)
    node.send_data(data_packet(0, 7), 0.0)
    assert engine.sent_kinds() == ["RREQ"]
    _, rreq, next_hop = engine.sent[0]
    assert next_hop is None
    assert rreq.ttl == 2
    assert rreq.info.ring_ttl == 2
    delay, _, _ = engine.timers[0]
    assert delay == 0.32
    assert node.pending[7].wait_deadline == 0.32


def test_initiate_discovery_dsr_enhanced():
    node, engine = make_node(Protocol.DSR, Variant.ERS2)
    node.send_data(data_packet(0, 7), 0.0)
    _, rreq, _ = engine.sent[0]
    assert rreq.ttl == 3
    assert engine.timers[0][0] == 0.09
    assert rreq.info.route == (0,)


def test_pending_discovery_coalesces():
    node, engine = make_node(Protocol.AODV, Variant.ERS1)
    node.send_data(data_packet(0, 7, uid=0), 0.0)
    node.send_data(data_packet(0, 7, uid=1), 0.1)
    assert engine.sent_kinds().count("RREQ") == 1
    assert len(node.queues[7]) == 2


def test_timeout_walks_schedule():
    node, engine = make_node(Protocol.AODV, Variant.ERS1)
    node.request_route(7, 0.0)
    engine.now = 0.32
    delay, fn, args = engine.timers[0]
    fn(*args)
    assert [pkt.ttl for _, pkt, _ in engine.sent] == [2, 4]


def test_timeout_dsr_wait_doubles():
    node, engine = make_node(Protocol.DSR, Variant.ERS1)
    node.request_route(7, 0.0)
    engine.now = 0.03
    delay, fn, args = engine.timers[0]
    assert delay == 0.030
    fn(*args)
    assert engine.sent[1][1].ttl == 255
    assert engine.timers[1][0] == 0.060


def test_schedule_exhaustion_drops_queue():
    node, engine = make_node(Protocol.AODV, Variant.ERS1)
    node.send_data(data_packet(0, 7), 0.0)
    for step in range(len(node.rings)):
        delay, fn, args = engine.timers[step]
        engine.now += delay
        fn(*args)
    assert engine.finished == [False]
    assert [reason for _, reason in engine.data_drops] == ["discovery_failed"]
    assert 7 not in node.pending


def test_stale_timeout_generation_ignored():
    node, engine = make_node(Protocol.AODV, Variant.ERS1)
    node.request_route(7, 0.0)
    _, fn, args = engine.timers[0]
    fn(*args)   # ring 2 emitted, generation bumped
    fn(*args)   # stale replay of the first timer must do nothing
    assert len([k for k in engine.sent_kinds() if k == "RREQ"]) == 2


# -------------------------------------------------------------------- RREQ

def test_duplicate_rreq_dropped():
    node, engine = make_node(Protocol.AODV, Variant.ERS1, nid=5)
    node.on_packet(rreq_packet(0, 9, req_id=3, ttl=4), frm=0, now=0.0)
    node.on_packet(rreq_packet(0, 9, req_id=3, ttl=4), frm=2, now=0.1)
    assert engine.sent_kinds() == ["RREQ"]
    assert [r for _, _, r in engine.other_drops] == ["duplicate"]


def test_rreq_ttl_gates_rebroadcast():
    node, engine = make_node(Protocol.AODV, Variant.ERS1, nid=5)
    node.on_packet(rreq_packet(0, 9, req_id=1, ttl=1), frm=0, now=0.0)
    assert engine.sent == []
    node.on_packet(rreq_packet(0, 9, req_id=2, ttl=2), frm=0, now=0.0)
    assert engine.sent[0][1].ttl == 1
    assert engine.sent[0][1].info.hop_count == 1


def test_negative_ttl_is_protocol_error():
    node, engine = make_node(Protocol.AODV, Variant.ERS1, nid=5)
    node.on_packet(rreq_packet(0, 9, req_id=1, ttl=-1), frm=0, now=0.0)
    assert engine.errors == 1
    assert engine.sent == []


def test_destination_replies_with_rrep():
    node, engine = make_node(Protocol.AODV, Variant.ERS1, nid=9)
    node.on_packet(rreq_packet(0, 9, req_id=1, ttl=4), frm=0, now=0.0)
    kinds = engine.sent_kinds()
    assert kinds == ["RREP"]
    _, rrep, next_hop = engine.sent[0]
    assert next_hop == 0          # reverse route learned from the request
    assert rrep.info.hops_from_target == 0


def test_dsr_destination_reply_carries_route():
    node, engine = make_node(Protocol.DSR, Variant.ERS1, nid=9)
    node.on_packet(rreq_packet(0, 9, req_id=1, ttl=4, hop_count=1, route=(0, 4)),
                   frm=4, now=0.0)
    _, rrep, next_hop = engine.sent[0]
    assert rrep.kind == "RREP"
    assert rrep.info.route == (0, 4, 9)
    assert rrep.info.return_route == (9, 4, 0)
    assert next_hop == 4


def test_aodv_intermediate_replies_only_with_confirmed_seq():
    node, engine = make_node(Protocol.AODV, Variant.ERS1, nid=5)
    node._install_route(9, next_hop=6, hops=2, seq=4, now=0.0)  # reverse-learned
    node.on_packet(rreq_packet(0, 9, req_id=1, ttl=4), frm=0, now=0.0)
    assert engine.sent_kinds() == ["RREQ"]  # forwarded, not answered

    node2, engine2 = make_node(Protocol.AODV, Variant.ERS1, nid=5)
    node2._install_route(9, next_hop=6, hops=2, seq=4, now=0.0, seq_valid=True)
    node2.on_packet(rreq_packet(0, 9, req_id=1, ttl=4), frm=0, now=0.0)
    assert engine2.sent_kinds() == ["RREP"]


def test_dymo_intermediate_never_replies():
    node, engine = make_node(Protocol.DYMO, Variant.ERS1, nid=5)
    node._install_route(9, next_hop=6, hops=2, seq=4, now=0.0, seq_valid=True)
    node.on_packet(rreq_packet(0, 9, req_id=1, ttl=4), frm=0, now=0.0)
    assert engine.sent_kinds() == ["RREQ"]


# -------------------------------------------------------------- local repair

def test_local_repair_ttl_uses_last_hop_count():
    node, engine = make_node(Protocol.AODV, Variant.ERS1, nid=3)
    node.local_repair(9, last_hop_count=3, now=1.0)
    assert engine.sent[0][1].ttl == 5          # hop count + extra ring margin
    node2, engine2 = make_node(Protocol.AODV, Variant.ERS2, nid=3)
    node2.local_repair(9, last_hop_count=3, now=1.0)
    assert engine2.sent[0][1].ttl == 4


def test_local_repair_rejected_off_protocol():
    for protocol in (Protocol.DSR, Protocol.DYMO):
        node, _ = make_node(protocol, Variant.ERS1, nid=3)
        with pytest.raises(UnsupportedFeatureError):
            node.local_repair(9, last_hop_count=3, now=1.0)


def test_repair_timeout_reports_upstream():
    node, engine = make_node(Protocol.AODV, Variant.ERS1, nid=3)
    pkt = data_packet(0, 9)
    node.local_repair(9, last_hop_count=2, now=1.0, pkt=pkt)
    delay, fn, args = engine.timers[0]
    engine.now = 1.0 + delay
    fn(*args)
    assert [reason for _, reason in engine.data_drops] == ["repair_failed"]
    assert engine.sent_kinds() == ["RREQ", "RERR"]


# -------------------------------------------------------------- route cache

def test_cache_fifo_eviction():
    cache = RouteCache(3)
    for route in ((0, 1), (0, 2), (0, 3), (0, 4)):
        cache.insert(route)
    assert len(cache) == 3
    assert cache.lookup(0, 1) is None
    assert cache.lookup(0, 4) == (0, 4)
    assert cache.max_seen == 3


def test_cache_lookup_prefers_short_subroute():
    cache = RouteCache(10)
    cache.insert((0, 1, 2, 3, 9))
    cache.insert((0, 5, 9))
    assert cache.lookup(0, 9) == (0, 5, 9)
    assert cache.lookup(1, 9) == (1, 2, 3, 9)
    assert cache.lookup(9, 0) is None


def test_cache_purge_link():
    cache = RouteCache(10)
    cache.insert((0, 1, 2, 3))
    cache.insert((0, 4, 3))
    assert cache.purge_link(2, 1) == 1
    assert cache.lookup(0, 3) == (0, 4, 3)


def test_cache_rejects_invalid_routes():
    cache = RouteCache(4)
    cache.insert((0,))
    cache.insert((0, 1, 0))
    assert len(cache) == 0


# -------------------------------------------------------------------- hello

def test_hello_declares_silent_neighbor_broken():
    node, engine = make_node(Protocol.AODV, Variant.ERS1, nid=3)
    node.last_heard[8] = 0.0
    node._install_route(9, next_hop=8, hops=2, seq=1, now=2.4)
    node.routes[9].last_data_use = 2.4
    node.on_hello_tick(2.5)
    assert engine.sent_kinds() == ["HELLO", "RREQ"]   # repair follows the break
    assert 8 not in node.last_heard
    assert 9 not in node.routes


def test_hello_keeps_recent_neighbor():
    node, engine = make_node(Protocol.AODV, Variant.ERS1, nid=3)
    node.last_heard[8] = 1.6
    node.on_hello_tick(2.5)
    assert engine.sent_kinds() == ["HELLO"]
    assert 8 in node.last_heard


def test_dsr_sends_no_hellos():
    node, engine = make_node(Protocol.DSR, Variant.ERS1, nid=3)
    node.on_hello_tick(2.5)
    assert engine.sent == []


# ---------------------------------------------------- salvage and gratuitous

def _dsr_data(route, pos, src=0, dst=3, salvage=0):
    info = DataInfo(uid=1, flow=0, route=route, pos=pos,
                    traveled=route[:pos + 1], salvage_count=salvage)
    return Packet("DATA", 512, src, dst, 64, 0.0, info)


def test_salvage_uses_cached_alternative():
    node, engine = make_node(Protocol.DSR, Variant.ERS1, nid=1)
    node.cache.insert((1, 4, 3))
    pkt = _dsr_data((0, 1, 2, 3), pos=1)
    node.on_unicast_fail(pkt, next_hop=2, now=1.0)
    sender, sent, next_hop = engine.sent[0]
    assert sent is pkt and next_hop == 4
    assert pkt.info.route == (1, 4, 3)
    assert pkt.info.salvage_count == 1


def test_salvage_exhausted_drops_and_reports():
    node, engine = make_node(Protocol.DSR, Variant.ERS1, nid=1)
    node.cache.insert((1, 4, 3))
    pkt = _dsr_data((0, 1, 2, 3), pos=1, salvage=2)
    node.on_unicast_fail(pkt, next_hop=2, now=1.0)
    assert [r for _, r in engine.data_drops] == ["salvage_exhausted"]
    kinds = engine.sent_kinds()
    assert kinds == ["RERR"]
    _, rerr, next_hop = engine.sent[0]
    assert rerr.info.broken_link == (1, 2)
    assert next_hop == 0


def test_link_purge_on_failure():
    node, engine = make_node(Protocol.DSR, Variant.ERS1, nid=1)
    node.cache.insert((0, 1, 2, 3))
    pkt = _dsr_data((0, 1, 2, 3), pos=1)
    node.on_unicast_fail(pkt, next_hop=2, now=1.0)
    assert node.cache.lookup(1, 3) is None


def test_gratuitous_reply_shortens_route():
    node, engine = make_node(Protocol.DSR, Variant.ERS1, nid=3)
    pkt = _dsr_data((0, 1, 2, 3, 4), pos=1, dst=4)  # node 0 just sent to 1
    node.on_overhear(pkt, frm=0, now=1.0)
    _, rrep, next_hop = engine.sent[0]
    assert rrep.kind == "RREP"
    assert rrep.info.gratuitous
    assert rrep.info.route == (0, 3, 4)
    assert rrep.info.return_route == (3, 0)
    assert next_hop == 0


def test_gratuitous_reply_rate_limited():
    node, engine = make_node(Protocol.DSR, Variant.ERS1, nid=3)
    pkt = _dsr_data((0, 1, 2, 3, 4), pos=1, dst=4)
    node.on_overhear(pkt, frm=0, now=1.0)
    node.on_overhear(pkt, frm=0, now=1.5)
    assert len(engine.sent) == 1
    node.on_overhear(pkt, frm=0, now=2.5)
    assert len(engine.sent) == 2


def test_overhear_ignored_off_protocol():
    node, engine = make_node(Protocol.AODV, Variant.ERS1, nid=3)
    pkt = _dsr_data((0, 1, 2, 3, 4), pos=1, dst=4)
    node.on_overhear(pkt, frm=0, now=1.0)
    assert engine.sent == []


def test_cache_update_surface():
    node, _ = make_node(Protocol.DSR, Variant.ERS2, nid=1)
    node.dsr_cache_update((1, 2, 3))
    assert node.cache.lookup(1, 3) == (1, 2, 3)
    aodv, _ = make_node(Protocol.AODV, Variant.ERS1, nid=1)
    with pytest.raises(UnsupportedFeatureError):
        aodv.dsr_cache_update((1, 2, 3))
