"""Tick-driven simulation loop: mobility, routing, traffic, energy, delay."""

import random
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import mobility as mob
from .config import ScenarioConfig
from .energy import (DeadNodeError, EnergyLedger, PowerModel, airtime,
                     charge_beacon_round, charge_route_discovery,
                     tx_power)
from .protocols import select_route
from .topology import snapshot

SPEED_OF_LIGHT = 3.0e8  # m/s


@dataclass
class Session:
    id: int
    source: int
    destination: int
    start: float
    rate: float = 4.0          # packets per second
    packet_size: int = 512     # bytes


@dataclass
class PacketRecord:
    session: int
    seq: int
    created_at: float
    delivered_at: float = None     # None when dropped
    hops_traversed: int = 0
    buffering: float = 0.0         # route-acquisition wait, seconds
    base_service: float = 0.0      # sum of per-hop airtimes
    contention_service: float = 0.0  # sum of per-hop airtime * contention count
    propagation: float = 0.0

    def service(self, kappa):
        return self.base_service + kappa * self.contention_service

    def total_delay(self, kappa):
        return self.buffering + self.service(kappa) + self.propagation

    def delay_components(self, kappa):
        """(buffering, queuing+transmission, propagation) seconds."""
        return (self.buffering, self.service(kappa), self.propagation)

    @property
    def delivered(self):
        return self.delivered_at is not None


@dataclass
class RunResult:
    config: ScenarioConfig
    ledger: EnergyLedger
    packets: list
    routes: list
    sessions: list
    first_failure_time: float = None
    end_time: float = 0.0


def make_sessions(config, rng):
    lo, hi = config.start_window
    sessions = []
    for sid in range(config.session_count):
        s = rng.randrange(config.node_count)
        d = rng.randrange(config.node_count)
        while d == s:
            d = rng.randrange(config.node_count)
        sessions.append(Session(id=sid, source=s, destination=d,
                                start=rng.uniform(lo, hi), rate=config.cbr_rate,
                                packet_size=config.packet_size))
    return sessions


def discovery_latency(hops, model, forwarding_overhead=1.0e-3):
    """Flood-out plus RREP-back latency for a freshly found route."""
    if hops < 1:
        raise ValueError("route must have at least one hop")
    return 2.0 * hops * (airtime(model.rreq_base_bytes, model) + forwarding_overhead)


def hop_contention(snap, transmitters, u, v, radius):
    """Concurrent transmitters (other than the hop's own endpoints) within
    the contention radius of either endpoint."""
    if len(transmitters) == 0:
        return 0
    near = (snap.dist[u, transmitters] <= radius) | (snap.dist[v, transmitters] <= radius)
    near &= (transmitters != u) & (transmitters != v)
    return int(np.count_nonzero(near))


def _exchange_airtime(model):
    return airtime(model.data_bytes + model.rts_bytes + model.cts_bytes
                   + model.ack_bytes, model)


def _service_kernel(tails, heads, snap, tx, dist_to_tx, model, exchange):
    hop_d = snap.dist[tails, heads]
    prop = float(hop_d.sum()) / SPEED_OF_LIGHT
    base = exchange * len(tails)
    cont = 0.0
    if len(tx):
        for idx in range(len(tails)):
            u, v = tails[idx], heads[idx]
            radius = hop_d[idx] if model.tpc else snap.r
            near = (dist_to_tx[u] <= radius) | (dist_to_tx[v] <= radius)
            near &= (tx != u) & (tx != v)
            cont += exchange * float(np.count_nonzero(near))
    return base, cont, prop


def service_components(route, snap, transmitters, model):
    """Per-hop (airtime sum, contention-weighted airtime sum, propagation)."""
    tails = np.asarray(route.nodes[:-1])
    heads = np.asarray(route.nodes[1:])
    tx = np.asarray(transmitters, dtype=int)
    dist_to_tx = snap.dist[:, tx] if len(tx) else None
    return _service_kernel(tails, heads, snap, tx, dist_to_tx, model,
                           _exchange_airtime(model))


def packet_delay(route, snap, discovery_wait, model, kappa, transmitters=()):
    """End-to-end delay of one packet over a live route."""
    transmitters = np.asarray(transmitters, dtype=int)
    base, cont, prop = service_components(route, snap, transmitters, model)
    return discovery_wait + base + kappa * cont + prop


@dataclass
class _SessionState:
    session: Session
    route: object = None
    route_arrays: tuple = None       # (nodes, hop tails, hop heads) as np arrays
    buffer: deque = field(default_factory=deque)
    next_pkt_time: float = None
    next_retry_time: float = 0.0
    discovery_wait: float = 0.0      # latency of a discovery made this tick
    seq: int = 0


class Simulation:
    """One isolated run; owns all mutable state."""

    def __init__(self, config, trace=None, trace_out=None, check_invariants=False):
        config.validate()
        self.config = config
        self.model = PowerModel.from_config(config)
        self._exchange = _exchange_airtime(self.model)
        bitrate = self.model.bitrate
        self._unicast_times = (8.0 * self.model.data_bytes / bitrate,
                               8.0 * self.model.rts_bytes / bitrate,
                               8.0 * self.model.cts_bytes / bitrate,
                               8.0 * self.model.ack_bytes / bitrate)
        self.trace = trace
        self.trace_out = trace_out
        self.check_invariants = check_invariants
        self.mob_rng = random.Random(f"mobility:{config.seed}")
        traffic_rng = random.Random(f"traffic:{config.seed}")
        self.states = mob.init_mobility(config, self.mob_rng)
        if trace is not None:
            if trace.node_count != config.node_count:
                raise ValueError("trace node count does not match config")
            trace.apply(0, self.states)
        self.sessions = [_SessionState(s) for s in make_sessions(config, traffic_rng)]
        for st in self.sessions:
            st.next_pkt_time = st.session.start
        self.ledger = EnergyLedger(config.node_count, config.initial_battery)
        self.packets = []
        self.routes = []
        self.first_failure_time = None
        self.t = 0.0

    def run(self):
        cfg = self.config
        beacon_every = max(1, round(cfg.beacon_interval / cfg.tick))
        writer = mob.TraceWriter(self.trace_out) if self.trace_out else None
        k = 0
        try:
            while True:
                t = k * cfg.tick
                self.t = t
                if k > 0:
                    if self.trace is not None:
                        if k >= len(self.trace.rows):
                            raise ValueError("mobility trace shorter than the run")
                        self.trace.apply(k, self.states)
                    else:
                        mob.advance(self.states, cfg.tick, cfg, self.mob_rng)
                snap = snapshot(self.states, cfg.tx_range, t)
                if writer:
                    writer.record(t, self.states)
                if k % beacon_every == 0:
                    self._emit_beacons(snap)
                self._maintain_routes(snap, t)
                self._discover_routes(snap, t)
                self._send_traffic(snap, t)
                self._sync_batteries()
                self._note_failures(t)
                if self.check_invariants:
                    self._check_invariants(snap)
                k += 1
                next_t = k * cfg.tick
                if cfg.until_first_failure:
                    if self.first_failure_time is not None:
                        end = self.first_failure_time
                        break
                    if next_t >= cfg.max_duration - 1e-9:
                        end = cfg.max_duration
                        break
                elif next_t >= cfg.duration - 1e-9:
                    end = cfg.duration
                    break
        finally:
            if writer:
                writer.close()
        return RunResult(config=cfg, ledger=self.ledger, packets=self.packets,
                         routes=self.routes,
                         sessions=[st.session for st in self.sessions],
                         first_failure_time=self.first_failure_time, end_time=end)

    # --- per-tick phases ---

    def _emit_beacons(self, snap):
        charge_beacon_round(self.ledger, snap, self.model)

    def _teardown(self, st, t):
        st.route.torn_down_at = t
        for node in st.route.intermediates:
            self.states[node].activity -= 1
        st.route = None
        st.route_arrays = None
        st.next_retry_time = t

    def _maintain_routes(self, snap, t):
        live = [st for st in self.sessions if st.route is not None]
        if not live:
            return
        # one combined validity check; fall back to per-route only on breakage
        tails = np.concatenate([st.route_arrays[1] for st in live])
        heads = np.concatenate([st.route_arrays[2] for st in live])
        if snap.in_range[tails, heads].all() and snap.alive[tails].all() \
                and snap.alive[heads].all():
            return
        for st in live:
            nodes, tails, heads = st.route_arrays
            if not (snap.alive[nodes].all() and snap.in_range[tails, heads].all()):
                self._teardown(st, t)

    def _discover_routes(self, snap, t):
        cfg = self.config
        for st in self.sessions:
            st.discovery_wait = 0.0
            sess = st.session
            if st.route is not None or t < sess.start - 1e-9 or t < st.next_retry_time - 1e-9:
                continue
            if not self.ledger.alive(sess.source):
                continue
            route = None
            if self.ledger.alive(sess.destination):
                route = select_route(cfg.protocol, snap, self.states,
                                     sess.source, sess.destination, session=sess.id)
            charge_route_discovery(self.ledger, snap, sess.source, route, self.model)
            if route is None:
                st.next_retry_time = t + cfg.discovery_retry_interval
                continue
            st.route = route
            nodes = np.array(route.nodes)
            st.route_arrays = (nodes, nodes[:-1], nodes[1:])
            st.discovery_wait = discovery_latency(route.hops, self.model,
                                                  cfg.forwarding_overhead)
            self.routes.append(route)
            for node in route.intermediates:
                self.states[node].activity += 1

    def _send_traffic(self, snap, t):
        cfg = self.config
        to_send = []
        for st in self.sessions:
            sess = st.session
            while st.next_pkt_time <= t + 1e-9:
                pkt = PacketRecord(session=sess.id, seq=st.seq,
                                   created_at=st.next_pkt_time)
                st.seq += 1
                self.packets.append(pkt)
                st.next_pkt_time += 1.0 / sess.rate
                if (st.route is not None
                        and st.route.discovered_at < pkt.created_at - 1e-9):
                    to_send.append((st, pkt, 0.0))
                else:
                    st.buffer.append(pkt)
                    while len(st.buffer) > cfg.buffer_cap:
                        st.buffer.popleft()  # oldest dropped, stays undelivered
            if st.route is not None and st.buffer:
                for pkt in st.buffer:
                    wait = max(0.0, t - pkt.created_at) + st.discovery_wait
                    to_send.append((st, pkt, wait))
                st.buffer.clear()
        if not to_send:
            return
        service, charges = self._tick_send_tables(snap, to_send)
        for st, pkt, wait in to_send:
            route = st.route
            if route is None or (self.ledger.newly_dead
                                 and not all(self.ledger.alive(n)
                                             for n in route.nodes)):
                st.buffer.append(pkt)  # mid-tick death; retried after teardown
                continue
            self._deliver(st, pkt, wait, service[st.session.id],
                          charges[st.session.id])

    def _tick_send_tables(self, snap, to_send):
        """Per-session service components and per-packet charge vectors for
        this tick; every packet of a session reuses them."""
        senders, seen = [], set()
        for st, _, _ in to_send:
            if st.session.id not in seen:
                seen.add(st.session.id)
                senders.append(st)
        tx = np.unique(np.concatenate([st.route_arrays[1] for st in senders]))
        tails = np.concatenate([st.route_arrays[1] for st in senders])
        heads = np.concatenate([st.route_arrays[2] for st in senders])
        hop_d = snap.dist[tails, heads]
        dist_to_tx = snap.dist[:, tx]
        radius = hop_d[:, None] if self.model.tpc else snap.r
        near = (dist_to_tx[tails] <= radius) | (dist_to_tx[heads] <= radius)
        near &= (tx[None, :] != tails[:, None]) & (tx[None, :] != heads[:, None])
        counts = near.sum(axis=1)
        service, charges = {}, {}
        off = 0
        for st in senders:
            h = len(st.route_arrays[1])
            sl = slice(off, off + h)
            service[st.session.id] = (
                self._exchange * h,
                self._exchange * float(counts[sl].sum()),
                float(hop_d[sl].sum()) / SPEED_OF_LIGHT,
            )
            charges[st.session.id] = self._data_charges(st.route_arrays,
                                                        hop_d[sl])
            off += h
        return service, charges

    def _data_charges(self, route_arrays, hop_d):
        """Per-packet (node, category, Joules) debits along the route; the
        per-node aggregation of one RTS/CTS/DATA/ACK exchange per hop."""
        m = self.model
        p_rx = m.rx_power
        t_data, t_rts, t_cts, t_ack = self._unicast_times
        out = []
        _, tails, heads = route_arrays
        for i in range(len(tails)):
            u, v = int(tails[i]), int(heads[i])
            p_tx = tx_power(float(hop_d[i]), m)
            out.append((u, "data_tx", p_tx * t_data))
            out.append((u, "mac", p_tx * t_rts + p_rx * (t_cts + t_ack)))
            out.append((v, "data_rx", p_rx * t_data))
            out.append((v, "mac", p_rx * t_rts + p_tx * (t_cts + t_ack)))
        return out

    def _deliver(self, st, pkt, wait, service, charges):
        debit = self.ledger.debit
        try:
            for node, category, joules in charges:
                debit(node, category, joules)
        except DeadNodeError:
            return  # forwarder died mid-path; packet lost
        base, cont, prop = service
        pkt.buffering = wait
        pkt.base_service = base
        pkt.contention_service = cont
        pkt.propagation = prop
        pkt.hops_traversed = st.route.hops
        pkt.delivered_at = pkt.created_at + pkt.total_delay(self.config.kappa)

    def _sync_batteries(self):
        for node in self.states:
            node.battery = self.ledger.residual(node.id)

    def _note_failures(self, t):
        while self.ledger.newly_dead:
            self.ledger.newly_dead.popleft()
            if self.first_failure_time is None:
                self.first_failure_time = t

    def _check_invariants(self, snap):
        live = [st.route for st in self.sessions if st.route is not None]
        expected = sum(r.hops - 1 for r in live)
        actual = sum(n.activity for n in self.states)
        assert actual == expected, f"activity ledger drift: {actual} != {expected}"
        for r in live:
            for u, v in zip(r.nodes[:-1], r.nodes[1:]):
                assert snap.in_range[u, v], f"stale route edge {u}-{v}"


def run(config, trace=None, trace_out=None, check_invariants=False) -> RunResult:
    """Execute one reproducible simulation run."""
    return Simulation(config, trace=trace, trace_out=trace_out,
                      check_invariants=check_invariants).run()


# --- per-run CSV outputs ------------------------------------------------------

def write_packets_csv(result, path):
    import csv
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(("session", "seq", "created_s", "delivered_s", "hops",
                    "buffering_s", "service_s", "propagation_s"))
        kappa = result.config.kappa
        for p in result.packets:
            w.writerow((p.session, p.seq, repr(p.created_at),
                        "" if p.delivered_at is None else repr(p.delivered_at),
                        p.hops_traversed, repr(p.buffering),
                        repr(p.service(kappa)), repr(p.propagation)))


def write_routes_csv(result, path):
    import csv
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(("session", "discovered_s", "torn_down_s", "hops",
                    "metric_value", "node_list"))
        for r in result.routes:
            w.writerow((r.session, repr(r.discovered_at),
                        "" if r.torn_down_at is None else repr(r.torn_down_at),
                        r.hops, repr(r.metric_value),
                        " ".join(str(n) for n in r.nodes)))
