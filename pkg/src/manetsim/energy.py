"""Per-hop power, packet airtime, and battery accounting."""

import csv
from collections import deque
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PowerModel:
    tpc: bool = False
    fixed_tx_power: float = 1.4        # W, used whenever TPC is off
    rx_power: float = 0.967            # W
    circuit_power: float = 1.1182      # W
    distance_coeff: float = 7.2e-11    # W / m^4
    max_range: float = 250.0           # m
    bitrate: float = 2.0e6             # bits/s
    data_bytes: int = 512
    rts_bytes: int = 20
    cts_bytes: int = 14
    ack_bytes: int = 14
    beacon_bytes: int = 32
    rreq_base_bytes: int = 64
    rreq_hop_bytes: int = 8
    rrep_bytes: int = 64

    @classmethod
    def from_config(cls, config):
        return cls(tpc=config.tpc, max_range=config.tx_range,
                   bitrate=config.bitrate, data_bytes=config.packet_size)


def tx_power(d, model: PowerModel):
    """Transmission power for a hop of length d meters."""
    if not 0.0 <= d <= model.max_range * (1.0 + 1e-12):
        raise ValueError(f"hop distance {d} outside [0, {model.max_range}]")
    if not model.tpc:
        return model.fixed_tx_power
    return model.circuit_power + model.distance_coeff * d ** 4


def broadcast_tx_power(model: PowerModel):
    # broadcasts target every neighbor, so full-range power even with TPC
    return tx_power(model.max_range, model)


def airtime(nbytes, model: PowerModel):
    """Seconds on air for a packet of nbytes."""
    if nbytes <= 0:
        raise ValueError(f"packet size must be positive, got {nbytes}")
    return 8.0 * nbytes / model.bitrate


def rreq_bytes(recorded_hops, model: PowerModel):
    return model.rreq_base_bytes + model.rreq_hop_bytes * recorded_hops


CATEGORIES = ("data_tx", "data_rx", "mac", "beacon", "discovery")


class DeadNodeError(Exception):
    """A charge was attempted against a node with an exhausted battery."""


class EnergyLedger:
    """Per-node cumulative energy, by category, with battery clamping.

    A debit that would overdraw a node's battery is truncated so the battery
    reaches exactly zero; the node is then dead and rejects further debits.
    """

    def __init__(self, node_count, initial_battery):
        self.node_count = node_count
        self.initial_battery = initial_battery
        self.entries = {cat: [0.0] * node_count for cat in CATEGORIES}
        self._residual = [initial_battery] * node_count
        self.newly_dead = deque()

    def alive(self, node):
        return self._residual[node] > 0.0

    def residual(self, node):
        return self._residual[node]

    def debit(self, node, category, joules):
        """Charge a node; returns True if this debit exhausted its battery."""
        joules = float(joules)  # keep numpy scalars out of the ledger
        if joules < 0.0:
            raise ValueError("negative debit")
        remaining = self._residual[node]
        if remaining <= 0.0:
            raise DeadNodeError(f"node {node} is dead")
        if joules >= remaining:
            joules = remaining
            self._residual[node] = 0.0
            self.entries[category][node] += joules
            self.newly_dead.append(node)
            return True
        self._residual[node] = remaining - joules
        self.entries[category][node] += joules
        return False

    def total(self, node):
        # derived from the residual accumulator, so that
        # initial - residual == total holds exactly; the per-category
        # entries sum to it only up to float accumulation order
        return self.initial_battery - self._residual[node]

    def category_total(self, category):
        return sum(self.entries[category])

    def node_totals(self):
        return [self.total(i) for i in range(self.node_count)]

    def grand_total(self):
        return sum(self.node_totals())

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(("node_id", "data_tx_J", "data_rx_J", "mac_J",
                             "beacon_J", "discovery_J", "total_J", "residual_J"))
            for i in range(self.node_count):
                row = [i] + [repr(self.entries[cat][i]) for cat in CATEGORIES]
                row += [repr(self.total(i)), repr(self._residual[i])]
                writer.writerow(row)


def charge_unicast_hop(ledger, sender, receiver, d, nbytes, model,
                       payload_categories=("data_tx", "data_rx"),
                       control_category="mac"):
    """Charge one RTS/CTS/DATA/ACK unicast exchange over a hop.

    The sender transmits RTS and the payload and receives CTS and ACK; the
    receiver mirrors that. Payload energy lands in payload_categories
    (sender, receiver); the three control packets land in control_category.
    """
    if not (ledger.alive(sender) and ledger.alive(receiver)):
        raise DeadNodeError("unicast hop with a dead endpoint")
    p_tx = tx_power(d, model)
    p_rx = model.rx_power
    bitrate = model.bitrate
    t_payload = 8.0 * nbytes / bitrate
    t_rts = 8.0 * model.rts_bytes / bitrate
    t_cts = 8.0 * model.cts_bytes / bitrate
    t_ack = 8.0 * model.ack_bytes / bitrate
    tx_cat, rx_cat = payload_categories
    ledger.debit(sender, tx_cat, p_tx * t_payload)
    ledger.debit(sender, control_category,
                 p_tx * t_rts + p_rx * (t_cts + t_ack))
    if ledger.alive(receiver):
        ledger.debit(receiver, rx_cat, p_rx * t_payload)
    if ledger.alive(receiver):
        ledger.debit(receiver, control_category,
                     p_rx * t_rts + p_tx * (t_cts + t_ack))


def charge_broadcast(ledger, sender, neighbor_ids, nbytes, model,
                     category="beacon"):
    """Charge a local broadcast: sender at full-range power, neighbors receive."""
    if not ledger.alive(sender):
        raise DeadNodeError(f"broadcast from dead node {sender}")
    t = airtime(nbytes, model)
    ledger.debit(sender, category, broadcast_tx_power(model) * t)
    rx_energy = model.rx_power * t
    for j in neighbor_ids:
        if ledger.alive(j):
            ledger.debit(j, category, rx_energy)


def charge_beacon_round(ledger, snap, model):
    """Charge one beacon from every live node in a single pass.

    Equivalent to one charge_broadcast per node, folded into one debit per
    node: own transmission plus reception of each live neighbor's beacon.
    """
    t = airtime(model.beacon_bytes, model)
    tx_e = broadcast_tx_power(model) * t
    rx_e = model.rx_power * t
    deg = snap.degrees()
    for node in range(snap.n):
        if ledger.alive(node):
            ledger.debit(node, "beacon", tx_e + rx_e * float(deg[node]))


def flood_depths(snap, source):
    """BFS hop counts from the flood source over the snapshot."""
    depths = {source: 0}
    frontier = deque([source])
    while frontier:
        u = frontier.popleft()
        for v in snap.neighbors(u):
            if v not in depths:
                depths[v] = depths[u] + 1
                frontier.append(v)
    return depths


def charge_route_discovery(ledger, snap, source, route, model):
    """Charge one flood-based discovery: an RREQ rebroadcast from every live
    node (sized by its recorded hop count from the source) plus, when a route
    was found, RREP unicast hops back along it. On no-route only the flood is
    charged."""
    depths = flood_depths(snap, source)
    airtimes = np.array([airtime(rreq_bytes(depths.get(n, 0), model), model)
                         for n in range(snap.n)])
    alive = np.array([ledger.alive(n) for n in range(snap.n)])
    tx_p = broadcast_tx_power(model)
    # reception energy from every live neighbor's rebroadcast, one debit each
    rx_sum = snap.in_range @ (airtimes * alive)
    for node in range(snap.n):
        if alive[node]:
            ledger.debit(node, "discovery",
                         tx_p * airtimes[node] + model.rx_power * float(rx_sum[node]))
    if route is not None:
        for u, v in zip(route.nodes[:-1], route.nodes[1:]):
            if ledger.alive(u) and ledger.alive(v):
                charge_unicast_hop(ledger, v, u, snap.distance(u, v),
                                   model.rrep_bytes, model,
                                   payload_categories=("discovery", "discovery"),
                                   control_category="discovery")
