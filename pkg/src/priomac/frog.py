"""Fragmentation-based CSMA MAC with priority-tiered channel access.

Low-priority packets travel as fragments separated by a fixed gap; the gap
is longer than the emergency contention worst case (short IFS plus maximum
backoff) but shorter than the low-priority IFS, so an emergency frame
always wins the spectrum between two fragments while low-priority senders
can never cut into someone else's gap. Emergency packets go out whole.

The sink (node 0) acknowledges every clean frame; a sender that misses an
ack retries the same frame after re-contending, and drops the packet
after max_retries consecutive failures.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .engine import SINK, Engine, substream, tx_duration_us
from .metrics import IDLE, RX, TX, EnergyLedger, MetricsCollector
from .traffic import (
    EMERGENCY,
    NORMAL,
    NodeConfig,
    Packet,
    TrafficProfile,
    next_arrival,
)


@dataclass
class FrogTiming:
    ifs_high_us: int = 192
    ifs_low_us: int = 1000
    fragment_gap_us: int = 800
    backoff_unit_us: int = 160
    backoff_slots_high: int = 4  # emergency draws uniform {0..3} units
    backoff_slots_low: int = 8  # low priority draws uniform {0..7} units
    ack_bytes: int = 11
    header_bytes: int = 5
    max_retries: int = 8
    ack_slack_us: int = 64  # grace past the expected ack end before a retry

    def validate(self) -> None:
        worst_high = self.ifs_high_us + (self.backoff_slots_high - 1) * self.backoff_unit_us
        if worst_high >= self.fragment_gap_us:
            raise ValueError(
                "emergency contention (ifs_high + max backoff = "
                f"{worst_high} us) must finish inside the {self.fragment_gap_us} us gap"
            )
        if self.ifs_low_us <= self.fragment_gap_us:
            raise ValueError(
                "low-priority IFS must outlast the inter-fragment gap, got "
                f"{self.ifs_low_us} <= {self.fragment_gap_us}"
            )


@dataclass(slots=True)
class Fragment:
    packet_id: int
    index: int
    count: int
    payload_bytes: int
    header_bytes: int


def fragment(packet: Packet, fragment_size: int, header_bytes: int = 5) -> list[Fragment]:
    """Split a packet's payload into fragments; only the last may run short."""
    if packet.klass == EMERGENCY:
        raise ValueError("emergency packets are sent whole, never fragmented")
    if not 1 <= fragment_size <= packet.payload_bytes:
        raise ValueError(
            f"fragment_size must be in [1, {packet.payload_bytes}], got {fragment_size}"
        )
    count = -(-packet.payload_bytes // fragment_size)
    out = []
    remaining = packet.payload_bytes
    for i in range(count):
        size = fragment_size if remaining >= fragment_size else remaining
        remaining -= size
        out.append(Fragment(packet.pid, i, count, size, header_bytes))
    return out


def airtime_overhead(packet: Packet, fragment_size: int, header_bytes: int = 5) -> int:
    """Total bytes on air for one packet at a given fragment size."""
    if not 1 <= fragment_size <= packet.payload_bytes:
        raise ValueError(
            f"fragment_size must be in [1, {packet.payload_bytes}], got {fragment_size}"
        )
    count = -(-packet.payload_bytes // fragment_size)
    return packet.payload_bytes + count * header_bytes


class SinkReassembler:
    """Per-packet fragment collection at the sink, idempotent on retries."""

    __slots__ = ("_seen",)

    def __init__(self):
        self._seen = {}  # pid -> [expected count, set of indices, payload byte sum]

    def receive(self, frag: Fragment) -> bool:
        """Record one clean fragment; True when the packet just completed."""
        st = self._seen.get(frag.packet_id)
        if st is None:
            st = self._seen[frag.packet_id] = [frag.count, set(), 0]
        if frag.index in st[1]:
            return False  # duplicate retransmission
        st[1].add(frag.index)
        st[2] += frag.payload_bytes
        return len(st[1]) == st[0]

    def is_complete(self, pid: int) -> bool:
        st = self._seen.get(pid)
        return st is not None and len(st[1]) == st[0]

    def payload_bytes(self, pid: int) -> int:
        st = self._seen.get(pid)
        return st[2] if st is not None else 0


class FrogMac:
    """Event-driven implementation over the shared engine.

    One instance owns every node's state; radio visibility is still
    respected (senders act only on acks and timeouts, the sink only on
    clean receptions).
    """

    DATA_FRAG = "data-frag"
    DATA_WHOLE = "data-whole"
    ACK = "ack"

    def __init__(
        self,
        eng: Engine,
        nodes: list[NodeConfig],
        metrics: MetricsCollector,
        ledger: EnergyLedger,
        seed: int,
        fragment_size: int,
        timing: FrogTiming | None = None,
        payload_bytes: int = 34,
        normal_interval_us: int = 10_000_000,
        emergency_interval_us: int = 120_000_000,
    ):
        timing = timing or FrogTiming()
        timing.validate()
        if not 1 <= fragment_size <= payload_bytes:
            raise ValueError(f"fragment_size must be in [1, {payload_bytes}]")
        self.eng = eng
        self.nodes = nodes
        self.metrics = metrics
        self.ledger = ledger
        self.timing = timing
        self.fragment_size = fragment_size
        self.payload_bytes = payload_bytes
        self.ack_air_us = tx_duration_us(timing.ack_bytes, eng.bitrate_bps)
        self.reassembler = SinkReassembler()

        n = max(nc.node_id for nc in nodes) + 1
        self._emq = [deque() for _ in range(n)]
        self._nq = [deque() for _ in range(n)]
        self._frags = [None] * n
        self._frag_idx = [0] * n
        self._retry_key = [None] * n
        self._retries = [0] * n
        self._pending = [None] * n
        self._pending_kind = [None] * n
        self._attempt_class = [None] * n
        self._sense_from = [0] * n
        self._intx = [False] * n
        self._state = [IDLE] * n
        self._since = [0] * n
        self._rng = [substream(seed, i) for i in range(n)]
        self._next_pid = 0

        self._normal_profile = {}
        self._emergency_profile = {}
        for nc in nodes:
            self._normal_profile[nc.node_id] = TrafficProfile(
                NORMAL, normal_interval_us, nc.normal_phase_us
            )
            if nc.emergency:
                self._emergency_profile[nc.node_id] = TrafficProfile(
                    EMERGENCY, emergency_interval_us, nc.emergency_phase_us
                )

        eng.add_end_listener(self._on_tx_end)

    # -- lifecycle ------------------------------------------------------

    def start(self) -> None:
        self._state[SINK] = RX  # the sink listens for the whole run
        for nc in self.nodes:
            prof = self._normal_profile[nc.node_id]
            self.eng.schedule(prof.phase_us, nc.node_id, self._arrival_normal, nc.node_id)
            eprof = self._emergency_profile.get(nc.node_id)
            if eprof is not None:
                self.eng.schedule(eprof.phase_us, nc.node_id, self._arrival_emergency, nc.node_id)

    def finish(self) -> None:
        """Flush open energy spans up to the simulation end."""
        end = self.eng.duration_us
        for node in [SINK] + [nc.node_id for nc in self.nodes]:
            self.ledger.add(node, self._state[node], end - self._since[node])
            self._since[node] = end

    # -- helpers --------------------------------------------------------

    def _set_state(self, node: int, state: int) -> None:
        old = self._state[node]
        if state == old:
            return
        now = self.eng.now
        self.ledger.add(node, old, now - self._since[node])
        self._state[node] = state
        self._since[node] = now

    def _engaged(self, node: int) -> bool:
        return self._pending[node] is not None or self._intx[node]

    def _make_packet(self, node: int, klass: str) -> Packet:
        p = Packet(self._next_pid, node, klass, self.eng.now, self.payload_bytes)
        self._next_pid += 1
        self.metrics.record_generated(p)
        if self.eng.trace is not None:
            self.eng.trace(self.eng.now, node, "arrival", f"class={klass} id={p.pid}")
        return p

    # -- traffic --------------------------------------------------------

    def _arrival_normal(self, node: int) -> None:
        p = self._make_packet(node, NORMAL)
        self._nq[node].append(p)
        prof = self._normal_profile[node]
        self.eng.schedule(next_arrival(prof, self.eng.now), node, self._arrival_normal, node)
        if not self._engaged(node):
            self._set_state(node, RX)
            self._start_attempt(node, self.eng.now)

    def _arrival_emergency(self, node: int) -> None:
        p = self._make_packet(node, EMERGENCY)
        self._emq[node].append(p)
        prof = self._emergency_profile[node]
        self.eng.schedule(next_arrival(prof, self.eng.now), node, self._arrival_emergency, node)
        if not self._engaged(node):
            self._set_state(node, RX)
            self._start_attempt(node, self.eng.now)
        elif (
            self._pending[node] is not None
            and self._attempt_class[node] == NORMAL
            and self._pending_kind[node] in ("sense", "txwait")
        ):
            # Preempt our own low-priority contention; the partially sent
            # packet keeps its cursor and resumes afterwards.
            self.eng.cancel(self._pending[node])
            self._pending[node] = None
            self._start_attempt(node, self.eng.now)

    # -- channel access -------------------------------------------------

    def _start_attempt(self, node: int, at: int) -> None:
        if self._emq[node]:
            klass = EMERGENCY
            ifs = self.timing.ifs_high_us
        else:
            klass = NORMAL
            ifs = self.timing.ifs_low_us
            if self._frags[node] is None:
                self._frags[node] = fragment(
                    self._nq[node][0], self.fragment_size, self.timing.header_bytes
                )
                self._frag_idx[node] = 0
        self._attempt_class[node] = klass
        self._sense_from[node] = at
        self._pending[node] = self.eng.schedule(at + ifs, node, self._cca_done, node)
        self._pending_kind[node] = "sense"

    def _cca_done(self, node: int) -> None:
        self._pending[node] = None
        eng = self.eng
        if eng.channel.busy_in(self._sense_from[node], eng.now):
            self._defer(node)
            return
        if self._attempt_class[node] == EMERGENCY:
            slots = self.timing.backoff_slots_high
        else:
            slots = self.timing.backoff_slots_low
        backoff = self._rng[node].randrange(slots) * self.timing.backoff_unit_us
        self._pending[node] = eng.schedule(eng.now + backoff, node, self._tx_start, node)
        self._pending_kind[node] = "txwait"

    def _defer(self, node: int) -> None:
        until = self.eng.channel.busy_until(self.eng.now)
        self._start_attempt(node, until)

    def _tx_start(self, node: int) -> None:
        self._pending[node] = None
        eng = self.eng
        if eng.channel.busy_at(eng.now):
            self._defer(node)  # someone else started during our backoff
            return
        t = self.timing
        if self._attempt_class[node] == EMERGENCY:
            packet = self._emq[node][0]
            nbytes = packet.payload_bytes + t.header_bytes
            kind = self.DATA_WHOLE
            meta = (packet, -1, None)
            label = f" id={packet.pid}" if eng.trace is not None else ""
        else:
            idx = self._frag_idx[node]
            frag = self._frags[node][idx]
            packet = self._nq[node][0]
            nbytes = frag.payload_bytes + frag.header_bytes
            kind = self.DATA_FRAG
            meta = (packet, idx, frag)
            label = (
                f" id={packet.pid} frag={idx + 1}/{frag.count}"
                if eng.trace is not None
                else ""
            )
        self._set_state(node, TX)
        self._intx[node] = True
        eng.begin_tx(node, nbytes, kind, meta, label)

    # -- frame completions ----------------------------------------------

    def _on_tx_end(self, tx, corrupted: bool) -> None:
        kind = tx.kind
        if kind == self.ACK:
            self._set_state(SINK, RX)
            self._intx[SINK] = False
            if not corrupted:
                target, final, packet, idx = tx.meta
                self._ack_received(target, final, packet, idx)
            return
        if kind != self.DATA_FRAG and kind != self.DATA_WHOLE:
            return
        node = tx.src
        packet, idx, frag = tx.meta
        self._set_state(node, RX)
        self._intx[node] = False
        # The sender cannot see corruption; it waits for the ack either way.
        self._pending[node] = self.eng.schedule(
            tx.end + self.ack_air_us + self.timing.ack_slack_us,
            node,
            self._ack_timeout,
            (node, packet, idx),
        )
        self._pending_kind[node] = "ackwait"
        if corrupted:
            return
        if kind == self.DATA_FRAG:
            self.reassembler.receive(frag)
            final = self.reassembler.is_complete(packet.pid) and not self.metrics.is_terminal(
                packet.pid
            )
        else:
            final = not self.metrics.is_terminal(packet.pid)
        self._send_ack(node, final, packet, idx)

    def _send_ack(self, target: int, final: bool, packet: Packet, idx: int) -> None:
        eng = self.eng
        self._set_state(SINK, TX)
        self._intx[SINK] = True
        label = f" to={target} id={packet.pid}" if eng.trace is not None else ""
        eng.begin_tx(SINK, self.timing.ack_bytes, self.ACK, (target, final, packet, idx), label)

    def _ack_received(self, node: int, final: bool, packet: Packet, idx: int) -> None:
        if self._pending_kind[node] == "ackwait":
            self.eng.cancel(self._pending[node])
            self._pending[node] = None
            self._pending_kind[node] = None
        self._retry_key[node] = None
        self._retries[node] = 0
        now = self.eng.now
        if packet.klass == EMERGENCY:
            self._emq[node].popleft()
            self.metrics.record_delivery(packet, now)
            if self.eng.trace is not None:
                self.eng.trace(now, node, "delivery", f"id={packet.pid} class={EMERGENCY} delay={now - packet.gen_time}")
        elif final:
            self._nq[node].popleft()
            self._frags[node] = None
            self._frag_idx[node] = 0
            self.metrics.record_delivery(packet, now)
            if self.eng.trace is not None:
                self.eng.trace(now, node, "delivery", f"id={packet.pid} class={NORMAL} delay={now - packet.gen_time}")
        else:
            self._frag_idx[node] = idx + 1
            self._start_attempt(node, now + self.timing.fragment_gap_us)
            return
        if self._emq[node] or self._nq[node]:
            self._start_attempt(node, now)
        else:
            self._set_state(node, IDLE)

    def _ack_timeout(self, arg) -> None:
        node, packet, idx = arg
        self._pending[node] = None
        self._pending_kind[node] = None
        key = (packet.pid, idx)
        if self._retry_key[node] == key:
            self._retries[node] += 1
        else:
            self._retry_key[node] = key
            self._retries[node] = 1
        if self._retries[node] > self.timing.max_retries:
            self._retry_key[node] = None
            self._retries[node] = 0
            if packet.klass == EMERGENCY:
                self._emq[node].popleft()
            else:
                self._nq[node].popleft()
                self._frags[node] = None
                self._frag_idx[node] = 0
            self.metrics.record_drop(packet)
            if self.eng.trace is not None:
                self.eng.trace(self.eng.now, node, "drop", f"id={packet.pid} class={packet.klass}")
            if self._emq[node] or self._nq[node]:
                self._start_attempt(node, self.eng.now)
            else:
                self._set_state(node, IDLE)
        else:
            self._start_attempt(node, self.eng.now)
