"""TDMA MAC with an emergency indication slot and fuzzy slot priorities.

Frames have a fixed layout: an emergency indication slot (EIS) where
nodes holding urgent data contend with persistence probability p, a
control period where the cluster head broadcasts the slot schedule, and a
fixed number of data slots. A successfully acknowledged indication flips
the frame into emergency mode, which hands slots to every member holding
urgent data first (slot stealing); otherwise slots go to periodic
claimants. Within each group, slots are ordered by a Mamdani fuzzy score
over intra-cluster distance, residual energy, and slots required, with
the emergency bit composed crisply on top.

Members sleep outside the EIS, the control period, and their own slot;
the cluster head (node 0, the sink) listens for the whole frame. Energy
is accrued arithmetically per frame, which lets runs without queued
traffic fast-forward across empty frames without touching RNG or channel
state (the skip is observably identical to processing each frame).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

from .engine import SINK, Engine, ProtocolBug, substream, tx_duration_us
from .fuzzy import priority_score
from .metrics import RX, SLEEP, TX, EnergyLedger, MetricsCollector
from .traffic import (
    EMERGENCY,
    NORMAL,
    NodeConfig,
    Packet,
    TrafficProfile,
    next_arrival,
)

MODE_PERIODIC = "PERIODIC"
MODE_EMERGENCY = "EMERGENCY"


@dataclass
class FpsTiming:
    slots_per_frame: int = 20
    slot_guard_us: int = 1000
    indication_bytes: int = 8
    schedule_bytes: int = 30
    ack_bytes: int = 11
    header_bytes: int = 5
    eis_persistence: float = 0.5
    ack_loss_p: float = 0.01
    max_retry_frames: int = 50


class FrameGeometry:
    """Microsecond layout of one TDMA frame, fixed for a whole run."""

    def __init__(self, timing: FpsTiming, payload_bytes: int, bitrate_bps: int, cca_us: int):
        self.ind_air = tx_duration_us(timing.indication_bytes, bitrate_bps)
        self.ack_air = tx_duration_us(timing.ack_bytes, bitrate_bps)
        self.data_air = tx_duration_us(payload_bytes + timing.header_bytes, bitrate_bps)
        self.sched_air = tx_duration_us(timing.schedule_bytes, bitrate_bps)
        guard = timing.slot_guard_us
        if guard < cca_us:
            raise ValueError("slot guard must cover at least one CCA")
        self.cca_us = cca_us
        self.eis_len = self.ind_air + self.ack_air + guard
        self.ctrl_len = self.sched_air + guard
        self.slot_len = self.data_air + self.ack_air + guard
        self.data_offset = self.eis_len + self.ctrl_len
        self.slots_per_frame = timing.slots_per_frame
        self.frame_len = self.data_offset + timing.slots_per_frame * self.slot_len

    def slot_span(self, frame_start: int, i: int) -> tuple[int, int]:
        s = frame_start + self.data_offset + i * self.slot_len
        return s, s + self.slot_len


@dataclass
class ClusterSchedule:
    ch: int
    surrogate: int
    member_order: list[int]
    slots_per_frame: int


def run_setup(member_ids, residual_energy_uj, slots_per_frame: int = 20) -> ClusterSchedule:
    """Initial cluster organization: surrogate CH and id-ordered slot list.

    The surrogate is the member with maximum residual energy; ties go to
    the lowest id. Data slots start out assigned in ascending id order.
    """
    members = sorted(member_ids)
    if not members:
        raise ValueError("cluster needs at least one member")
    best = members[0]
    for m in members[1:]:
        if residual_energy_uj[m] > residual_energy_uj[best]:
            best = m
    return ClusterSchedule(
        ch=SINK, surrogate=best, member_order=members, slots_per_frame=slots_per_frame
    )


@dataclass(slots=True)
class FuzzyInputs:
    distance_m: float
    residual_energy_uj: float
    slots_required: int
    emergency_bit: int


@dataclass(slots=True)
class SlotRequest:
    inputs: FuzzyInputs
    normal_queued: int


@dataclass
class TdmaFrame:
    index: int
    start: int
    mode: str
    eis: tuple[int, int]
    control: tuple[int, int]
    data_slots: list[tuple[int, int, int, str]]  # (start, end, node, purpose)


def build_frame(
    start: int,
    index: int,
    mode: str,
    requests: dict[int, SlotRequest],
    geom: FrameGeometry,
    diag_m: float,
    initial_energy_uj: float,
    slots_per_frame: int,
) -> TdmaFrame:
    """Assign data slots for one frame from per-node claims.

    EMERGENCY mode seats every emergency-flagged claimant first (stealing
    slots from periodic traffic); the remaining slots go to periodic
    claimants. Each group is ordered by fuzzy priority, ties by node id.
    A member appears at most once per frame.
    """

    def score(node: int) -> float:
        inp = requests[node].inputs
        d = inp.distance_m / diag_m
        if d > 1.0:
            d = 1.0
        e = inp.residual_energy_uj / initial_energy_uj
        if e < 0.0:
            e = 0.0
        elif e > 1.0:
            e = 1.0
        s = inp.slots_required / slots_per_frame
        if s > 1.0:
            s = 1.0
        return priority_score(d, e, s, inp.emergency_bit)

    claimants = sorted(requests)
    emergency_group = []
    periodic_group = []
    for node in claimants:
        req = requests[node]
        if mode == MODE_EMERGENCY and req.inputs.emergency_bit:
            emergency_group.append(node)
        elif req.normal_queued > 0:
            periodic_group.append(node)

    if len(emergency_group) > 1:
        emergency_group.sort(key=lambda n: (-score(n), n))
    if len(periodic_group) > 1:
        periodic_group.sort(key=lambda n: (-score(n), n))

    assignments = []
    for node in emergency_group:
        assignments.append((node, EMERGENCY))
    for node in periodic_group:
        assignments.append((node, NORMAL))
    assignments = assignments[:slots_per_frame]

    data_slots = []
    for i, (node, purpose) in enumerate(assignments):
        s, e = geom.slot_span(start, i)
        data_slots.append((s, e, node, purpose))
    return TdmaFrame(
        index=index,
        start=start,
        mode=mode,
        eis=(start, start + geom.eis_len),
        control=(start + geom.eis_len, start + geom.data_offset),
        data_slots=data_slots,
    )


class FpsMac:
    """Event-driven TDMA protocol over the shared engine."""

    IND = "indication"
    EIS_ACK = "eis-ack"
    SCHED = "schedule"
    DATA = "data-whole"
    ACK = "ack"

    def __init__(
        self,
        eng: Engine,
        nodes: list[NodeConfig],
        metrics: MetricsCollector,
        ledger: EnergyLedger,
        seed: int,
        timing: FpsTiming | None = None,
        payload_bytes: int = 34,
        normal_interval_us: int = 10_000_000,
        emergency_interval_us: int = 120_000_000,
        initial_energy_uj: float = 50e6,
        area_m: float = 50.0,
    ):
        self.eng = eng
        self.nodes = nodes
        self.metrics = metrics
        self.ledger = ledger
        self.timing = timing or FpsTiming()
        self.geom = FrameGeometry(self.timing, payload_bytes, eng.bitrate_bps, eng.cca_us)
        self.payload_bytes = payload_bytes
        self.initial_energy_uj = initial_energy_uj
        self.diag_m = area_m * math.sqrt(2.0)
        self.member_ids = [nc.node_id for nc in nodes]

        cx = cy = area_m / 2.0
        self._dist = {
            nc.node_id: math.hypot(nc.x - cx, nc.y - cy) for nc in nodes
        }
        self.cluster = run_setup(
            self.member_ids,
            {m: initial_energy_uj for m in self.member_ids},
            self.timing.slots_per_frame,
        )

        n = max(self.member_ids) + 1
        self._emq = [deque() for _ in range(n)]
        self._nq = [deque() for _ in range(n)]
        self._em_retry = [0] * n
        self._nq_retry = [0] * n
        self._rng = [substream(seed, i) for i in range(n)]
        self._ch_rng = self._rng[SINK]
        self._next_pid = 0
        # Next scheduled arrival per node, for the empty-frame fast-forward.
        self._next_norm = [-1] * n
        self._next_em = [-1] * n

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

        # Per-frame state; only one frame is in flight at a time.
        self._frame_t = 0
        self._frame_idx = 0
        self._mode = MODE_PERIODIC
        self._snapshot = {}
        self._contenders = []
        self._transmitters = []
        self._collision = False
        self._winner = None
        self._eis_outcome = "empty"

        eng.add_end_listener(self._on_tx_end)

    # -- lifecycle ------------------------------------------------------

    def start(self) -> None:
        for nc in self.nodes:
            prof = self._normal_profile[nc.node_id]
            self._next_norm[nc.node_id] = prof.phase_us
            self.eng.schedule(prof.phase_us, nc.node_id, self._arrival_normal, nc.node_id)
            eprof = self._emergency_profile.get(nc.node_id)
            if eprof is not None:
                self._next_em[nc.node_id] = eprof.phase_us
                self.eng.schedule(
                    eprof.phase_us, nc.node_id, self._arrival_emergency, nc.node_id
                )
        self.eng.schedule(0, SINK, self._frame_start, None)

    def finish(self) -> None:
        # Frame accruals already tile [0, duration); nothing left to flush.
        pass

    # -- energy ---------------------------------------------------------

    def _span(self, s: int, e: int) -> int:
        d = self.eng.duration_us
        if e > d:
            e = d
        return e - s if e > s else 0

    def _accrue_baseline(self, f: int) -> None:
        """Baseline radio budget for frame [f, f+frame_len), clipped to the run."""
        g = self.geom
        add = self.ledger.add
        awake = self._span(f, f + g.data_offset)
        asleep = self._span(f + g.data_offset, f + g.frame_len)
        for m in self.member_ids:
            add(m, RX, awake)
            add(m, SLEEP, asleep)
        # CH: listens all frame except while broadcasting the schedule.
        ctrl = f + g.eis_len
        add(SINK, RX, self._span(f, ctrl))
        add(SINK, TX, self._span(ctrl, ctrl + g.sched_air))
        add(SINK, RX, self._span(ctrl + g.sched_air, f + g.frame_len))

    def _adjust(self, node: int, from_state: int, to_state: int, s: int, e: int) -> None:
        dt = self._span(s, e)
        if dt:
            self.ledger.move(node, from_state, to_state, dt)

    # -- traffic --------------------------------------------------------

    def _make_packet(self, node: int, klass: str) -> Packet:
        p = Packet(self._next_pid, node, klass, self.eng.now, self.payload_bytes)
        self._next_pid += 1
        self.metrics.record_generated(p)
        if self.eng.trace is not None:
            self.eng.trace(self.eng.now, node, "arrival", f"class={klass} id={p.pid}")
        return p

    def _arrival_normal(self, node: int) -> None:
        self._nq[node].append(self._make_packet(node, NORMAL))
        t = next_arrival(self._normal_profile[node], self.eng.now)
        self._next_norm[node] = t
        self.eng.schedule(t, node, self._arrival_normal, node)

    def _arrival_emergency(self, node: int) -> None:
        self._emq[node].append(self._make_packet(node, EMERGENCY))
        t = next_arrival(self._emergency_profile[node], self.eng.now)
        self._next_em[node] = t
        self.eng.schedule(t, node, self._arrival_emergency, node)

    # -- frame cycle ------------------------------------------------------

    def _frame_start(self, _arg) -> None:
        f = self.eng.now
        emq = self._emq
        nq = self._nq
        snapshot = {}
        contenders = []
        for m in self.member_ids:
            ne = len(emq[m])
            nn = len(nq[m])
            if ne or nn:
                snapshot[m] = (ne, nn)
                if ne:
                    contenders.append(m)
        if not snapshot and self.eng.trace is None:
            self._fast_forward(f)
            return

        self._accrue_baseline(f)
        self._frame_t = f
        self._snapshot = snapshot
        self._contenders = contenders
        self._mode = MODE_PERIODIC
        self._collision = False
        self._winner = None
        self._eis_outcome = "empty"

        transmitters = []
        for m in contenders:
            if self._rng[m].random() < self.timing.eis_persistence:
                transmitters.append(m)
        self._transmitters = transmitters
        if contenders:
            self._eis_outcome = "no-tx" if not transmitters else "pending"
        if self.eng.trace is not None:
            self.eng.trace(
                f, SINK, "eis",
                f"idx={self._frame_idx} contenders={len(contenders)} transmitters={len(transmitters)}",
            )
        if transmitters:
            self.eng.schedule(f + self.geom.cca_us, SINK, self._eis_transmit, None)
        self.eng.schedule(f + self.geom.eis_len, SINK, self._control, None)

        nxt = f + self.geom.frame_len
        self._frame_idx += 1
        if nxt < self.eng.duration_us:
            self.eng.schedule(nxt, SINK, self._frame_start, None)

    def _fast_forward(self, f: int) -> None:
        """Skip frames that provably do nothing: no queued data at their start.

        Such frames draw no randomness and put nothing on the air, so only
        their baseline energy needs accruing. Arrivals inside a skipped
        span belong to the first frame starting at or after them anyway
        (claims are snapshotted at frame start).
        """
        g = self.geom
        d = self.eng.duration_us
        ta = None
        for m in self.member_ids:
            t = self._next_norm[m]
            if ta is None or (t >= 0 and t < ta):
                ta = t
            t = self._next_em[m]
            if t >= 0 and t < ta:
                ta = t
        if ta is None or ta >= d:
            while f < d:
                self._accrue_baseline(f)
                self._frame_idx += 1
                f += g.frame_len
            return
        k = (ta - f + g.frame_len - 1) // g.frame_len
        if k < 1:
            k = 1
        for j in range(k):
            start = f + j * g.frame_len
            if start >= d:
                k = j
                break
            self._accrue_baseline(start)
        self._frame_idx += k
        nxt = f + k * g.frame_len
        if nxt < d:
            self.eng.schedule(nxt, SINK, self._frame_start, None)

    def _eis_transmit(self, _arg) -> None:
        f = self._frame_t
        g = self.geom
        for m in self._transmitters:
            self._adjust(m, RX, TX, f + g.cca_us, f + g.cca_us + g.ind_air)
            label = f" idx={self._frame_idx - 1}" if self.eng.trace is not None else ""
            self.eng.begin_tx(m, self.timing.indication_bytes, self.IND, m, label)

    # -- transmission completions ----------------------------------------

    def _on_tx_end(self, tx, corrupted: bool) -> None:
        kind = tx.kind
        if kind == self.DATA:
            self._on_data_end(tx, corrupted)
        elif kind == self.ACK:
            self._on_ack_end(tx, corrupted)
        elif kind == self.IND:
            self._on_ind_end(tx, corrupted)
        elif kind == self.EIS_ACK:
            self._on_eis_ack_end(tx, corrupted)
        elif kind == self.SCHED:
            self._on_sched_end(tx, corrupted)

    def _on_ind_end(self, tx, corrupted: bool) -> None:
        if corrupted:
            self._collision = True
            self._eis_outcome = "collision"
            return
        # A clean indication means exactly one member transmitted.
        winner = tx.meta
        now = self.eng.now
        self._adjust(SINK, RX, TX, now, now + self.geom.ack_air)
        self.eng.begin_tx(SINK, self.timing.ack_bytes, self.EIS_ACK, winner)

    def _on_eis_ack_end(self, tx, corrupted: bool) -> None:
        winner = tx.meta
        if corrupted:
            raise ProtocolBug("EIS ack collided inside its own window")
        if self._ch_rng.random() < self.timing.ack_loss_p:
            # Winner missed the ack: no mode switch, it re-contends next frame.
            self._eis_outcome = "ack-lost"
            return
        self._mode = MODE_EMERGENCY
        self._winner = winner
        self._eis_outcome = f"winner={winner}"

    def _control(self, _arg) -> None:
        f = self._frame_t
        idx = self._frame_idx - 1
        mode = self._mode
        # Contenders that did not unlock emergency mode burn one retry frame.
        if mode != MODE_EMERGENCY:
            for m in self._contenders:
                self._bump_retry(m, EMERGENCY)

        requests = {}
        for m, (ne, nn) in self._snapshot.items():
            total = ne + nn
            if total > self.timing.slots_per_frame:
                total = self.timing.slots_per_frame
            residual = self.initial_energy_uj - self.ledger.energy_uj(m)
            requests[m] = SlotRequest(
                FuzzyInputs(self._dist[m], residual, total, 1 if ne else 0),
                nn,
            )
        frame = build_frame(
            f, idx, mode, requests, self.geom,
            self.diag_m, self.initial_energy_uj, self.timing.slots_per_frame,
        )
        if self.eng.trace is not None:
            slots = ",".join(f"{n}:{p}" for _, _, n, p in frame.data_slots)
            self.eng.trace(
                self.eng.now, SINK, "frame",
                f"idx={idx} start={f} mode={mode} eis={self._eis_outcome} slots=[{slots}]",
            )
        label = f" idx={idx}" if self.eng.trace is not None else ""
        self.eng.begin_tx(SINK, self.timing.schedule_bytes, self.SCHED, frame, label)

    def _on_sched_end(self, tx, corrupted: bool) -> None:
        if corrupted:
            raise ProtocolBug("schedule broadcast collided")
        frame = tx.meta
        for i, (s, _e, node, purpose) in enumerate(frame.data_slots):
            self.eng.schedule(s, node, self._slot_tx, (node, purpose, i))

    def _slot_tx(self, arg) -> None:
        node, purpose, slot_i = arg
        q = self._emq[node] if purpose == EMERGENCY else self._nq[node]
        if not q:
            if self.eng.trace is not None:
                self.eng.trace(self.eng.now, node, "slot-idle", f"slot={slot_i}")
            return
        packet = q[0]
        now = self.eng.now
        g = self.geom
        # Planned slot activity, charged up front: transmit, then listen for the ack.
        self._adjust(node, SLEEP, TX, now, now + g.data_air)
        self._adjust(node, SLEEP, RX, now + g.data_air, now + g.data_air + g.ack_air)
        label = (
            f" id={packet.pid} slot={slot_i}" if self.eng.trace is not None else ""
        )
        self.eng.begin_tx(
            node,
            packet.payload_bytes + self.timing.header_bytes,
            self.DATA,
            (node, purpose, packet, slot_i),
            label,
        )

    def _on_data_end(self, tx, corrupted: bool) -> None:
        if corrupted:
            raise ProtocolBug("data slot collided; TDMA exclusivity broken")
        node, purpose, packet, slot_i = tx.meta
        now = self.eng.now
        self._adjust(SINK, RX, TX, now, now + self.geom.ack_air)
        label = f" to={node} id={packet.pid}" if self.eng.trace is not None else ""
        self.eng.begin_tx(
            SINK, self.timing.ack_bytes, self.ACK, (node, purpose, packet, slot_i), label
        )

    def _on_ack_end(self, tx, corrupted: bool) -> None:
        if corrupted:
            raise ProtocolBug("slot ack collided inside its own slot")
        node, purpose, packet, slot_i = tx.meta
        now = self.eng.now
        if self._ch_rng.random() < self.timing.ack_loss_p:
            # Receiver missed the ack; the packet stays queued for the next frame.
            if self.eng.trace is not None:
                self.eng.trace(now, node, "ack-lost", f"id={packet.pid}")
            self._bump_retry(node, packet.klass)
            return
        q = self._emq[node] if packet.klass == EMERGENCY else self._nq[node]
        popped = q.popleft()
        if popped is not packet:
            raise ProtocolBug("slot served a packet that was not the class head")
        if packet.klass == EMERGENCY:
            self._em_retry[node] = 0
        else:
            self._nq_retry[node] = 0
        self.metrics.record_delivery(packet, now)
        if self.eng.trace is not None:
            self.eng.trace(
                now, node, "delivery",
                f"id={packet.pid} class={packet.klass} delay={now - packet.gen_time}",
            )

    # -- retry bookkeeping -------------------------------------------------

    def _bump_retry(self, node: int, klass: str) -> None:
        if klass == EMERGENCY:
            self._em_retry[node] += 1
            if self._em_retry[node] > self.timing.max_retry_frames:
                self._em_retry[node] = 0
                packet = self._emq[node].popleft()
                self.metrics.record_drop(packet)
                if self.eng.trace is not None:
                    self.eng.trace(
                        self.eng.now, node, "drop", f"id={packet.pid} class={EMERGENCY}"
                    )
        else:
            self._nq_retry[node] += 1
            if self._nq_retry[node] > self.timing.max_retry_frames:
                self._nq_retry[node] = 0
                packet = self._nq[node].popleft()
                self.metrics.record_drop(packet)
                if self.eng.trace is not None:
                    self.eng.trace(
                        self.eng.now, node, "drop", f"id={packet.pid} class={NORMAL}"
                    )
