"""Deterministic discrete-event core shared by both MAC protocols.

Time is integer microseconds so no float drift can reorder events. Ties
dispatch by (fire_time, owner node id, insertion order), and all
randomness comes from per-node substreams of the run seed, so one
(config, seed) pair always replays the same trace.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .core import Channel, EventQueue

DEFAULT_BITRATE_BPS = 250_000  # 802.15.4-class radio
DEFAULT_CCA_US = 128

SINK = 0  # cluster head / sink node id; members are 1..n

_MASK64 = (1 << 64) - 1
# Substream index offsets. MAC draws use the node id itself; phase draws and
# topology draws get their own streams so contention never perturbs them.
PHASE_STREAM_OFFSET = 1 << 16
POPULATION_STREAM = 1 << 20


class ProtocolBug(RuntimeError):
    """A protocol violated an engine contract (double transmit, past event)."""


def substream(seed: int, index: int) -> random.Random:
    """Independent RNG for one (seed, stream index) pair via splitmix64."""
    z = (seed + (index + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return random.Random(z ^ (z >> 31))


def tx_duration_us(nbytes: int, bitrate_bps: int = DEFAULT_BITRATE_BPS) -> int:
    """Airtime of one frame, rounded up to a whole microsecond."""
    if nbytes < 1:
        raise ValueError("a frame must carry at least one byte")
    return (nbytes * 8 * 1_000_000 + bitrate_bps - 1) // bitrate_bps


@dataclass(slots=True)
class Transmission:
    src: int
    start: int
    end: int
    kind: str
    nbytes: int
    meta: object
    handle: int
    label: str


class Engine:
    """Event loop owning the virtual clock, event queue, and broadcast channel."""

    def __init__(
        self,
        duration_us: int,
        bitrate_bps: int = DEFAULT_BITRATE_BPS,
        cca_us: int = DEFAULT_CCA_US,
        trace=None,
    ):
        self.now = 0
        self.duration_us = duration_us
        self.bitrate_bps = bitrate_bps
        self.cca_us = cca_us
        self.queue = EventQueue()
        self.channel = Channel()
        self.trace = trace  # callable(time_us, node, kind, detail) or None
        self._transmitting: set[int] = set()
        self._end_listeners = []

    # -- events ---------------------------------------------------------

    def schedule(self, fire_time: int, owner: int, fn, arg=None) -> int:
        if fire_time < self.now:
            raise ProtocolBug(
                f"event scheduled in the past ({fire_time} < {self.now})"
            )
        return self.queue.push(fire_time, owner, fn, arg)

    def after(self, delay: int, owner: int, fn, arg=None) -> int:
        return self.schedule(self.now + delay, owner, fn, arg)

    def cancel(self, handle: int) -> None:
        self.queue.cancel(handle)

    # -- radio ----------------------------------------------------------

    def tx_duration(self, nbytes: int) -> int:
        return tx_duration_us(nbytes, self.bitrate_bps)

    def add_end_listener(self, fn) -> None:
        """fn(tx, corrupted) is called when any transmission leaves the air."""
        self._end_listeners.append(fn)

    def begin_tx(self, src: int, nbytes: int, kind: str, meta=None, label: str = "") -> Transmission:
        if src in self._transmitting:
            raise ProtocolBug(f"node {src} is already transmitting")
        end = self.now + self.tx_duration(nbytes)
        handle = self.channel.begin(src, self.now, end)
        tx = Transmission(src, self.now, end, kind, nbytes, meta, handle, label)
        self._transmitting.add(src)
        if self.trace is not None:
            self.trace(self.now, src, "tx-start", f"kind={kind}{label}")
        self.schedule(end, src, self._end_tx, tx)
        return tx

    def _end_tx(self, tx: Transmission) -> None:
        corrupted = self.channel.finish(tx.handle)
        self._transmitting.discard(tx.src)
        if self.trace is not None:
            self.trace(
                self.now, tx.src, "tx-end",
                f"kind={tx.kind}{tx.label} corrupted={int(corrupted)}",
            )
        for fn in self._end_listeners:
            fn(tx, corrupted)

    def carrier_sense(self, window_us: int) -> bool:
        """Busy/idle verdict for a sensing window that just ended at `now`."""
        if window_us < self.cca_us:
            raise ValueError(f"sensing window shorter than CCA ({self.cca_us} us)")
        return self.channel.busy_in(self.now - window_us, self.now)

    # -- main loop ------------------------------------------------------

    def run(self) -> None:
        """Dispatch events in order until the queue drains or time runs out."""
        pop = self.queue.pop
        duration = self.duration_us
        while True:
            item = pop()
            if item is None:
                break
            t = item[0]
            if t > duration:
                break  # anything later stays in flight
            self.now = t
            item[2](item[3])
        self.now = duration
