"""Two-class periodic traffic over a star topology.

Every member node reports monitoring data on a fixed interval; a chosen
subset additionally raises emergency events on a longer interval. Each
flow gets a random phase so detectors are de-synchronized, and the
emergency subset is the first k entries of one seed-fixed permutation so
sweeps over the subset size stay nested (adding detectors never reshuffles
the existing ones).
"""

from __future__ import annotations

from dataclasses import dataclass

from .engine import PHASE_STREAM_OFFSET, POPULATION_STREAM, substream

NORMAL = "NORMAL"
EMERGENCY = "EMERGENCY"
CLASSES = (EMERGENCY, NORMAL)

NORMAL_INTERVAL_US = 10_000_000
EMERGENCY_INTERVAL_US = 120_000_000
DEFAULT_PAYLOAD_BYTES = 34


@dataclass(slots=True)
class Packet:
    pid: int
    src: int
    klass: str
    gen_time: int
    payload_bytes: int = DEFAULT_PAYLOAD_BYTES


@dataclass(slots=True)
class TrafficProfile:
    klass: str
    interval_us: int
    phase_us: int


@dataclass(slots=True)
class NodeConfig:
    node_id: int
    x: float
    y: float
    emergency: bool
    normal_phase_us: int
    emergency_phase_us: int  # meaningful only when emergency is set


def next_arrival(profile: TrafficProfile, now: int) -> int:
    """First phase + k*interval strictly after `now`."""
    if now < profile.phase_us:
        return profile.phase_us
    k = (now - profile.phase_us) // profile.interval_us + 1
    return profile.phase_us + k * profile.interval_us


def build_population(
    n_total: int,
    n_emergency: int,
    seed: int,
    area_m: float = 50.0,
    normal_interval_us: int = NORMAL_INTERVAL_US,
    emergency_interval_us: int = EMERGENCY_INTERVAL_US,
) -> list[NodeConfig]:
    """Place member nodes uniformly in the square and pick emergency senders.

    Node ids are 1..n_total; the sink (id 0) sits at the square's center and
    is not part of the returned list. Positions and the detector permutation
    come from the population stream; phases come from per-node streams so a
    node's arrival process is identical across subset sizes.
    """
    if n_total < 1:
        raise ValueError("need at least one member node")
    if not 0 <= n_emergency <= n_total:
        raise ValueError(
            f"n_emergency must be in [0, {n_total}], got {n_emergency}"
        )
    rng = substream(seed, POPULATION_STREAM)
    coords = [(rng.uniform(0.0, area_m), rng.uniform(0.0, area_m)) for _ in range(n_total)]
    order = list(range(1, n_total + 1))
    rng.shuffle(order)
    chosen = set(order[:n_emergency])

    nodes = []
    for node_id in range(1, n_total + 1):
        phase_rng = substream(seed, PHASE_STREAM_OFFSET + node_id)
        normal_phase = phase_rng.randrange(normal_interval_us)
        emergency_phase = phase_rng.randrange(emergency_interval_us)
        x, y = coords[node_id - 1]
        nodes.append(
            NodeConfig(
                node_id=node_id,
                x=x,
                y=y,
                emergency=node_id in chosen,
                normal_phase_us=normal_phase,
                emergency_phase_us=emergency_phase,
            )
        )
    return nodes
