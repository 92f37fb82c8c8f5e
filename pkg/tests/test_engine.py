"""Event queue ordering, airtime arithmetic, and collision-channel semantics."""

import pytest

from priomac.engine import Engine, ProtocolBug, substream, tx_duration_us


# -- airtime --------------------------------------------------------------

def test_tx_duration_oracle():
    # 8e6 * nbytes / 250000, exact for the default bitrate
    assert tx_duration_us(39) == 1248   # 34 B payload + 5 B header
    assert tx_duration_us(13) == 416    # 8 B fragment + header
    assert tx_duration_us(11) == 352    # ack
    assert tx_duration_us(8) == 256     # indication
    assert tx_duration_us(30) == 960    # schedule broadcast
    assert tx_duration_us(1) == 32


def test_tx_duration_rounds_up():
    # 8 bits / 300 kbit/s = 26.67 us -> 27
    assert tx_duration_us(1, 300_000) == 27


def test_tx_duration_rejects_empty_frame():
    with pytest.raises(ValueError):
        tx_duration_us(0)


def test_substream_disjoint_and_reproducible():
    a = substream(1, 5)
    b = substream(1, 5)
    c = substream(1, 6)
    seq_a = [a.random() for _ in range(4)]
    assert seq_a == [b.random() for _ in range(4)]
    assert seq_a != [c.random() for _ in range(4)]


# -- event ordering -------------------------------------------------------

def test_events_fire_by_time_then_owner_then_insertion():
    eng = Engine(duration_us=1000)
    fired = []
    eng.schedule(500, 2, fired.append, "t500-o2")
    eng.schedule(100, 9, fired.append, "t100-o9")
    eng.schedule(500, 1, fired.append, "t500-o1-first")
    eng.schedule(500, 1, fired.append, "t500-o1-second")
    eng.schedule(100, 3, fired.append, "t100-o3")
    eng.run()
    assert fired == [
        "t100-o3",
        "t100-o9",
        "t500-o1-first",
        "t500-o1-second",
        "t500-o2",
    ]


def test_cancel_suppresses_event():
    eng = Engine(duration_us=1000)
    fired = []
    keep = eng.schedule(300, 1, fired.append, "keep")
    drop = eng.schedule(200, 1, fired.append, "drop")
    eng.cancel(drop)
    eng.cancel(drop)  # cancelling twice is harmless
    eng.run()
    assert fired == ["keep"]
    assert keep != drop


def test_run_boundary_semantics():
    # An event exactly at the horizon fires; later ones do not. The clock
    # always lands on the horizon afterwards.
    eng = Engine(duration_us=1000)
    fired = []
    eng.schedule(1000, 1, fired.append, "at-end")
    eng.schedule(1001, 1, fired.append, "past-end")
    eng.run()
    assert fired == ["at-end"]
    assert eng.now == 1000


def test_schedule_in_past_is_a_bug():
    eng = Engine(duration_us=1000)
    with pytest.raises(ProtocolBug):
        eng.schedule(-1, 1, lambda a: None)


def test_after_is_relative_to_now():
    eng = Engine(duration_us=1000)
    seen = []
    def first(_):
        eng.after(50, 1, lambda _a: seen.append(eng.now))
    eng.schedule(100, 1, first)
    eng.run()
    assert seen == [150]


# -- collision channel ----------------------------------------------------

def collect_endings(eng):
    ended = []
    eng.add_end_listener(lambda tx, corrupted: ended.append((tx.src, tx.kind, corrupted)))
    return ended


def test_lone_transmission_is_clean():
    eng = Engine(duration_us=10_000)
    ended = collect_endings(eng)
    eng.schedule(100, 1, lambda _: eng.begin_tx(1, 11, "ack"))
    eng.run()
    assert ended == [(1, "ack", False)]


def test_one_microsecond_overlap_corrupts_both():
    eng = Engine(duration_us=10_000)
    ended = collect_endings(eng)
    # [100, 452) and [451, 803): a single shared microsecond
    eng.schedule(100, 1, lambda _: eng.begin_tx(1, 11, "a"))
    eng.schedule(451, 2, lambda _: eng.begin_tx(2, 11, "b"))
    eng.run()
    assert ended == [(1, "a", True), (2, "b", True)]


def test_back_to_back_transmissions_are_clean():
    # [100, 452) then [452, 804): half-open spans never touch
    eng = Engine(duration_us=10_000)
    ended = collect_endings(eng)
    eng.schedule(100, 1, lambda _: eng.begin_tx(1, 11, "a"))
    eng.schedule(452, 2, lambda _: eng.begin_tx(2, 11, "b"))
    eng.run()
    assert ended == [(1, "a", False), (2, "b", False)]


def test_simultaneous_starts_corrupt_both():
    eng = Engine(duration_us=10_000)
    ended = collect_endings(eng)
    eng.schedule(100, 1, lambda _: eng.begin_tx(1, 11, "a"))
    eng.schedule(100, 2, lambda _: eng.begin_tx(2, 11, "b"))
    eng.run()
    assert [(s, c) for s, _, c in ended] == [(1, True), (2, True)]


def test_three_way_pileup_corrupts_all():
    eng = Engine(duration_us=10_000)
    ended = collect_endings(eng)
    eng.schedule(100, 1, lambda _: eng.begin_tx(1, 39, "a"))   # [100, 1348)
    eng.schedule(300, 2, lambda _: eng.begin_tx(2, 11, "b"))   # inside a
    eng.schedule(1200, 3, lambda _: eng.begin_tx(3, 11, "c"))  # clips a's tail
    eng.run()
    assert all(c for _, _, c in ended)


def test_double_transmit_from_same_node_is_a_bug():
    eng = Engine(duration_us=10_000)
    def go(_):
        eng.begin_tx(1, 39, "a")
        eng.begin_tx(1, 11, "b")
    eng.schedule(100, 1, go)
    with pytest.raises(ProtocolBug):
        eng.run()


def test_carrier_sense_sees_active_and_recent_transmissions():
    eng = Engine(duration_us=10_000)
    readings = {}
    eng.schedule(100, 1, lambda _: eng.begin_tx(1, 11, "a"))  # [100, 452)
    def probe(tag):
        readings[tag] = eng.carrier_sense(128)
    eng.schedule(300, 2, probe, "mid-tx")          # window (172, 300) overlaps
    eng.schedule(500, 2, probe, "tail-in-window")  # window (372, 500) overlaps
    eng.schedule(580, 2, probe, "just-clear")      # window (452, 580) starts at tx end
    eng.schedule(5000, 2, probe, "long-idle")
    eng.run()
    assert readings == {
        "mid-tx": True,
        "tail-in-window": True,
        "just-clear": False,
        "long-idle": False,
    }


def test_trace_records_transmission_lifecycle():
    rec = []
    eng = Engine(duration_us=10_000, trace=lambda t, n, k, d: rec.append((t, n, k, d)))
    eng.schedule(100, 1, lambda _: eng.begin_tx(1, 11, "ack", label=" to=7"))
    eng.run()
    assert (100, 1, "tx-start", "kind=ack to=7") in rec
    assert (452, 1, "tx-end", "kind=ack to=7 corrupted=0") in rec
