"""Pure-Python kernels: event queue, broadcast channel, fuzzy centroid.

This is the fallback backend; ``_kernels.pyx`` compiles the same three
primitives with identical semantics. Both must produce bit-identical
results so a run replays the same way whichever backend is loaded.
"""

from heapq import heappop, heappush


class EventQueue:
    """Min-heap of events ordered by (fire_time, owner, insertion seq).

    The three-part key is a total order, so pop order is independent of
    the heap implementation. Cancelled events are skipped lazily on pop.
    """

    __slots__ = ("_heap", "_entries", "_seq")

    def __init__(self):
        self._heap = []
        self._entries = {}
        self._seq = 0

    def push(self, time, owner, fn, arg):
        seq = self._seq
        self._seq = seq + 1
        entry = [time, owner, seq, fn, arg]
        self._entries[seq] = entry
        heappush(self._heap, entry)
        return seq

    def cancel(self, handle):
        entry = self._entries.pop(handle, None)
        if entry is not None:
            entry[3] = None

    def pop(self):
        heap = self._heap
        while heap:
            entry = heappop(heap)
            if entry[3] is not None:
                del self._entries[entry[2]]
                return (entry[0], entry[1], entry[3], entry[4])
        return None

    def next_time(self):
        heap = self._heap
        while heap and heap[0][3] is None:
            heappop(heap)
        return heap[0][0] if heap else -1

    def __len__(self):
        return len(self._entries)


class Channel:
    """Single broadcast medium; any overlap in [start, end) corrupts both frames."""

    __slots__ = ("_active", "_next", "_max_done_end")

    def __init__(self):
        self._active = {}  # handle -> [src, start, end, corrupted]
        self._next = 0
        self._max_done_end = None

    def begin(self, src, start, end):
        corrupted = 0
        for entry in self._active.values():
            if entry[2] > start:  # still on air at our first microsecond
                entry[3] = 1
                corrupted = 1
        handle = self._next
        self._next = handle + 1
        self._active[handle] = [src, start, end, corrupted]
        return handle

    def finish(self, handle):
        entry = self._active.pop(handle)
        end = entry[2]
        if self._max_done_end is None or end > self._max_done_end:
            self._max_done_end = end
        return bool(entry[3])

    def busy_at(self, t):
        """True if some transmission covers instant t (half-open [start, end))."""
        for entry in self._active.values():
            if entry[1] <= t < entry[2]:
                return True
        return False

    def busy_in(self, t0, t1):
        """True if any transmission overlapped [t0, t1). Valid for t1 <= now."""
        if self._max_done_end is not None and self._max_done_end > t0:
            return True
        for entry in self._active.values():
            if entry[1] < t1 and entry[2] > t0:
                return True
        return False

    def busy_until(self, now):
        """Latest end among transmissions on air; `now` when the channel is clear."""
        t = now
        for entry in self._active.values():
            if entry[2] > t:
                t = entry[2]
        return t

    def active_count(self):
        return len(self._active)


def _tri(x, a, b, c):
    # Triangular membership with degenerate edges: (a, a, c) peaks at a,
    # (a, c, c) peaks at c.
    if x <= a:
        return 1.0 if (x == a and a == b) else 0.0
    if x < b:
        return (x - a) / (b - a)
    if x == b:
        return 1.0
    if x < c:
        return (c - x) / (c - b)
    return 1.0 if (x == c and b == c) else 0.0


def fuzzy_core(d, e, s):
    """Mamdani inference over normalized (distance, residual energy, slots).

    Input sets per axis: low (0,0,0.5), mid (0,0.5,1), high (0.5,1,1).
    Rules: HIGH if (d low and s high) or (e high and s high);
           MID if e mid or s mid;
           LOW if (e low and s low) or d high.
    Output sets low (0,0,0.5), mid (0.25,0.5,0.75), high (0.5,1,1);
    centroid defuzzification sampled at 1001 points on [0, 1].
    """
    if not (0.0 <= d <= 1.0 and 0.0 <= e <= 1.0 and 0.0 <= s <= 1.0):
        raise ValueError("fuzzy inputs must lie in [0, 1]")

    d_lo = _tri(d, 0.0, 0.0, 0.5)
    d_hi = _tri(d, 0.5, 1.0, 1.0)
    e_lo = _tri(e, 0.0, 0.0, 0.5)
    e_mid = _tri(e, 0.0, 0.5, 1.0)
    e_hi = _tri(e, 0.5, 1.0, 1.0)
    s_lo = _tri(s, 0.0, 0.0, 0.5)
    s_mid = _tri(s, 0.0, 0.5, 1.0)
    s_hi = _tri(s, 0.5, 1.0, 1.0)

    act_hi = max(min(d_lo, s_hi), min(e_hi, s_hi))
    act_mid = max(e_mid, s_mid)
    act_lo = max(min(e_lo, s_lo), d_hi)

    num = 0.0
    den = 0.0
    for i in range(1001):
        x = i / 1000.0
        m_lo = _tri(x, 0.0, 0.0, 0.5)
        if m_lo > act_lo:
            m_lo = act_lo
        m_mid = _tri(x, 0.25, 0.5, 0.75)
        if m_mid > act_mid:
            m_mid = act_mid
        m_hi = _tri(x, 0.5, 1.0, 1.0)
        if m_hi > act_hi:
            m_hi = act_hi
        m = m_lo
        if m_mid > m:
            m = m_mid
        if m_hi > m:
            m = m_hi
        num += x * m
        den += m
    if den == 0.0:
        return 0.5  # no rule fired (isolated corner inputs): neutral score
    return num / den
