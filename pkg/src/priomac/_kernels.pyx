# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: event queue, broadcast channel, fuzzy centroid.

Same observable semantics as ``_pykernels.py``, down to the bit for the
centroid (the build disables mul+add fusion). The heap keys live in C
arrays so event ordering costs integer compares instead of boxed list
comparisons.
"""

from cpython.mem cimport PyMem_Free, PyMem_Malloc, PyMem_Realloc


cdef class EventQueue:
    """Min-heap of events ordered by (fire_time, owner, insertion seq)."""

    cdef long long* _t
    cdef long long* _o
    cdef long long* _s
    cdef list _fn
    cdef list _arg
    cdef Py_ssize_t _n
    cdef Py_ssize_t _cap
    cdef long long _seq
    cdef set _queued
    cdef set _cancelled

    def __cinit__(self):
        self._cap = 256
        self._t = <long long*> PyMem_Malloc(self._cap * sizeof(long long))
        self._o = <long long*> PyMem_Malloc(self._cap * sizeof(long long))
        self._s = <long long*> PyMem_Malloc(self._cap * sizeof(long long))
        if self._t == NULL or self._o == NULL or self._s == NULL:
            raise MemoryError()
        self._fn = []
        self._arg = []
        self._n = 0
        self._seq = 0
        self._queued = set()
        self._cancelled = set()

    def __dealloc__(self):
        PyMem_Free(self._t)
        PyMem_Free(self._o)
        PyMem_Free(self._s)

    cdef int _grow(self) except -1:
        cdef Py_ssize_t cap = self._cap * 2
        cdef long long* t = <long long*> PyMem_Realloc(self._t, cap * sizeof(long long))
        if t == NULL:
            raise MemoryError()
        self._t = t
        cdef long long* o = <long long*> PyMem_Realloc(self._o, cap * sizeof(long long))
        if o == NULL:
            raise MemoryError()
        self._o = o
        cdef long long* s = <long long*> PyMem_Realloc(self._s, cap * sizeof(long long))
        if s == NULL:
            raise MemoryError()
        self._s = s
        self._cap = cap
        return 0

    cdef inline bint _lt(self, Py_ssize_t i, Py_ssize_t j):
        if self._t[i] != self._t[j]:
            return self._t[i] < self._t[j]
        if self._o[i] != self._o[j]:
            return self._o[i] < self._o[j]
        return self._s[i] < self._s[j]

    cdef inline void _swap(self, Py_ssize_t i, Py_ssize_t j):
        cdef long long tmp
        tmp = self._t[i]; self._t[i] = self._t[j]; self._t[j] = tmp
        tmp = self._o[i]; self._o[i] = self._o[j]; self._o[j] = tmp
        tmp = self._s[i]; self._s[i] = self._s[j]; self._s[j] = tmp
        self._fn[i], self._fn[j] = self._fn[j], self._fn[i]
        self._arg[i], self._arg[j] = self._arg[j], self._arg[i]

    cdef void _sift_up(self, Py_ssize_t i):
        cdef Py_ssize_t parent
        while i > 0:
            parent = (i - 1) >> 1
            if self._lt(i, parent):
                self._swap(i, parent)
                i = parent
            else:
                break

    cdef void _sift_down(self, Py_ssize_t i):
        cdef Py_ssize_t child, n = self._n
        while True:
            child = 2 * i + 1
            if child >= n:
                break
            if child + 1 < n and self._lt(child + 1, child):
                child += 1
            if self._lt(child, i):
                self._swap(i, child)
                i = child
            else:
                break

    def push(self, time, owner, fn, arg):
        cdef Py_ssize_t i = self._n
        if i >= self._cap:
            self._grow()
        cdef long long seq = self._seq
        self._seq = seq + 1
        self._t[i] = time
        self._o[i] = owner
        self._s[i] = seq
        self._fn.append(fn)
        self._arg.append(arg)
        self._n = i + 1
        self._sift_up(i)
        self._queued.add(seq)
        return seq

    def cancel(self, handle):
        if handle in self._queued:
            self._queued.discard(handle)
            self._cancelled.add(handle)

    cdef tuple _pop_root(self):
        cdef Py_ssize_t last = self._n - 1
        cdef tuple out = (self._t[0], self._o[0], self._s[0], self._fn[0], self._arg[0])
        if last > 0:
            self._t[0] = self._t[last]
            self._o[0] = self._o[last]
            self._s[0] = self._s[last]
            self._fn[0] = self._fn[last]
            self._arg[0] = self._arg[last]
        del self._fn[last]
        del self._arg[last]
        self._n = last
        if last > 0:
            self._sift_down(0)
        return out

    def pop(self):
        cdef tuple entry
        while self._n > 0:
            entry = self._pop_root()
            if entry[2] in self._cancelled:
                self._cancelled.discard(entry[2])
                continue
            self._queued.discard(entry[2])
            return (entry[0], entry[1], entry[3], entry[4])
        return None

    def next_time(self):
        while self._n > 0 and self._s[0] in self._cancelled:
            self._cancelled.discard(self._s[0])
            self._pop_root()
        if self._n == 0:
            return -1
        return self._t[0]

    def __len__(self):
        return len(self._queued)


cdef struct TxSlot:
    long long src
    long long start
    long long end
    long long handle
    int corrupted
    int used


cdef class Channel:
    """Single broadcast medium; any overlap in [start, end) corrupts both frames."""

    cdef TxSlot* _slots
    cdef Py_ssize_t _cap
    cdef long long _next
    cdef long long _max_done_end
    cdef int _has_done

    def __cinit__(self):
        self._cap = 64
        self._slots = <TxSlot*> PyMem_Malloc(self._cap * sizeof(TxSlot))
        if self._slots == NULL:
            raise MemoryError()
        cdef Py_ssize_t i
        for i in range(self._cap):
            self._slots[i].used = 0
        self._next = 0
        self._has_done = 0
        self._max_done_end = 0

    def __dealloc__(self):
        PyMem_Free(self._slots)

    cdef Py_ssize_t _find(self, long long handle):
        cdef Py_ssize_t i
        for i in range(self._cap):
            if self._slots[i].used and self._slots[i].handle == handle:
                return i
        return -1

    def begin(self, src, start, end):
        cdef long long cstart = start
        cdef int corrupted = 0
        cdef Py_ssize_t i, free_i = -1
        for i in range(self._cap):
            if self._slots[i].used:
                if self._slots[i].end > cstart:
                    self._slots[i].corrupted = 1
                    corrupted = 1
            elif free_i < 0:
                free_i = i
        cdef Py_ssize_t old_cap
        if free_i < 0:
            old_cap = self._cap
            self._cap = old_cap * 2
            self._slots = <TxSlot*> PyMem_Realloc(self._slots, self._cap * sizeof(TxSlot))
            if self._slots == NULL:
                raise MemoryError()
            for i in range(old_cap, self._cap):
                self._slots[i].used = 0
            free_i = old_cap
        cdef long long handle = self._next
        self._next = handle + 1
        self._slots[free_i].src = src
        self._slots[free_i].start = cstart
        self._slots[free_i].end = end
        self._slots[free_i].handle = handle
        self._slots[free_i].corrupted = corrupted
        self._slots[free_i].used = 1
        return handle

    def finish(self, handle):
        cdef Py_ssize_t i = self._find(handle)
        if i < 0:
            raise KeyError(handle)
        self._slots[i].used = 0
        if not self._has_done or self._slots[i].end > self._max_done_end:
            self._max_done_end = self._slots[i].end
            self._has_done = 1
        return bool(self._slots[i].corrupted)

    def busy_at(self, t):
        cdef long long ct = t
        cdef Py_ssize_t i
        for i in range(self._cap):
            if self._slots[i].used and self._slots[i].start <= ct < self._slots[i].end:
                return True
        return False

    def busy_in(self, t0, t1):
        cdef long long c0 = t0, c1 = t1
        if self._has_done and self._max_done_end > c0:
            return True
        cdef Py_ssize_t i
        for i in range(self._cap):
            if self._slots[i].used and self._slots[i].start < c1 and self._slots[i].end > c0:
                return True
        return False

    def busy_until(self, now):
        cdef long long t = now
        cdef Py_ssize_t i
        for i in range(self._cap):
            if self._slots[i].used and self._slots[i].end > t:
                t = self._slots[i].end
        return t

    def active_count(self):
        cdef Py_ssize_t i, n = 0
        for i in range(self._cap):
            if self._slots[i].used:
                n += 1
        return n


cdef inline double _tri(double x, double a, double b, double c):
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


def fuzzy_core(double d, double e, double s):
    """Mamdani inference over normalized (distance, residual energy, slots).

    Same rule base, output sets, and 1001-point centroid as the pure
    kernel; operation order matches so both backends agree bit for bit.
    """
    if not (0.0 <= d <= 1.0 and 0.0 <= e <= 1.0 and 0.0 <= s <= 1.0):
        raise ValueError("fuzzy inputs must lie in [0, 1]")

    cdef double d_lo = _tri(d, 0.0, 0.0, 0.5)
    cdef double d_hi = _tri(d, 0.5, 1.0, 1.0)
    cdef double e_lo = _tri(e, 0.0, 0.0, 0.5)
    cdef double e_mid = _tri(e, 0.0, 0.5, 1.0)
    cdef double e_hi = _tri(e, 0.5, 1.0, 1.0)
    cdef double s_lo = _tri(s, 0.0, 0.0, 0.5)
    cdef double s_mid = _tri(s, 0.0, 0.5, 1.0)
    cdef double s_hi = _tri(s, 0.5, 1.0, 1.0)

    cdef double act_hi = max(min(d_lo, s_hi), min(e_hi, s_hi))
    cdef double act_mid = max(e_mid, s_mid)
    cdef double act_lo = max(min(e_lo, s_lo), d_hi)

    cdef double num = 0.0
    cdef double den = 0.0
    cdef double x, m, m_lo, m_mid, m_hi
    cdef int i
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
