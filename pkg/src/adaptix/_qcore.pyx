# cython: language_level=3
"""Compiled queue kernel; same contract as ``adaptix._qcore_py``."""

import numpy as np

from libc.stdint cimport int64_t


cdef inline bint _before(int64_t t1, int64_t s1, int64_t t2, int64_t s2) nogil:
    return t1 < t2 or (t1 == t2 and s1 < s2)


cdef void _heap_push(int64_t[:] ht, int64_t[:] hs, int64_t[:] hi, int64_t* size,
                     int64_t t, int64_t s, int64_t i) nogil:
    cdef int64_t pos = size[0]
    cdef int64_t parent
    size[0] += 1
    while pos > 0:
        parent = (pos - 1) >> 1
        if _before(t, s, ht[parent], hs[parent]):
            ht[pos] = ht[parent]
            hs[pos] = hs[parent]
            hi[pos] = hi[parent]
            pos = parent
        else:
            break
    ht[pos] = t
    hs[pos] = s
    hi[pos] = i


cdef void _heap_pop(int64_t[:] ht, int64_t[:] hs, int64_t[:] hi, int64_t* size) nogil:
    cdef int64_t n = size[0] - 1
    cdef int64_t t = ht[n]
    cdef int64_t s = hs[n]
    cdef int64_t i = hi[n]
    cdef int64_t pos = 0
    cdef int64_t child
    size[0] = n
    if n == 0:
        return
    while True:
        child = 2 * pos + 1
        if child >= n:
            break
        if child + 1 < n and _before(ht[child + 1], hs[child + 1], ht[child], hs[child]):
            child += 1
        if _before(ht[child], hs[child], t, s):
            ht[pos] = ht[child]
            hs[pos] = hs[child]
            hi[pos] = hi[child]
            pos = child
        else:
            break
    ht[pos] = t
    hs[pos] = s
    hi[pos] = i


def simulate_queue(arrival_us, service_us, rank, queue_of, capacity, workers, aging_us, horizon_us=-1):
    cdef int64_t[:] arr = np.ascontiguousarray(arrival_us, dtype=np.int64)
    cdef int64_t[:] svc = np.ascontiguousarray(service_us, dtype=np.int64)
    cdef int64_t[:] rk = np.ascontiguousarray(rank, dtype=np.int64)
    cdef int64_t[:] qo = np.ascontiguousarray(queue_of, dtype=np.int64)
    cdef int64_t[:] caps = np.ascontiguousarray(capacity, dtype=np.int64)
    cdef int64_t n = arr.shape[0]
    cdef int64_t nq = caps.shape[0]
    cdef int64_t aging = aging_us
    cdef int64_t horizon = horizon_us
    cdef int64_t idle = workers

    start_np = np.full(n, -1, dtype=np.int64)
    finish_np = np.full(n, -1, dtype=np.int64)
    rejected_np = np.zeros(n, dtype=np.uint8)
    cdef int64_t[:] start = start_np
    cdef int64_t[:] finish = finish_np
    cdef unsigned char[:] rejected = rejected_np

    # one ring per queue; a queue never holds more than n entries
    cdef int64_t[:, :] ring = np.empty((max(nq, 1), max(n, 1)), dtype=np.int64)
    cdef int64_t[:] head = np.zeros(max(nq, 1), dtype=np.int64)
    cdef int64_t[:] tail = np.zeros(max(nq, 1), dtype=np.int64)

    cdef int64_t hcap = max(workers, 1) + 1
    cdef int64_t[:] ht = np.empty(hcap, dtype=np.int64)
    cdef int64_t[:] hs = np.empty(hcap, dtype=np.int64)
    cdef int64_t[:] hi = np.empty(hcap, dtype=np.int64)
    cdef int64_t hsize = 0

    cdef int64_t nxt = 0
    cdef int64_t seq = 0
    cdef int64_t events = 0
    cdef int64_t now = 0
    cdef int64_t q, i, best_q, best_eff, best_arr, best_i, eff, wait

    with nogil:
        while True:
            if hsize > 0 and (nxt >= n or ht[0] <= arr[nxt]):
                now = ht[0]
                if horizon >= 0 and now >= horizon:
                    break
                i = hi[0]
                _heap_pop(ht, hs, hi, &hsize)
                finish[i] = now
                idle += 1
            elif nxt < n:
                now = arr[nxt]
                if horizon >= 0 and now >= horizon:
                    break
                q = qo[nxt]
                if caps[q] >= 0 and tail[q] - head[q] >= caps[q]:
                    rejected[nxt] = 1
                else:
                    ring[q, tail[q]] = nxt
                    tail[q] += 1
                nxt += 1
            else:
                break
            events += 1

            while idle > 0:
                best_q = -1
                best_eff = 0
                best_arr = 0
                best_i = 0
                for q in range(nq):
                    if tail[q] == head[q]:
                        continue
                    i = ring[q, head[q]]
                    wait = now - arr[i]
                    if wait < 0:
                        wait = 0
                    eff = rk[i] - wait // aging
                    if (best_q < 0 or eff < best_eff
                            or (eff == best_eff and (arr[i] < best_arr
                                                      or (arr[i] == best_arr and i < best_i)))):
                        best_q = q
                        best_eff = eff
                        best_arr = arr[i]
                        best_i = i
                if best_q < 0:
                    break
                head[best_q] += 1
                start[best_i] = now
                _heap_push(ht, hs, hi, &hsize, now + svc[best_i], seq, best_i)
                seq += 1
                idle -= 1

    return start_np, finish_np, rejected_np, int(events)
