"""Pure-Python queue kernel (fallback for the compiled ``_qcore``).

Multi-queue, multi-worker, non-preemptive scheduling with aging, on an
integer-microsecond clock. Event order at equal times: completions before
arrivals, then by scheduling sequence. After every event, idle workers take
the request with the lowest ``rank - wait // aging``; ties go to the
earlier arrival, then the lower index.
"""

from __future__ import annotations

import heapq
from collections import deque

import numpy as np


def simulate_queue(arrival_us, service_us, rank, queue_of, capacity, workers, aging_us, horizon_us=-1):
    arrival = np.asarray(arrival_us, dtype=np.int64)
    service = np.asarray(service_us, dtype=np.int64)
    rank = np.asarray(rank, dtype=np.int64)
    queue_of = np.asarray(queue_of, dtype=np.int64)
    n = len(arrival)
    nq = len(capacity)
    start = np.full(n, -1, dtype=np.int64)
    finish = np.full(n, -1, dtype=np.int64)
    rejected = np.zeros(n, dtype=np.uint8)

    arr = arrival.tolist()
    svc = service.tolist()
    rk = rank.tolist()
    qo = queue_of.tolist()
    caps = [int(c) for c in capacity]
    queues = [deque() for _ in range(nq)]
    done = []  # heap of (finish_us, seq, idx)
    seq = 0
    idle = int(workers)
    events = 0
    nxt = 0
    start_l = [-1] * n
    finish_l = [-1] * n

    while True:
        if done and (nxt >= n or done[0][0] <= arr[nxt]):
            now, _, idx = done[0]
            if 0 <= horizon_us <= now:
                break
            heapq.heappop(done)
            finish_l[idx] = now
            idle += 1
        elif nxt < n:
            now = arr[nxt]
            if 0 <= horizon_us <= now:
                break
            q = qo[nxt]
            if caps[q] >= 0 and len(queues[q]) >= caps[q]:
                rejected[nxt] = 1
            else:
                queues[q].append(nxt)
            nxt += 1
        else:
            break
        events += 1

        while idle > 0:
            best_q = -1
            best = None
            for q in range(nq):
                if not queues[q]:
                    continue
                i = queues[q][0]
                key = (rk[i] - (now - arr[i]) // aging_us, arr[i], i)
                if best is None or key < best:
                    best, best_q = key, q
            if best_q < 0:
                break
            i = queues[best_q].popleft()
            start_l[i] = now
            heapq.heappush(done, (now + svc[i], seq, i))
            seq += 1
            idle -= 1

    start[:] = start_l
    finish[:] = finish_l
    return start, finish, rejected, events
