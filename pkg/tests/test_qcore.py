import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptix import qcore
from adaptix.qcore import backends, mean_in_system, simulate_queue


@st.composite
def queue_problems(draw):
    n = draw(st.integers(0, 60))
    nq = draw(st.integers(1, 3))
    arrival = np.sort(np.array(draw(st.lists(st.integers(0, 2000), min_size=n, max_size=n)), dtype=np.int64))
    service = np.array(draw(st.lists(st.integers(1, 500), min_size=n, max_size=n)), dtype=np.int64)
    q = np.array(draw(st.lists(st.integers(0, nq - 1), min_size=n, max_size=n)), dtype=np.int64)
    caps = np.array(draw(st.lists(st.integers(-1, 5), min_size=nq, max_size=nq)), dtype=np.int64)
    workers = draw(st.integers(1, 3))
    aging = draw(st.integers(1, 400))
    horizon = draw(st.sampled_from([-1, 1000, 2500]))
    return arrival, service, q, q.copy(), caps, workers, aging, horizon


def brute_force(arrival, service, rank, q, caps, workers, aging, horizon):
    """Time-stepped restatement of the kernel contract (slow, obvious)."""
    n = len(arrival)
    start = [-1] * n
    finish = [-1] * n
    rejected = [False] * n
    queues = {i: [] for i in range(len(caps))}
    running = []  # (finish, seq, idx)
    seq = 0
    nxt = 0
    while True:
        t_done = min(running)[0] if running else None
        t_arr = arrival[nxt] if nxt < n else None
        if t_done is not None and (t_arr is None or t_done <= t_arr):
            now = t_done
            if 0 <= horizon <= now:
                break
            running.sort()
            _, _, i = running.pop(0)
            finish[i] = now
        elif t_arr is not None:
            now = t_arr
            if 0 <= horizon <= now:
                break
            qq = q[nxt]
            if 0 <= caps[qq] <= len(queues[qq]):
                rejected[nxt] = True
            else:
                queues[qq].append(nxt)
            nxt += 1
        else:
            break
        while len(running) < workers:
            cands = [i for qu in queues.values() for i in qu]
            if not cands:
                break
            best = min(cands, key=lambda i: (rank[i] - max(0, now - arrival[i]) // aging, arrival[i], i))
            queues[q[best]].remove(best)
            start[best] = now
            running.append((now + service[best], seq, best))
            seq += 1
    return start, finish, rejected


@settings(max_examples=150, deadline=None)
@given(queue_problems())
def test_backends_agree_with_brute_force(problem):
    arrival, service, rank, q, caps, workers, aging, horizon = problem
    exp_start, exp_finish, exp_rej = brute_force(*problem)
    for name in backends():
        run = simulate_queue(arrival, service, rank, q, caps, workers, aging, horizon, backend=name)
        assert run.start_us.tolist() == exp_start
        assert run.finish_us.tolist() == exp_finish
        assert run.rejected.tolist() == exp_rej


def test_backend_selection():
    assert qcore.BACKEND in backends()
    assert "python" in backends()


def test_validation():
    with pytest.raises(ValueError):
        simulate_queue([2, 1], [1, 1], [0, 0], [0, 0], [-1], 1, 1)
    with pytest.raises(ValueError):
        simulate_queue([1], [1], [0], [0], [-1], 0, 1)


def test_mean_in_system_simple():
    run = simulate_queue([0, 0], [10, 10], [0, 0], [0, 0], [-1], 1, 1000)
    # one request in system for 10us, the other for 20us, over 40us
    assert mean_in_system([0, 0], run, 40) == pytest.approx(30 / 40)


@pytest.mark.skipif("cython" not in backends(), reason="compiled kernel not built")
def test_compiled_identical_on_large_input():
    rng = np.random.default_rng(1)
    n = 50_000
    arrival = np.cumsum(rng.exponential(5000, n)).astype(np.int64)
    service = rng.exponential(18000, n).astype(np.int64) + 1
    rank = rng.integers(0, 3, n)
    a = simulate_queue(arrival, service, rank, rank, [64, 32, 16], 4, 500_000, backend="python")
    b = simulate_queue(arrival, service, rank, rank, [64, 32, 16], 4, 500_000, backend="cython")
    assert np.array_equal(a.start_us, b.start_us) and np.array_equal(a.finish_us, b.finish_us)
    assert np.array_equal(a.rejected, b.rejected) and a.events == b.events


def test_pure_fallback_selected_by_env():
    import subprocess
    import sys

    out = subprocess.run(
        [sys.executable, "-c", "from adaptix import qcore; print(qcore.BACKEND)"],
        env={**__import__("os").environ, "ADAPTIX_PURE": "1"},
        capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"
