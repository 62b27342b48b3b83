"""Asynchronous time-parallel runs: replay fidelity, exactness cascade, and
the zero-delay reduction to the synchronous sweep."""
import numpy as np
import pytest

from pintlab.async_engine import AsyncSchedule, POLICY_ROUND_ROBIN, update_counts
from pintlab.async_parareal import (
    FRESH_SLOT,
    REMEMBERED_SLOT,
    async_parareal_mapping,
    async_stop_check,
    run_async_parareal,
)
from pintlab.model import (
    backward_euler_propagator,
    scalar_decay_system,
    trapezoidal_propagator,
)
from pintlab.parareal import (
    STOP_THRESHOLD,
    parareal_update,
    run_parareal,
    sequential_fine_solve,
)


def _read_values(trace, ev):
    """Map an event's recorded reads back to the values each slot consumed."""
    by_slot = {slot: trace.version_value(source, version)
               for source, slot, version in ev.reads}
    return by_slot


def test_mapping_shape(heat_setups):
    ivp, coarse, fine = heat_setups[4]
    mapping = async_parareal_mapping(coarse, fine, 4)
    assert mapping.n_updatable == 4
    assert mapping.persistent_slots == {REMEMBERED_SLOT: FRESH_SLOT}
    for i in range(1, 5):
        assert mapping.read_set[i] == ((i - 1, FRESH_SLOT), (i - 1, REMEMBERED_SLOT))
    with pytest.raises(ValueError):
        async_parareal_mapping(coarse, fine, 0)
    trace = run_async_parareal(coarse, fine, ivp.u0, 4,
                               AsyncSchedule(seed=1, delay_bound=0))
    assert np.array_equal(trace.initial[0], np.asarray(ivp.u0, dtype=float))


@pytest.mark.parametrize("seed,delay_bound", [(1, 0), (2, 1), (3, 3)])
def test_event_replay_matches_kernel(heat_setups, seed, delay_bound):
    # every recorded value must be reproducible from its recorded reads alone,
    # including the exact-cancellation branch when both readings coincide
    ivp, coarse, fine = heat_setups[4]
    sched = AsyncSchedule(seed=seed, delay_bound=delay_bound)
    trace = run_async_parareal(coarse, fine, ivp.u0, 5, sched)
    for idx, ev in enumerate(trace.events):
        values = _read_values(trace, ev)
        want = parareal_update(coarse, fine, values[FRESH_SLOT],
                               values[REMEMBERED_SLOT])
        assert np.array_equal(want, trace.snapshots[idx][ev.component]), idx


def test_first_worker_exact_after_first_firing(heat_setups):
    # the first subinterval reads only the constant initial condition, so its
    # first update already lands on the fine value bitwise and never moves
    ivp, coarse, fine = heat_setups[8]
    fine_seq = sequential_fine_solve(fine, ivp.u0, 3)
    for seed in range(1, 6):
        trace = run_async_parareal(coarse, fine, ivp.u0, 3,
                                   AsyncSchedule(seed=seed, delay_bound=3))
        fired = False
        for idx, ev in enumerate(trace.events):
            if ev.component == 1:
                fired = True
            if fired:
                assert np.array_equal(trace.snapshots[idx][1], fine_seq[1]), idx


def test_exactness_cascade_at_quiescence(heat_setups):
    # quiescence-only stop: the final state must equal the purely sequential
    # fine solution bitwise on every subinterval
    ivp, coarse, fine = heat_setups[4]
    p = 6
    fine_seq = sequential_fine_solve(fine, ivp.u0, p)
    for seed, d in [(5, 1), (9, 2), (14, 3)]:
        trace = run_async_parareal(coarse, fine, ivp.u0, p,
                                   AsyncSchedule(seed=seed, delay_bound=d))
        final = trace.state_after(len(trace.events) - 1)
        assert np.array_equal(final.data, fine_seq.data)


def test_remembered_slot_replays_previous_fresh_read(heat_setups):
    ivp, coarse, fine = heat_setups[4]
    trace = run_async_parareal(coarse, fine, ivp.u0, 5,
                               AsyncSchedule(seed=12, delay_bound=2))
    prev_fresh = {}
    for ev in trace.events:
        reads = {slot: (source, version) for source, slot, version in ev.reads}
        if ev.component in prev_fresh:
            assert reads[REMEMBERED_SLOT] == prev_fresh[ev.component]
        else:
            source, version = reads[REMEMBERED_SLOT]
            assert version == 0
        prev_fresh[ev.component] = reads[FRESH_SLOT]


def test_stop_check_edges():
    assert async_stop_check([1e-7, 2e-7], epsilon=1e-6, drained=True)
    assert not async_stop_check([1e-6, 2e-7], epsilon=1e-6, drained=True)  # strict
    assert not async_stop_check([1e-9], epsilon=1e-6, drained=False)
    with pytest.raises(ValueError):
        async_stop_check([0.0], epsilon=0.0, drained=True)
    with pytest.raises(ValueError):
        async_stop_check([0.0], epsilon=-1.0, drained=True)


def test_zero_delay_round_robin_reduces_to_sync_sweep():
    # with no staleness and cyclic order, each cycle of p events reproduces
    # one synchronous sweep bitwise, and the event count per worker matches
    # the synchronous iteration count
    ivp = scalar_decay_system(rate=1.0, t_final=8.0)
    p = 8
    span = ivp.t_final / p
    coarse = backward_euler_propagator(ivp, span, 1)
    fine = trapezoidal_propagator(ivp, span, 25)
    epsilon = 1e-5

    sync = run_parareal(coarse, fine, ivp.u0, p, epsilon)
    assert sync.stop_reason == STOP_THRESHOLD
    assert sync.k_final == 7

    sched = AsyncSchedule(seed=0, delay_bound=0, policy=POLICY_ROUND_ROBIN)
    trace = run_async_parareal(coarse, fine, ivp.u0, p, sched, epsilon=epsilon)
    assert trace.stop_reason == "stop-predicate"
    _, kappa = update_counts(trace)
    assert kappa == sync.k_final

    for cycle in range(sync.k_final):
        state = trace.state_after(cycle * p + p - 1)
        assert np.array_equal(state.data, sync.iterates[cycle + 1].data), cycle


def test_epsilon_none_means_quiescence_only(heat_setups):
    ivp, coarse, fine = heat_setups[4]
    trace = run_async_parareal(coarse, fine, ivp.u0, 3,
                               AsyncSchedule(seed=2, delay_bound=1))
    assert trace.stop_reason == "quiescence"
