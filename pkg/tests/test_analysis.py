"""Contraction factors, convergence checks, staleness envelope, termination
detection, and the solve-unit cost model."""
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pintlab.analysis import (
    CheckResult,
    CostParams,
    async_convergence_check,
    async_cost,
    async_error_envelope,
    asymptotic_speedups,
    chazan_miranker_check,
    check_finite_termination,
    compare_factors,
    contraction_factors,
    factors_from_norms,
    fit_overhead,
    sequential_cost,
    speedup_bound,
    sync_convergence_check,
    sync_cost,
)
from pintlab.async_engine import AsyncSchedule, AsyncTrace, UpdateRecord
from pintlab.async_parareal import run_async_parareal
from pintlab.errors import (
    EnvelopeUndefinedError,
    InvalidThetaError,
    UndefinedLimitError,
    UnfittableError,
)
from pintlab.linalg import BlockVector, NormKind, max_block_norm
from pintlab.parareal import run_parareal, sequential_fine_solve

# ------------------------------------------------------- contraction factors

def test_worked_scalar_factors():
    r = factors_from_norms(0.8, 0.0212, p=4)
    assert r.theta == 0.8
    assert r.sync_factor == pytest.approx((1 - 0.8 ** 4) / 0.2 * 0.0212, rel=1e-12)
    assert r.sync_factor == pytest.approx(0.0625824, rel=1e-9)
    assert r.sync_factor == pytest.approx(0.06258, abs=5e-6)  # quoted rounding
    assert r.async_factor == pytest.approx(0.8212, rel=1e-12)


def test_worked_scalar_checks_and_gap():
    r = factors_from_norms(0.8, 0.0212, p=4)
    sync = sync_convergence_check(r)
    assert sync.holds
    rhs = 1.0 + 0.8 ** 4 * 0.0212
    assert sync.margin == pytest.approx(min(0.2, rhs - 0.8212), rel=1e-12)
    asyn = async_convergence_check(r)
    assert asyn.holds
    assert asyn.margin == pytest.approx(0.17880, rel=1e-9)
    cmp = compare_factors(r)
    assert cmp.applicable
    assert cmp.gap == pytest.approx(0.7586176, rel=1e-9)
    assert cmp.gap == pytest.approx(0.75862, abs=5e-6)
    assert cmp.sync_factor < cmp.async_factor


def test_factors_from_live_propagators(literal_scalar_pair):
    coarse, fine = literal_scalar_pair
    r = contraction_factors(coarse, fine, 4)
    assert r.coarse_norm == pytest.approx(0.8, rel=1e-12)
    assert r.defect_norm == pytest.approx(0.0212, rel=1e-12)
    assert r.sync_factor == pytest.approx(0.0625824, rel=1e-9)


def test_theta_one_limit():
    assert factors_from_norms(0.8, 0.0212, p=4, theta=1.0).sync_factor \
        == pytest.approx(4 * 0.0212, rel=1e-12)
    # coarse norm exactly one triggers the same limit by default
    assert factors_from_norms(1.0, 0.1, p=3).sync_factor == pytest.approx(0.3)


def test_theta_below_coarse_norm_rejected():
    with pytest.raises(InvalidThetaError):
        factors_from_norms(0.8, 0.0212, p=4, theta=0.5)
    with pytest.raises(ValueError):
        factors_from_norms(-0.1, 0.0212, p=4)
    with pytest.raises(ValueError):
        factors_from_norms(0.8, 0.0212, p=0)


def test_compare_factors_preconditions():
    inflated = factors_from_norms(0.8, 0.0212, p=4, theta=0.9)
    with pytest.raises(ValueError):
        compare_factors(inflated)
    divergent = factors_from_norms(0.9, 0.3, p=4)
    cmp = compare_factors(divergent)
    assert not cmp.applicable
    assert cmp.gap is None


def test_divergent_coarse_fails_both_checks():
    r = factors_from_norms(1.1, 0.05, p=4)
    assert not sync_convergence_check(r).holds
    assert not async_convergence_check(r).holds


def test_check_result_is_tuple():
    res = CheckResult(True, 0.25)
    holds, margin = res
    assert holds and margin == 0.25 and res.holds and res.margin == 0.25


# ---------------------------------------------------------------- envelope

def _envelope_event(k, comp, fresh_version, remembered_version):
    reads = ((comp - 1, 1, fresh_version), (comp - 1, 2, remembered_version))
    return UpdateRecord(k_global=k, component=comp, reads=reads,
                        digest="0" * 16, delta=0.0)


def _envelope_trace(events, p):
    return AsyncTrace(
        events=events, snapshots=[],
        initial=BlockVector(np.zeros((p + 1, 1))),
        per_component_counts=np.zeros(p + 1, dtype=int),
        stop_event=len(events) - 1, stop_reason="quiescence",
        schedule=AsyncSchedule(seed=0, delay_bound=0),
        n_updatable=p, persistent_slots={2: 1},
    )


def test_envelope_depths_hand_trace():
    # three zero-staleness sweeps over p=3: the depth floor climbs one per
    # completed sweep and saturates on the third
    events = []
    k = 0
    fresh = {1: 0, 2: 0, 3: 0}   # last fresh version each component consumed
    latest = {0: 0, 1: 0, 2: 0, 3: 0}
    for _sweep in range(3):
        for comp in (1, 2, 3):
            events.append(_envelope_event(k, comp, latest[comp - 1], fresh[comp]))
            fresh[comp] = latest[comp - 1]
            latest[comp] += 1
            k += 1
    trace = _envelope_trace(events, 3)
    report = factors_from_norms(0.3, 0.2, p=3, kind=NormKind.INFINITY)
    fixed = BlockVector(np.array([[0.0], [1.0], [0.0], [0.0]]))
    depths, bounds = async_error_envelope(trace, report, fixed, trace.initial)
    assert list(depths) == [0, 0, 0, 1, 1, 1, 2, 2, 2, math.inf]
    assert list(bounds) == [1.0, 1.0, 1.0, 0.5, 0.5, 0.5,
                            0.25, 0.25, 0.25, 0.0]


def test_envelope_skips_frozen_events():
    ev = _envelope_event(0, 1, 0, 0)
    frozen = UpdateRecord(k_global=1, component=2, reads=(), digest="0" * 16,
                          delta=0.0, frozen=True)
    trace = _envelope_trace([ev, frozen], 3)
    report = factors_from_norms(0.3, 0.2, p=3, kind=NormKind.INFINITY)
    fixed = BlockVector(np.ones((4, 1)))
    depths, _ = async_error_envelope(trace, report, fixed, trace.initial)
    assert list(depths) == [0, 0, 0]


def test_envelope_undefined_when_factor_too_large(heat_setups):
    ivp, coarse, fine = heat_setups[4]
    trace = run_async_parareal(coarse, fine, ivp.u0, 3,
                               AsyncSchedule(seed=1, delay_bound=1))
    report = factors_from_norms(0.9, 0.3, p=3)
    with pytest.raises(EnvelopeUndefinedError):
        async_error_envelope(trace, report, trace.initial, trace.initial)


@pytest.mark.parametrize("kind", [NormKind.INFINITY, NormKind.SPECTRAL])
def test_envelope_dominates_measured_error(heat_setups, kind):
    ivp, coarse, fine = heat_setups[4]
    p = 5
    trace = run_async_parareal(coarse, fine, ivp.u0, p,
                               AsyncSchedule(seed=3, delay_bound=2))
    report = contraction_factors(coarse, fine, p, kind=kind)
    fixed = sequential_fine_solve(fine, ivp.u0, p)
    depths, bounds = async_error_envelope(trace, report, fixed, trace.initial)
    assert len(bounds) == len(trace.events) + 1
    assert bounds[-1] == 0.0
    measured = [max_block_norm(trace.initial - fixed, kind)]
    for idx in range(len(trace.events)):
        measured.append(max_block_norm(trace.state_after(idx) - fixed, kind))
    for m, b in zip(measured, bounds):
        assert m <= b * (1.0 + 1e-10)


# ---------------------------------------------------- termination detection

def test_finite_termination_sync(heat_setups):
    ivp, coarse, fine = heat_setups[4]
    p = 4
    trace = run_parareal(coarse, fine, ivp.u0, p, 0.0)
    reference = sequential_fine_solve(fine, ivp.u0, p)
    assert check_finite_termination(trace, reference) == p
    unreachable = BlockVector(np.full_like(reference.data, 1e6))
    assert check_finite_termination(trace, unreachable) is None


def test_finite_termination_async(heat_setups):
    ivp, coarse, fine = heat_setups[4]
    p = 4
    trace = run_async_parareal(coarse, fine, ivp.u0, p,
                               AsyncSchedule(seed=4, delay_bound=1))
    reference = sequential_fine_solve(fine, ivp.u0, p)
    idx = check_finite_termination(trace, reference)
    assert idx is not None
    assert 0 < idx <= len(trace.events)


def test_chazan_miranker_frozen():
    holds, margin = chazan_miranker_check([[2.0, 1.0], [1.0, 2.0]],
                                          [[2.0, 0.0], [0.0, 2.0]])
    assert holds
    assert margin == pytest.approx(0.5, abs=1e-12)
    holds, margin = chazan_miranker_check([[1.0, 2.0], [2.0, 1.0]],
                                          np.eye(2))
    assert not holds
    assert margin == pytest.approx(-1.0, abs=1e-10)


# ------------------------------------------------------------- cost model

REF = dict(p=16, fine_cost=14.0, coarse_cost=0.14, overhead=1.53)


def test_reference_cost_numbers():
    params = CostParams(k=10, kappa=10, **REF)
    assert sequential_cost(params) == pytest.approx(224.0, rel=1e-12)
    assert sync_cost(params) == pytest.approx(288.99, abs=1e-9)
    assert async_cost(params) == pytest.approx(143.64, abs=1e-9)
    kappa24 = CostParams(k=10, kappa=24, **REF)
    assert async_cost(kappa24) == pytest.approx(341.60, abs=1e-9)


def test_speedup_bound_numbers():
    params = CostParams(k=10, kappa=10, **REF)
    report = speedup_bound(params)
    assert report.bound == pytest.approx(1.0 + 14 * 1.53 / 14.14, rel=1e-12)
    assert report.bound == pytest.approx(2.5148514851485148, abs=1e-3)
    assert report.achieved == pytest.approx(288.99 / 143.64, rel=1e-12)
    assert report.achieved <= report.bound
    bare = speedup_bound(CostParams(**REF))
    assert bare.achieved is None


def test_asymptotic_limits():
    params = CostParams(k=10, **REF)
    sync_lim, async_lim, cross_lim = asymptotic_speedups(params)
    assert sync_lim == pytest.approx(14.0 / (0.14 + 15.3), rel=1e-12)
    assert async_lim == pytest.approx(100.0, rel=1e-12)
    assert cross_lim == pytest.approx(1.0 + 15.3 / 0.14, rel=1e-12)
    with pytest.raises(UndefinedLimitError):
        asymptotic_speedups(CostParams(p=4, fine_cost=1.0, coarse_cost=0.0, k=2))


def test_fit_overhead_round_trip_frozen():
    total = sync_cost(CostParams(k=10, **REF))
    assert fit_overhead(total, 16, 10, 14.0, 0.14) == pytest.approx(1.53, rel=1e-12)


def test_fit_overhead_edges():
    with pytest.raises(UnfittableError):
        fit_overhead(100.0, 16, 0, 14.0, 0.14)
    with pytest.raises(UnfittableError):
        # k = p makes the parenthesized cascade term vanish identically
        fit_overhead(100.0, 3, 3, 14.0, 0.14)
    assert fit_overhead(0.0, 16, 10, 14.0, 0.14) == 0.0  # floored


def test_cost_model_edges():
    params = CostParams(p=4, fine_cost=2.0, coarse_cost=0.5, overhead=1.0, k=0)
    assert sync_cost(params) == pytest.approx(2.0)  # initialization only
    with pytest.raises(ValueError):
        sync_cost(CostParams(p=4, fine_cost=2.0, coarse_cost=0.5))
    with pytest.raises(ValueError):
        sync_cost(CostParams(p=4, fine_cost=2.0, coarse_cost=0.5, k=5))
    with pytest.raises(ValueError):
        async_cost(CostParams(p=4, fine_cost=2.0, coarse_cost=0.5))
    with pytest.raises(ValueError):
        speedup_bound(CostParams(p=1, fine_cost=2.0, coarse_cost=0.5))
    with pytest.raises(UndefinedLimitError):
        speedup_bound(CostParams(p=4, fine_cost=0.0, coarse_cost=0.0))
    with pytest.raises(ValueError):
        speedup_bound(CostParams(p=4, fine_cost=2.0, coarse_cost=0.5,
                                 k=3, kappa=2))
    with pytest.raises(ValueError):
        CostParams(p=0, fine_cost=1.0, coarse_cost=0.1)
    with pytest.raises(ValueError):
        CostParams(p=4, fine_cost=-1.0, coarse_cost=0.1)


@given(
    p=st.integers(min_value=2, max_value=64),
    k=st.integers(min_value=1, max_value=8),
    fine=st.floats(min_value=0.5, max_value=100.0),
    coarse=st.floats(min_value=0.01, max_value=10.0),
    overhead=st.floats(min_value=0.0, max_value=10.0),
)
def test_fit_round_trip_property(p, k, fine, coarse, overhead):
    if k > p:
        k = p
    denom = k * (p - 1) - k * (k + 1) / 2.0
    if k < 1 or denom <= 0.0:
        return
    total = sync_cost(CostParams(p=p, fine_cost=fine, coarse_cost=coarse,
                                 overhead=overhead, k=k))
    fitted = fit_overhead(total, p, k, fine, coarse)
    assert fitted == pytest.approx(overhead, rel=1e-9, abs=1e-12)


@given(
    p=st.integers(min_value=2, max_value=64),
    k=st.integers(min_value=0, max_value=8),
    fine=st.floats(min_value=0.5, max_value=100.0),
    coarse=st.floats(min_value=0.01, max_value=10.0),
)
def test_zero_overhead_costs_coincide(p, k, fine, coarse):
    # without serialization overhead, matching activation counts make the
    # synchronous and asynchronous wall models identical
    k = min(k, p)
    params = CostParams(p=p, fine_cost=fine, coarse_cost=coarse,
                        overhead=0.0, k=k, kappa=k)
    assert sync_cost(params) == pytest.approx(async_cost(params), rel=1e-12)


@given(
    p=st.integers(min_value=2, max_value=64),
    k=st.integers(min_value=1, max_value=8),
    extra=st.integers(min_value=0, max_value=50),
    fine=st.floats(min_value=0.5, max_value=100.0),
    coarse=st.floats(min_value=0.01, max_value=10.0),
    overhead=st.floats(min_value=0.0, max_value=10.0),
)
def test_achieved_never_exceeds_bound(p, k, extra, fine, coarse, overhead):
    k = min(k, p)
    params = CostParams(p=p, fine_cost=fine, coarse_cost=coarse,
                        overhead=overhead, k=k, kappa=k + extra)
    report = speedup_bound(params)  # raises AssertionError on violation
    assert report.achieved <= report.bound * (1.0 + 1e-12)
