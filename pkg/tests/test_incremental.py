"""
boolcd Test Suite - Incremental Fitting

Tests for covariance accumulators, the stream lifecycle and the bounded
window.
"""

import numpy as np
import pytest

from boolcd.batch_tucker import TuckerModel, fit_batch
from boolcd.config import Constant, ExponentialDecay, Ranks, StreamConfig
from boolcd.errors import ConfigError, DataError, InputError, ShapeError, StateError
from boolcd.incremental import (
    CovarianceState,
    StreamState,
    accumulate,
    bootstrap,
    covariance_of,
    ingest_slot,
    run_stream,
    slot_history,
    update_core_prioritized,
)
from boolcd.synth import PlantedSpec, generate_planted
from boolcd.tensor_core import BoolMatrix, BoolTensor3, Mode


def planted_slots(t=8, seed=2, noise=0.0):
    spec = PlantedSpec(
        dims=(6, 5, t),
        ranks=Ranks(2, 2, 2),
        densities=(0.4, 0.4, 0.5),
        core_density=0.5,
        noise=noise,
        seed=seed,
    )
    slots, _ = generate_planted(spec)
    return slots


def stream_config(**overrides):
    values = dict(ranks=Ranks(2, 2, 2), window_w=4, inner_sweeps=3, seed=1)
    values.update(overrides)
    return StreamConfig(**values)


def test_covariance_matches_numpy():
    """Sample covariance of the columns, ddof 1"""
    dense = np.array([[1, 0, 1], [0, 0, 1], [1, 1, 0], [1, 0, 0]], dtype=np.uint8)
    cov = covariance_of(BoolMatrix.from_dense(dense))
    assert cov.shape == (3, 3)
    assert np.allclose(cov, np.cov(dense.astype(float), rowvar=False, ddof=1))
    assert np.array_equal(cov, cov.T)


def test_covariance_single_row_is_zero():
    cov = covariance_of(BoolMatrix.from_dense(np.array([[1, 0]])))
    assert np.array_equal(cov, np.zeros((2, 2)))


def test_covariance_of_empty_matrix():
    with pytest.raises(DataError):
        covariance_of(BoolMatrix.zeros(0, 2))


def test_accumulate():
    """old * weight + new"""
    old = np.array([[2.0, 1.0], [1.0, 2.0]])
    new = np.eye(2)
    assert np.allclose(accumulate(old, new, 0.5), [[2.0, 0.5], [0.5, 2.0]])
    assert np.array_equal(accumulate(old, new, 0.0), new)
    with pytest.raises(ConfigError):
        accumulate(old, new, 1.5)
    with pytest.raises(ShapeError):
        accumulate(old, np.eye(3), 0.5)


def test_covariance_state_checks():
    """Accumulators must be square and symmetric, and are read-only"""
    with pytest.raises(DataError):
        CovarianceState(np.array([[0.0, 1.0], [0.0, 0.0]]), np.eye(1), np.eye(1), 0)
    with pytest.raises(ShapeError):
        CovarianceState(np.zeros((1, 2)), np.eye(1), np.eye(1), 0)
    state = CovarianceState.zeros(Ranks(2, 1, 3))
    assert state.ca.shape == (2, 2) and state.cc.shape == (3, 3)
    with pytest.raises(ValueError):
        state.ca[0, 0] = 1.0


def test_priorities_are_diagonal_products():
    state = CovarianceState(np.diag([1.0, 3.0]), np.diag([2.0]), np.diag([2.0, 1.0]), 3)
    scores = state.priorities()
    assert scores.shape == (2, 1, 2)
    assert scores[1, 0, 0] == pytest.approx(12.0)
    assert scores[0, 0, 1] == pytest.approx(2.0)


def test_prioritized_core_visit_order():
    """Highest priority first; ties fall back to lexicographic order"""
    model = TuckerModel(
        BoolTensor3.zeros(2, 1, 2),
        BoolMatrix.ones(3, 2),
        BoolMatrix.ones(2, 1),
        BoolMatrix.ones(2, 2),
    )
    x = BoolTensor3.zeros(3, 2, 2)
    cov = CovarianceState(np.diag([1.0, 3.0]), np.diag([1.0]), np.diag([2.0, 1.0]), 3)
    log = []
    update_core_prioritized(x, model, cov, visit_log=log)
    assert [entry[:3] for entry in log] == [(1, 0, 0), (1, 0, 1), (0, 0, 0), (0, 0, 1)]

    log = []
    update_core_prioritized(x, model, CovarianceState.zeros(Ranks(2, 1, 2)), visit_log=log)
    assert [entry[:3] for entry in log] == [(0, 0, 0), (0, 0, 1), (1, 0, 0), (1, 0, 1)]


def test_prioritized_core_size_mismatch():
    model = TuckerModel(
        BoolTensor3.zeros(1, 1, 1),
        BoolMatrix.ones(2, 1),
        BoolMatrix.ones(2, 1),
        BoolMatrix.ones(2, 1),
    )
    with pytest.raises(ShapeError):
        update_core_prioritized(
            BoolTensor3.zeros(2, 2, 2), model, CovarianceState.zeros(Ranks(2, 1, 1))
        )


def test_ingest_before_bootstrap():
    """An unstarted stream refuses slots"""
    state = StreamState.unstarted(stream_config())
    assert not state.bootstrapped
    with pytest.raises(StateError):
        ingest_slot(state, BoolMatrix.zeros(6, 5))


def test_bootstrap_state():
    """Bootstrap fits the first pair and seeds the accumulators"""
    slots = planted_slots()
    state = bootstrap(slots[0], slots[1], stream_config())
    assert state.bootstrapped
    assert state.slots_seen == 2
    assert len(state.window) == 2
    assert state.model.dims == (6, 5, 2)
    assert [r.index for r in state.trace.records] == [2]
    assert np.array_equal(state.cov.ca, covariance_of(state.model.a))


def test_bootstrap_shape_mismatch():
    with pytest.raises(ShapeError):
        bootstrap(
            BoolMatrix.zeros(2, 2), BoolMatrix.zeros(2, 3), stream_config(ranks=Ranks(1, 1, 1))
        )


def test_ingest_grows_then_rolls_window():
    """C keeps one row per window slot and the window never exceeds W"""
    slots = planted_slots(t=7)
    states = slot_history(slots, stream_config(window_w=4))
    assert [len(s.window) for s in states] == [2, 3, 4, 4, 4, 4]
    assert [s.model.c.rows for s in states] == [2, 3, 4, 4, 4, 4]
    assert [s.slots_seen for s in states] == [2, 3, 4, 5, 6, 7]
    assert states[-1].window[-1] == slots[-1]
    assert states[-1].window[0] == slots[3]


def test_ingest_leaves_previous_state_untouched():
    slots = planted_slots()
    state = bootstrap(slots[0], slots[1], stream_config())
    model_before = state.model
    after = ingest_slot(state, slots[2])
    assert len(state.window) == 2
    assert len(state.trace) == 1
    assert state.model is model_before
    assert len(after.trace) == 2


def test_ingest_shape_mismatch():
    slots = planted_slots()
    state = bootstrap(slots[0], slots[1], stream_config())
    with pytest.raises(ShapeError):
        ingest_slot(state, BoolMatrix.zeros(6, 4))


def test_zero_weight_forgets_history():
    """With F(t) = 0 the accumulators hold only the latest factors"""
    slots = planted_slots()
    state, _ = run_stream(slots[:4], stream_config(time_weight=Constant(0.0)))
    assert np.allclose(state.cov.ca, covariance_of(state.model.a))
    assert np.allclose(state.cov.cc, covariance_of(state.model.c))


def test_unit_weight_sums_history():
    """With F(t) = 1 each slot adds its factor covariance"""
    slots = planted_slots()
    config = stream_config(time_weight=Constant(1.0))
    before = bootstrap(slots[0], slots[1], config)
    after = ingest_slot(before, slots[2])
    assert np.allclose(after.cov.cb, before.cov.cb + covariance_of(after.model.b))


def test_run_stream_trace_indices():
    """One trace record per slot from slot 2 on"""
    slots = planted_slots(t=6)
    state, trace = run_stream(slots, stream_config())
    assert [r.index for r in trace.records] == [2, 3, 4, 5, 6]
    assert state.slots_seen == 6


def test_run_stream_needs_two_slots():
    with pytest.raises(InputError):
        run_stream(planted_slots()[:1], stream_config())
    with pytest.raises(InputError):
        slot_history([], stream_config())


def test_run_stream_rejects_ragged_slots():
    slots = planted_slots()[:3] + [BoolMatrix.zeros(6, 4)]
    with pytest.raises(ShapeError):
        run_stream(slots, stream_config())


def test_run_stream_is_deterministic():
    slots = planted_slots(noise=0.05)
    config = stream_config(time_weight=ExponentialDecay(0.8))
    state_1, trace_1 = run_stream(slots, config)
    state_2, trace_2 = run_stream(slots, config)
    assert state_1.model == state_2.model
    assert trace_1.without_timing() == trace_2.without_timing()
    assert np.array_equal(state_1.cov.ca, state_2.cov.ca)


def test_retained_state_is_bounded():
    """Once the window is full the retained state stops growing"""
    slots = planted_slots(t=10)
    states = slot_history(slots, stream_config(window_w=3))
    sizes = [s.retained_nbytes() for s in states]
    assert len(set(sizes[1:])) == 1
    assert sizes[0] < sizes[1]


def test_stream_config_validation():
    with pytest.raises(ConfigError):
        stream_config(window_w=1).validate()
    with pytest.raises(ConfigError):
        stream_config(ranks=Ranks(2, 2, 5), window_w=4).validate()
    with pytest.raises(ConfigError):
        stream_config(time_weight=Constant(2.0)).validate()


@pytest.mark.parametrize("lam", [0.5, 0.9])
def test_decay_accumulator_closed_form(lam):
    """Accumulators equal the decayed sum of per-slot factor covariances"""
    slots = planted_slots(t=10, noise=0.05)
    states = slot_history(slots, stream_config(time_weight=ExponentialDecay(lam)))
    n = len(states)
    modes = (Mode.MODE1, Mode.MODE2, Mode.MODE3)
    for k, (name, mode) in enumerate(zip(("ca", "cb", "cc"), modes)):
        latest = covariance_of(states[-1].model.factor(mode))
        assert np.array_equal(states[-1].slot_covariance[k], latest)
        expected = sum(
            lam ** (n - 1 - s) * state.slot_covariance[k] for s, state in enumerate(states)
        )
        assert np.allclose(getattr(states[-1].cov, name), expected, rtol=0.0, atol=1e-9)


def test_bootstrap_is_a_two_slot_batch_fit():
    slots = planted_slots()
    config = stream_config()
    state = bootstrap(slots[0], slots[1], config)
    model, trace = fit_batch(
        BoolTensor3.from_slices(slots[:2]), config.to_fit_config(), time_limit=config.window_w
    )
    assert state.model == model
    assert state.trace.final.mismatches == trace.final.mismatches


def test_ingest_seeds_an_empty_model():
    """A stream that started on empty slots picks up the first pattern it sees"""
    zero = BoolMatrix.zeros(6, 5)
    dense = np.zeros((6, 5), dtype=np.uint8)
    dense[np.ix_([0, 2], [1, 3])] = 1
    state = bootstrap(zero, zero, stream_config())
    assert state.model.core.count_ones() == 0
    state = ingest_slot(state, BoolMatrix.from_dense(dense))
    assert state.model.core.count_ones() > 0
    assert state.trace.final.mismatches == 0


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_stationary_stream_stays_within_threshold(seed):
    spec = PlantedSpec(dims=(50, 10, 30), ranks=Ranks(2, 2, 2), seed=seed)
    slots, _ = generate_planted(spec)
    config = StreamConfig(ranks=Ranks(2, 2, 2), seed=seed)
    _, trace = run_stream(slots, config)
    later = [r for r in trace.records if r.index >= 3]
    assert len(later) == 28
    assert all(r.relative <= config.error_threshold for r in later)
