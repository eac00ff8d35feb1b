"""
boolcd Test Suite - Synthetic Data

Tests for planted generation, drift modes and the exhaustive oracle.
"""

import numpy as np
import pytest

from boolcd.batch_tucker import fit_batch, fit_best_of
from boolcd.config import FitConfig, Ranks
from boolcd.errors import CapacityError, ConfigError
from boolcd.synth import (
    MAX_ORACLE_EXPONENT,
    PlantedSpec,
    Stationary,
    StepChange,
    Toggle,
    draw_model,
    exhaustive_oracle,
    generate_planted,
    parse_drift,
    planted_tensor,
    search_exponent,
)
from boolcd.seeding import bernoulli_bits, generator
from boolcd.tensor_core import BoolTensor3, hamming_error


def spec(**overrides):
    values = dict(dims=(6, 5, 8), ranks=Ranks(2, 2, 2), seed=21)
    values.update(overrides)
    return PlantedSpec(**values)


def brute_force_error(x, ranks):
    """Minimum mismatches over every binary (G, A, B, C)."""
    o, f, t = x.dims
    r1, r2, r3 = ranks.as_tuple()
    dense = x.to_dense().astype(bool)
    best = None
    sizes = (o * r1, f * r2, t * r3, r1 * r2 * r3)
    for code in range(1 << sum(sizes)):
        bits = [(code >> k) & 1 for k in range(sum(sizes))]
        parts, start = [], 0
        for size in sizes:
            parts.append(np.array(bits[start:start + size], dtype=bool))
            start += size
        a = parts[0].reshape(o, r1)
        b = parts[1].reshape(f, r2)
        c = parts[2].reshape(t, r3)
        g = parts[3].reshape(r1, r2, r3)
        xhat = np.einsum("pqr,ip,jq,kr->ijk", g.astype(int), a, b, c) > 0
        error = int((xhat != dense).sum())
        if best is None or error < best:
            best = error
    return best


def test_generation_is_deterministic():
    slots_1, truth_1 = generate_planted(spec(noise=0.1))
    slots_2, truth_2 = generate_planted(spec(noise=0.1))
    assert slots_1 == slots_2
    assert truth_1 == truth_2


def test_noiseless_data_equals_truth():
    """Without noise or drift the slots are the truth's reconstruction"""
    x, truth = planted_tensor(spec())
    assert x == truth.reconstruct()


def test_noise_does_not_move_factors():
    """Noise comes from its own stream; the planted model is unchanged"""
    _, clean = generate_planted(spec())
    _, noisy = generate_planted(spec(noise=0.2))
    assert clean == noisy


def test_full_noise_flips_everything():
    x, truth = planted_tensor(spec(noise=1.0))
    assert hamming_error(truth.reconstruct(), x).mismatches == x.n_cells


def test_step_change_keeps_early_rows():
    """C rows before the step are the stationary ones"""
    base = draw_model(spec())
    stepped = draw_model(spec(drift=StepChange(4)))
    assert np.array_equal(base.c.to_dense()[:4], stepped.c.to_dense()[:4])
    assert base.a == stepped.a and base.core == stepped.core


def test_toggle_alternates_cell():
    """Toggled cell reads 0, 1, 0, ... over time"""
    slots, _ = generate_planted(spec(drift=Toggle(1, 2)))
    assert [s.get(1, 2) for s in slots] == [t % 2 for t in range(8)]


def test_spec_validation():
    with pytest.raises(ConfigError):
        spec(noise=1.5).validate()
    with pytest.raises(ConfigError):
        spec(drift=StepChange(9)).validate()
    with pytest.raises(ConfigError):
        spec(drift=Toggle(6, 0)).validate()
    with pytest.raises(ConfigError):
        spec(ranks=Ranks(7, 1, 1)).validate()


def test_parse_drift():
    assert parse_drift("stationary") == Stationary()
    assert parse_drift("step:3") == StepChange(3)
    assert parse_drift("toggle:1,2") == Toggle(1, 2)
    assert parse_drift(Toggle(0, 4).to_spec()) == Toggle(0, 4)
    for text in ("step:x", "toggle:1", "drift", "stationary:1"):
        with pytest.raises(ConfigError):
            parse_drift(text)


def test_oracle_guard():
    assert search_exponent((4, 4, 4), Ranks(2, 2, 2)) == 32
    x = BoolTensor3.zeros(4, 4, 4)
    with pytest.raises(CapacityError):
        exhaustive_oracle(x, Ranks(2, 2, 2))
    assert MAX_ORACLE_EXPONENT == 24


def test_oracle_exact_on_planted():
    """A noiseless planted tensor has a zero-error optimum"""
    small = PlantedSpec(
        dims=(3, 2, 2), ranks=Ranks(1, 1, 1), seed=5, densities=(0.6, 0.6, 0.6), core_density=1.0
    )
    x, _ = planted_tensor(small)
    result = exhaustive_oracle(x, Ranks(1, 1, 1))
    assert result.best_error == 0
    assert result.best_model.reconstruct() == x


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_oracle_matches_brute_force(seed):
    """Row-wise choice of A finds the same minimum as full enumeration"""
    x, _ = planted_tensor(
        PlantedSpec(dims=(2, 2, 2), ranks=Ranks(1, 1, 1), noise=0.3, seed=seed)
    )
    result = exhaustive_oracle(x, Ranks(1, 1, 1))
    assert result.best_error == brute_force_error(x, Ranks(1, 1, 1))
    assert hamming_error(x, result.best_model.reconstruct()).mismatches == result.best_error


def test_batch_fit_never_beats_oracle():
    """The greedy fit is bounded below by the global optimum"""
    x, _ = planted_tensor(
        PlantedSpec(dims=(3, 2, 2), ranks=Ranks(1, 1, 1), noise=0.2, seed=8)
    )
    oracle = exhaustive_oracle(x, Ranks(1, 1, 1))
    _, trace = fit_batch(x, FitConfig(ranks=Ranks(1, 1, 1), error_threshold=0.0))
    assert trace.final.mismatches >= oracle.best_error


def test_planted_slots_shape():
    slots, truth = generate_planted(spec())
    assert len(slots) == 8
    assert all(s.shape == (6, 5) for s in slots)
    assert truth.dims == (6, 5, 8)


def test_stationary_model_repeats_one_pattern_row():
    """Every slot shares a nonzero C row, so the truth is constant over time"""
    c = draw_model(spec()).c.to_dense()
    assert c[0].any()
    assert all(np.array_equal(row, c[0]) for row in c)
    dense = draw_model(spec()).reconstruct().to_dense()
    assert all(np.array_equal(dense[:, :, k], dense[:, :, 0]) for k in range(8))


def test_step_change_redraws_shared_row():
    c = draw_model(spec(drift=StepChange(3))).c.to_dense()
    assert all(np.array_equal(row, c[0]) for row in c[:3])
    assert all(np.array_equal(row, c[3]) for row in c[3:])
    assert c[3].any()


def test_batch_fit_matches_oracle_on_tiny_instances():
    """Best of 20 never beats the optimum and reaches it on most instances"""
    ranks = Ranks(1, 1, 1)
    matched = 0
    for seed in range(50):
        dense = bernoulli_bits(generator(seed, "oracle"), (3, 3, 2), 0.5)
        x = BoolTensor3.from_dense(dense)
        oracle = exhaustive_oracle(x, ranks)
        result = fit_best_of(x, FitConfig(ranks=ranks, error_threshold=0.0, seed=seed), 20)
        assert result.trace.final.mismatches >= oracle.best_error
        matched += result.trace.final.mismatches == oracle.best_error
    assert matched / 50 >= 0.5
