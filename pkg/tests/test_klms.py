import math

import numpy as np
import pytest

from probkaf.data import EmbeddedDataset, TimeSeries, embed, standardize
from probkaf.inference import median_pairwise_distance
from probkaf.klms import (
    Coherence,
    KlmsState,
    Novelty,
    calibrate_novelty,
    coherence_admit,
    empty_state,
    from_pretrained,
    greedy_packing_size,
    klms_predict,
    klms_run,
    klms_step,
    novelty_admit,
)
from probkaf.model import ModelParams, predict

from conftest import random_params


def _state(centres, alpha, sigma_k=1.0, eta=0.1, sparsifier=None, **kw):
    return KlmsState(
        centres=np.asarray(centres, float),
        alpha=np.asarray(alpha, float),
        sigma_k=sigma_k,
        learning_rate=eta,
        sparsifier=sparsifier,
        **kw,
    )


class TestPredict:
    def test_empty_dictionary(self):
        state = empty_state(order=3, sigma_k=1.0, learning_rate=0.1)
        assert klms_predict(state, np.zeros(3)) == 0.0

    def test_single_centre_at_centre(self):
        state = _state([[0.4, -0.2]], [1.7])
        assert klms_predict(state, [0.4, -0.2]) == 1.7

    def test_matches_model_predict_bitwise(self, rng):
        p = random_params(rng, n_centres=6, order=4)
        state = from_pretrained(p, learning_rate=0.1, freeze_dict=True)
        for _ in range(10):
            x = rng.normal(size=4)
            assert klms_predict(state, x) == predict(p, x)


class TestStep:
    def test_first_sample_becomes_centre(self):
        state = empty_state(order=2, sigma_k=1.0, learning_rate=0.5)
        new, res = klms_step(state, [1.0, 2.0], 3.0)
        assert res.prediction == 0.0 and res.error == 3.0 and res.centre_added
        assert new.dict_size == 1
        assert np.array_equal(new.centres, [[1.0, 2.0]])
        assert np.array_equal(new.alpha, [1.5])  # eta * y

    def test_infinite_novelty_distance_blocks_everything(self, rng):
        state = empty_state(
            order=2, sigma_k=1.0, learning_rate=0.1, sparsifier=Novelty(math.inf, 0.0)
        )
        state, _ = klms_step(state, rng.normal(size=2), 1.0)
        before = state
        for _ in range(20):
            state, res = klms_step(state, rng.normal(size=2), rng.normal())
            assert not res.centre_added
        assert state.dict_size == 1
        assert state is before  # novelty rejection is a pure no-op

    def test_coherence_repeated_sample_updates_weight(self):
        state = empty_state(
            order=1, sigma_k=1.0, learning_rate=0.2, sparsifier=Coherence(0.9)
        )
        x, y = np.array([0.7]), 1.0
        state, res1 = klms_step(state, x, y)
        assert res1.centre_added and state.dict_size == 1
        w_before = state.alpha[0]
        state, res2 = klms_step(state, x, y)
        assert not res2.centre_added and state.dict_size == 1
        assert state.alpha[0] != w_before

    def test_error_is_target_minus_prediction(self, rng):
        state = _state([[0.0]], [0.8])
        _, res = klms_step(state, [0.0], 0.5)
        assert res.error == 0.5 - res.prediction == pytest.approx(-0.3)

    def test_dimension_mismatch(self):
        state = _state([[0.0, 0.0]], [1.0])
        with pytest.raises(ValueError):
            klms_step(state, [1.0], 0.0)


class TestAdmission:
    def test_novelty_empty_always_admits(self):
        state = empty_state(order=1, sigma_k=1.0, learning_rate=0.1, sparsifier=Novelty(1.0, 0.5))
        assert novelty_admit(state, [0.0], 0.0)

    def test_novelty_rejects_existing_centre(self):
        state = _state([[1.0]], [0.0], sparsifier=Novelty(0.5, 0.0))
        assert not novelty_admit(state, [1.0], 10.0)

    def test_novelty_infinite_error_threshold(self, rng):
        state = _state([[0.0]], [0.0], sparsifier=Novelty(0.1, math.inf))
        assert not novelty_admit(state, rng.normal(size=1) + 100, 1e9)

    def test_coherence_empty_always_admits(self):
        state = empty_state(order=1, sigma_k=1.0, learning_rate=0.1, sparsifier=Coherence(0.5))
        assert coherence_admit(state, [0.0])

    def test_coherence_rejects_at_centre(self):
        state = _state([[2.0]], [0.0], sparsifier=Coherence(0.99))
        assert not coherence_admit(state, [2.0])

    def test_coherence_admits_isolated_point(self):
        state = _state([[0.0]], [0.0], sigma_k=0.3, sparsifier=Coherence(0.5))
        assert coherence_admit(state, [50.0])


class TestFromPretrained:
    def test_frozen_dictionary_never_grows(self, rng):
        p = random_params(rng, n_centres=4, order=3)
        state = from_pretrained(p, learning_rate=0.05, freeze_dict=True)
        for _ in range(50):
            state, res = klms_step(state, rng.normal(size=3), rng.normal())
            assert not res.centre_added
        assert state.dict_size == 4
        assert np.array_equal(state.centres, p.centres)

    def test_zero_learning_rate_is_static(self, rng):
        p = random_params(rng, n_centres=3, order=2)
        state = from_pretrained(p, learning_rate=0.0, freeze_dict=True)
        xs = rng.normal(size=(30, 2))
        for x in xs:
            state, _ = klms_step(state, x, rng.normal())
        for x in xs:
            assert klms_predict(state, x) == predict(p, x)

    def test_nonzero_learning_rate_moves_weights(self, rng):
        p = random_params(rng, n_centres=3, order=2)
        state = from_pretrained(p, learning_rate=0.1, freeze_dict=True)
        state, _ = klms_step(state, rng.normal(size=2), 5.0)
        assert not np.array_equal(state.alpha, p.alpha)

    def test_unfrozen_zero_thresholds_grows_per_sample(self, rng):
        p = random_params(rng, n_centres=2, order=2)
        state = from_pretrained(
            p, learning_rate=0.1, freeze_dict=False, sparsifier=Novelty(0.0, 0.0)
        )
        for k in range(10):
            state, res = klms_step(state, rng.normal(size=2), rng.normal())
            assert res.centre_added
        assert state.dict_size == 12


class TestInvariants:
    def test_dict_size_nondecreasing_and_bounded(self, rng):
        state = empty_state(order=2, sigma_k=1.0, learning_rate=0.1, max_dict=5)
        sizes = []
        for _ in range(30):
            state, _ = klms_step(state, rng.normal(size=2), rng.normal())
            sizes.append(state.dict_size)
        assert all(b >= a for a, b in zip(sizes, sizes[1:]))
        assert max(sizes) == 5

    def test_running_mse_improves_on_stationary_ar(self):
        # stationary AR(2) with lightly damped oscillation at period 25
        r, period, noise = 0.995, 25, 0.02
        a, b = 2 * r * math.cos(2 * math.pi / period), -r * r
        passes = 0
        for seed in range(10):
            gen = np.random.default_rng(seed)
            n = 1105
            y = np.zeros(n)
            y[0] = 1.0
            for k in range(2, n):
                y[k] = a * y[k - 1] + b * y[k - 2] + gen.normal(0.0, noise)
            series, _, _ = standardize(TimeSeries(y))
            data = embed(series, 5)
            state = empty_state(order=5, sigma_k=1.0, learning_rate=0.01)
            _, preds = klms_run(state, data)
            sq = (preds - data.targets) ** 2
            boundaries = np.arange(100, len(sq) + 1, 100)
            running = np.array([sq[:b].mean() for b in boundaries])
            if np.all(np.diff(running) <= 0):
                passes += 1
        assert passes >= 9


class TestCalibration:
    def test_greedy_packing_shrinks_with_radius(self, rng):
        # counts are only approximately monotone in the radius, so check
        # the overall trend plus the extremes
        pts = rng.normal(size=(300, 3))
        radii = np.linspace(0.1, 3.0, 15)
        sizes = [greedy_packing_size(pts, r) for r in radii]
        assert sizes[0] > 100 and sizes[-1] < 15
        assert all(b <= a + 2 for a, b in zip(sizes, sizes[1:]))

    def test_calibration_hits_target(self, rng):
        pts = rng.normal(size=(500, 2))
        for target in (5, 25, 60):
            nov = calibrate_novelty(pts, target)
            assert greedy_packing_size(pts, nov.delta_dist) == target

    def test_calibrated_filter_reaches_target_size(self, rng):
        pts = rng.normal(size=(400, 2))
        targets = rng.normal(size=400)
        nov = calibrate_novelty(pts, 20)
        state = empty_state(order=2, sigma_k=1.0, learning_rate=0.05, sparsifier=nov)
        state, _ = klms_run(state, EmbeddedDataset(inputs=pts, targets=targets))
        assert abs(state.dict_size - 20) <= 1

    def test_target_out_of_range(self, rng):
        with pytest.raises(ValueError):
            calibrate_novelty(rng.normal(size=(10, 2)), 11)
