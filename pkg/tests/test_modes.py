import math

import numpy as np
import pytest
import torch
from hypothesis import given
from hypothesis import strategies as st

from morphforge.modes import (
    TEMP_END,
    TEMP_START,
    branch_value,
    econ_logits_from_rows,
    economic_class_values,
    economic_value,
    gumbel_noise,
    gumbel_softmax,
    gumbel_softmax_t,
    squash_free,
    temperature,
    unsquash_free,
)


class TestSquash:
    def test_midpoint(self):
        assert squash_free(0.0, -1.0, 3.0) == pytest.approx(1.0)

    def test_saturation(self):
        assert squash_free(20.0, 0.0, 1.0) == pytest.approx(1.0, abs=1e-6)
        assert squash_free(-20.0, 0.0, 1.0) == pytest.approx(0.0, abs=1e-6)

    @given(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
    def test_bounds_and_monotone(self, a, b):
        lo, hi = -0.4, 0.4
        va, vb = squash_free(a, lo, hi), squash_free(b, lo, hi)
        assert lo <= va <= hi and lo <= vb <= hi
        if a < b:
            assert va <= vb

    def test_inverse(self):
        rng = np.random.default_rng(0)
        vals = rng.uniform(0.01, 0.39, 50)
        raw = unsquash_free(vals, 0.0, 0.4)
        np.testing.assert_allclose(squash_free(raw, 0.0, 0.4), vals, atol=1e-9)


class TestGumbelSoftmax:
    def test_dominated_logit(self):
        rng = np.random.default_rng(1)
        for _ in range(1000):
            w = gumbel_softmax(np.array([50.0, 0.0, 0.0]), 0.01, rng, hard=True)
            assert w[0] == 1.0

    def test_uniform_high_temperature(self):
        rng = np.random.default_rng(2)
        w = gumbel_softmax(np.zeros(4), 1e3, rng)
        np.testing.assert_allclose(w, 0.25, atol=1e-2)

    def test_hard_frequencies_uniform(self):
        rng = np.random.default_rng(3)
        counts = np.zeros(3)
        n = 100000
        for _ in range(n):
            counts += gumbel_softmax(np.zeros(3), 1.0, rng, hard=True)
        freq = counts / n
        np.testing.assert_allclose(freq, 1 / 3, atol=0.01)

    def test_soft_is_probability_vector(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            logits = rng.normal(size=5) * 3
            w = gumbel_softmax(logits, rng.uniform(0.05, 5.0), rng)
            assert np.all(w >= 0)
            assert abs(w.sum() - 1.0) < 1e-12

    def test_hard_is_argmax_of_soft(self):
        logits = np.array([0.3, -0.2, 1.0])
        noise = gumbel_noise(3, np.random.default_rng(5))
        soft = gumbel_softmax_t(torch.as_tensor(logits), 0.7, torch.as_tensor(noise))
        hard = gumbel_softmax_t(torch.as_tensor(logits), 0.7, torch.as_tensor(noise), hard=True)
        assert hard.sum() == pytest.approx(1.0)
        assert int(hard.argmax()) == int(soft.argmax())
        assert set(np.unique(hard.detach().numpy())) <= {0.0, 1.0}

    def test_straight_through_gradients_flow_via_soft(self):
        logits = torch.tensor([0.5, -0.1, 0.2], dtype=torch.float64, requires_grad=True)
        noise = torch.zeros(3, dtype=torch.float64)
        hard = gumbel_softmax_t(logits, 0.5, noise, hard=True)
        values = torch.tensor([1.0, 2.0, 3.0], dtype=torch.float64)
        (hard * values).sum().backward()
        soft = gumbel_softmax_t(logits.detach(), 0.5, noise)
        assert logits.grad is not None and torch.all(torch.isfinite(logits.grad))
        # gradient equals that of the soft relaxation
        logits2 = logits.detach().clone().requires_grad_(True)
        (gumbel_softmax_t(logits2, 0.5, noise) * values).sum().backward()
        assert torch.allclose(logits.grad, logits2.grad)

    def test_rejects_single_class(self):
        with pytest.raises(ValueError):
            gumbel_softmax(np.array([1.0]), 1.0, np.random.default_rng(0))


class TestEconomicValue:
    def test_zero_class(self):
        assert economic_value(np.array([1.0, 0.0]), "d", 0.3) == 0.0
        assert economic_value(np.array([1.0, 0.0, 0.0]), "a", -1.0) == 0.0

    def test_positive_branch_midpoint(self):
        assert economic_value(np.array([0.0, 0.0, 1.0]), "a", 0.0) == pytest.approx(0.25)
        assert economic_value(np.array([0.0, 1.0]), "d", 0.0) == pytest.approx(0.25)

    def test_negative_branch(self):
        assert economic_value(np.array([0.0, 1.0, 0.0]), "a", 0.0) == pytest.approx(-0.25)

    def test_alpha_classes(self):
        assert economic_value(np.array([0.0, 1.0, 0.0]), "alpha", 0.0) == pytest.approx(math.pi / 2)

    def test_hard_samples_in_hybrid_set(self):
        rng = np.random.default_rng(6)
        for _ in range(10000):
            raw = rng.normal() * 3
            for kind in ("d", "a", "alpha"):
                k = {"d": 2, "a": 3, "alpha": 3}[kind]
                weights = gumbel_softmax(rng.normal(size=k), TEMP_END, rng, hard=True)
                val = economic_value(weights, kind, raw)
                if kind == "d":
                    assert val == 0.0 or 0.1 <= val <= 0.4
                elif kind == "a":
                    assert val == 0.0 or 0.1 <= abs(val) <= 0.4
                else:
                    assert any(abs(val - c) < 1e-12 for c in (0.0, math.pi / 2, -math.pi / 2))

    def test_branch_value_range(self):
        assert branch_value(-50.0) == pytest.approx(0.1, abs=1e-6)
        assert branch_value(50.0) == pytest.approx(0.4, abs=1e-6)


class TestTemperature:
    def test_endpoints(self):
        assert temperature(0, 100) == TEMP_START == 3.0
        assert temperature(100, 100) == TEMP_END == 0.01

    def test_midpoint(self):
        assert temperature(50, 100) == pytest.approx(1.505)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            temperature(101, 100)


def test_econ_logits_roundtrip():
    rows = np.array([[0.25, -0.3, math.pi / 2], [0.0, 0.0, 0.0], [0.4, 0.15, -math.pi / 2]])
    state = econ_logits_from_rows(rows)
    assert state["logits_d"][0].argmax() == 1 and state["logits_d"][1].argmax() == 0
    assert state["logits_a"][0].argmax() == 1 and state["logits_a"][2].argmax() == 2
    np.testing.assert_allclose(branch_value(state["raw_d"][0]), 0.25, atol=1e-6)
    np.testing.assert_allclose(branch_value(state["raw_a"][0]), 0.3, atol=1e-6)
