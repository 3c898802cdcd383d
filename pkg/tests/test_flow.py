import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpu.ensemble import EnsembleSpec, sample_matrix
from mpu.errors import DomainError, ParameterError, PreconditionError
from mpu.flow import (FlowState, bulk_compare, flow_vs_closed_form, ou_step, poisson_control,
                      poisson_eigenvalues, pooled_gaps, run_flow, spacing_sample, unfolded_gaps)
from mpu.mp_model import MPModel
from mpu.spectral import Spectrum


def test_step_from_zero_has_variance_dt_over_M():
    M, N, dt = 50, 40, 0.05
    X = ou_step(FlowState(np.zeros((M, N)), seed=1), dt).X
    # 2000 entries: the sample variance is within 10% of dt/M with overwhelming probability
    assert X.var() == pytest.approx(dt / M, rel=0.1)
    assert abs(X.mean()) < 4 * math.sqrt(dt / M / X.size)


def test_step_drift_only_and_immutability():
    X0 = np.ones((3, 2))
    s0 = FlowState(X0.copy())
    s1 = ou_step(s0, 0.1, noise=np.zeros((3, 2)))
    np.testing.assert_allclose(s1.X, 0.95)
    np.testing.assert_array_equal(s0.X, X0)
    assert (s1.step, s1.t) == (1, pytest.approx(0.1))


@pytest.mark.parametrize("dt", [0.0, -0.01, 0.11, float("nan")])
def test_step_guards(dt):
    with pytest.raises(ParameterError):
        ou_step(FlowState(np.zeros((2, 2))), dt)


def test_step_noise_shape_guard():
    with pytest.raises(ParameterError):
        ou_step(FlowState(np.zeros((2, 2))), 0.01, noise=np.zeros(3))


def test_flow_is_deterministic():
    X0 = sample_matrix(EnsembleSpec("rademacher", 6, 8), 0)
    a = run_flow(X0, 0.3, 30, trial=2, seed=9).X
    b = run_flow(X0, 0.3, 30, trial=2, seed=9).X
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, run_flow(X0, 0.3, 30, trial=3, seed=9).X)


def test_gaussian_is_stationary():
    M, N = 100, 100
    X0 = sample_matrix(EnsembleSpec("gaussian", N, M, seed=2), 0)
    X = run_flow(X0, 1.0, 100, seed=2).X
    assert (X ** 2).sum() / N == pytest.approx(1.0, abs=0.03)


def test_drift_only_refinement_converges():
    # with zero noise the Euler product (1 - t/2n)^n tends to exp(-t/2)
    t = 1.0
    errs = []
    for n in (10, 20, 40, 80):
        s = FlowState(np.ones((1, 1)))
        for _ in range(n):
            s = ou_step(s, t / n, noise=np.zeros((1, 1)))
        errs.append(abs(s.X[0, 0] - math.exp(-t / 2)))
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-3


def test_entry_moments_match_closed_form():
    # each entry of the flow at time t has mean x0 e^{-t/2} and variance (1 - e^{-t}) / M
    M, N, t, steps, trials = 20, 10, 0.5, 50, 200
    X0 = sample_matrix(EnsembleSpec("rademacher", N, M, seed=3), 0)
    Xs = np.array([run_flow(X0, t, steps, k, 3).X for k in range(trials)])
    resid = Xs - X0 * math.exp(-t / 2)
    var = (1 - math.exp(-t)) / M
    assert abs(resid.mean()) <= 4 * math.sqrt(var / resid.size)
    assert resid.var() == pytest.approx(var, rel=0.05)


def test_flow_vs_closed_form_guards_and_trivial():
    X0 = sample_matrix(EnsembleSpec("gaussian", 10, 10), 0)
    assert flow_vs_closed_form(X0, 0.0, 1, 5) == 0.0
    with pytest.raises(PreconditionError):
        flow_vs_closed_form(X0, 1.0, 50, 5)
    with pytest.raises(ParameterError):
        flow_vs_closed_form(X0, -1.0, 50, 5)


def test_flow_vs_closed_form_small():
    X0 = sample_matrix(EnsembleSpec("rademacher", 30, 30, seed=4), 0, stream="x0")
    ks, a, b = flow_vs_closed_form(X0, 0.5, 50, 200, seed=4, return_samples=True)
    assert a.size == b.size == 200
    assert ks <= 0.15


@settings(max_examples=20, deadline=None)
@given(dt=st.floats(1e-4, 0.1), seed=st.integers(0, 10**6))
def test_step_contracts_drift(dt, seed):
    s = FlowState(np.random.default_rng(seed).normal(size=(4, 3)), seed=seed)
    out = ou_step(s, dt, noise=np.zeros((4, 3)))
    assert np.linalg.norm(out.X) <= np.linalg.norm(s.X)


# -- spacings ----------------------------------------------------------------

def test_equally_spaced_unfold_to_one():
    model = MPModel(1.0)
    N, E = 1000, 2.0
    h = 1 / (N * model.density(E))
    lam = E + h * np.arange(-20, 21)
    g = unfolded_gaps(lam, N, model, E, 20 * h + 1e-12)
    np.testing.assert_allclose(g, 1.0, rtol=1e-9)


def test_spacing_sample_fields_and_empty_window():
    model = MPModel(1.0)
    S = Spectrum(np.array([3.0, 1.0]), 10, 10)
    s = spacing_sample(S, model, 2.0, 0.1, trial=4)
    assert s.empty
    d = json.loads(s.to_json())
    assert d == {"E": 2.0, "b": 0.1, "gaps": [], "trial": 4}


@pytest.mark.parametrize("E,b", [(0.1, 0.2), (3.9, 0.2), (2.0, 0.0)])
def test_window_outside_bulk(E, b):
    with pytest.raises(DomainError):
        spacing_sample(Spectrum(np.ones(4), 4, 4), MPModel(1.0), E, b)


def test_mean_unfolded_gap_is_one():
    gaps, samples = pooled_gaps(EnsembleSpec("gaussian", 300, 300, seed=5), 2.0, 0.2, 20)
    assert len(samples) == 20
    assert gaps.mean() == pytest.approx(1.0, abs=0.05)


def test_poisson_generator():
    model = MPModel(0.5)
    lam = poisson_eigenvalues(model, 20000, 0, 1)
    assert np.all(np.diff(lam) <= 0)
    assert lam.max() <= model.lambda_plus and lam.min() >= model.lambda_minus
    # rho_c has mean 1 and variance d, so 4 standard errors is 4 sqrt(0.5 / 20000)
    assert lam.mean() == pytest.approx(1.0, abs=0.02)
    wide = poisson_eigenvalues(MPModel(2.0), 4000, 0, 1)
    assert np.mean(wide == 0) == pytest.approx(0.5, abs=0.03)


def test_bulk_same_spec_is_close():
    spec = EnsembleSpec("gaussian", 300, 300, seed=6)
    assert bulk_compare(spec, spec, 2.0, 0.2, 200) <= 0.03


def test_bulk_guards():
    with pytest.raises(PreconditionError):
        bulk_compare(EnsembleSpec("gaussian", 20, 20), EnsembleSpec("gaussian", 20, 40), 2.0, 0.1, 1)


def test_poisson_control_separates():
    assert poisson_control(EnsembleSpec("gaussian", 200, 200, seed=7), 2.0, 0.3, 30) >= 0.15
