import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oldrlab.initial import random_state
from oldrlab.oldroyd import Engine, ModelParams, OldroydState, SolverConfig, run
from oldrlab.regularized import (
    ConfigurationError,
    DeltaResponse,
    RegularizedEngine,
    RegularizedParams,
    RegularizedState,
    delta_eval,
    rhs_regularized,
    run_regularized,
    trace_bound_envelope,
)
from oldrlab.spectral import Grid, SpectralField, dealias, random_field

D = DeltaResponse(kappa=0.5, C0=1.5)


def test_delta_examples():
    k = D.kappa
    assert D(k / 4) == 0.0
    assert D(k) == pytest.approx(1.5 * k * math.sqrt(2))
    assert D(2 * k) == pytest.approx(1.5 * k * math.sqrt(5))
    with pytest.raises(ValueError):
        delta_eval(-1.0, D)


@given(st.floats(0.0, 10.0))
def test_delta_is_nonnegative_and_monotone(g):
    assert D(g) >= 0.0
    assert D(g + 1e-3) >= D(g)


def test_delta_is_smooth_at_the_seams():
    for g0 in (D.kappa / 2, D.kappa):
        h = 1e-7
        left, right = D.derivative(g0 - h), D.derivative(g0 + h)
        assert abs(left - right) < 1e-5


def test_slope_enforcement():
    with pytest.raises(ConfigurationError):
        DeltaResponse(0.5, enforce_slope=True)
    ok = DeltaResponse(0.5, enforce_slope=True, slope_factor=6.0)
    assert ok.max_slope <= 6.0 * ok.C0
    with pytest.raises(ConfigurationError):
        DeltaResponse(0.0)


def test_envelope_examples():
    assert trace_bound_envelope(0.0, 2.0, 1.0, 2, 0.5, 1.0, 1.0, 1.0) == pytest.approx(2.0 + 1.0)
    assert trace_bound_envelope(1.0, 1.0, 1.0, 2, 0.0, 1.0, 1.0, 1.0) == pytest.approx(math.e**2)
    assert trace_bound_envelope(1.0, 1.0, 1.0, 2, 1.0, 1.0, 1.0, 1.0) == pytest.approx(22.167, abs=1e-3)


def gentle_state(g, rng, amp=0.02):
    s = random_state(g, rng, amplitude=amp, modes=2)
    return RegularizedState.from_oldroyd(s, SpectralField.constant(g, 1.0))


def test_inactive_threshold_reproduces_plain_solver():
    g = Grid(2, 32)
    st_ = gentle_state(g, np.random.default_rng(0))
    p = RegularizedParams(1.0, 0.5, DeltaResponse(kappa=50.0))
    tr = run_regularized(st_, p, 0.01, 0.3)
    assert tr.active_fraction.max() == 0.0
    plain = run(OldroydState(st_.a, st_.b, st_.c, st_.rho), ModelParams(1.0, 0.5), SolverConfig(0.01, 0.3))
    diff = np.abs(tr.final_state.stack()[:4] - plain.final_state.stack()).max()
    assert diff < 1e-12
    assert np.abs(tr.final_state.R.values - 1.0).max() < 1e-12


def test_delta_off_matches_engine():
    g = Grid(2, 32)
    st_ = gentle_state(g, np.random.default_rng(1), amp=0.5)
    dY, _ = RegularizedEngine(g, RegularizedParams(1.0, 0.5, D), delta_off=True).rhs(st_.stack())
    eY, _ = Engine(g, ModelParams(1.0, 0.5)).rhs(st_.stack()[:4])
    assert np.abs(dY[:4] - eY).max() < 1e-13


def test_uniform_state_relaxes_with_local_rate():
    g = Grid(2, 16)
    X1, _ = g.coords
    R = SpectralField(g, 1.0 + 0.0 * X1)
    c0 = 3.0
    s = RegularizedState(*[SpectralField.constant(g, v) for v in (0.0, 0.0, c0, 1.0)], R)
    d = rhs_regularized(s, RegularizedParams(1.0, 0.5, D))
    assert np.abs(d.c.values - (-2 * 0.5 * (c0 - 2.0))).max() < 1e-14
    assert d.R.sup() < 1e-15


def strong_shear_run(n):
    g = Grid(2, n)
    X1, X2 = g.coords
    a = SpectralField(g, 0.2 * np.sin(X2))
    b = SpectralField(g, 2.0 * np.cos(X1))
    rho = SpectralField.constant(g, 1.0)
    c = 2 * rho + SpectralField(g, 2 * np.sqrt(a.values**2 + b.values**2 + 0.25))
    st_ = RegularizedState(a, b, c, rho, SpectralField.constant(g, 1.0))
    return run_regularized(st_, RegularizedParams(1.0, 0.5, D), 0.0025, 0.3)


def test_min_R_decrease_vanishes_under_refinement():
    # delta R is not band-limited, so the grid minimum of R dips by a
    # truncation error; the continuum statement is min R nondecreasing
    coarse, fine = strong_shear_run(32), strong_shear_run(128)
    assert coarse.active_fraction.max() > 0.5
    dip_c, dip_f = -np.diff(coarse.min_R).min(), -np.diff(fine.min_R).min()
    assert dip_f < 0.25 * dip_c
    assert 1.0 - fine.min_R[-1] < 0.1 * (1.0 - coarse.min_R[-1])


def test_trace_bound_and_damping_on_large_data():
    g = Grid(2, 32)
    st_ = gentle_state(g, np.random.default_rng(3), amp=2.0)
    tr = run_regularized(st_, RegularizedParams(1.0, 0.5, D), 0.005, 0.5)
    assert tr.status == "completed"
    assert tr.bound_ratio.max() <= 1 + 1e-6
    assert tr.damping_violation.max() <= 0
