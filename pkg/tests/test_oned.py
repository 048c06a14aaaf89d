import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import solve_ivp

from oldrlab.oldroyd import ModelParams
from oldrlab.oned import (
    OneDConfig,
    OneDState,
    blowup_time_estimate,
    cotlar_residual,
    riccati_blowup_time,
    riccati_exact,
    riccati_roots,
    rhs_1d,
    run_1d,
)
from oldrlab.spectral import Grid, SpectralField, random_field

G = Grid(1, 128)
(X,) = G.coords


def field(v):
    return SpectralField(G, v)


def test_constant_state_relaxes_exactly():
    kap, s0 = 0.3, 1.8
    d, u = rhs_1d(OneDState(field(np.full_like(X, s0))), ModelParams(1.0, kap))
    assert u.sup() == 0.0
    assert np.abs(d.values + 2 * kap * (s0 - 1)).max() < 1e-14
    tr = run_1d(OneDState(field(np.full_like(X, s0))), ModelParams(1.0, kap), OneDConfig(0.01, 1.0))
    assert abs(tr.sup_sigma[-1] - (1 + (s0 - 1) * math.exp(-2 * kap))) < 1e-10


def test_velocity_of_single_mode():
    k = 1.7
    _, u = rhs_1d(OneDState(field(1 + 0.1 * np.cos(X))), ModelParams(k, 0.2))
    assert np.abs(u.values + 0.1 * k * np.cos(X)).max() < 1e-14


def test_equilibrium_is_stationary():
    d, _ = rhs_1d(OneDState(field(np.ones_like(X))), ModelParams(1.0, 0.5))
    assert d.sup() < 1e-15


def test_cotlar_examples():
    assert cotlar_residual(field(np.cos(X))) < 1e-12
    assert cotlar_residual(field(np.full_like(X, 3.0))) < 1e-12


@given(st.integers(0, 2**32 - 1))
def test_cotlar_random(seed):
    s = random_field(G, np.random.default_rng(seed), kmax=30, mean=0.3)
    assert cotlar_residual(s) <= 1e-11 * s.sup() ** 2


def test_riccati_pure_quadratic():
    t = np.linspace(0, 0.9, 10)
    assert np.abs(riccati_exact(1.0, 1.0, 0.0, t) - 1 / (1 - t)).max() < 1e-12
    assert riccati_blowup_time(1.0, 1.0, 0.0) == pytest.approx(1.0)
    assert np.isinf(riccati_exact(1.0, 1.0, 0.0, 1.5))


def test_riccati_fixed_point():
    rp, rm = riccati_roots(1.0, 0.4)
    z = riccati_exact(rp, 1.0, 0.4, np.linspace(0, 5, 7))
    assert np.abs(z - rp).max() < 1e-12
    assert abs(1.0 * rp**2 - 0.8 * rp + 0.8j) < 1e-12


def test_riccati_generic_against_ode_solver():
    z0, k, kap = 0.3 + 0.7j, 1.0, 0.2
    f = lambda t, y: [k * complex(*y) ** 2 - 2 * kap * complex(*y) + 2j * kap]
    sol = solve_ivp(
        lambda t, y: [v for z in f(t, y) for v in (z.real, z.imag)],
        (0, 1), [z0.real, z0.imag], rtol=1e-13, atol=1e-14, dense_output=True,
    )
    t = np.linspace(0, 1, 11)
    ref = sol.sol(t)[0] + 1j * sol.sol(t)[1]
    assert np.abs(riccati_exact(z0, k, kap, t) - ref).max() < 1e-10


def test_riccati_real_line_without_relaxation():
    assert math.isinf(riccati_blowup_time(-0.5, 1.0, 0.0))
    assert math.isinf(riccati_blowup_time(0.5j, 1.0, 0.0))


def test_blowup_estimate_synthetic():
    t = np.linspace(0, 1.9, 400)
    est = blowup_time_estimate(t, 1 / (2 - t))
    assert est.status == "ok" and abs(est.T_est - 2) < 1e-6


def test_blowup_estimate_refuses_decay():
    t = np.linspace(0, 2, 100)
    est = blowup_time_estimate(t, np.exp(-t))
    assert est.status == "refused"
    assert blowup_time_estimate(t[:5], np.exp(t[:5])).status == "refused"


def test_zero_of_sigma_is_carried_by_its_characteristic():
    # with kappa0 = 0, d sigma/dt = 2k sigma H sigma along characteristics, so a zero stays a zero
    tr = run_1d(OneDState(field(1 - np.cos(X))), ModelParams(1.0, 0.0), OneDConfig(1e-3, 0.5), positions=[0.0])
    assert np.abs(tr.positions[-1, 0]) > 0.1
    assert np.abs(tr.z_grid[:, 0].imag).max() < 1e-6


def test_blowup_flag_on_nonfinite_data():
    v = np.ones_like(X)
    v[3] = np.nan
    with np.errstate(invalid="ignore"):
        tr = run_1d(OneDState(field(v)), ModelParams(1.0, 0.1), OneDConfig(1e-3, 1e-2))
    assert tr.status == "blowup_flag"
    with pytest.raises(ValueError):
        OneDState(SpectralField.constant(Grid(2, 16), 1.0))
