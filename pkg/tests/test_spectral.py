import numpy as np
import pytest
from hypothesis import given, strategies as st

from oldrlab.spectral import (
    A_SYMBOL,
    Grid,
    MultiplierSymbol,
    SpectralField,
    active_band,
    apply_multiplier,
    dealias,
    derivative,
    evaluate_at,
    forward,
    hilbert,
    inverse,
    inverse_band,
    inverse_laplacian,
    op_A,
    op_B,
    random_field,
    refine_extremum,
)

G64 = Grid(2, 64)
G1 = Grid(1, 64)


def close(f, g, tol=1e-12):
    return np.abs(np.asarray(f) - np.asarray(g)).max() <= tol


def test_grid_rejects_bad_sizes():
    with pytest.raises(ValueError):
        Grid(2, 48)
    with pytest.raises(ValueError):
        Grid(3, 16)


def test_coefficient_zero_is_the_mean(rng):
    f = random_field(G64, rng, kmax=5, mean=0.7)
    assert abs(f.mean() - f.values.mean()) < 1e-14
    assert abs(f.coeffs[0, 0].real - 0.7) < 1e-12


@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2]))
def test_roundtrip(seed, dim):
    g = Grid(dim, 32)
    v = np.random.default_rng(seed).standard_normal(g.shape)
    assert close(inverse(forward(v, g), g), v, 1e-12)


def test_inverse_band_matches_full_inverse(rng):
    g = Grid(2, 128)
    c = np.stack([dealias(random_field(g, rng, kmax=40)).coeffs for _ in range(3)])
    assert close(inverse_band(c, g, g.n // 3), inverse(c, g), 1e-12)


def test_A_on_cos_x1():
    f = SpectralField.from_function(G64, lambda x1, x2: np.cos(x1))
    X1, _ = G64.coords
    assert close(op_A(f).values, -0.5 * np.cos(X1))


def test_B_on_product():
    f = SpectralField.from_function(G64, lambda x1, x2: np.cos(x1) * np.cos(x2))
    X1, X2 = G64.coords
    assert close(op_B(f).values, 0.5 * np.sin(X1) * np.sin(X2))


def test_zero_symbol_kills_constants():
    f = SpectralField.constant(G64, 3.0)
    for op in (op_A, op_B, inverse_laplacian):
        assert close(op(f).values, 0.0)


@pytest.mark.parametrize(
    "fn,axis,expected",
    [
        (lambda x1, x2: np.sin(x1), 0, lambda x1, x2: np.cos(x1)),
        (lambda x1, x2: 2.0 + 0 * x1, 0, lambda x1, x2: 0 * x1),
        (lambda x1, x2: np.cos(2 * x2), 1, lambda x1, x2: -2 * np.sin(2 * x2)),
    ],
)
def test_derivative(fn, axis, expected):
    f = SpectralField.from_function(G64, fn)
    assert close(derivative(f, axis).values, expected(*G64.coords))


@pytest.mark.parametrize("k,scale", [(1, 1.0), (2, 0.25)])
def test_inverse_laplacian(k, scale):
    f = SpectralField.from_function(G64, lambda x1, x2: np.cos(k * x1))
    assert close(inverse_laplacian(f).values, scale * np.cos(k * G64.coords[0]))


def test_hilbert_examples():
    (x,) = G1.coords
    assert close(hilbert(SpectralField(G1, np.cos(x))).values, np.sin(x))
    assert close(hilbert(SpectralField(G1, np.sin(x))).values, -np.cos(x))
    assert close(hilbert(SpectralField.constant(G1, 2.0)).values, 0.0)
    with pytest.raises(ValueError):
        hilbert(SpectralField.constant(G64, 1.0))


def test_symbol_dimension_mismatch():
    with pytest.raises(ValueError):
        A_SYMBOL.on(G1)


def test_dealias_examples():
    X1, _ = G64.coords
    low = SpectralField(G64, np.cos(X1) + np.sin(X1))
    assert close(dealias(low).values, low.values)
    top = SpectralField(G64, np.cos((64 // 2 - 1) * X1))
    assert close(dealias(top).values, 0.0)
    mix = SpectralField(G64, np.cos(X1) + np.cos((64 // 3 + 1) * X1))
    assert close(dealias(mix).values, np.cos(X1))


@given(st.integers(0, 2**32 - 1))
def test_operator_identities(seed):
    rng = np.random.default_rng(seed)
    f = random_field(G64, rng, kmax=20)
    A, B = op_A(f), op_B(f)
    s = 4.0 * (op_A(A).values + op_B(B).values)
    assert close(s, f.mean_free().values, 1e-12 * f.sup())
    assert close(op_A(B).values, op_B(A).values, 1e-12 * f.sup())


@given(st.integers(0, 2**32 - 1))
def test_hilbert_squares_to_minus_identity(seed):
    f = random_field(G1, np.random.default_rng(seed), kmax=20)
    assert close(hilbert(hilbert(f)).values, -f.values, 1e-12 * f.sup())


def test_self_adjoint(rng):
    f, g = random_field(G64, rng, kmax=10), random_field(G64, rng, kmax=10)
    for op in (op_A, op_B):
        lhs = (op(f).values * g.values).mean()
        rhs = (f.values * op(g).values).mean()
        assert abs(lhs - rhs) < 1e-14


def test_custom_symbol_and_grid_mismatch():
    half = MultiplierSymbol("half", lambda *a: 0.5 + 0 * a[-1], zero_value=0.5)
    f = SpectralField.constant(G64, 2.0)
    assert close(apply_multiplier(f, half).values, 1.0)
    with pytest.raises(ValueError):
        f + SpectralField.constant(Grid(2, 32), 1.0)


def test_evaluate_at_matches_grid_values(rng):
    f = random_field(G64, rng, kmax=8)
    X1, X2 = G64.coords
    pts = np.stack([X1.ravel()[:50], X2.ravel()[:50]], axis=1)
    assert close(evaluate_at(f.coeffs, G64, pts), f.values.ravel()[:50], 1e-12)
    assert close(evaluate_at(f.coeffs, G64, pts, band=active_band(f.coeffs, G64)), f.values.ravel()[:50], 1e-12)


def test_evaluate_at_off_grid():
    f = SpectralField.from_function(G64, lambda x1, x2: np.sin(x1 + 2 * x2))
    pts = np.array([[0.123, 1.7], [3.3, -0.4]])
    assert close(evaluate_at(f.coeffs, G64, pts), np.sin(pts[:, 0] + 2 * pts[:, 1]))


def test_active_band(rng):
    f = SpectralField.from_function(G64, lambda x1, x2: np.cos(3 * x1) * np.sin(x2))
    assert active_band(f.coeffs, G64, rtol=1e-12) == 3
    assert active_band(np.zeros(G64.coeff_shape), G64) == 0


def test_refine_extremum_beats_grid():
    g = Grid(2, 16)
    f = SpectralField.from_function(g, lambda x1, x2: np.cos(x1 - 0.2) * np.cos(x2 - 0.3))
    m = refine_extremum(f.coeffs, g, f.values, "max")
    assert f.values.max() < m <= 1.0 + 1e-12
    assert m > 1.0 - 1e-10
