import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fptmc.model import (
    DiffusionMatrix,
    FirmSpec,
    PortfolioSpec,
    decompose_covariance,
    diffusion_correlation,
    diffusion_from_vols,
    effective_vol,
    threshold_level,
)

from conftest import PAIR_ROWS

finite = st.floats(-10, 10, allow_nan=False)


def test_threshold_examples():
    assert threshold_level(FirmSpec(1.0, 0.0, kappa_log=0.0, gamma=0.0), 5) == 0.0
    assert threshold_level(FirmSpec(1.0, 0.0, kappa_log=0.0, gamma=-0.001), 10) == pytest.approx(-0.01, abs=1e-15)
    assert threshold_level(FirmSpec(1.0, 0.0, kappa_log=0.3, gamma=-0.001), 2) == pytest.approx(0.298, abs=1e-15)


def test_threshold_rejects_negative_time():
    with pytest.raises(ValueError):
        threshold_level(FirmSpec(1.0, 0.0), -1.0)


@given(gamma=finite, lk=st.floats(-5, 0.5), a=st.floats(0, 50), b=st.floats(0, 50))
def test_threshold_is_affine(gamma, lk, a, b):
    f = FirmSpec(1.0, 0.0, kappa_log=lk, gamma=gamma)
    lhs = threshold_level(f, a) + threshold_level(f, b)
    rhs = threshold_level(f, 0) + threshold_level(f, a + b)
    assert lhs == pytest.approx(rhs, abs=1e-9)


def test_effective_vol_examples():
    assert effective_vol(DiffusionMatrix([[0.09, 0.0], [0.0, 1.0]]), 0) == pytest.approx(0.09)
    m = DiffusionMatrix(PAIR_ROWS)
    assert effective_vol(m, 0) == pytest.approx(0.0757976, abs=5e-8)
    assert effective_vol(m, 1) == pytest.approx(0.0749978, abs=5e-8)


def test_zero_row_rejected():
    with pytest.raises(ValueError):
        DiffusionMatrix([[0.0, 0.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        effective_vol(np.array([[0.0, 0.0], [0.0, 1.0]]), 0)


def test_diffusion_correlation_examples():
    assert diffusion_correlation(DiffusionMatrix(np.eye(2)), 0, 1) == 0.0
    assert diffusion_correlation(DiffusionMatrix(PAIR_ROWS), 0, 1) == pytest.approx(0.7673104, abs=5e-7)
    row = np.array([0.3, -0.2])
    assert diffusion_correlation(np.vstack([row, 2.5 * row]), 0, 1) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        diffusion_correlation(DiffusionMatrix(np.eye(2)), 1, 1)


@given(
    st.lists(st.floats(-1, 1), min_size=4, max_size=4).filter(
        lambda v: abs(v[0]) + abs(v[1]) > 1e-3 and abs(v[2]) + abs(v[3]) > 1e-3
    ),
    st.floats(1e-3, 1e3),
)
def test_diffusion_correlation_symmetric_and_scale_free(v, c):
    m = np.array(v).reshape(2, 2)
    r = diffusion_correlation(m, 0, 1)
    assert r == pytest.approx(diffusion_correlation(m, 1, 0), abs=1e-12)
    assert r == pytest.approx(diffusion_correlation(c * m, 0, 1), abs=1e-9)
    assert -1 <= r <= 1


def test_decompose_identity():
    assert np.array_equal(decompose_covariance(np.eye(3)).entries, np.eye(3))


def test_decompose_round_trip_paper_like():
    s, r = 0.075, 0.767
    H = np.array([[s * s, r * s * s], [r * s * s, s * s]])
    L = decompose_covariance(H).entries
    assert L[0, 1] == 0.0
    np.testing.assert_allclose(L @ L.T, H, rtol=1e-12, atol=0)


def test_decompose_rejects_non_psd():
    s = 0.075
    H = np.array([[s * s, 1.0001 * s * s], [1.0001 * s * s, s * s]])
    with pytest.raises(ValueError):
        decompose_covariance(H)


@settings(max_examples=60)
@given(st.integers(1, 5).flatmap(
    lambda n: st.lists(st.floats(-1, 1), min_size=n * n, max_size=n * n).map(
        lambda v: np.array(v).reshape(n, n)
    )
))
def test_decompose_reproduces_product(m):
    n = m.shape[0]
    m = np.tril(m) + np.diag(0.1 + np.abs(np.diag(m)))
    H = m @ m.T
    L = decompose_covariance(H).entries
    np.testing.assert_allclose(L @ L.T, H, rtol=1e-12, atol=1e-14 * np.abs(H).max())


def test_diffusion_from_vols_matches_targets():
    d = diffusion_from_vols([0.0757976, 0.0749978], 0.7673104)
    assert effective_vol(d, 0) == pytest.approx(0.0757976, rel=1e-12)
    assert diffusion_correlation(d, 0, 1) == pytest.approx(0.7673104, rel=1e-12)


def test_firm_must_start_above_threshold():
    with pytest.raises(ValueError):
        FirmSpec(x0=0.0, mu=0.0, kappa_log=0.0)
    with pytest.raises(ValueError):
        FirmSpec(x0=1.0, mu=0.0, jump_sd=-0.1)


def test_portfolio_validation(single_a):
    f = single_a.firms[0]
    with pytest.raises(ValueError):
        PortfolioSpec((f, f), DiffusionMatrix([[0.1]]), 0.1, 1.0, 10.0)
    with pytest.raises(ValueError):
        PortfolioSpec((f,), DiffusionMatrix([[0.1]]), 0.1, 1.0, 0.0)
    with pytest.raises(ValueError):
        PortfolioSpec((f,), DiffusionMatrix([[0.1]]), -0.1, 1.0, 10.0)
    with pytest.raises(ValueError, match="instant rate"):
        PortfolioSpec((f,), DiffusionMatrix([[0.1]]), 2.0, 1.0, 10.0)
    assert single_a.jump_probability == pytest.approx(0.10001559)


def test_uniform_target_defaults_to_diffusion_correlation(pair_aa):
    assert pair_aa.uniform_target() == pytest.approx(0.7673104, abs=5e-7)
    assert pair_aa.replace(uniform_corr=0.25).uniform_target() == 0.25


def test_specs_are_immutable(single_a):
    with pytest.raises(Exception):
        single_a.horizon = 3.0
    with pytest.raises(ValueError):
        single_a.diffusion.entries[0, 0] = 1.0
