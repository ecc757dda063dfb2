import itertools
import math

import numpy as np
import pytest
from scipy import stats

import splinegp


def test_basis_is_a_partition_of_unity():
    grid = np.linspace(0.0, 1.0, 21)
    b = splinegp.bspline_basis([0.0, 0.25, 0.5, 0.75, 1.0], grid, 3)
    assert b.shape == (7, 21)
    np.testing.assert_allclose(b.sum(axis=0), 1.0, atol=1e-12)
    assert (b >= 0).all()
    np.testing.assert_allclose(splinegp.equispaced_basis(grid, 5, 3), b, atol=1e-12)


def test_kron_mvprod_matches_dense_product():
    rng = np.random.default_rng(1)
    A, B, V = rng.normal(size=(3, 4)), rng.normal(size=(5, 2)), rng.normal(size=(2, 4))
    got = splinegp.kron_mvprod(A, B, V)
    want = (np.kron(A, B) @ V.reshape(-1, order="F")).reshape(5, 3, order="F")
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_projected_kernel_is_p_transpose_k_p():
    b = splinegp.equispaced_basis(np.linspace(0, 1, 4), 2, 1)
    K = np.diag([1.0, 2.0, 3.0, 4.0])
    P = np.kron(b, b)
    np.testing.assert_allclose(splinegp.projected_kernel(b, b, K), P.T @ K @ P, atol=1e-12)


def test_negative_binomial_against_scipy():
    for d, shape, scale in [(0, 0.5, 0.3), (7, 2.5, 0.6), (40, 12.0, 0.9)]:
        want = stats.nbinom.logpmf(d, shape, 1.0 - scale)
        assert splinegp.negbin_logpmf(d, shape, scale) == pytest.approx(want, rel=1e-10)
    window = sum(stats.nbinom.pmf(k, 3.0, 0.5) for k in range(16, 25))
    got = splinegp.censored_block_loglik("observed-end", 25, 3.0, 0.5)
    assert got == pytest.approx(math.log(window), rel=1e-10)
    with pytest.raises(ValueError):
        splinegp.negbin_logpmf(1, -1.0, 0.5)


def test_differencing_classifies_a_censored_block():
    s = splinegp.difference_weekly([0, 0, None, None, 11])
    assert s["retrievable"] == [(1, 0)]
    assert s["block_weeks"] == [2, 3, 4]
    assert s["block_bounds"] == (11, 11)
    full = splinegp.difference_weekly([0, 10, 15])
    assert full["retrievable"] == [(1, 10), (2, 5)]
    assert full["scenario"] is None
    with pytest.raises(ValueError):
        splinegp.difference_weekly([0, 5])


def test_dirichlet_multinomial_draws_and_pmf():
    alpha = [0.7, 2.5, 1.2]
    draws = splinegp.sample_dirichlet_multinomial(6, alpha, seed=3, draws=500)
    assert draws.shape == (500, 3)
    assert (draws.sum(axis=1) == 6).all()
    total = sum(
        math.exp(splinegp.dirichlet_multinomial_logpmf([a, b, 6 - a - b], alpha))
        for a, b in itertools.product(range(7), range(7))
        if a + b <= 6
    )
    assert total == pytest.approx(1.0, abs=1e-12)


def test_cli_entry_point(tmp_path):
    code, _, err = splinegp.run_cli(["frobnicate"])
    assert code == 2
    config = tmp_path / "s.toml"
    config.write_text(
        "[mcmc]\nchains = 2\niters = 100\nwarmup = 50\n"
        '[simulate]\ngrid_size = 6\nmethods = ["bsplines:4"]\n'
    )
    code, out, err = splinegp.run_cli(["simulate", "--config", str(config), "--out", str(tmp_path / "o")])
    assert code == 0, err
    lines = (tmp_path / "o" / "simulation.csv").read_text().splitlines()
    assert lines[0].startswith("# config_hash=") and lines[0].endswith("seed=1")
    assert lines[2].split(",")[6] == "bsplines:4"
