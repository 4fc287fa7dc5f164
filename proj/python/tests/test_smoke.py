import numpy as np
import pytest

import bdecon


def small_problem():
    dic = bdecon.make_dictionary(8, 16, 31)
    signal = bdecon.SignalPrior(dic, 0.5)
    kernel = bdecon.KernelPrior(5, 2.0, 1.0)
    noise = bdecon.NoiseModel(9e-4)
    return signal, kernel, noise


def test_dictionary_atoms_are_orthonormal():
    dic = bdecon.make_dictionary(8, 16, 31)
    assert dic.size() == 16
    atoms = np.stack([bdecon.dct2_atom(p, q, 8).ravel() for p, q in dic.atom_indices])
    np.testing.assert_allclose(atoms @ atoms.T, np.eye(16), atol=1e-12)


def test_synthesize_analyze_roundtrip():
    dic = bdecon.make_dictionary(8, 16, 31)
    alpha = np.random.default_rng(0).normal(size=16)
    x = bdecon.synthesize(dic, alpha)
    np.testing.assert_allclose(bdecon.analyze(dic, x), alpha, atol=1e-12)


def test_conv_matches_direct_sum():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(8, 8))
    h = bdecon.gaussian_kernel(1.3, 5)
    assert h.shape == (5, 5)
    assert abs(h.sum() - 1.0) < 1e-12
    g = bdecon.embed_kernel(h, 8)
    y = bdecon.conv2_circ(x, g)
    ref = np.zeros_like(x)
    for i in range(-2, 3):
        for j in range(-2, 3):
            ref += h[i + 2, j + 2] * np.roll(np.roll(x, i, axis=0), j, axis=1)
    np.testing.assert_allclose(y, ref, atol=1e-12)


def test_conv_adjoint():
    rng = np.random.default_rng(2)
    g, x, r = rng.normal(size=(3, 8, 8))
    lhs = np.sum(bdecon.conv2_circ(x, g) * r)
    rhs = np.sum(x * bdecon.conv2_adj(g, r))
    assert abs(lhs - rhs) < 1e-10


def test_instance_invariants():
    signal, kernel, noise = small_problem()
    inst = bdecon.generate_instance_at(signal, kernel, noise, 5, 0)
    assert inst.sigma > 0
    assert abs(inst.h.sum() - 1.0) < 1e-12
    y = bdecon.conv2_circ(inst.x, bdecon.embed_kernel(inst.h, 8)) + inst.eps
    np.testing.assert_allclose(inst.y, y, atol=1e-12)
    again = bdecon.generate_instance_at(signal, kernel, noise, 5, 0)
    np.testing.assert_array_equal(inst.y, again.y)


def test_quadrature_moments():
    rule = bdecon.gamma_quadrature(2.0, 1.0, 64)
    nodes, weights = np.array(rule.nodes), np.array(rule.weights)
    assert abs(weights.sum() - 1.0) < 1e-12
    assert abs(weights @ nodes - 2.0) < 1e-6


def test_lmmse_and_tikhonov_residual():
    signal, kernel, noise = small_problem()
    m = bdecon.theoretical_moments(signal, kernel, noise, M=32)
    assert m.C_yy.shape == (64, 64)
    assert m.C_hy.shape == (25, 64)
    np.testing.assert_allclose(m.C_yy, m.C_yy.T, atol=1e-14)
    inst = bdecon.generate_instance_at(signal, kernel, noise, 11, 3)
    x_hat, h_hat = bdecon.lmmse_estimate(m, inst.y)
    assert x_hat.shape == (8, 8) and h_hat.shape == (5, 5)
    assert bdecon.tikhonov_residual(m, x_hat, h_hat, inst.y) < 1e-6


def test_empirical_moments_shape():
    signal, kernel, noise = small_problem()
    insts = bdecon.generate_dataset(signal, kernel, noise, 40, 3)
    m = bdecon.empirical_moments(insts, 40)
    assert m.empirical and m.n_samples == 40
    assert m.C_yy.shape == (64, 64)


def test_simplex_and_threshold():
    p = bdecon.project_simplex(np.array([0.3, -1.0, 2.0, 0.5]))
    assert abs(p.sum() - 1.0) < 1e-12 and p.min() >= 0
    v = np.array([1.0, -2.0, 0.05])
    mu = np.array([0.5, 0.0, 0.0])
    np.testing.assert_array_equal(bdecon.soft_threshold_shifted(v, mu, 0.0), v)
    out = bdecon.soft_threshold_shifted(v, mu, 0.1)
    np.testing.assert_allclose(out, [0.9, -1.9, 0.0])


@pytest.mark.parametrize("variant", ["sigma", "h"])
def test_map_solve_runs(variant):
    signal, kernel, noise = small_problem()
    inst = bdecon.generate_instance_at(signal, kernel, noise, 11, 0)
    r = bdecon.map_solve(inst.y, signal, kernel, variant=variant, max_iter=10,
                         truth=(inst.x, inst.h))
    assert r["iterations"] == 10
    assert len(r["trace"]["mse_x"]) == 10
    assert abs(r["h_hat"].sum() - 1.0) < 1e-10
    assert np.all(np.isfinite(r["x_hat"]))


def test_grid_search_tiny():
    out = bdecon.run_grid_search("desk", {
        "n": 8, "K": 16, "d": 5, "dataset_size": 2,
        "lambda_alpha_grid": [1e-2], "lambda_h_grid": [1e-3],
        "extra_cells": [], "quad_nodes": 16, "max_iter": 5,
    })
    assert out["lmmse_mse_x"] > 0
    assert {r["method"] for r in out["rows"]} == {"map_sigma", "map_h"}


def test_errors_map_to_python():
    with pytest.raises(ValueError):
        bdecon.make_dictionary(8, 65, 1)
    with pytest.raises(ValueError):
        bdecon.config("desk", {"n": "abc"})
