"""End-to-end smoke checks for the python bindings."""

import math
import os
import tempfile

import numpy as np

import famgp_py as fg


def test_basis():
    p = fg.KernelParams(l_se=0.2)
    basis = fg.make_basis("squared-exponential", p, 20)
    lam = np.asarray(basis.lambda_)
    assert basis.n == 20
    assert np.all(lam > 0)
    assert np.all(np.diff(lam) <= 0)

    # truncated expansion reconstructs the closed-form kernel
    x = np.linspace(-1.0, 1.0, 50)
    phi = fg.basis_matrix(basis, x)
    approx = phi @ np.diag(lam) @ phi.T
    exact = np.array([[fg.kernel_eval("squared-exponential", p, a, b) for b in x]
                      for a in x])
    mad = np.max(np.abs(approx - exact))
    assert mad < 2e-3, mad


def test_fit_predict_matches_exact():
    x, y, y_true, _ = fg.gen_sinusoids(seed=7, n=120, num_terms=3, noise_sd=0.5)
    p = fg.KernelParams(l_se=0.2)
    model = fg.fit(x, y, 0.25, "squared-exponential", p, 40)
    post = model.predict(x, variance=True)
    assert post.mean.shape == (120,)
    assert np.all(post.variance > -1e-10)

    rmse = math.sqrt(np.mean((post.mean - y_true) ** 2))
    assert rmse < 0.5, rmse

    lml = fg.log_marginal_likelihood(x, y, 0.25, "squared-exponential", p, 40)
    assert math.isfinite(lml)


def test_train_improves_lml():
    x, y, _, _ = fg.gen_sinusoids(seed=3, n=200, num_terms=2, noise_sd=0.3)
    r = fg.train(x, y, "chebyshev", 30, fast=True, max_iters=60)
    start = fg.log_marginal_likelihood(x, y, np.var(y) / 10, "chebyshev",
                                       fg.KernelParams(a=0.5, b=0.5), 30)
    assert r.lml >= start
    assert 0 < r.params.a <= 1 and 0 < r.params.b < 1


def test_serialization_roundtrip():
    x, y, _, _ = fg.gen_sinusoids(seed=5, n=80, num_terms=2, noise_sd=0.2)
    model = fg.fit(x, y, 0.1, "chebyshev", fg.KernelParams(a=0.9, b=0.7), 25)
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "model.json")
        fg.save_model(path, model)
        reloaded = fg.load_model(path)
    a = model.predict(x).mean
    b = reloaded.predict(x).mean
    assert np.max(np.abs(a - b)) < 1e-12


def test_multioutput_identity_reduces_to_single():
    kf = np.eye(2)
    x, y, _ = fg.gen_correlated(seed=2, n=60, l_se=0.3, kf=kf, noise_var=0.05)
    p = fg.KernelParams(l_se=0.3)
    mo = fg.mo_fit(x, y, 0.05, "squared-exponential", p, 20, np.eye(2))
    single = fg.fit(x, y[:, 0].copy(), 0.05, "squared-exponential", p, 20)
    a = mo.predict(x, output=0).mean
    b = single.predict(x).mean
    assert np.max(np.abs(a - b)) < 1e-8


def main():
    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_")]
    for t in tests:
        t()
        print(f"ok {t.__name__}")
    print(f"{len(tests)} python smoke tests passed")


if __name__ == "__main__":
    main()
