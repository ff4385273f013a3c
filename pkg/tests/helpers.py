"""Shared test utilities: central-difference gradients."""

import numpy as np

H = 1e-5
GRAD_TOL = 1e-4


def numeric_gradient(f, arr, h=H):
    """Central finite differences of a scalar function w.r.t. every entry
    of arr. arr is perturbed in place and restored."""
    g = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        ix = it.multi_index
        old = arr[ix]
        arr[ix] = old + h
        fp = f()
        arr[ix] = old - h
        fm = f()
        arr[ix] = old
        g[ix] = (fp - fm) / (2.0 * h)
    return g


def rel_err(analytic, numeric):
    """Max elementwise error, normalized by the larger gradient scale
    (floored at 1 so near-zero gradients compare absolutely)."""
    denom = max(1.0, float(np.abs(analytic).max(initial=0.0)),
                float(np.abs(numeric).max(initial=0.0)))
    return float(np.abs(analytic - numeric).max(initial=0.0)) / denom


def check_param_grads(loss_fn, params, h=H):
    """Compare every parameter's accumulated .grad against finite
    differences of loss_fn. Gradients must already be populated."""
    worst = 0.0
    for name, p in params.items():
        num = numeric_gradient(loss_fn, p.value, h)
        err = rel_err(p.grad, num)
        assert err < GRAD_TOL, f"{name}: gradient error {err:.2e}"
        worst = max(worst, err)
    return worst
