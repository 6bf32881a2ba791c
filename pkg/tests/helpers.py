"""Shared numeric utilities for the test suite."""

import numpy as np

FD_STEP = 1e-5
FD_RTOL = 1e-4


def central_diff(f, x, step=FD_STEP):
    """Central finite-difference gradient of scalar f at array x."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = x[idx]
        x[idx] = orig + step
        up = f(x)
        x[idx] = orig - step
        down = f(x)
        x[idx] = orig
        grad[idx] = (up - down) / (2.0 * step)
    return grad


def max_rel_err(got, want, floor=1e-8):
    got = np.asarray(got, dtype=np.float64)
    want = np.asarray(want, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(got), np.abs(want)), floor)
    return float((np.abs(got - want) / denom).max())


def random_synthetic_graph(rng, n, features="adjacency"):
    """A random tree or double ring of size n with the given feature policy."""
    import gram

    if n >= 5 and rng.integers(2) == 1:
        g = gram.gen_double_ring(n, rng)
    else:
        g = gram.gen_binary_tree(n, rng)
    return gram.default_node_features(g, features)
