import numpy as np
import pytest
import torch

from evtalign.streams import from_arrays


def fd_grad(fn, param, eps=1e-6):
    """Central finite-difference gradient of the scalar fn() wrt param.

    Perturbs param in place element by element; fn must recompute the
    forward pass from the live parameter value.
    """
    grad = torch.zeros_like(param, dtype=torch.float64)
    flat = param.detach().reshape(-1)
    gflat = grad.reshape(-1)
    with torch.no_grad():
        for i in range(flat.numel()):
            orig = flat[i].item()
            flat[i] = orig + eps
            up = float(fn())
            flat[i] = orig - eps
            down = float(fn())
            flat[i] = orig
            gflat[i] = (up - down) / (2 * eps)
    return grad


def rel_error(a, b, floor=1e-10):
    a = a.detach().reshape(-1)
    b = b.detach().reshape(-1)
    denom = max(float(a.norm()), float(b.norm()), floor)
    return float((a - b).norm()) / denom


@pytest.fixture(autouse=True)
def _single_thread():
    torch.set_num_threads(1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_stream(n, sensor=8, seed=0, width=None, height=None):
    """Random valid stream of n events on a sensor."""
    width = width or sensor
    height = height or sensor
    r = np.random.default_rng(seed)
    t = np.sort(r.integers(0, 10_000, size=n))
    return from_arrays(
        width, height,
        t,
        r.integers(0, width, size=n),
        r.integers(0, height, size=n),
        r.choice([-1, 1], size=n),
    )
