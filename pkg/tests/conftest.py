import numpy as np
import pytest


def _numeric_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar-valued f with respect to x.

    f is re-evaluated with x perturbed in place, so it must read the same
    array object on every call.
    """
    grad = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        f_plus = f()
        flat[i] = orig - h
        f_minus = f()
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def _grads_close(analytic: np.ndarray, numeric: np.ndarray, rtol: float = 1e-4, atol: float = 1e-8):
    analytic = np.asarray(analytic)
    err = np.abs(analytic - numeric)
    rel = err / np.maximum(np.abs(analytic) + np.abs(numeric), 1e-12)
    ok = (err <= atol) | (rel <= rtol)
    assert ok.all(), f"gradient mismatch: max abs err {err.max():.3e}, max rel err {rel[~ok].max():.3e}"


@pytest.fixture
def numeric_grad():
    return _numeric_grad


@pytest.fixture
def grads_close():
    return _grads_close
