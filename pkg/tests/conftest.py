import numpy as np
import pytest

from eigensr import kernels

BACKENDS = [pytest.param(kernels.python_backend, id="python")]
if kernels.compiled_backend is not None:
    BACKENDS.append(pytest.param(kernels.compiled_backend, id="cython"))


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Route the package's hot loops through one specific kernel backend."""
    mod = request.param
    for name in ("apply_weights", "stitch_mean", "min_shift_hamming"):
        monkeypatch.setattr(kernels, name, getattr(mod, name))
    return mod


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
