import numpy as np
import pytest

from cascade_ldp import WeightModel, kernels
from cascade_ldp import cascade as cs
from cascade_ldp import ratefn as rf

needs_c = pytest.mark.skipif("cython" not in kernels.available(), reason="compiled extension not built")

MODELS = [WeightModel.exponential(), WeightModel.gamma(2.5), WeightModel.gamma(0.4),
          WeightModel.two_point(0.5), WeightModel.degenerate()]


def test_python_backend_always_available():
    assert "python" in kernels.available()
    with pytest.raises(ImportError):
        kernels.get_backend("fortran")


def test_env_selects_backend(monkeypatch):
    monkeypatch.setenv("CASCADE_LDP_BACKEND", "python")
    assert kernels.get_backend() is kernels._pykernels


@needs_c
@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.model_id)
@pytest.mark.parametrize("r,n", [(2, 1), (3, 4), (7, 2)])
def test_sampler_bit_identical(model, r, n):
    a = cs.sample_finite(model, r, n, 3000, seed=13, backend="cython")
    b = cs.sample_finite(model, r, n, 3000, seed=13, backend="python")
    assert np.array_equal(a.samples, b.samples)


@needs_c
@pytest.mark.parametrize("model", MODELS[:4], ids=lambda m: m.model_id)
def test_rate_recursion_parity(model):
    a = rf.rate_levels(model, 5, backend="cython")
    b = rf.rate_levels(model, 5, backend="python")
    for x, y in zip(a, b):
        assert np.array_equal(np.isinf(x.values), np.isinf(y.values))
        m = np.isfinite(x.values)
        # libm and numpy may differ in the last bit of log1p
        assert np.allclose(x.values[m], y.values[m], rtol=1e-13, atol=1e-14)


@needs_c
def test_breakpoint_parity():
    e = WeightModel.exponential()
    a = rf.breakpoints(e, 4, backend="cython").a_n
    b = rf.breakpoints(e, 4, backend="python").a_n
    assert np.allclose(a, b, rtol=1e-9)
