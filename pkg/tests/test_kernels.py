import os
import subprocess
import sys

import numpy as np
import pytest

from fkquasi import _fallback, kernels


def test_backend_reported():
    assert kernels.BACKEND in kernels.available()
    assert kernels.get_backend() is kernels.get_backend(kernels.BACKEND)
    assert "python" in kernels.available()


def test_set_backend_roundtrip():
    prev = kernels.set_backend("python")
    try:
        assert kernels.BACKEND == "python"
        assert kernels.get_backend() is _fallback
    finally:
        kernels.set_backend(prev)
    assert kernels.BACKEND == prev
    with pytest.raises(ValueError):
        kernels.set_backend("fortran")


def test_env_forces_fallback():
    env = dict(os.environ, FKQUASI_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from fkquasi import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@pytest.mark.skipif("cython" not in kernels.available(), reason="compiled core not built")
@pytest.mark.parametrize("p", [2.0, 3.0, 4.0, 2.5])
def test_pair_forces_agree(p, rng):
    from fkquasi import _kernels
    n = 300
    indptr = np.arange(0, 2 * n + 1, 2, dtype=np.int64)
    idx = np.empty(2 * n, dtype=np.int64)
    idx[0::2] = (np.arange(n) - 1) % (n + 2)
    idx[1::2] = np.arange(n) + 1
    U = rng.normal(size=(n + 2, 2))
    rows = np.repeat(np.arange(n, dtype=np.int64), 2)
    a = _fallback.pair_forces(U, indptr, idx, rows, p)
    b = np.asarray(_kernels.pair_forces(U, indptr, idx, rows, p))
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
