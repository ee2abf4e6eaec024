import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nhreduce import _kernels_py

ck = pytest.importorskip("nhreduce._ckernels")

el = st.floats(-5, 5, allow_nan=False)


@given(arrays(float, (4, 4), elements=el), arrays(float, 4, elements=el), arrays(float, (4, 4, 4), elements=el))
def test_exterior_assemble(Da, al, C):
    C = C - C.transpose(0, 2, 1)
    assert np.allclose(ck.exterior_assemble(Da, al, C), _kernels_py.exterior_assemble(Da, al, C), atol=1e-12)


@given(arrays(float, 3, elements=el))
def test_expm_so3(w):
    assert np.allclose(ck.expm_so3(w), _kernels_py.expm_so3(w), atol=1e-13)


@given(arrays(float, 3, elements=el), arrays(float, (3, 3), elements=st.floats(-1e-2, 1e-2)))
def test_polar_so3(w, noise):
    R = _kernels_py.expm_so3(w) + noise
    assert np.allclose(ck.polar_so3(R), _kernels_py.polar_so3(R), atol=1e-10)


@given(arrays(float, (3, 3), elements=el), arrays(float, 3, elements=el))
def test_small_solve(A, b):
    A = A + 20.0 * np.eye(3)
    assert np.allclose(ck.small_solve(A, b), _kernels_py.small_solve(A, b), atol=1e-12)


def test_rk4_combine():
    rng = np.random.default_rng(0)
    y, *k = (rng.normal(size=7) for _ in range(5))
    assert np.allclose(ck.rk4_combine(y, *k, 0.1), _kernels_py.rk4_combine(y, *k, 0.1))


def test_pure_python_switch():
    import subprocess
    import sys
    out = subprocess.run([sys.executable, "-c", "import nhreduce; print(nhreduce.BACKEND)"],
                         env={"NHREDUCE_PURE_PYTHON": "1", "PATH": ""}, capture_output=True, text=True)
    assert out.stdout.strip() == "python"
