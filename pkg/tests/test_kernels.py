import math
import os
import subprocess
import sys

import numpy as np
import pytest

from loschmidt import _kernels

pytestmark = pytest.mark.skipif(_kernels.NUMBA_KERNELS is None, reason="numba not installed")


@pytest.mark.parametrize("x", [0.5, 7.0, 40.0])
def test_miller_paths_agree(x):
    for name in ("miller_j", "miller_i"):
        a = np.asarray(_kernels.NUMPY_KERNELS[name](12, x, 80))
        b = np.asarray(_kernels.NUMBA_KERNELS[name](12, x, 80))
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-300)


def test_lu_paths_agree():
    rng = np.random.default_rng(3)
    m = np.ascontiguousarray(rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12)))
    la, pa, za = _kernels.NUMPY_KERNELS["lu_logdet"](m.copy())
    lb, pb, zb = _kernels.NUMBA_KERNELS["lu_logdet"](m.copy())
    assert not za and not zb
    assert abs(la - lb) < 1e-12
    assert abs(math.remainder(pa - pb, 2 * math.pi)) < 1e-12
    sign, ref = np.linalg.slogdet(m)
    assert abs(la - ref) < 1e-11


def test_lu_singular_both_paths():
    m = np.zeros((3, 3), dtype=complex)
    assert _kernels.NUMPY_KERNELS["lu_logdet"](m.copy())[2]
    assert _kernels.NUMBA_KERNELS["lu_logdet"](m.copy())[2]


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("abc", [False, True])
def test_brute_sum_paths_agree(n, abc):
    g = 64
    phi = 2 * np.pi * np.arange(g) / g
    w = np.exp(-1j * 0.7 * np.cos(phi)) / g
    for p in ([-1] if abc else [-1, 0, n]):
        a = _kernels.NUMPY_KERNELS["brute_sum"](phi, w, n, p, abc)
        b = _kernels.NUMBA_KERNELS["brute_sum"](phi, w, n, p, abc)
        assert abs(a - b) < 1e-13 * max(1.0, abs(a))


def _active_path(env_value):
    env = dict(os.environ)
    if env_value is None:
        env.pop("LOSCHMIDT_DISABLE_NUMBA", None)
    else:
        env["LOSCHMIDT_DISABLE_NUMBA"] = env_value
    code = "from loschmidt import _kernels; print(_kernels.ACTIVE is _kernels.NUMBA_KERNELS)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


def test_env_flag_selects_numpy_path():
    assert _active_path("1") == "False"
    assert _active_path("yes") == "False"
    assert _active_path(None) == "True"
    assert _active_path("0") == "True"
