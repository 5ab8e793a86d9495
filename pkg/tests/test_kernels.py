import os
import subprocess
import sys

import numpy as np
import pytest

from sqzdistill import _fallback, fock, kernels

from .conftest import random_dm

try:
    from sqzdistill import _kernels
except ImportError:  # extension not built
    _kernels = None

needs_ext = pytest.mark.skipif(_kernels is None, reason="compiled extension not built")


@needs_ext
@pytest.mark.parametrize("cutoff", [0, 1, 5, 20])
def test_bs_table_backends_agree(cutoff):
    assert np.abs(_kernels.bs_table(cutoff) - _fallback.bs_table(cutoff)).max() < 1e-13


@needs_ext
def test_gaussify_contract_backends_agree():
    rng = np.random.default_rng(0)
    rho = random_dm(rng, 12)
    table = _fallback.bs_table(12)
    povm = rng.random(25)
    a = _kernels.gaussify_contract(rho, table, povm)
    b = _fallback.gaussify_contract(rho, table, povm)
    assert np.abs(a - b).max() < 1e-14


@needs_ext
def test_husimi_backends_agree():
    rng = np.random.default_rng(1)
    rho = random_dm(rng, 16)
    alphas = rng.normal(size=1000) + 1j * rng.normal(size=1000)
    assert np.abs(_kernels.husimi_batch(rho, alphas) - _fallback.husimi_batch(rho, alphas)).max() < 1e-14
    # fewer points than one block, and zero points
    assert np.allclose(_kernels.husimi_batch(rho, alphas[:3]), _fallback.husimi_batch(rho, alphas[:3]), atol=1e-15)
    assert _kernels.husimi_batch(rho, alphas[:0]).shape == (0,)


def test_bs_table_is_orthogonal_per_photon_number():
    cutoff = 8
    u = fock.beamsplitter_unitary(cutoff)
    dim = cutoff + 1
    low = [n * dim + m for n in range(dim) for m in range(dim) if n + m <= cutoff]
    block = u[np.ix_(low, low)]
    assert np.allclose(block.T @ block, np.eye(len(low)), atol=1e-12)


def test_husimi_of_coherent_state():
    alpha = 0.8 - 0.5j
    rho = fock.ket_to_dm(fock.coherent_ket(alpha, 30, normalize=True))
    pts = np.array([alpha, 0.0, 1.0j])
    expected = np.exp(-np.abs(pts - alpha) ** 2)
    assert np.allclose(kernels.husimi_batch(rho, pts), expected, atol=1e-12)


def test_pure_python_switch():
    env = dict(os.environ, SQZDISTILL_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import sqzdistill; print(sqzdistill.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
