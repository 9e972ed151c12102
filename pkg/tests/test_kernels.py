import os
import subprocess
import sys

import numpy as np
import pytest

from navslip import _kernels_py, kernels

compiled = pytest.importorskip("navslip._kernels")


@pytest.fixture
def arrays(rng):
    nc, nq = 7, 12
    return dict(phi=rng.standard_normal((nq, 6)), G=rng.standard_normal((nc, nq, 6, 2)),
                W=rng.random((nc, nq)), P=rng.standard_normal((nq, 3)), wq=rng.standard_normal((nc, nq, 2)))


def test_backends_agree(arrays):
    a = arrays
    pairs = [
        (compiled.local_mass(a["phi"], a["W"]), _kernels_py.local_mass(a["phi"], a["W"])),
        (compiled.local_gradgrad(a["G"], a["W"]), _kernels_py.local_gradgrad(a["G"], a["W"])),
        (compiled.local_symgrad(a["G"], a["W"]), _kernels_py.local_symgrad(a["G"], a["W"])),
        (compiled.local_div(a["G"], a["P"], a["W"]), _kernels_py.local_div(a["G"], a["P"], a["W"])),
        (compiled.local_convection(a["phi"], a["G"], a["W"], a["wq"]),
         _kernels_py.local_convection(a["phi"], a["G"], a["W"], a["wq"])),
    ]
    for got, ref in pairs:
        assert got.shape == ref.shape
        assert np.allclose(got, ref, rtol=1e-13, atol=1e-13)


def test_local_matrices_symmetric(arrays):
    a = arrays
    for M in (kernels.local_mass(a["phi"], a["W"]), kernels.local_symgrad(a["G"], a["W"])):
        assert np.array_equal(M, np.swapaxes(M, 1, 2)) or np.allclose(M, np.swapaxes(M, 1, 2), atol=1e-14)
    C = kernels.local_convection(a["phi"], a["G"], a["W"], a["wq"])
    assert np.allclose(C, -np.swapaxes(C, 1, 2), atol=1e-14)


def test_default_backend_is_compiled():
    assert kernels.BACKEND == "cython"


def test_pure_python_switch():
    code = "from navslip import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, NAVSLIP_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_assembly_same_under_both_backends(monkeypatch):
    from navslip.discretization import SlipCoefficient, assemble
    from navslip.geometry import DomainSpec, build_mesh_level
    mesh = build_mesh_level(DomainSpec.annulus(), 3)
    ref = assemble(mesh, alpha=SlipCoefficient.constant(1.0))
    # assembly looks the kernels up at call time
    for name in kernels.__all__[1:]:
        monkeypatch.setattr(kernels, name, getattr(_kernels_py, name))
    alt = assemble(mesh, alpha=SlipCoefficient.constant(1.0))
    for attr in ("M", "K", "B", "D"):
        assert abs(getattr(ref, attr) - getattr(alt, attr)).max() <= 1e-13
