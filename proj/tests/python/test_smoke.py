import math

import numpy as np
import pytest

import coulomb2d as c2d


def test_kernel_values():
    assert c2d.coulomb_g(math.e, 0.0) == pytest.approx(-1.0, abs=1e-15)
    # outside the smearing disk the smeared kernel is the bare one
    assert c2d.smeared_g(0.5, 0.0, 0.1) == pytest.approx(c2d.coulomb_g(0.5, 0.0), abs=1e-12)
    assert c2d.bessel_j0(0.0) == pytest.approx(1.0)


def test_equilibrium_disk():
    grid = c2d.GridGeometry.centered(1.0, 128)
    sol = c2d.solve_equilibrium(grid)
    d = sol.mu.density
    assert d.shape == (128, 128)
    assert sol.mu.mass == pytest.approx(1.0, abs=1e-9)
    assert d[64, 64] == pytest.approx(2.0 / math.pi, rel=1e-6)
    assert d[0, 0] == 0.0


def test_thermal_and_hamiltonian():
    grid = c2d.GridGeometry.centered(3.0, 96)
    sol = c2d.solve_thermal(4.0, grid)
    assert sol.residual <= 1e-6
    assert sol.mu.mass == pytest.approx(1.0, abs=1e-9)
    pts = np.array([[0.0, 0.0], [math.exp(-1.0), 0.0]])
    assert c2d.hamiltonian(pts) == pytest.approx(1.0 + 2.0 * math.exp(-2.0), rel=1e-14)
    with pytest.raises(c2d.Error):
        c2d.hamiltonian(np.zeros((2, 2)))


def test_sampler_roundtrip(tmp_path):
    grid = c2d.GridGeometry.centered(3.0, 96)
    cfg = c2d.GasConfig(n=16, beta=0.25, seed=5, frames=20, thinning=32, replicas=2)
    sol = c2d.solve_thermal(cfg.theta, grid)
    runs = c2d.run_replicas(cfg, sol, threads=2)
    assert len(runs) == 2
    assert runs[0].positions.shape == (20, 16, 2)
    assert 0.2 < runs[0].acceptance < 0.6
    path = str(tmp_path / "r.c2da")
    c2d.write_archive(path, runs[0])
    back = c2d.read_archive(path)
    assert np.array_equal(back.positions, runs[0].positions)


def test_poisson_statistics():
    samples = c2d.synthetic_poisson(2.0 / math.pi, side=8.0, frames=2000, seed=3)
    t = c2d.poisson_count_test(samples, 2.0 / math.pi)
    assert t.tv < 0.05
    assert t.p_value > 1e-4


def test_cli_in_process(tmp_path):
    code, out, err = c2d.cli(["--help"])
    assert code == 0
    code, _, _ = c2d.cli(["frobnicate"])
    assert code == 64
