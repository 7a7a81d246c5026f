import math

import numpy as np
import pytest

import dbar_eit as de


@pytest.fixture(scope="module")
def tank():
    return de.place_electrodes(de.BoundaryGeometry.circle(0.15), 32, 0.025, 0.016)


@pytest.fixture(scope="module")
def saline(tank):
    return de.simulate(tank, de.Phantom(0.424), amplitude=2e-4)


def test_geometry(tank):
    assert tank.count == 32
    assert math.isclose(de.BoundaryGeometry.circle(0.15).perimeter, 2 * math.pi * 0.15, rel_tol=1e-10)


def test_simulate_shapes(saline):
    assert saline.voltages.shape == (32, 31)
    assert saline.patterns.shape == (32, 31)
    assert saline.is_real()


def test_homogeneous_reconstruction(saline):
    img = de.reconstruct(saline, de.ReconstructionConfig(z_n=32))
    vals = img.values[img.valid]
    assert img.values.shape == (32, 32)
    assert np.max(np.abs(vals.real - 0.424)) < 0.1 * 0.424
    assert np.max(np.abs(vals.imag)) < 1e-6


def test_difference_against_itself_is_zero(saline):
    cfg = de.ReconstructionConfig(method="texp", mode="difference", z_n=24)
    img = de.reconstruct(saline, cfg, reference=saline)
    assert np.max(np.abs(img.values)) < 1e-8


def test_dataset_round_trip(saline, tmp_path):
    path = tmp_path / "frame.json"
    de.write_dataset(path, saline)
    assert de.read_dataset(path) == saline


def test_dynamic_range():
    assert de.dynamic_range(0.74, 0.15, 0.75, 0.24) == pytest.approx(115.6862745098, abs=1e-10)


def test_errors_carry_codes():
    with pytest.raises(de.DbarError) as info:
        de.place_electrodes(de.BoundaryGeometry.circle(0.15), 31, 0.01, 0.01)
    assert info.value.code == "OddElectrodeCount"
    assert info.value.is_validation
    with pytest.raises(de.DbarError):
        de.ReconstructionConfig(method="approach3")
