"""Interface extraction, components, centroid, theory formulas."""

import math

import numpy as np
import pytest

from dielsem.interface import (contact_angle, count_components,
                               drop_extents_3d, extract_interface,
                               height_function, phase_centroid, wave_amplitude)
from dielsem.sem import build_mesh
from dielsem.theory import drop_height, film_amplitude


def test_flat_interface_extraction():
    mesh = build_mesh(2.0, 1.0, 4, [0.4, 0.6], 10, electrodes=())
    eta = 0.03
    phi = np.tanh((mesh.y - 0.5) / (math.sqrt(2) * eta))
    curves = extract_interface(mesh, phi, spacing=eta / 4)
    pts = np.vstack(curves)
    assert np.max(np.abs(pts[:, 1] - 0.5)) < 1e-6
    vals = mesh.eval_points(phi, pts[:, 0], pts[:, 1])
    assert np.max(np.abs(vals)) < 1e-6


def test_circular_interface_radius():
    mesh = build_mesh(2.0, 2.0, 8, [0.5, 1.0, 1.5], 10, electrodes=())
    eta = 0.05
    r = np.sqrt((mesh.x - 1.0) ** 2 + (mesh.y - 1.0) ** 2)
    phi = np.tanh((r - 0.6) / (math.sqrt(2) * eta))
    curves = extract_interface(mesh, phi, spacing=eta / 4)
    pts = np.vstack(curves)
    radii = np.hypot(pts[:, 0] - 1.0, pts[:, 1] - 1.0)
    assert np.max(np.abs(radii - 0.6)) < eta / 10


def test_no_interface_signal():
    mesh = build_mesh(1.0, 1.0, 2, [], 4, electrodes=())
    with pytest.raises(ValueError):
        extract_interface(mesh, np.ones(mesh.ndof), spacing=0.1)


def test_component_count():
    mesh = build_mesh(2.0, 1.0, 8, [0.5], 8, electrodes=())
    eta = 0.04
    d1 = np.hypot(mesh.x - 0.5, mesh.y - 0.5) - 0.2
    d2 = np.hypot(mesh.x - 1.5, mesh.y - 0.5) - 0.2
    phi = np.tanh(d1 / (math.sqrt(2) * eta)) + np.tanh(d2 / (math.sqrt(2) * eta)) - 1.0
    assert count_components(mesh, phi, spacing=eta / 2) == 2
    merged = np.tanh((np.hypot(mesh.x - 1.0, mesh.y - 0.5) - 0.3)
                     / (math.sqrt(2) * eta))
    assert count_components(mesh, merged, spacing=eta / 2) == 1


def test_height_function_and_amplitude():
    mesh = build_mesh(2.0, 1.0, 4, [0.3, 0.5], 10, electrodes=())
    eta = 0.03
    hx = 0.4 + 0.05 * np.cos(np.pi * mesh.x)
    phi = np.tanh((mesh.y - hx) / (math.sqrt(2) * eta))
    xs = np.linspace(0.0, 2.0, 33)
    h = height_function(mesh, phi, xs, y_guess=0.4, window=0.15)
    want = 0.4 + 0.05 * np.cos(np.pi * xs)
    assert np.max(np.abs(h - want)) < 2e-3
    assert wave_amplitude(h) == pytest.approx(0.1, abs=2e-3)


def test_phase_centroid():
    mesh = build_mesh(2.0, 1.0, 8, [0.5], 8, electrodes=())
    eta = 0.05
    r = np.hypot(mesh.x - 0.7, mesh.y - 0.45)
    phi = np.tanh((r - 0.25) / (math.sqrt(2) * eta))
    cx, cy = phase_centroid(mesh, phi)
    assert abs(cx - 0.7) < 5e-3
    assert abs(cy - 0.45) < 5e-3


def test_contact_angle_of_known_wedge():
    # phi = tanh(zeta) with a planar interface meeting the wall at 60 deg;
    # non-periodic mesh since the wedge profile has no x period
    mesh = build_mesh(2.0, 1.0, 8, [0.25, 0.5], 10, electrodes=(),
                      periodic_x=False)
    eta = 0.04
    theta = math.radians(60.0)
    # interface through (1, 0) with normal (sin t, -cos t): fluid 1 right side
    zeta = (mesh.x - 1.0) * math.sin(theta) - mesh.y * math.cos(theta)
    phi = np.tanh(zeta / (math.sqrt(2) * eta))
    ang = contact_angle(mesh, phi, spacing=eta / 3)
    assert abs(ang - 60.0) < 3.0


def test_film_amplitude_paper_numbers():
    # gamma = 2.84e-2, d_eps = 7, h0 = 14 um, p = 160 um, V0 = 200 V -> 2.76 um
    A = film_amplitude(2.84e-2, 7.0, 14e-6, 160e-6, 200.0)
    assert A == pytest.approx(2.758e-6, rel=2e-3)
    assert film_amplitude(2.84e-2, 7.0, 14e-6, 160e-6, 0.0) == 0.0
    assert film_amplitude(2.84e-2, 7.0, 14e-6, 160e-6, 400.0) \
        == pytest.approx(4 * A, rel=1e-12)


def test_drop_height_model():
    h0, l0, gamma, d = 0.6e-3, 1.0e-3, 3.857e-2, 0.1e-3
    assert drop_height(h0, l0, gamma, 31.0, d, 0.0) == h0
    h100 = drop_height(h0, l0, gamma, 31.0, d, 100.0)
    h150 = drop_height(h0, l0, gamma, 31.0, d, 150.0)
    assert h150 < h100 < h0
    with pytest.raises(ValueError):
        drop_height(h0, l0, gamma, 31.0, d, 1e4)


def test_drop_extents_3d():
    from dielsem.fourier3d import Grid3D

    mesh = build_mesh(2.0, 1.0, 8, [0.5], 6, electrodes=())
    grid = Grid3D(mesh, 16, 2.0)
    eta = 0.06
    x = mesh.x[:, None] + 0 * grid.z[None, :]
    y = mesh.y[:, None] + 0 * grid.z[None, :]
    z = 0 * x + grid.z[None, :]
    r = np.sqrt((x - 1.0) ** 2 + (y - 0.0) ** 2 + (z - 1.0) ** 2)
    phi = np.tanh((r - 0.45) / (math.sqrt(2) * eta))
    ext = drop_extents_3d(grid, phi, spacing=0.02)
    assert ext["width"] == pytest.approx(0.9, abs=0.05)
    assert ext["height"] == pytest.approx(0.45, abs=0.05)
    assert ext["length"] == pytest.approx(0.9, abs=0.05)
