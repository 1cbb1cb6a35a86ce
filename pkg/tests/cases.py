"""Seeded random test problems shared by the property and acceptance tests."""

import numpy as np

from gptlab import GriddedConductivity, RadialConductivity
from gptlab.basis import DiskGrid
from gptlab.sensitivity import bump


def random_radial(rng, low=0.5, high=3.0, terms=3):
    """Smooth radial profile with values inside ``[low, high]``."""
    a = rng.uniform(-1, 1, terms)
    f = rng.uniform(0.5, 4.0, terms)
    mid, amp = 0.5 * (low + high), 0.5 * (high - low) / (np.abs(a).sum() + 1e-12) * 0.95

    def profile(r, a=a, f=f):
        r = np.asarray(r, dtype=float)
        return mid + amp * sum(ai * np.cos(fi * np.pi * r) for ai, fi in zip(a, f))

    return RadialConductivity(profile, 1.0, label="random radial")


def random_radial_above_one(rng):
    """Radial profile with ``sigma >= 1`` and ``sigma > 1`` somewhere."""
    c = rng.uniform(0.2, 2.0)
    p = rng.uniform(0.5, 3.0)
    return RadialConductivity(lambda r, c=c, p=p: 1.0 + c * (1 - np.asarray(r) ** 2) ** p * np.ones_like(r), 1.0)


def random_gridded(rng, grid, low=0.5, high=3.0, order=3):
    """Smooth non-radial field on ``grid`` with values inside ``[low, high]``."""
    ca = rng.normal(size=(order, order))
    sa = rng.normal(size=(order, order))
    r, t = grid.mesh
    field = np.zeros(grid.shape)
    for j in range(order):
        for k in range(order):
            field += r ** (j + k % 2) * (ca[j, k] * np.cos(k * t) + sa[j, k] * np.sin(k * t))
    field = (field - field.min()) / (np.ptp(field) or 1.0)
    return GriddedConductivity(grid, low + (high - low) * (0.05 + 0.9 * field), "random gridded")


def random_bump(rng):
    center = rng.uniform(0.2, 0.8)
    width = rng.uniform(0.1, 0.3)
    return bump(center, width, rng.uniform(0.5, 2.0)), (center - width, center + width)


def perturbed_radial(sigma, gamma, eps, extra_breakpoints=()):
    return RadialConductivity(
        lambda r: sigma.radial(r) + eps * gamma(r), sigma.support_radius,
        breakpoints=tuple(sigma.breakpoints) + tuple(b for b in extra_breakpoints if 0 < b < sigma.support_radius),
    )


def small_grid(order=6, panels=24):
    return DiskGrid.uniform(1.0, panels, angular_order=order, gauss_order=3)
