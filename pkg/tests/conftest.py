import numpy as np
import pytest

from curveflow.validation import (  # shared deterministic generators
    circle,
    convex_arc,
    convex_closed,
    curve_for,
    rotation_representative,
    smooth_field,
    wavy_curve,
)

__all__ = [
    "circle", "convex_arc", "convex_closed", "curve_for",
    "rotation_representative", "smooth_field", "wavy_curve",
]


@pytest.fixture
def unit_circle():
    return circle(128)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def unit_circle_n(n):
    return circle(n)


def analytic_circle_frame(n):
    th = (2 * np.pi / n) * np.arange(n)
    v = np.stack([-np.sin(th), np.cos(th)], 1)
    nrm = np.stack([-np.cos(th), -np.sin(th)], 1)
    return th, v, nrm
