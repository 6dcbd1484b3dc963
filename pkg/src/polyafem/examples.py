"""Model problems with closed-form solutions, gradients and sources."""

from dataclasses import dataclass
from typing import Callable

import numpy as np

BETA = 10.0
FRONT = 60.0
FRONT_CENTER = (1.25, -0.25)


@dataclass(frozen=True)
class ExampleDefinition:
    """``-lap u = f`` on ``domain`` with ``u = g`` on the boundary."""

    number: int
    name: str
    domain: str
    u: Callable
    gradient: Callable
    f: Callable

    def g(self, x, y):
        return self.u(x, y)


# -- Example 1: Gaussian peak ----------------------------------------------

def _u1(x, y):
    r2 = (x - 0.5) ** 2 + (y - 0.5) ** 2
    return 10.0 * np.exp(-BETA * r2)


def _grad1(x, y):
    u = _u1(x, y)
    return -2.0 * BETA * u * (x - 0.5), -2.0 * BETA * u * (y - 0.5)


def _f1(x, y):
    r2 = (x - 0.5) ** 2 + (y - 0.5) ** 2
    return _u1(x, y) * (4.0 * BETA - 4.0 * BETA**2 * r2)


# -- Example 2: bubble times a steep circular front --------------------------

def _front(x, y):
    dx, dy = x - FRONT_CENTER[0], y - FRONT_CENTER[1]
    r = np.hypot(dx, dy)
    s = FRONT * (r - 1.0)
    q = np.arctan(s)
    q1 = FRONT / (1.0 + s * s)
    q2 = -2.0 * FRONT * FRONT * s / (1.0 + s * s) ** 2
    return r, dx / r, dy / r, q, q1, q2


def _u2(x, y):
    p = x * (1 - x) * y * (1 - y)
    return p * _front(x, y)[3]


def _grad2(x, y):
    p = x * (1 - x) * y * (1 - y)
    px = (1 - 2 * x) * y * (1 - y)
    py = x * (1 - x) * (1 - 2 * y)
    _, rx, ry, q, q1, _ = _front(x, y)
    return px * q + p * q1 * rx, py * q + p * q1 * ry


def _f2(x, y):
    p = x * (1 - x) * y * (1 - y)
    px = (1 - 2 * x) * y * (1 - y)
    py = x * (1 - x) * (1 - 2 * y)
    lap_p = -2.0 * y * (1 - y) - 2.0 * x * (1 - x)
    r, rx, ry, q, q1, q2 = _front(x, y)
    # lap q = q'' + q'/r for a radial function
    lap = q * lap_p + 2.0 * q1 * (px * rx + py * ry) + p * (q2 + q1 / r)
    return -lap


# -- Example 3: corner singularity on the L-shape -----------------------------

def _polar(x, y):
    r = np.hypot(x, y)
    th = np.arctan2(y, x)
    th = np.where(th < 0.0, th + 2.0 * np.pi, th)
    return r, th


def _u3(x, y):
    r, th = _polar(x, y)
    return r ** (2.0 / 3.0) * np.sin(2.0 * th / 3.0)


def _grad3(x, y):
    r, th = _polar(x, y)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = (2.0 / 3.0) * r ** (-1.0 / 3.0)
    return -a * np.sin(th / 3.0), a * np.cos(th / 3.0)


def _f3(x, y):
    return np.zeros(np.broadcast(x, y).shape)


_CATALOG = (
    ExampleDefinition(1, "gaussian peak", "unit_square", _u1, _grad1, _f1),
    ExampleDefinition(2, "circular front", "unit_square", _u2, _grad2, _f2),
    ExampleDefinition(3, "L-shape corner", "l_shape", _u3, _grad3, _f3),
)


def example_catalog():
    return _CATALOG


def get_example(number) -> ExampleDefinition:
    for ex in _CATALOG:
        if ex.number == int(number):
            return ex
    raise ValueError(f"unknown example {number!r}; choose 1, 2 or 3")
