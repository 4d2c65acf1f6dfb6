"""Analytic curves used to describe computational domain boundaries.

Two curve kinds are supported: circles (parametrized by angle) and straight
segments (parametrized affinely).  Circles are parametrized by angle rather
than arclength so that evaluation stays free of inverse trigonometric maps;
arclength factors enter integrals only through the parametric speed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Circle",
    "Segment",
    "Curve",
    "ParamInterval",
    "curve_eval",
    "curve_derivative",
    "outward_normal",
]


@dataclass(frozen=True)
class Circle:
    """Circle of radius ``radius`` around ``center``, parametrized by angle.

    ``ccw`` orientation maps t to center + radius*(cos t, sin t); ``cw``
    runs the angle backwards.
    """

    center: tuple[float, float]
    radius: float
    orientation: str = "ccw"

    def __post_init__(self):
        if self.radius <= 0.0:
            raise ValueError(f"circle radius must be positive, got {self.radius}")
        if self.orientation not in ("ccw", "cw"):
            raise ValueError(f"unknown orientation {self.orientation!r}")


@dataclass(frozen=True)
class Segment:
    """Straight segment from ``a`` to ``b`` over the parameter range [0, 1]."""

    a: tuple[float, float]
    b: tuple[float, float]

    def __post_init__(self):
        if np.allclose(self.a, self.b):
            raise ValueError("segment endpoints must be distinct")


Curve = Circle | Segment


@dataclass(frozen=True)
class ParamInterval:
    """Closed parameter interval [t_begin, t_end] with t_begin < t_end."""

    t_begin: float
    t_end: float

    def __post_init__(self):
        if not self.t_begin < self.t_end:
            raise ValueError(
                f"empty parameter interval [{self.t_begin}, {self.t_end}]"
            )

    @property
    def length(self) -> float:
        return self.t_end - self.t_begin


def _signed_angle(c: Circle, t):
    return t if c.orientation == "ccw" else -t


def curve_eval(c: Curve, t):
    """Evaluate a curve at parameter ``t`` (scalar or array).

    Returns an array of shape (..., 2).  Segments use the normalized
    parameter range [0, 1]; values outside it raise a ValueError for scalar
    input (array input is trusted, the callers clip against their own
    intervals).
    """
    t = np.asarray(t, dtype=float)
    if isinstance(c, Circle):
        a = _signed_angle(c, t)
        return np.stack(
            [c.center[0] + c.radius * np.cos(a), c.center[1] + c.radius * np.sin(a)],
            axis=-1,
        )
    if t.ndim == 0 and not (-1e-12 <= float(t) <= 1.0 + 1e-12):
        raise ValueError(f"segment parameter {float(t)} outside [0, 1]")
    a = np.asarray(c.a)
    b = np.asarray(c.b)
    return a + t[..., None] * (b - a)


def curve_derivative(c: Curve, t):
    """First derivative of the parametrization, shape (..., 2).

    Exact: for circles |gamma'| equals the radius for every t, for segments
    gamma' is the constant chord vector.
    """
    t = np.asarray(t, dtype=float)
    if isinstance(c, Circle):
        a = _signed_angle(c, t)
        sgn = 1.0 if c.orientation == "ccw" else -1.0
        return sgn * np.stack(
            [-c.radius * np.sin(a), c.radius * np.cos(a)], axis=-1
        )
    d = np.asarray(c.b) - np.asarray(c.a)
    return np.broadcast_to(d, t.shape + (2,)).copy()


def outward_normal(c: Curve, t, omega_side: str = "inside"):
    """Unit normal pointing out of the computational domain.

    ``omega_side`` states where the domain lies relative to the (ccw
    oriented) curve: "inside" for an outer/artificial boundary, "outside"
    for an obstacle boundary.  With the domain on the left of the tangent,
    the outward normal is the tangent rotated by -90 degrees.
    """
    if omega_side not in ("inside", "outside"):
        raise ValueError(f"unknown omega_side {omega_side!r}")
    d = curve_derivative(c, t)
    speed = np.linalg.norm(d, axis=-1, keepdims=True)
    tang = d / speed
    n = np.stack([tang[..., 1], -tang[..., 0]], axis=-1)
    return n if omega_side == "inside" else -n
