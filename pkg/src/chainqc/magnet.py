"""Magnetostatics of a uniformly magnetized rectangular prism.

The prism is magnetized along z; its field outside is that of two uniformly
charged rectangular faces (surface charge +-M on the top/bottom faces).  The
closed forms below are the standard corner sums of logarithms (transverse
components) and arctangents (z component), plus the analytic gradient of
B_z.

Coordinates: x across the width W, y along the length D, z vertical (the
magnetization / applied-field axis).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import MU0
from .errors import ConfigError

__all__ = [
    "PrismMagnet",
    "FieldSample",
    "HomogeneityReport",
    "b_field",
    "bz_at",
    "grad_bz_at",
    "splitting_profile",
    "plane_homogeneity",
]


@dataclass(frozen=True)
class PrismMagnet:
    """Uniformly z-magnetized rectangular prism.

    w, h, d: edge lengths (m) along x, z, y; center: prism center (m);
    magnetization: A/m along +z.
    """

    w: float
    h: float
    d: float
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    magnetization: float = 0.0
    label: str = ""

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0 or self.d <= 0:
            raise ConfigError("prism dimensions must be positive")
        if self.magnetization < 0:
            raise ConfigError("magnetization must be non-negative")

    @property
    def bounds(self):
        cx, cy, cz = self.center
        return (
            (cx - self.w / 2, cx + self.w / 2),
            (cy - self.d / 2, cy + self.d / 2),
            (cz - self.h / 2, cz + self.h / 2),
        )

    def contains(self, r) -> bool:
        """True if r lies inside or on the prism boundary."""
        (x1, x2), (y1, y2), (z1, z2) = self.bounds
        x, y, z = r
        return x1 <= x <= x2 and y1 <= y <= y2 and z1 <= z <= z2

    @property
    def moment(self) -> float:
        """Total magnetic moment (A*m^2)."""
        return self.magnetization * self.w * self.h * self.d


@dataclass(frozen=True)
class FieldSample:
    position: tuple[float, float, float]
    bz: float
    grad_bz: tuple[float, float, float]


@dataclass(frozen=True)
class HomogeneityReport:
    """Transverse B_z variation over a patch, in units of the local
    plane-to-plane field step a*|dBz/dz|."""

    max_variation_t: float      # max |Bz - Bz(center)| over the patch, T
    plane_step_t: float         # a * |dBz/dz| at the patch center, T
    variation_fraction: float   # max_variation_t / plane_step_t
    threshold: float
    passed: bool


def _require_exterior(mag: PrismMagnet, r):
    if mag.contains(r):
        raise ConfigError(f"field requested inside the magnet body at {tuple(r)}")


def _face_sum(x, y, z, xb, yb, zc):
    """Corner sums for one charged face at height zc.

    Returns (hx, hy, hz, gx, gy, gz) where h* are the field components per
    unit (sigma/4pi) and g* the gradient of hz.
    """
    Z = z - zc
    hx = hy = hz = gx = gy = gz = 0.0
    for i, xi in enumerate(xb):
        for j, yj in enumerate(yb):
            s = 1.0 if (i + j) % 2 == 0 else -1.0
            u = x - xi
            v = y - yj
            R = math.sqrt(u * u + v * v + Z * Z)
            hx -= s * math.log(v + R)
            hy -= s * math.log(u + R)
            hz += s * math.atan2(u * v, Z * R)
            uz = u * u + Z * Z
            vz = v * v + Z * Z
            gx += s * Z * v / (R * uz)
            gy += s * Z * u / (R * vz)
            gz -= s * u * v * (R * R + Z * Z) / (R * uz * vz)
    return hx, hy, hz, gx, gy, gz


def _field_and_grad(mag: PrismMagnet, r):
    (x1, x2), (y1, y2), (z1, z2) = mag.bounds
    x, y, z = (float(c) for c in r)
    pref = MU0 * mag.magnetization / (4.0 * math.pi)
    top = _face_sum(x, y, z, (x1, x2), (y1, y2), z2)
    bot = _face_sum(x, y, z, (x1, x2), (y1, y2), z1)
    vals = tuple(pref * (t - b) for t, b in zip(top, bot))
    b = np.array(vals[:3])
    g = np.array(vals[3:])
    return b, g


def b_field(mag: PrismMagnet, r) -> np.ndarray:
    """Full magnetic field vector (T) at an exterior point."""
    _require_exterior(mag, r)
    b, _ = _field_and_grad(mag, r)
    return b


def bz_at(mag: PrismMagnet, r) -> float:
    """z component of the field (T) at an exterior point."""
    _require_exterior(mag, r)
    b, _ = _field_and_grad(mag, r)
    return float(b[2])


def grad_bz_at(mag: PrismMagnet, r) -> np.ndarray:
    """Analytic gradient of B_z (T/m) at an exterior point."""
    _require_exterior(mag, r)
    _, g = _field_and_grad(mag, r)
    return g


def sample(mag: PrismMagnet, r) -> FieldSample:
    _require_exterior(mag, r)
    b, g = _field_and_grad(mag, r)
    return FieldSample(position=tuple(float(c) for c in r), bz=float(b[2]),
                       grad_bz=tuple(float(c) for c in g))


def splitting_profile(field_bz, r0, a: float, n: int, gamma: float):
    """Per-plane angular-frequency offsets and adjacent splittings (rad/s).

    Planes sit at r0 + i*a*zhat for i = 0..n-1; ``field_bz`` is either a
    PrismMagnet or any callable returning B_z at a 3-vector.
    omega_i = gamma * (B_z(r0 + i*a*zhat) - B_z(r0)).  Returns
    (offsets, deltas) with deltas[i] = omega_{i+1} - omega_i.
    """
    if n < 1:
        raise ConfigError("need at least one plane")
    if a <= 0:
        raise ConfigError("plane spacing must be positive")
    if isinstance(field_bz, PrismMagnet):
        mag = field_bz
        fn = lambda r: bz_at(mag, r)
    else:
        fn = field_bz
    r0 = np.asarray(r0, dtype=float)
    bz = np.array([fn(r0 + np.array([0.0, 0.0, i * a])) for i in range(n)])
    offsets = gamma * (bz - bz[0])
    deltas = np.diff(offsets)
    return offsets, deltas


def plane_homogeneity(field_bz, r0, extent_x: float, extent_y: float,
                      a: float, samples: int = 11,
                      threshold: float = 1.0) -> HomogeneityReport:
    """B_z variation over an extent_x x extent_y patch at fixed z.

    The variation is expressed as a fraction of the plane-to-plane field
    step a*|dBz/dz| and compared against ``threshold``: below it, all
    equivalent-frequency nuclei stay within one plane bandwidth.
    """
    if extent_x < 0 or extent_y < 0:
        raise ConfigError("extents must be non-negative")
    if samples < 2:
        raise ConfigError("need at least 2 samples per axis")
    r0 = np.asarray(r0, dtype=float)
    if isinstance(field_bz, PrismMagnet):
        mag = field_bz
        fn = lambda r: bz_at(mag, r)
        dz = grad_bz_at(mag, r0)[2]
    else:
        fn = field_bz
        h = max(a, 1e-12)
        up = fn(r0 + np.array([0.0, 0.0, h]))
        dn = fn(r0 - np.array([0.0, 0.0, h]))
        dz = (up - dn) / (2 * h)
    b0 = fn(r0)
    xs = np.linspace(-extent_x / 2, extent_x / 2, samples)
    ys = np.linspace(-extent_y / 2, extent_y / 2, samples)
    var = 0.0
    for x in xs:
        for y in ys:
            b = fn(r0 + np.array([x, y, 0.0]))
            var = max(var, abs(b - b0))
    step = float(a * abs(dz))
    var = float(var)
    frac = var / step if step > 0 else math.inf if var > 0 else 0.0
    return HomogeneityReport(
        max_variation_t=var,
        plane_step_t=step,
        variation_fraction=frac,
        threshold=threshold,
        passed=bool(frac <= threshold),
    )
