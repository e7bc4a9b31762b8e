"""Paraxial model of the radial motion: steering deflectors, reflector lens, aperture.

The round trip is handled in unfolded coordinates: the outbound leg, a thin
lens at the turning point, then the outbound elements again in reverse
order. A lab-frame transverse field pushes the ion the same way on both
passes, so a deflector kicks the unfolded slope with the same sign twice.
The (x, x') and (y, y') planes are independent.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage, optimize

from .constants import ELEMENTARY_CHARGE, IonSpecies
from .errors import ConfigurationError, InvalidEnergyError
from .fields import ENDCAP_Z

APERTURE_RADIUS = 200e-6
STEERING_LENGTH = 7e-3
STEERING_GAP = 12.2e-3
STEERING_Z = 30e-3
TURN_Z = 55e-3
KINETIC_ENERGY_EV = 190.0


@dataclass(frozen=True)
class Ray:
    """Transverse state; fields may be numpy arrays to trace a bundle at once."""

    x: float = 0.0
    y: float = 0.0
    xp: float = 0.0
    yp: float = 0.0
    s: float = 0.0

    def __post_init__(self):
        for name in ("x", "y", "xp", "yp", "s"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"ray {name} must be finite")


@dataclass(frozen=True)
class Drift:
    length: float

    def __post_init__(self):
        if not self.length > 0:
            raise ConfigurationError("drift length must be > 0", "drift.length")

    def matrix(self):
        return np.array([[1.0, self.length], [0.0, 1.0]])

    def apply(self, ray: Ray) -> Ray:
        L = self.length
        return replace(ray, x=ray.x + L * ray.xp, y=ray.y + L * ray.yp, s=ray.s + L)


@dataclass(frozen=True)
class ThinLens:
    """Focusing in both planes; ``focal_length`` may be ``inf`` (no lens)."""

    focal_length: float

    def __post_init__(self):
        if self.focal_length == 0 or math.isnan(self.focal_length):
            raise ConfigurationError("focal length must be non-zero", "lens.focal_length")

    def matrix(self):
        return np.array([[1.0, 0.0], [-1.0 / self.focal_length, 1.0]])

    def apply(self, ray: Ray) -> Ray:
        p = 1.0 / self.focal_length
        return replace(ray, xp=ray.xp - p * ray.x, yp=ray.yp - p * ray.y)


def deflection(u_plus, u_minus, length, separation, kinetic_energy_ev):
    """Small-angle slope change from a parallel-plate pair.

    ``(u_plus - u_minus) * length / (2 * separation * K)`` with voltages in
    V and the axial kinetic energy ``K`` in eV.
    """
    if not kinetic_energy_ev > 0:
        raise InvalidEnergyError(f"kinetic energy must be > 0 eV, got {kinetic_energy_ev!r}")
    return (np.asarray(u_plus) - np.asarray(u_minus)) * length / (2.0 * separation * kinetic_energy_ev)


@dataclass(frozen=True)
class DeflectorPair:
    """Two crossed plate pairs: ``ux = U(+x) - U(-x)``, ``uy = U(+y) - U(-y)``.

    Only voltage differences deflect; the common level (U_R in the steering
    scans) drops out.
    """

    length: float = STEERING_LENGTH
    separation: float = STEERING_GAP
    ux: float = 0.0
    uy: float = 0.0
    kinetic_energy_ev: float = KINETIC_ENERGY_EV

    def __post_init__(self):
        if not (self.length > 0 and self.separation > 0):
            raise ConfigurationError("deflector length and separation must be > 0", "deflector")
        if not self.kinetic_energy_ev > 0:
            raise InvalidEnergyError(f"kinetic energy must be > 0 eV, got {self.kinetic_energy_ev!r}")

    def kicks(self):
        dx = deflection(self.ux, 0.0, self.length, self.separation, self.kinetic_energy_ev)
        dy = deflection(self.uy, 0.0, self.length, self.separation, self.kinetic_energy_ev)
        return dx, dy

    def apply(self, ray: Ray) -> Ray:
        dx, dy = self.kicks()
        return replace(ray, xp=ray.xp + dx, yp=ray.yp + dy)


def trace(ray: Ray, elements) -> Ray:
    """Apply ``elements`` in order."""
    for el in elements:
        ray = el.apply(ray)
    return ray


def transfer_matrix(elements):
    """2x2 matrix of the linear (drift/lens) part; deflectors contribute identity."""
    m = np.eye(2)
    for el in elements:
        if hasattr(el, "matrix"):
            m = el.matrix() @ m
    return m


@dataclass(frozen=True)
class Aperture:
    radius: float = APERTURE_RADIUS

    def __post_init__(self):
        if not self.radius > 0:
            raise ConfigurationError("aperture radius must be > 0", "aperture.radius")

    def passes(self, ray: Ray):
        return (np.abs(ray.x) <= self.radius) & (np.abs(ray.y) <= self.radius)


@dataclass(frozen=True)
class OpticsConfig:
    """Geometry of the round trip, measured from the endcap aperture plane.

    The reflector is a thin lens at the turning point with power
    ``lens_constant * reflector_voltage * lens_scale``; ``lens_scale`` is
    the knob for detuning. Launch rays are the corners of a box of
    half-widths ``position_spread`` and ``angle_spread`` around the launch
    offset ``(x0, xp0, y0, yp0)``.
    """

    steering_distance: float = STEERING_Z - ENDCAP_Z
    turn_distance: float = TURN_Z - ENDCAP_Z
    reflector_voltage: float = 7.5
    lens_constant: float | None = None
    lens_scale: float = 1.0
    steering_length: float = STEERING_LENGTH
    steering_gap: float = STEERING_GAP
    kinetic_energy_ev: float = KINETIC_ENERGY_EV
    x0: float = 0.0
    xp0: float = 0.0
    y0: float = 0.0
    yp0: float = 0.0
    position_spread: float = 10e-6
    angle_spread: float = 3e-3

    def __post_init__(self):
        if not 0 < self.steering_distance < self.turn_distance:
            raise ConfigurationError("need 0 < steering_distance < turn_distance", "optics.steering_distance")
        if self.position_spread < 0 or self.angle_spread < 0:
            raise ConfigurationError("spreads must be >= 0", "optics")
        if self.lens_constant is None:
            object.__setattr__(self, "lens_constant", calibrate_lens_constant(self))

    @property
    def lens_power(self):
        return self.lens_constant * self.reflector_voltage * self.lens_scale

    def elements(self, ux=0.0, uy=0.0):
        power = self.lens_power
        steer = DeflectorPair(self.steering_length, self.steering_gap, ux, uy, self.kinetic_energy_ev)
        d1 = Drift(self.steering_distance)
        d2 = Drift(self.turn_distance - self.steering_distance)
        lens = ThinLens(math.inf if power == 0 else 1.0 / power)
        return [d1, steer, d2, lens, d2, steer, d1]

    def launch_rays(self) -> Ray:
        """The 16 corner rays of the launch box, as one array-valued Ray."""
        sx = np.array([-1.0, 1.0]) * self.position_spread
        sa = np.array([-1.0, 1.0]) * self.angle_spread
        gx, ga, gy, gb = np.meshgrid(sx, sa, sx, sa, indexing="ij")
        return Ray(self.x0 + gx.ravel(), self.y0 + gy.ravel(), self.xp0 + ga.ravel(), self.yp0 + gb.ravel())

    def detuned(self, factor):
        return replace(self, lens_scale=self.lens_scale * factor)


def calibrate_lens_constant(config: OpticsConfig) -> float:
    """Lens constant (1/(m V)) making the round trip retroreflecting at the configured U_R.

    ``lens_scale`` is ignored so that a detuned config keeps its detuning.

    Root of the round-trip matrix element M12 (launch angle to return
    position), found numerically.
    """

    def m12(k):
        return transfer_matrix(replace(config, lens_constant=k, lens_scale=1.0).elements())[0, 1]

    guess = 2.0 / (config.turn_distance * config.reflector_voltage)
    return float(optimize.brentq(m12, 0.1 * guess, 10.0 * guess, xtol=1e-14, rtol=1e-14))


def kinetic_energy_at(trajectory, z, ion: IonSpecies) -> float:
    """Axial kinetic energy (eV) on the outbound leg of a 1D trajectory at position ``z``."""
    zs, vs = np.asarray(trajectory.z), np.asarray(trajectory.v)
    out = np.flatnonzero(vs > 0)
    if out.size == 0:
        raise InvalidEnergyError("trajectory has no outbound motion")
    end = out[0]
    while end + 1 < len(vs) and vs[end + 1] > 0:
        end += 1
    seg_z, seg_v = zs[out[0] : end + 1], vs[out[0] : end + 1]
    if not seg_z[0] <= z <= seg_z[-1]:
        raise InvalidEnergyError(f"z={z!r} is outside the outbound leg")
    v = float(np.interp(z, seg_z, seg_v))
    return 0.5 * ion.mass * v * v / ELEMENTARY_CHARGE


@dataclass
class AcceptanceMap:
    """Boolean success grid ``success[iy, ix]`` over steering voltages."""

    ux: np.ndarray
    uy: np.ndarray
    success: np.ndarray

    @property
    def cell_area(self):
        dx = float(np.diff(self.ux).mean()) if len(self.ux) > 1 else 1.0
        dy = float(np.diff(self.uy).mean()) if len(self.uy) > 1 else 1.0
        return abs(dx * dy)

    @property
    def area(self):
        """Success area in V^2 (cell count times cell area)."""
        return int(self.success.sum()) * self.cell_area

    def n_regions(self):
        _, n = ndimage.label(self.success)
        return int(n)

    def is_contiguous(self):
        return self.n_regions() == 1

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["ux_v", "uy_v", "success"])
            for iy, uy in enumerate(self.uy):
                for ix, ux in enumerate(self.ux):
                    writer.writerow([repr(float(ux)), repr(float(uy)), int(self.success[iy, ix])])


def acceptance_map(ux_values, uy_values, config: OpticsConfig = None, aperture: Aperture = Aperture()) -> AcceptanceMap:
    """Success where every launch ray comes back through the aperture."""
    config = config or OpticsConfig()
    ux = np.asarray(ux_values, dtype=float).ravel()
    uy = np.asarray(uy_values, dtype=float).ravel()
    if ux.size == 0 or uy.size == 0:
        raise ConfigurationError("acceptance grid must be non-empty", "grid")
    bundle = config.launch_rays()
    # broadcast: (ny, nx, rays)
    UX = ux[None, :, None]
    UY = uy[:, None, None]
    rays = Ray(
        np.broadcast_to(bundle.x, (uy.size, ux.size, bundle.x.size)),
        np.broadcast_to(bundle.y, (uy.size, ux.size, bundle.y.size)),
        np.broadcast_to(bundle.xp, (uy.size, ux.size, bundle.xp.size)),
        np.broadcast_to(bundle.yp, (uy.size, ux.size, bundle.yp.size)),
    )
    out = trace(rays, config.elements(UX, UY))
    return AcceptanceMap(ux, uy, np.all(aperture.passes(out), axis=-1))
