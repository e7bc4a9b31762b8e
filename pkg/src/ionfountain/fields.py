"""Axial electrostatic potential as a superposition of electrode unit potentials.

Every electrode contributes ``U_k * phi_k(z)`` where ``phi_k`` is its
dimensionless unit potential (volts on axis per volt applied). The analytic
families are built from logistic edges ``sigma(x) = (1 + tanh x) / 2`` so
that neighbouring electrodes sharing an edge form an exact partition of
unity, plus a Gaussian for the trap segments and a cubic-spline import path
for externally solved potentials.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np
from scipy.interpolate import CubicSpline

from .constants import CA40, IonSpecies, OMEGA_Z
from .errors import ConfigurationError, DegenerateCalibrationError, InvalidModelError

KINDS = ("gaussian-segment", "aperture-plate", "flat-tube", "reflector-ramp", "tabulated")
_EDGE_KINDS = ("aperture-plate", "flat-tube", "reflector-ramp")


def _sigma(x):
    return 0.5 * (1.0 + np.tanh(x))


def _dsigma(x):
    # 1/(2 cosh^2 x), written to avoid cosh overflow
    t = np.tanh(x)
    return 0.5 * (1.0 - t * t)


def _d2sigma(x):
    t = np.tanh(x)
    return -(1.0 - t * t) * t


@dataclass(frozen=True)
class ElectrodeModel:
    """Unit-potential model of a single electrode.

    Parameters
    ----------
    kind : str
        One of ``KINDS``.
    center_z : float
        Axial reference position in m. Gaussian centre, plate position,
        tube midpoint or ramp midpoint depending on ``kind``.
    amplitude : float
        Peak unit potential (dimensionless).
    width : float
        Gaussian sigma, or width of the rising logistic edge (m).
    length : float
        Flat-tube length between its two edge midpoints (m).
    end_z, end_width : float or None
        Optional closing edge of plate and ramp kinds. ``None`` leaves the
        plateau open towards infinity.
    side : int
        ``+1`` if the plateau lies at larger z than the plate, ``-1`` for a
        plate facing the other way (aperture-plate only).
    samples : tuple of (z, phi) arrays or None
        Sample grid for ``kind="tabulated"``.
    """

    kind: str
    center_z: float = 0.0
    amplitude: float = 1.0
    width: float = 1e-3
    length: float = 0.0
    end_z: float | None = None
    end_width: float | None = None
    side: int = 1
    samples: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidModelError(f"unknown electrode kind {self.kind!r}")
        if self.kind == "tabulated":
            self._init_table()
            return
        if not self.width > 0:
            raise InvalidModelError(f"{self.kind} width must be > 0, got {self.width!r}")
        if self.end_width is not None and not self.end_width > 0:
            raise InvalidModelError("end_width must be > 0")
        if abs(self.amplitude) > 1.0:
            raise InvalidModelError("unit-potential amplitude must satisfy |A| <= 1")
        if self.kind == "flat-tube" and not self.length > 0:
            raise InvalidModelError("flat-tube length must be > 0")
        if self.side not in (1, -1):
            raise InvalidModelError("side must be +1 or -1")
        if self.end_z is not None and (self.end_z - self.center_z) * self.side <= 0:
            raise InvalidModelError("end_z must lie on the plateau side of center_z")

    def _init_table(self):
        if self.samples is None:
            raise InvalidModelError("tabulated model needs samples")
        z, phi = (np.asarray(a, dtype=float) for a in self.samples)
        if z.ndim != 1 or z.shape != phi.shape:
            raise InvalidModelError("tabulated samples must be two equal-length 1-D arrays")
        if z.size < 4:
            raise InvalidModelError(f"tabulated model needs >= 4 samples, got {z.size}")
        if np.any(np.diff(z) <= 0):
            raise InvalidModelError("tabulated z samples must be strictly increasing")
        if np.any(np.abs(phi) > 1.0) or not np.all(np.isfinite(phi)):
            raise InvalidModelError("tabulated unit potential must satisfy |phi| <= 1")
        spline = CubicSpline(z, phi)
        object.__setattr__(self, "samples", (z, phi))
        object.__setattr__(self, "_spline", spline)
        object.__setattr__(self, "_dspline", spline.derivative(1))
        object.__setattr__(self, "_d2spline", spline.derivative(2))

    # edges of the logistic kinds: list of (position, width, sign)
    def _edges(self):
        if self.kind == "flat-tube":
            half = 0.5 * self.length
            w_out = self.end_width or self.width
            return [(self.center_z - half, self.width, 1.0), (self.center_z + half, w_out, -1.0)]
        edges = [(self.center_z, self.width, 1.0)]
        if self.end_z is not None:
            edges.append((self.end_z, self.end_width or self.width, -1.0))
        return edges

    @property
    def start_z(self):
        """Position of the rising edge (tube entrance)."""
        return self._edges()[0][0]

    @property
    def stop_z(self):
        """Position of the closing edge, or ``inf`` if the plateau is open."""
        edges = self._edges()
        return edges[1][0] if len(edges) > 1 else math.copysign(math.inf, self.side)

    def _derivative(self, z, order):
        z = np.asarray(z, dtype=float)
        if self.kind == "tabulated":
            zs = self.samples[0]
            fn = (self._spline, self._dspline, self._d2spline)[order]
            inside = (z >= zs[0]) & (z <= zs[-1])
            return np.where(inside, fn(np.clip(z, zs[0], zs[-1])), 0.0)
        if self.kind == "gaussian-segment":
            u = (z - self.center_z) / self.width
            g = self.amplitude * np.exp(-0.5 * u * u)
            if order == 0:
                return g
            if order == 1:
                return -g * u / self.width
            return g * (u * u - 1.0) / self.width**2
        s = float(self.side)
        edges = self._edges()
        if order == 0:
            # a closing edge subtracts its own step; the open plate starts from 0
            out = 0.0
            for z0, w, sign in edges:
                out = out + sign * _sigma(s * (z - z0) / w)
            return self.amplitude * out
        fn = _dsigma if order == 1 else _d2sigma
        out = 0.0
        for z0, w, sign in edges:
            out = out + sign * fn(s * (z - z0) / w) * (s / w) ** order
        return self.amplitude * out

    def potential(self, z):
        return self._derivative(z, 0)

    def gradient(self, z):
        """d(phi)/dz in 1/m."""
        return self._derivative(z, 1)

    def curvature(self, z):
        """d2(phi)/dz2 in 1/m^2."""
        return self._derivative(z, 2)

    def scalar_gradient(self) -> Callable[[float], float]:
        """Return a fast pure-Python ``z -> d(phi)/dz`` for the integrator loop."""
        A = self.amplitude
        if self.kind == "gaussian-segment":
            c, w = self.center_z, self.width
            inv_w2 = 1.0 / (w * w)

            def grad(z):
                d = z - c
                return -A * d * inv_w2 * math.exp(-0.5 * d * d * inv_w2)

            return grad
        if self.kind == "tabulated":
            spline = self._dspline
            lo, hi = self.samples[0][0], self.samples[0][-1]

            def grad(z):
                return float(spline(z)) if lo <= z <= hi else 0.0

            return grad
        s = float(self.side)
        terms = tuple((z0, s / w, sign * A * 0.5 * s / w) for z0, w, sign in self._edges())
        tanh = math.tanh

        def grad(z):
            out = 0.0
            for z0, k, coeff in terms:
                t = tanh(k * (z - z0))
                out += coeff * (1.0 - t * t)
            return out

        return grad


def unit_potential(model: ElectrodeModel, z):
    """Dimensionless potential of ``model`` at ``z`` (scalar or array)."""
    out = model.potential(z)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class ElectrodeStack:
    """Named electrodes along the axis plus the escape boundaries.

    ``reflector`` names the electrode whose rising edge terminates the
    extraction region and ``reflector_partner`` the tube whose exit edge is
    tied to it; :meth:`with_reflector` moves both together.
    """

    electrodes: Mapping[str, ElectrodeModel]
    trap_center_z: float = 0.0
    max_z: float = 80e-3
    min_z: float = -2e-3
    endcaps: tuple = ("E2", "E1")
    reflector: str | None = "R"
    reflector_partner: str | None = "F"

    def __post_init__(self):
        object.__setattr__(self, "electrodes", dict(self.electrodes))
        if not self.min_z < self.trap_center_z < self.max_z:
            raise ConfigurationError("trap center must lie between min_z and max_z")
        caps = [self.electrodes[n].center_z for n in self.endcaps if n in self.electrodes]
        if len(caps) == 2 and not min(caps) < self.trap_center_z < max(caps):
            raise ConfigurationError("trap center must lie strictly between the endcaps")

    @property
    def names(self):
        return tuple(self.electrodes)

    def __getitem__(self, name):
        try:
            return self.electrodes[name]
        except KeyError:
            raise ConfigurationError(f"unknown electrode {name!r}") from None

    def __contains__(self, name):
        return name in self.electrodes

    def replace_electrode(self, name, **changes):
        models = dict(self.electrodes)
        models[name] = replace(self[name], **changes)
        return replace(self, electrodes=models)

    def reflector_params(self):
        r = self[self.reflector]
        return r.center_z, r.width

    def with_reflector(self, center_z, width):
        """Move the reflector edge, keeping the partner tube's exit attached to it."""
        if self.reflector is None:
            raise ConfigurationError("stack has no reflector electrode")
        if not width > 0:
            raise InvalidModelError("reflector width must be > 0")
        stack = self.replace_electrode(self.reflector, center_z=center_z, width=width)
        partner = self.reflector_partner
        if partner is not None and partner in self.electrodes:
            tube = self[partner]
            start = tube.start_z
            if center_z <= start:
                raise InvalidModelError("reflector edge must lie downstream of the focusing tube entrance")
            stack = stack.replace_electrode(
                partner, center_z=0.5 * (start + center_z), length=center_z - start, end_width=width
            )
        return stack


def _check_voltages(stack, voltages):
    for name in voltages:
        if name not in stack.electrodes:
            raise ConfigurationError(f"unknown electrode {name!r}")


def total_potential(stack: ElectrodeStack, voltages: Mapping[str, float], z):
    """Superposed potential in volts, ``sum_k U_k phi_k(z)``."""
    _check_voltages(stack, voltages)
    out = np.zeros(np.shape(z))
    for name, u in voltages.items():
        if u:
            out = out + u * stack.electrodes[name].potential(z)
    return float(out) if np.ndim(out) == 0 else out


def axial_field(stack: ElectrodeStack, voltages: Mapping[str, float], z):
    """Axial field ``E_z = -d(Phi)/dz`` in V/m."""
    _check_voltages(stack, voltages)
    out = np.zeros(np.shape(z))
    for name, u in voltages.items():
        if u:
            out = out - u * stack.electrodes[name].gradient(z)
    return float(out) if np.ndim(out) == 0 else out


def axial_curvature(stack: ElectrodeStack, voltages: Mapping[str, float], z):
    """d2(Phi)/dz2 in V/m^2."""
    _check_voltages(stack, voltages)
    out = np.zeros(np.shape(z))
    for name, u in voltages.items():
        if u:
            out = out + u * stack.electrodes[name].curvature(z)
    return float(out) if np.ndim(out) == 0 else out


def calibrate_segment_curvature(ion: IonSpecies, omega_z: float, u_seg: float) -> float:
    """Curvature ``kappa = m omega_z^2 / (q |U|)`` (1/m^2) of a segment's unit potential."""
    if u_seg == 0:
        raise DegenerateCalibrationError("segment voltage must be non-zero")
    if not omega_z > 0:
        raise DegenerateCalibrationError("target trap frequency must be > 0")
    return ion.mass * omega_z**2 / (abs(ion.charge) * abs(u_seg))


def tabulate(model: ElectrodeModel, z_grid) -> ElectrodeModel:
    """Sample an analytic model onto ``z_grid`` and return a tabulated model."""
    z_grid = np.asarray(z_grid, dtype=float)
    return ElectrodeModel(kind="tabulated", center_z=float(z_grid.mean()),
                          samples=(z_grid, model.potential(z_grid)))


def load_tabulated_csv(path) -> ElectrodeModel:
    """Read a two-column ``z,phi`` CSV (z in metres) into a tabulated model."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        if header != ["z", "phi"]:
            raise InvalidModelError(f"{path}: expected header 'z,phi', got {','.join(header)!r}")
        rows = [(float(a), float(b)) for a, b in reader if a.strip()]
    if len(rows) < 4:
        raise InvalidModelError(f"{path}: tabulated model needs >= 4 samples, got {len(rows)}")
    z, phi = np.array(rows).T
    return ElectrodeModel(kind="tabulated", center_z=float(z.mean()), samples=(z, phi))


def write_tabulated_csv(model: ElectrodeModel, path):
    z, phi = model.samples
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["z", "phi"])
        writer.writerows((repr(float(a)), repr(float(b))) for a, b in zip(z, phi))


# Default geometry -----------------------------------------------------------

ENDCAP_Z = 1.45e-3
SEGMENT_PITCH = 0.28e-3
SEGMENT_AMPLITUDE = 0.2
TRAP_SEGMENT = "seg6"
TRAP_SEGMENT_VOLTAGE = -0.6
PLATE_EDGE_WIDTH = 0.35e-3
FOCUS_ENTRANCE_Z = 5.5e-3
FOCUS_EDGE_WIDTH = 1.0e-3
REFLECTOR_CENTER_Z = 56e-3
REFLECTOR_WIDTH = 3e-3
REFLECTOR_END_Z = 150e-3


def default_stack(
    ion: IonSpecies = CA40,
    omega_z: float = OMEGA_Z,
    reflector_center_z: float = REFLECTOR_CENTER_Z,
    reflector_width: float = REFLECTOR_WIDTH,
    plate_width: float = PLATE_EDGE_WIDTH,
) -> ElectrodeStack:
    """Analytic stand-in for the trap / extraction / steering stack.

    Segments 1-11 are Gaussians on a 280 um pitch. ``seg6`` has its curvature
    calibrated so that -0.6 V gives ``omega_z``. E1 (z = +1.45 mm) and F
    together form the extraction region, which is closed by the merged
    steering electrodes ``R``. The reflector edge position and width are
    uncalibrated template values; see
    :func:`ionfountain.experiments.calibrate_reflector`.
    """
    kappa = calibrate_segment_curvature(ion, omega_z, TRAP_SEGMENT_VOLTAGE)
    seg_width = math.sqrt(SEGMENT_AMPLITUDE / kappa)
    models = {}
    for n in range(1, 12):
        models[f"seg{n}"] = ElectrodeModel(
            "gaussian-segment", center_z=(n - 6) * SEGMENT_PITCH,
            amplitude=SEGMENT_AMPLITUDE, width=seg_width,
        )
    models["E1"] = ElectrodeModel(
        "aperture-plate", center_z=ENDCAP_Z, width=plate_width,
        end_z=FOCUS_ENTRANCE_Z, end_width=FOCUS_EDGE_WIDTH,
    )
    models["E2"] = ElectrodeModel(
        "aperture-plate", center_z=-ENDCAP_Z, width=plate_width, side=-1,
        end_z=-FOCUS_ENTRANCE_Z, end_width=FOCUS_EDGE_WIDTH,
    )
    models["F"] = ElectrodeModel(
        "flat-tube", center_z=0.5 * (FOCUS_ENTRANCE_Z + reflector_center_z),
        length=reflector_center_z - FOCUS_ENTRANCE_Z,
        width=FOCUS_EDGE_WIDTH, end_width=reflector_width,
    )
    models["R"] = ElectrodeModel(
        "reflector-ramp", center_z=reflector_center_z, width=reflector_width,
        end_z=REFLECTOR_END_Z, end_width=reflector_width,
    )
    return ElectrodeStack(models)
