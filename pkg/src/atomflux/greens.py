"""Closed-form frequency-domain kernels of a damped harmonic atom in a scalar field.

Everything is expressed in natural units (hbar = c = k_B = 1).  The atom's
internal coordinate behaves as a damped driven oscillator with physical
frequency ``omega`` and damping ``gamma = e**2 / (8 pi m)``; the field kernels
are those of a massless scalar in unbounded 3+1 dimensional flat space.

Fourier convention: ``fbar(kappa) = \\int dt f(t) exp(+i kappa t)``, so the
retarded oscillator transform reads ``1 / (omega**2 - kappa**2 - 2i gamma kappa)``
and the retarded field kernel at distance r is ``exp(i kappa r) / (4 pi r)``.

All kernel functions accept a scalar or ndarray ``kappa`` and vectorize over it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FOUR_PI = 4.0 * math.pi

# |beta*kappa| below which coth(beta*kappa/2) switches to its Laurent series.
COTH_SERIES_CUTOFF = 1e-4


class OriginRealPartError(ValueError):
    """Raised when the divergent real part of the r=0 retarded kernel is requested.

    The real part of ``field_retarded_ft`` at coincidence is ultraviolet
    divergent; it is absorbed into the physical frequency ``omega`` by
    renormalization and must never enter a flux integral.  Use
    ``field_retarded_im`` or ``field_retarded_origin`` instead.
    """


def _as_float_array(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


@dataclass(frozen=True)
class AtomParams:
    """Parameters of the harmonic atom (internal degree of freedom).

    ``gamma`` is always derived as ``e**2 / (8 pi m)``; it is not an
    independent knob.  ``bare_omega`` is informational only: the physical
    frequency ``omega`` already includes the renormalization shift.
    """

    e: float
    m: float
    omega: float
    bare_omega: float | None = None
    gamma: float = field(init=False)

    def __post_init__(self):
        if not self.e > 0:
            raise ValueError(f"coupling e must be positive, got {self.e}")
        if not self.m > 0:
            raise ValueError(f"mass m must be positive, got {self.m}")
        if not self.omega > 0:
            raise ValueError(f"physical frequency omega must be positive, got {self.omega}")
        object.__setattr__(self, "gamma", self.e**2 / (8.0 * math.pi * self.m))

    @classmethod
    def from_damping(cls, gamma: float, m: float, omega: float, bare_omega: float | None = None):
        """Build from a target damping constant instead of the coupling.

        The stored ``gamma`` is re-derived from ``e = sqrt(8 pi m gamma)`` and
        may differ from the request by one rounding ulp.
        """
        if not gamma > 0:
            raise ValueError(f"damping gamma must be positive, got {gamma}")
        return cls(e=math.sqrt(8.0 * math.pi * m * gamma), m=m, omega=omega, bare_omega=bare_omega)


@dataclass(frozen=True)
class BathSpec:
    """Initial state of the field: inverse temperature beta, with beta=inf the vacuum."""

    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"inverse temperature beta must be positive, got {self.beta}")

    @classmethod
    def vacuum(cls):
        return cls(beta=math.inf)

    @property
    def is_vacuum(self) -> bool:
        return math.isinf(self.beta)

    def describe(self) -> str:
        return "vacuum" if self.is_vacuum else f"beta={self.beta!r}"


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Uniform symmetric frequency grid on (-cutoff, cutoff), offset half a step.

    The samples are midpoints of ``n_points`` equal cells, so kappa = 0 is never
    hit and ``values[i] == -values[n-1-i]`` holds exactly (the positive half is
    built first and mirrored by negation).
    """

    cutoff: float
    n_points: int
    values: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.cutoff > 0:
            raise ValueError(f"cutoff must be positive, got {self.cutoff}")
        if self.n_points < 16 or self.n_points % 2 != 0:
            raise ValueError(f"n_points must be an even integer >= 16, got {self.n_points}")
        h = 2.0 * self.cutoff / self.n_points
        pos = (np.arange(self.n_points // 2) + 0.5) * h
        vals = np.concatenate([-pos[::-1], pos])
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def spacing(self) -> float:
        return 2.0 * self.cutoff / self.n_points

    def halved(self):
        """Grid with half the resolution at the same cutoff, or None if too coarse."""
        if self.n_points % 4 == 0 and self.n_points // 2 >= 16:
            return FrequencyGrid(self.cutoff, self.n_points // 2)
        return None


@dataclass
class ComplexSpectrum:
    """A complex-valued function of frequency sampled on a FrequencyGrid."""

    grid: FrequencyGrid
    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        if self.samples.shape != (self.grid.n_points,):
            raise ValueError(
                f"samples must have shape ({self.grid.n_points},), got {self.samples.shape}"
            )

    @classmethod
    def from_function(cls, f, grid: FrequencyGrid):
        return cls(grid=grid, samples=np.asarray(f(grid.values)))

    def retarded_symmetry_defect(self) -> float:
        """Max |G(-kappa) - conj(G(kappa))|, zero for the transform of a real kernel."""
        mirrored = self.samples[::-1]
        return float(np.max(np.abs(mirrored - np.conj(self.samples))))

    def require_retarded(self, tol: float = 0.0):
        defect = self.retarded_symmetry_defect()
        if defect > tol:
            raise ValueError(
                f"spectrum is not a retarded transform: conjugate-reflection defect {defect:.3e}"
            )


def thermal_factor(kappa, bath: BathSpec):
    """coth(beta*kappa/2), or sgn(kappa) for the vacuum.  Odd in kappa.

    For finite beta and |beta*kappa| < 1e-4 the Laurent series
    ``2/(beta*kappa) + beta*kappa/6 - (beta*kappa)**3/360`` is used.
    Raises at kappa = 0, where the factor is undefined (vacuum) or divergent
    (finite beta); grids are half-step offset precisely to avoid this point.
    """
    kap, scalar = _as_float_array(kappa)
    if np.any(kap == 0.0):
        if bath.is_vacuum:
            raise ValueError("thermal_factor is undefined at kappa=0 for the vacuum (sgn(0))")
        raise ValueError("thermal_factor diverges at kappa=0 for finite beta")
    if bath.is_vacuum:
        out = np.sign(kap)
    else:
        x = bath.beta * kap
        out = np.empty_like(kap)
        small = np.abs(x) < COTH_SERIES_CUTOFF
        xs = x[small]
        out[small] = 2.0 / xs + xs / 6.0 - xs**3 / 360.0
        xl = x[~small]
        out[~small] = 1.0 / np.tanh(0.5 * xl)
    return out[()] if scalar else out


def atom_retarded_ft(kappa, p: AtomParams):
    """Retarded transform of the oscillator response: 1/(omega^2 - kappa^2 - 2i gamma kappa).

    Satisfies G(-kappa) = conj(G(kappa)); the imaginary part
    ``2 gamma kappa / ((omega^2-kappa^2)^2 + 4 gamma^2 kappa^2)`` carries the
    sign of kappa.  The denominator never vanishes for real kappa, gamma > 0.
    """
    kap, scalar = _as_float_array(kappa)
    den = (p.omega**2 - kap**2) - 2j * p.gamma * kap
    out = 1.0 / den
    return out[()] if scalar else out


def field_retarded_ft(r: float, kappa):
    """Retarded kernel of the free massless field at distance r: exp(i kappa r)/(4 pi r).

    Only defined for r > 0; at r = 0 the real part is UV divergent and is
    absorbed into the frequency renormalization, so this function raises
    ``OriginRealPartError`` there (see ``field_retarded_origin``).
    """
    if r < 0:
        raise ValueError(f"distance r must be nonnegative, got {r}")
    if r == 0:
        raise OriginRealPartError(
            "field_retarded_ft(0, kappa): the raw real part at coincidence is divergent "
            "and renormalized away; use field_retarded_origin(kappa) or field_retarded_im(0, kappa)"
        )
    kap, scalar = _as_float_array(kappa)
    out = np.exp(1j * kap * r) / (FOUR_PI * r)
    return out[()] if scalar else out


def field_retarded_im(r: float, kappa):
    """Imaginary part of the retarded field kernel; finite for every r >= 0.

    sin(kappa r)/(4 pi r) for r > 0, with the coincidence limit kappa/(4 pi).
    """
    if r < 0:
        raise ValueError(f"distance r must be nonnegative, got {r}")
    kap, scalar = _as_float_array(kappa)
    if r == 0:
        out = kap / FOUR_PI
    else:
        out = np.sin(kap * r) / (FOUR_PI * r)
    return out[()] if scalar else out


def field_retarded_origin(kappa):
    """Regularized coincidence limit of the retarded field kernel.

    The imaginary part is the physical kappa/(4 pi); the real part is returned
    as exactly 0.0, which is a *renormalized* marker (the divergence is already
    absorbed into the physical frequency), not a physical zero.
    """
    kap, scalar = _as_float_array(kappa)
    out = 1j * kap / FOUR_PI + 0.0
    return out[()] if scalar else out


def field_hadamard_ft(r: float, kappa, bath: BathSpec):
    """Hadamard (symmetric) kernel of the free field at separation r.

    ``thermal_factor(kappa) * sin(kappa r)/(4 pi r)``, with the r -> 0 limit
    ``thermal_factor(kappa) * kappa/(4 pi)``.  Real and even in kappa.  The
    kappa = 0 value is the finite limit: 1/(2 pi beta) at finite temperature
    (Rayleigh-Jeans plateau, independent of r), 0 in the vacuum.
    """
    if r < 0:
        raise ValueError(f"distance r must be nonnegative, got {r}")
    kap, scalar = _as_float_array(kappa)
    out = np.empty_like(kap)
    zero = kap == 0.0
    nonzero = ~zero
    knz = kap[nonzero]
    if r == 0:
        kern = knz / FOUR_PI
    else:
        kern = np.sin(knz * r) / (FOUR_PI * r)
    out[nonzero] = thermal_factor(knz, bath) * kern
    if np.any(zero):
        out[zero] = 0.0 if bath.is_vacuum else 1.0 / (2.0 * math.pi * bath.beta)
    return out[()] if scalar else out


def atom_hadamard_ft(kappa, p: AtomParams, bath: BathSpec):
    """Hadamard transform of the equilibrated oscillator: thermal_factor * Im G_R.

    Even in kappa and nonnegative.  The kappa = 0 value is the finite limit
    ``(2/beta) * (2 gamma / omega**4)`` (zero in the vacuum).
    """
    kap, scalar = _as_float_array(kappa)
    out = np.empty_like(kap)
    zero = kap == 0.0
    nonzero = ~zero
    knz = kap[nonzero]
    out[nonzero] = thermal_factor(knz, bath) * np.imag(atom_retarded_ft(knz, p))
    if np.any(zero):
        if bath.is_vacuum:
            out[zero] = 0.0
        else:
            out[zero] = (2.0 / bath.beta) * (2.0 * p.gamma / p.omega**4)
    return out[()] if scalar else out


def damped_cos(tau, p: AtomParams):
    """exp(-gamma tau) * cos(Omega tau) continued across the damping regimes.

    Omega = sqrt(omega^2 - gamma^2) when underdamped; the overdamped branch is
    evaluated as a sum of decaying exponentials so it never overflows, and the
    critically damped point uses the analytic limit.
    """
    t, scalar = _as_float_array(tau)
    d = p.omega**2 - p.gamma**2
    if d > 0:
        om = math.sqrt(d)
        out = np.exp(-p.gamma * t) * np.cos(om * t)
    elif d < 0:
        nu = math.sqrt(-d)
        out = 0.5 * (np.exp((nu - p.gamma) * t) + np.exp(-(nu + p.gamma) * t))
    else:
        out = np.exp(-p.gamma * t)
    return out[()] if scalar else out


def damped_sinc(tau, p: AtomParams):
    """exp(-gamma tau) * sin(Omega tau)/Omega, valid in all damping regimes.

    This is the retarded response kernel of the oscillator for tau > 0.
    """
    t, scalar = _as_float_array(tau)
    d = p.omega**2 - p.gamma**2
    if d > 0:
        om = math.sqrt(d)
        out = np.exp(-p.gamma * t) * np.sin(om * t) / om
    elif d < 0:
        nu = math.sqrt(-d)
        out = (np.exp((nu - p.gamma) * t) - np.exp(-(nu + p.gamma) * t)) / (2.0 * nu)
    else:
        out = t * np.exp(-p.gamma * t)
    return out[()] if scalar else out
