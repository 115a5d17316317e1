"""Photoelectric reference channel: LED spot occlusion by the rotating blade.

An LED illuminates a small circular spot a distance R0 from the rotation
axis; the sector-shaped blade sweeps through the spot once per revolution
and a photodiode behind it sees a trapezoid-like waveform.  This module
computes that waveform from the geometry (adaptive quadrature of the
emission-weighted unblocked spot area, with a Monte Carlo cross-check),
fits the transition with a cosine model, detects the period, and builds
the clean harmonic references used for demodulation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import curve_fit

from .errors import ConfigError, PreconditionError
from .signals import HarmonicSeries, SampledSignal, TimeGrid

# LED emission fit I(beta) = A*cos(k*beta) + c, k per radian
DEFAULT_EMISSION_A = 4.113
DEFAULT_EMISSION_K = 0.0789 * 180.0 / np.pi
DEFAULT_EMISSION_C = 4.227

_QUAD_EPS = 1e-10


@dataclass(frozen=True)
class EmissionFit:
    """Emitted intensity vs emission angle: I(beta) = A*cos(k*beta) + c."""

    A: float = DEFAULT_EMISSION_A
    k: float = DEFAULT_EMISSION_K
    c: float = DEFAULT_EMISSION_C

    def __post_init__(self):
        if not all(np.isfinite([self.A, self.k, self.c])):
            raise PreconditionError("emission fit parameters must be finite")


@dataclass(frozen=True)
class SpotGeometry:
    """LED/blade/photodiode geometry.

    r0: spot radius (mm); d: LED-to-blade distance (mm); R0: rotation center
    to spot center distance (mm); theta_gnd: blade sector angle (radians).
    """

    r0: float = 0.5
    d: float = 2.0
    R0: float = 6.0
    theta_gnd: float = np.deg2rad(30.0)
    emission: EmissionFit = field(default_factory=EmissionFit)

    def __post_init__(self):
        if min(self.r0, self.d, self.R0) <= 0.0:
            raise PreconditionError("all lengths must be positive")
        if self.r0 >= self.R0:
            raise PreconditionError(
                f"spot radius {self.r0} must be smaller than orbit radius {self.R0}"
            )
        if not (0.0 < self.theta_gnd < np.pi):
            raise PreconditionError(
                f"blade sector angle must be in (0, pi), got {self.theta_gnd}"
            )

    @property
    def theta_max(self) -> float:
        """Half-angle subtended by the spot, seen from the rotation center."""
        return float(np.arcsin(self.r0 / self.R0))

    def to_dict(self) -> dict:
        return {
            "r0": self.r0,
            "d": self.d,
            "R0": self.R0,
            "theta_gnd_deg": float(np.rad2deg(self.theta_gnd)),
            "emission": {"A": self.emission.A, "k": self.emission.k, "c": self.emission.c},
        }


@dataclass(frozen=True)
class TrapezoidFit:
    """Cosine model of the reference transition: B*cos(u*theta + phi) + c2."""

    B: float
    u: float
    phi: float
    c2: float

    def __post_init__(self):
        if not all(np.isfinite([self.B, self.u, self.phi, self.c2])):
            raise PreconditionError("trapezoid fit parameters must be finite")

    def __call__(self, theta):
        return self.B * np.cos(self.u * np.asarray(theta, dtype=float) + self.phi) + self.c2

    def canonical(self) -> "TrapezoidFit":
        """Equivalent parameters with B >= 0, u >= 0 and phi in [0, 2*pi).

        cos is even, so (B, u, phi) ~ (B, -u, -phi) ~ (-B, u, phi + pi);
        canonicalizing makes fits comparable across those branches.
        """
        B, u, phi = self.B, self.u, self.phi
        if B < 0:
            B, phi = -B, phi + np.pi
        if u < 0:
            u, phi = -u, -phi
        return TrapezoidFit(B, u, float(phi % (2.0 * np.pi)), self.c2)

    def to_dict(self) -> dict:
        return {"B": self.B, "u": self.u, "phi": self.phi, "c2": self.c2}


def emission_intensity(em: EmissionFit, beta) -> np.ndarray | float:
    """LED intensity at emission angle beta (radians).

    Warns when |k*beta| exceeds pi: that is outside the fitted lobe and the
    cosine model is extrapolating.
    """
    beta = np.asarray(beta, dtype=float)
    if np.any(np.abs(em.k * beta) > np.pi):
        warnings.warn(
            "emission angle outside the fitted lobe (|k*beta| > pi); "
            "cosine fit is extrapolating",
            stacklevel=2,
        )
    out = em.A * np.cos(em.k * beta) + em.c
    return float(out) if out.ndim == 0 else out


def _wrap_angle(theta):
    """Map angle(s) to [-pi, pi)."""
    return (np.asarray(theta, dtype=float) + np.pi) % (2.0 * np.pi) - np.pi


def _blocked_arc(geom: SpotGeometry, theta: float, rho: float) -> float:
    """Angular measure (radians) of the circle of radius rho around the spot
    center that is covered by the blade sector [theta - theta_gnd, theta]."""
    if rho <= 0.0:
        # degenerate circle: the spot center itself
        ang = (0.0 - (theta - geom.theta_gnd)) % (2.0 * np.pi)
        return 2.0 * np.pi if ang <= geom.theta_gnd else 0.0
    theta_rho = np.arcsin(min(rho / geom.R0, 1.0))
    lo = max(theta - geom.theta_gnd, -theta_rho)
    hi = min(theta, theta_rho)
    if lo >= hi:
        return 0.0
    if lo <= -theta_rho and hi >= theta_rho:
        return 2.0 * np.pi

    crossings = []
    for a in (lo, hi):
        if not (-theta_rho < a < theta_rho):
            continue
        disc = rho * rho - (geom.R0 * np.sin(a)) ** 2
        root = np.sqrt(max(disc, 0.0))
        for s in (+1.0, -1.0):
            t_par = geom.R0 * np.cos(a) + s * root
            x = t_par * np.cos(a) - geom.R0
            y = t_par * np.sin(a)
            crossings.append(float(np.arctan2(y, x) % (2.0 * np.pi)))
    if not crossings:
        # no boundary cuts this circle; uniformly in or out
        psi = np.arctan2(rho, geom.R0)  # any point, take phi = pi/2
        return 2.0 * np.pi if lo <= psi <= hi else 0.0

    crossings.sort()
    blocked = 0.0
    for i, start in enumerate(crossings):
        end = crossings[(i + 1) % len(crossings)]
        span = (end - start) % (2.0 * np.pi)
        mid = start + 0.5 * span
        psi = np.arctan2(rho * np.sin(mid), geom.R0 + rho * np.cos(mid))
        if lo <= psi <= hi:
            blocked += span
    return blocked


def _check_small_spot(geom: SpotGeometry) -> None:
    if geom.r0 >= geom.R0 * np.sin(geom.theta_gnd / 2.0):
        raise ConfigError(
            "spot radius exceeds the blade's angular coverage "
            f"(r0={geom.r0} >= R0*sin(theta_gnd/2)="
            f"{geom.R0 * np.sin(geom.theta_gnd / 2.0):.4g}); the blade can "
            "never block the spot completely, which this model does not support"
        )


def transmitted_fraction(geom: SpotGeometry, theta: float) -> float:
    """Emission-weighted fraction of the LED spot not covered by the blade.

    theta is the angle from the blade's leading edge to the spot center,
    wrapped to [-pi, pi).  Piecewise: 1 while the blade is clear of the
    spot, a monotone transition while an edge sweeps across it, exactly 0
    while the sector covers it.  Partial coverage is evaluated by adaptive
    quadrature in polar coordinates about the spot center: the angular
    extent of the unblocked arc is exact at each radius, the radial
    integral is adaptive.
    """
    _check_small_spot(geom)
    theta = float(_wrap_angle(theta))
    t_max = geom.theta_max

    if min(theta, t_max) <= max(theta - geom.theta_gnd, -t_max):
        return 1.0
    if theta - geom.theta_gnd <= -t_max and theta >= t_max:
        return 0.0

    em = geom.emission

    def weight(rho):
        return em.A * np.cos(em.k * np.arctan(rho / geom.d)) + em.c

    # radii where a blade edge becomes tangent to the rho-circle: the arc
    # structure changes there, so hand them to the quadrature as breakpoints
    breakpoints = []
    for a in (theta, theta - geom.theta_gnd):
        if abs(a) < np.pi / 2.0:
            rho_star = geom.R0 * abs(np.sin(a))
            if 0.0 < rho_star < geom.r0:
                breakpoints.append(rho_star)

    def unblocked_integrand(rho):
        return weight(rho) * rho * (2.0 * np.pi - _blocked_arc(geom, theta, rho))

    num, _ = quad(
        unblocked_integrand,
        0.0,
        geom.r0,
        points=sorted(breakpoints) or None,
        limit=200,
        epsabs=_QUAD_EPS,
        epsrel=_QUAD_EPS,
    )
    den, _ = quad(
        lambda rho: weight(rho) * rho * 2.0 * np.pi,
        0.0,
        geom.r0,
        limit=200,
        epsabs=_QUAD_EPS,
        epsrel=_QUAD_EPS,
    )
    return float(min(max(num / den, 0.0), 1.0))


def transmitted_fraction_mc(
    geom: SpotGeometry, theta: float, n_samples: int = 1_000_000, seed: int = 0
) -> tuple[float, float]:
    """Monte Carlo estimate of transmitted_fraction with its standard error.

    Independent of the quadrature path: samples points uniformly over the
    spot disc, weights by the emission profile and tests blade coverage
    directly.  Used to cross-validate the quadrature.
    """
    _check_small_spot(geom)
    theta = float(_wrap_angle(theta))
    rng = np.random.default_rng(seed)
    rho = geom.r0 * np.sqrt(rng.random(n_samples))
    phi = rng.random(n_samples) * 2.0 * np.pi
    x = geom.R0 + rho * np.cos(phi)
    y = rho * np.sin(phi)
    psi = np.arctan2(y, x)
    covered = ((psi - (theta - geom.theta_gnd)) % (2.0 * np.pi)) <= geom.theta_gnd
    em = geom.emission
    w = em.A * np.cos(em.k * np.arctan(rho / geom.d)) + em.c
    a = w * ~covered
    mean_b = np.mean(w)
    estimate = float(np.sum(a) / np.sum(w))
    resid = a - estimate * w
    stderr = float(np.sqrt(np.var(resid) / n_samples) / mean_b)
    return estimate, stderr


def reference_waveform(geom: SpotGeometry, grid: TimeGrid, f_rot: float) -> SampledSignal:
    """Photodiode output over time: transmitted_fraction at theta = 2*pi*f_rot*t.

    Values repeat each rotation period, so the occlusion integral is
    evaluated once per distinct angle.
    """
    if not (f_rot > 0.0):
        raise PreconditionError(f"rotation frequency must be positive, got {f_rot}")
    _check_small_spot(geom)
    theta = _wrap_angle(2.0 * np.pi * f_rot * grid.times())
    # collapse angles that are equal up to float jitter before the expensive calls
    keys = np.round(theta, 12)
    uniq, inverse = np.unique(keys, return_inverse=True)
    frac = np.array([transmitted_fraction(geom, th) for th in uniq])
    return SampledSignal(grid, frac[inverse])


def _first_transition(values: np.ndarray) -> slice:
    """Slice of the first contiguous run of samples strictly between the
    plateau bands (2% of range off either extreme)."""
    vmin, vmax = float(np.min(values)), float(np.max(values))
    span = vmax - vmin
    if span <= 0.0:
        raise PreconditionError("no transition found: signal is constant")
    mid = (values > vmin + 0.02 * span) & (values < vmax - 0.02 * span)
    if not np.any(mid):
        raise PreconditionError("no transition found: no intermediate samples")
    prev = np.concatenate([[False], mid[:-1]])
    starts = np.flatnonzero(mid & ~prev)
    for s in starts:
        e = s
        while e < len(values) and mid[e]:
            e += 1
        if e - s >= 5:
            return slice(s, e)
    raise PreconditionError("no transition found: intermediate runs too short")


def fit_trapezoid_cosine(signal: SampledSignal, f_rot: float) -> tuple[TrapezoidFit, float]:
    """Least-squares cosine fit B*cos(u*theta + phi) + c2 over the first
    transition of a trapezoid-like waveform.

    theta is the (unwrapped) rotation angle 2*pi*f_rot*t.  Returns the fit
    and the residual RMS over the fitted segment.
    """
    if not (f_rot > 0.0):
        raise PreconditionError(f"rotation frequency must be positive, got {f_rot}")
    sel = _first_transition(signal.values)
    theta = 2.0 * np.pi * f_rot * signal.times()[sel]
    v = signal.values[sel]

    vmin, vmax = float(np.min(signal.values)), float(np.max(signal.values))
    c0 = 0.5 * (vmax + vmin)
    b0 = 0.5 * (vmax - vmin)
    dtheta = theta[-1] - theta[0]
    ncross = int(np.count_nonzero(np.diff(np.sign(v - c0)) != 0))
    u0 = max(ncross, 1) * np.pi / max(dtheta, 1e-12)

    def model(th, B, u, phi, c2):
        return B * np.cos(u * th + phi) + c2

    best = None
    for u_init in (u0, -u0):
        # choose the phi branch whose initial slope matches the data
        cos0 = np.clip((v[0] - c0) / b0, -1.0, 1.0)
        for phi_branch in (np.arccos(cos0), -np.arccos(cos0)):
            phi_init = phi_branch - u_init * theta[0]
            try:
                popt, _ = curve_fit(
                    model, theta, v, p0=[b0, u_init, phi_init, c0], maxfev=20000
                )
            except RuntimeError:
                continue
            resid = float(np.sqrt(np.mean((v - model(theta, *popt)) ** 2)))
            if best is None or resid < best[1]:
                best = (popt, resid)
    if best is None:
        raise PreconditionError("cosine fit of the transition did not converge")
    popt, resid = best
    fit = TrapezoidFit(B=float(popt[0]), u=float(popt[1]), phi=float(popt[2]), c2=float(popt[3]))
    return fit, resid


def detect_period(signal: SampledSignal, threshold: float) -> float:
    """Mean spacing of successive downward crossings of a threshold.

    threshold is a fraction of the signal's min-max range.  Crossing times
    are linearly interpolated between samples.
    """
    if not (0.0 < threshold < 1.0):
        raise PreconditionError(f"threshold must be a fraction in (0, 1), got {threshold}")
    v = signal.values
    vmin, vmax = float(np.min(v)), float(np.max(v))
    if vmax <= vmin:
        raise PreconditionError("period detection failed: signal has no crossings")
    level = vmin + threshold * (vmax - vmin)
    above = v >= level
    idx = np.flatnonzero(above[:-1] & ~above[1:])
    if len(idx) < 2:
        raise PreconditionError(
            f"period detection needs >= 2 downward crossings, found {len(idx)}"
        )
    t = signal.times()
    frac = (v[idx] - level) / (v[idx] - v[idx + 1])
    crossings = t[idx] + frac * signal.grid.dt
    return float(np.mean(np.diff(crossings)))


def synth_demod_reference(period: float, kind: str, l: int, phase: float) -> HarmonicSeries:
    """Zero-DC harmonic series used as the demodulation reference.

    kind="sine": unit-amplitude fundamental.  kind="square": odd harmonics
    with amplitude 4/(pi*j) up to l.  `phase` is a phase delay of the
    underlying waveform, so harmonic j is rotated by j*phase.
    """
    if not (period > 0.0):
        raise PreconditionError(f"period must be positive, got {period}")
    if l < 1:
        raise PreconditionError(f"harmonic count must be >= 1, got {l}")
    cos_c = np.zeros(l)
    sin_c = np.zeros(l)
    if kind == "sine":
        cos_c[0] = np.cos(phase)
        sin_c[0] = np.sin(phase)
    elif kind == "square":
        for j in range(1, l + 1, 2):
            amp = 4.0 / (np.pi * j)
            cos_c[j - 1] = amp * np.cos(j * phase)
            sin_c[j - 1] = amp * np.sin(j * phase)
    else:
        raise PreconditionError(f"unknown reference kind {kind!r}; use 'square' or 'sine'")
    return HarmonicSeries(f_fund=1.0 / period, dc=0.0, cos_coeffs=cos_c, sin_coeffs=sin_c)
