"""Lattice geometry, periodic driving forces, and Peierls-phased tunneling.

A time-periodic in-plane force F(t) acting on particles hopping on a
hexagonal lattice multiplies each nearest-neighbor tunneling amplitude by
a phase factor exp(i*chi_k(t)), where chi_k is the zero-mean time integral
of F(t).a_k along bond k.  This module builds drive specifications, the
closed-form Peierls phases, and the Fourier components of the modulated
tunneling rates g_k(t) = j0 * exp(i*chi_k(t)).

Conventions: hbar = 1.  Harmonic amplitudes are stored as dimensionless
multiples of the base frequency omega (units omega/a), so every derived
ratio (j1/j0, j2*omega/j0^2, ...) is independent of omega and of the
lattice constant.  `force_at` returns the force in absolute units,
i.e. amp * omega along the unit drive axes.

All functions here are pure and all containers immutable after
construction; values can be shared freely across parallel workers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

SQRT3 = math.sqrt(3.0)

FAMILIES = ("plus", "minus", "custom")


class SpectrumTruncationError(ValueError):
    """Requested Fourier window is too small to hold the spectral weight."""


@dataclass(frozen=True)
class LatticeGeometry:
    """Hexagonal-lattice vectors: NN bonds a1..a3, Bravais/NNN vectors
    b1..b3, orthogonal drive axes e1, e2 and reciprocal vectors G1, G2
    (b_i . G_j = 2*pi*delta_ij for i, j in {1, 2})."""

    a: float
    a1: np.ndarray
    a2: np.ndarray
    a3: np.ndarray
    b1: np.ndarray
    b2: np.ndarray
    b3: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    G1: np.ndarray
    G2: np.ndarray

    def bond(self, k: int) -> np.ndarray:
        """NN bond vector a_k, k in {1, 2, 3}."""
        if k not in (1, 2, 3):
            raise ValueError(f"bond index must be 1, 2 or 3, got {k}")
        return (self.a1, self.a2, self.a3)[k - 1]

    def bravais(self, k: int) -> np.ndarray:
        """NNN vector b_k, k in {1, 2, 3}."""
        if k not in (1, 2, 3):
            raise ValueError(f"bravais index must be 1, 2 or 3, got {k}")
        return (self.b1, self.b2, self.b3)[k - 1]


def build_geometry(a: float = 1.0) -> LatticeGeometry:
    """Construct the hexagonal-lattice geometry for NN distance `a`.

    a1 = (a/2)(sqrt3, 1), a2 = (a/2)(-sqrt3, 1), a3 = -a1 - a2;
    b1 = a(sqrt3, 0), b2 = (a/2)(-sqrt3, 3), b3 = -b1 - b2;
    e1 = (a1 - a2)/sqrt3, e2 = -a3.
    """
    if not a > 0:
        raise ValueError(f"lattice constant must be positive, got {a}")
    a1 = np.array([SQRT3, 1.0]) * (a / 2)
    a2 = np.array([-SQRT3, 1.0]) * (a / 2)
    a3 = -a1 - a2
    b1 = np.array([SQRT3, 0.0]) * a
    b2 = np.array([-SQRT3, 3.0]) * (a / 2)
    b3 = -b1 - b2
    e1 = (a1 - a2) / SQRT3
    e2 = -a3
    # reciprocal basis of (b1, b2): rows of 2*pi * inv([b1; b2])^T
    B = np.array([b1, b2])
    G = 2 * np.pi * np.linalg.inv(B).T
    geom = LatticeGeometry(a=a, a1=a1, a2=a2, a3=a3, b1=b1, b2=b2, b3=b3,
                           e1=e1, e2=e2, G1=G[0], G2=G[1])
    for v in (geom.a1, geom.a2, geom.a3, geom.b1, geom.b2, geom.b3,
              geom.e1, geom.e2, geom.G1, geom.G2):
        v.setflags(write=False)
    return geom


_DEFAULT_GEOM = None


def default_geometry() -> LatticeGeometry:
    """Shared a = 1 geometry."""
    global _DEFAULT_GEOM
    if _DEFAULT_GEOM is None:
        _DEFAULT_GEOM = build_geometry(1.0)
    return _DEFAULT_GEOM


def family_harmonic_integer(n: int) -> int:
    """n-th allowed harmonic integer: 1, 2, 4, 5, 7, 8, ... (skipping
    multiples of 3), via m_n = (6n - (-1)^n - 3)/4."""
    if n < 1:
        raise ValueError("harmonic index starts at 1")
    return (6 * n - (-1) ** n - 3) // 4


@dataclass(frozen=True)
class Harmonic:
    """One frequency component of the drive.

    m       : positive integer multiple of the base frequency
    amp_x/y : amplitudes along e1/e2 in units of omega/a
    phase_x/y : phase lags (radians) of the cosine on each axis
    """

    m: int
    amp_x: float
    phase_x: float
    amp_y: float
    phase_y: float

    def __post_init__(self):
        if self.m < 1 or self.m != int(self.m):
            raise ValueError(f"harmonic multiple must be a positive integer, got {self.m}")
        for v in (self.amp_x, self.amp_y, self.phase_x, self.phase_y):
            if not math.isfinite(v):
                raise ValueError("harmonic amplitudes and phases must be finite")


@dataclass(frozen=True)
class DriveSpec:
    """A periodic driving force as a list of harmonics.

    family 'plus'/'minus' enforces the isotropy-preserving structure
    (harmonic integers 1, 2, 4, 5, ..., equal per-axis amplitudes, and
    per-axis phase offsets +-(-1)^n pi/2); 'custom' allows any harmonic
    content, including multiples of 3.
    """

    family: str
    omega: float
    harmonics: tuple

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        object.__setattr__(self, "harmonics", tuple(self.harmonics))
        if self.family in ("plus", "minus"):
            self._check_family_structure()

    def _check_family_structure(self):
        sgn = 1.0 if self.family == "plus" else -1.0
        for idx, h in enumerate(self.harmonics, start=1):
            if h.m != family_harmonic_integer(idx):
                raise ValueError(
                    f"family {self.family!r} harmonic {idx} must have m = "
                    f"{family_harmonic_integer(idx)}, got {h.m}")
            if idx == 1 and abs(h.phase_x) > 1e-12:
                raise ValueError("first harmonic phase must be 0 for plus/minus families")
            if abs(h.amp_x - h.amp_y) > 1e-12 * max(1.0, abs(h.amp_x)):
                raise ValueError("plus/minus families carry equal amplitudes on both axes")
            want = h.phase_x + sgn * (-1) ** idx * np.pi / 2
            if abs(_wrap_angle(h.phase_y - want)) > 1e-9:
                raise ValueError(
                    f"family {self.family!r} harmonic {idx} has phase_y = {h.phase_y}, "
                    f"expected {want}")

    @property
    def period(self) -> float:
        return 2 * np.pi / self.omega


def _wrap_angle(x):
    """Wrap to (-pi, pi]."""
    w = np.mod(-x + np.pi, 2 * np.pi)
    return np.pi - w


def build_family_drive(sign: str, omega: float, amps, phases) -> DriveSpec:
    """Assemble a plus/minus-family drive from per-harmonic amplitudes
    (units omega/a) and phase lags delta_n (phases[0] must be 0)."""
    if sign not in ("plus", "minus"):
        raise ValueError(f"family sign must be 'plus' or 'minus', got {sign!r}")
    amps = [float(x) for x in amps]
    phases = [float(x) for x in phases]
    if len(amps) != len(phases):
        raise ValueError(f"amps ({len(amps)}) and phases ({len(phases)}) differ in length")
    if len(amps) < 1:
        raise ValueError("at least one harmonic is required")
    if abs(phases[0]) > 1e-12:
        raise ValueError(f"first phase must be 0, got {phases[0]}")
    sgn = 1.0 if sign == "plus" else -1.0
    harms = []
    for idx, (A, d) in enumerate(zip(amps, phases), start=1):
        harms.append(Harmonic(m=family_harmonic_integer(idx),
                              amp_x=A, phase_x=d,
                              amp_y=A, phase_y=d + sgn * (-1) ** idx * np.pi / 2))
    return DriveSpec(family=sign, omega=float(omega), harmonics=tuple(harms))


def build_custom_drive(omega: float, harmonics) -> DriveSpec:
    """Free-form drive; `harmonics` is an iterable of Harmonic or of
    (m, amp_x, phase_x, amp_y, phase_y) tuples."""
    hs = tuple(h if isinstance(h, Harmonic) else Harmonic(*h) for h in harmonics)
    return DriveSpec(family="custom", omega=float(omega), harmonics=hs)


def force_at(spec: DriveSpec, t, geom: LatticeGeometry | None = None) -> np.ndarray:
    """Driving force at time(s) t, in absolute units (amp * omega along
    the unit drive axes); shape (..., 2)."""
    geom = geom or default_geometry()
    t = np.asarray(t, dtype=float)
    u1 = geom.e1 / geom.a
    u2 = geom.e2 / geom.a
    out = np.zeros(t.shape + (2,))
    for h in spec.harmonics:
        wx = np.cos(h.m * spec.omega * t - h.phase_x)
        wy = np.cos(h.m * spec.omega * t - h.phase_y)
        out += spec.omega * (h.amp_x * wx[..., None] * u1 + h.amp_y * wy[..., None] * u2)
    return out


def _bond_amplitudes(spec: DriveSpec, geom: LatticeGeometry):
    """Harmonic integers m (H,) and complex bond amplitudes Z (3, H) with
    F(t).a_k / omega = sum_h Re[Z_kh e^{i m_h omega t}].

    The zero-mean Peierls phase follows as
    chi_k(t) = Im[sum_h (Z_kh / m_h) e^{i m_h omega t}].
    """
    u1 = geom.e1 / geom.a
    u2 = geom.e2 / geom.a
    ms = np.array([h.m for h in spec.harmonics], dtype=float)
    zx = np.array([h.amp_x * np.exp(-1j * h.phase_x) for h in spec.harmonics])
    zy = np.array([h.amp_y * np.exp(-1j * h.phase_y) for h in spec.harmonics])
    p1 = np.array([u1 @ geom.bond(k) for k in (1, 2, 3)])
    p2 = np.array([u2 @ geom.bond(k) for k in (1, 2, 3)])
    Z = p1[:, None] * zx[None, :] + p2[:, None] * zy[None, :]
    return ms, Z


def _bond_sinusoids(spec: DriveSpec, geom: LatticeGeometry):
    """For each bond k: arrays (m, z, theta) such that
    chi_k(t) = sum_h z_h * sin(m_h * omega * t - theta_h).

    Writing F(t).a_k = sum_h C_h cos(m_h omega t - theta_h), the zero-mean
    antiderivative is sum_h (C_h / (m_h omega)) sin(m_h omega t - theta_h);
    here z_h = C_h / (m_h omega), which is omega-free by the amplitude
    convention.
    """
    ms, Z = _bond_amplitudes(spec, geom)
    return [(ms, np.abs(Z[k]) / np.maximum(ms, 1.0), -np.angle(Z[k]))
            for k in range(3)]


def chi(spec: DriveSpec, geom: LatticeGeometry, k: int, t) -> np.ndarray:
    """Peierls phase chi_k(t) along bond k, evaluated in closed form.

    Equal to the time integral of F(tau).a_k from 0 to t minus its own
    period average, so the period average of chi_k is zero.
    """
    if k not in (1, 2, 3):
        raise ValueError(f"bond index must be 1, 2 or 3, got {k}")
    ms, zs, ths = _bond_sinusoids(spec, geom)[k - 1]
    t = np.asarray(t, dtype=float)
    if len(ms) == 0:
        return np.zeros(t.shape)
    phases = np.multiply.outer(t, ms) * spec.omega - ths
    return np.sin(phases) @ zs


def _chi_samples(ms, Z, M):
    """chi_k on the uniform period grid t_j = j T / M, shape (3, M).

    chi_k(t_j) = Im[sum_h (Z_kh / m_h) e^{2 pi i m_h j / M}]; the harmonic
    rows are built from the fundamental by repeated multiplication, which
    beats an (H, M) complex exp for the small m of interest.
    """
    if len(ms) == 0:
        return np.zeros((3, M))
    base = np.exp(2j * np.pi / M * np.arange(M))
    acc = np.zeros((3, M), dtype=complex)
    W = Z / ms
    row = base
    power = 1
    for h in np.argsort(ms):
        m = int(ms[h])
        for _ in range(m - power):
            row = row * base
        power = m
        acc += W[:, h, None] * row
    return acc.imag


def _quadrature_sizes(ms, Z):
    """(total modulation index, spectral bandwidth, largest harmonic)."""
    if len(ms) == 0:
        return 0.0, 0.0, 1
    absZ = np.abs(Z)
    zmax = float((absZ / ms).sum(axis=1).max())
    bandwidth = float(absZ.sum(axis=1).max())
    return zmax, bandwidth, int(ms.max())


def _sample_count(mmax: int, zmax: float) -> int:
    # power of two >= 64*(largest harmonic + ceil(total modulation index));
    # Peierls spectra decay superexponentially past the modulation index,
    # which keeps aliasing below 1e-12 at this rate.
    need = 64 * (mmax + math.ceil(zmax))
    return max(256, 1 << math.ceil(math.log2(max(need, 1))))


@dataclass(frozen=True)
class TunnelingSpectrum:
    """Fourier components of the Peierls-modulated NN tunneling rates.

    g[k-1, n_max + n] holds g_k^n = (1/T) int_0^T j0 e^{i chi_k(t)} e^{-i n omega t} dt
    for n in [-n_max, n_max].  Since |g_k(t)| = j0, the components satisfy
    Parseval: sum_n |g_k^n|^2 = j0^2.
    """

    j0: float
    omega: float
    n_max: int
    g: np.ndarray

    def component(self, k: int, n: int) -> complex:
        """g_k^n for bond k in {1,2,3}."""
        if abs(n) > self.n_max:
            raise ValueError(f"|n| exceeds n_max = {self.n_max}")
        return self.g[k - 1, self.n_max + n]

    def negated_bond(self, k: int) -> np.ndarray:
        """Components of g_{-a_k}(t) = conj(g_k(t)): conj(g_k^{-n})."""
        return np.conj(self.g[k - 1, ::-1])

    def parseval_defect(self) -> float:
        """max_k |sum_n |g_k^n|^2 - j0^2| / j0^2."""
        total = np.sum(np.abs(self.g) ** 2, axis=1)
        return float(np.max(np.abs(total - self.j0 ** 2)) / self.j0 ** 2)


def fourier_components(spec: DriveSpec, geom: LatticeGeometry, j0: float,
                       n_max: int | None = None,
                       samples: int | None = None) -> TunnelingSpectrum:
    """Fourier components of g_k(t) = j0 exp(i chi_k(t)) by uniform-grid DFT.

    Parameters
    ----------
    j0 : bare tunneling amplitude, > 0.
    n_max : retained order; the default covers the spectral bandwidth
        sum_h m_h z_h plus a Bessel-tail margin that grows with the
        largest harmonic integer (a factor at harmonic m spreads its
        tail at spacing m, so a flat margin leaks weight for m > 1).
    samples : optional power-of-two override of the automatic grid size.

    Raises
    ------
    SpectrumTruncationError
        when the weight outside [-n_max, n_max] exceeds 1e-8 * j0^2.
    """
    if not j0 > 0:
        raise ValueError("j0 must be positive")
    ms, Z = _bond_amplitudes(spec, geom)
    zmax, bandwidth, mmax = _quadrature_sizes(ms, Z)
    if n_max is None:
        n_max = math.ceil(bandwidth) + 20 + 4 * mmax
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    M = samples if samples is not None else _sample_count(mmax, zmax)
    if M & (M - 1) or M < 4:
        raise ValueError(f"sample count must be a power of two >= 4, got {M}")
    if 2 * n_max + 1 > M:
        raise ValueError(f"n_max = {n_max} does not fit in {M} samples")
    chis = _chi_samples(ms, Z, M)
    F = np.fft.fft(j0 * np.exp(1j * chis), axis=1) / M
    g = np.empty((3, 2 * n_max + 1), dtype=complex)
    ns = np.arange(-n_max, n_max + 1)
    g[:, :] = F[:, ns % M]
    tail = float(np.max(np.sum(np.abs(F) ** 2, axis=1) - np.sum(np.abs(g) ** 2, axis=1)))
    if tail > 1e-8 * j0 ** 2:
        raise SpectrumTruncationError(
            f"spectral weight {tail:.3e} outside |n| <= {n_max} "
            f"(exceeds 1e-8 * j0^2 = {1e-8 * j0**2:.3e})")
    g.setflags(write=False)
    return TunnelingSpectrum(j0=float(j0), omega=spec.omega, n_max=int(n_max), g=g)


# ---------------------------------------------------------------------------
# JSON interface

def drive_to_json(spec: DriveSpec) -> dict:
    return {
        "family": spec.family,
        "omega": spec.omega,
        "harmonics": [
            {"m": h.m, "ax": [h.amp_x, h.phase_x], "ay": [h.amp_y, h.phase_y]}
            for h in spec.harmonics
        ],
    }


def drive_from_json(data) -> DriveSpec:
    """Parse a drive from a JSON dict or string.

    Full form: {"family": ..., "omega": w, "harmonics": [{"m": m,
    "ax": [amp, phase], "ay": [amp, phase]}, ...]}.  For plus/minus
    families the shorthand {"family": "plus", "omega": w, "A": [...],
    "delta": [...]} is expanded via `build_family_drive`.
    """
    if isinstance(data, (str, bytes)):
        data = json.loads(data)
    if not isinstance(data, dict):
        raise ValueError("drive JSON must be an object")
    try:
        family = data["family"]
        omega = float(data["omega"])
    except KeyError as e:
        raise ValueError(f"drive JSON missing field {e.args[0]!r}") from None
    if "harmonics" in data:
        harms = []
        for i, h in enumerate(data["harmonics"]):
            try:
                harms.append(Harmonic(m=int(h["m"]),
                                      amp_x=float(h["ax"][0]), phase_x=float(h["ax"][1]),
                                      amp_y=float(h["ay"][0]), phase_y=float(h["ay"][1])))
            except (KeyError, IndexError, TypeError):
                raise ValueError(f"malformed harmonic entry {i}: {h!r}") from None
        return DriveSpec(family=family, omega=omega, harmonics=tuple(harms))
    if family in ("plus", "minus"):
        try:
            return build_family_drive(family, omega, data["A"], data["delta"])
        except KeyError as e:
            raise ValueError(f"drive JSON missing field {e.args[0]!r}") from None
    raise ValueError("custom drives require an explicit 'harmonics' list")
