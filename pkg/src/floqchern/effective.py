"""Leading-order effective tunneling rates of the shaken lattice.

Time-averaging the modulated NN rates gives g0_k; pairing their Fourier
components through the commutator kernel

    w(a, b) = sum_{n>=1} (1/(n*omega)) * (ga^{-n} gb^{n} - gb^{-n} ga^{n})

gives the induced on-site rate tau0 and the three NNN rates tau_1..tau_3.
For the isotropy-preserving drive families all three NN averages coincide
(common complex value, removable by a sublattice gauge phase) and the
three NNN rates collapse onto a single j2 * exp(i*phi).

Pure functions over immutable inputs; safe for parallel parameter sweeps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .drive import TunnelingSpectrum

#: below this fraction of j0, |tau| is treated as zero and phi undefined
PHI_UNDEFINED_FLOOR = 1e-14

DEFAULT_ISO_TOL = 1e-8


def w_commutator(ga: np.ndarray, gb: np.ndarray, omega: float, n_max: int) -> complex:
    """Commutator kernel sum_{n=1..n_max} (ga[-n]*gb[n] - gb[-n]*ga[n])/(n*omega).

    Arrays span n in [-n_max, n_max] (center index n_max).  Antisymmetric
    under argument swap, exactly: every term is an exact IEEE negation of
    its swapped counterpart and the summation order is fixed.
    """
    ga = np.asarray(ga)
    gb = np.asarray(gb)
    if ga.shape != (2 * n_max + 1,) or gb.shape != (2 * n_max + 1,):
        raise ValueError(
            f"Fourier arrays must span [-n_max, n_max] = {2 * n_max + 1} entries, "
            f"got {ga.shape} and {gb.shape}")
    c = n_max
    n = np.arange(1, n_max + 1)
    terms = (ga[c - n] * gb[c + n] - gb[c - n] * ga[c + n]) / (n * omega)
    return complex(np.sum(terms))


def nnn_rates(spectrum: TunnelingSpectrum):
    """(tau0, tau1, tau2, tau3) from a tunneling spectrum.

    tau0 = sum_i w(a_i, -a_i); tau1 = w(a2, -a3); tau2 = w(a3, -a1);
    tau3 = w(a1, -a2).  Negated-bond components follow from the
    conjugate-reflection rule g_{-a}^n = conj(g_a^{-n}).

    Equivalent to six w_commutator calls, vectorized over the pair list.
    """
    g = spectrum.g
    c, om = spectrum.n_max, spectrum.omega
    n = np.arange(1, c + 1)
    # pairs (i, j) realizing w(a_i, -a_j); the -a_j array is conj(g[j][::-1])
    gi = g[[0, 1, 2, 1, 2, 0]]
    gj = np.conj(g[[0, 1, 2, 2, 0, 1]][:, ::-1])
    terms = (gi[:, c - n] * gj[:, c + n] - gj[:, c - n] * gi[:, c + n]) / (n * om)
    w = terms.sum(axis=1)
    return complex(w[0] + w[1] + w[2]), complex(w[3]), complex(w[4]), complex(w[5])


@dataclass(frozen=True)
class EffectiveRates:
    """Derived effective tunneling rates and isotropy diagnostics.

    delta_shift is the on-site renormalization Re(tau0) entering the
    effective sublattice offset as delta_eff = delta + delta_shift (the
    commutator term adds diag(tau0, -tau0) once).  gauge_phase is the
    common NN phase removed by the sublattice gauge transformation; the
    NNN rates are untouched by it.  phi = arg(tau1), wrapped to (-pi, pi],
    undefined (phi_defined False) when j2 < 1e-14 * j0.
    """

    j0: float
    omega: float
    g0: np.ndarray
    tau0: complex
    tau: np.ndarray
    j1: float
    j2: float
    phi: float
    phi_defined: bool
    delta_shift: float
    gauge_phase: float
    residual_nn: float
    residual_nnn: float
    isotropic_nn: bool
    isotropic_nnn: bool

    def to_json_dict(self) -> dict:
        return {
            "g0": [[z.real, z.imag] for z in self.g0],
            "tau": [[z.real, z.imag] for z in self.tau],
            "tau0": [self.tau0.real, self.tau0.imag],
            "j1": self.j1,
            "j2": self.j2,
            "phi": self.phi,
            "phi_defined": self.phi_defined,
            "delta_shift": self.delta_shift,
            "gauge_phase": self.gauge_phase,
            "residuals": {"nn": self.residual_nn, "nnn": self.residual_nnn},
            "isotropic_nn": self.isotropic_nn,
            "isotropic_nnn": self.isotropic_nnn,
        }


def _max_pairwise(values) -> float:
    m = 0.0
    for i in range(len(values)):
        for j in range(i + 1, len(values)):
            m = max(m, abs(values[i] - values[j]))
    return m


def derive_rates(spectrum: TunnelingSpectrum,
                 iso_tol: float = DEFAULT_ISO_TOL) -> EffectiveRates:
    """Reduce a tunneling spectrum to effective rates with isotropy checks.

    Isotropy of the NN sector requires the three complex averages g0_k to
    coincide (a single sublattice phase can only remove a phase common to
    all three bonds).  Residuals are max pairwise deviations, compared
    against iso_tol relative to j0 (NN) and j0^2/omega (NNN).  A
    non-isotropic drive is diagnosed, not rejected.
    """
    if not iso_tol > 0:
        raise ValueError("iso_tol must be positive")
    j0, omega = spectrum.j0, spectrum.omega
    g0 = spectrum.g[:, spectrum.n_max].copy()
    tau0, t1, t2, t3 = nnn_rates(spectrum)
    tau = np.array([t1, t2, t3])

    residual_nn = float(_max_pairwise(g0))
    residual_nnn = float(_max_pairwise(tau))
    isotropic_nn = bool(residual_nn <= iso_tol * j0)
    isotropic_nnn = bool(residual_nnn <= iso_tol * j0 ** 2 / omega)

    mean_g0 = complex(np.mean(g0))
    j1 = abs(mean_g0)
    gauge_phase = float(np.angle(mean_g0)) if j1 > 0 else 0.0

    j2 = abs(t1)
    phi_defined = bool(j2 > PHI_UNDEFINED_FLOOR * j0)
    phi = float(np.angle(t1)) if phi_defined else 0.0

    g0.setflags(write=False)
    tau.setflags(write=False)
    return EffectiveRates(
        j0=j0, omega=omega, g0=g0, tau0=tau0, tau=tau,
        j1=j1, j2=j2, phi=phi, phi_defined=phi_defined,
        delta_shift=tau0.real, gauge_phase=gauge_phase,
        residual_nn=residual_nn, residual_nnn=residual_nnn,
        isotropic_nn=isotropic_nn, isotropic_nnn=isotropic_nnn)
