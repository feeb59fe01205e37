import numpy as np
import pytest

from floqchern import (
    PropagatorSettings,
    StepCountError,
    bloch_hamiltonian_t,
    build_custom_drive,
    build_family_drive,
    chern_number,
    compare_effective,
    default_geometry,
    derive_rates,
    floquet_chern,
    fold_quasienergy,
    fourier_components,
    model_from_rates,
    omega_ladder,
    period_propagator,
    torus_grid,
)
from floqchern.validate import _propagators

GEOM = default_geometry()
K_POINT = (GEOM.G1 + GEOM.G2) / 3
ZERO = build_custom_drive(1.0, [])


def mat_norm(M):
    return np.linalg.norm(M, 2)


def expm_h(H, t):
    """exp(-i H t) for Hermitian 2x2 via eigendecomposition."""
    w, v = np.linalg.eigh(H)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


# ---------------------------------------------------------------------------
# instantaneous Hamiltonian

def test_hamiltonian_hermitian_bitwise():
    spec = build_family_drive("plus", 1.0, [1.5, 0.5], [0.0, 0.7])
    rng = np.random.default_rng(0)
    for _ in range(5):
        H = bloch_hamiltonian_t(spec, GEOM, 1.0, 0.3, rng.normal(size=2), rng.uniform(0, 6))
        assert np.array_equal(H, H.conj().T)


def test_hamiltonian_undriven_limits():
    H0 = bloch_hamiltonian_t(ZERO, GEOM, 1.0, 0.0, np.zeros(2), 0.0)
    assert abs(H0[1, 0]) == pytest.approx(3.0)
    HK = bloch_hamiltonian_t(ZERO, GEOM, 1.0, 0.0, K_POINT, 0.0)
    assert abs(HK[1, 0]) < 1e-12


def test_hamiltonian_average_matches_static_part():
    # time average over one period equals the Fourier n = 0 matrix
    spec = build_family_drive("plus", 1.0, [2.0, 1.0], [0.0, 1.1])
    sp = fourier_components(spec, GEOM, 1.0)
    g0 = sp.component(1, 0)
    rng = np.random.default_rng(1)
    M = 4096
    t = (np.arange(M) + 0.5) / M * spec.period
    for _ in range(10):
        k = rng.normal(size=2) * 2
        Ht = bloch_hamiltonian_t(spec, GEOM, 1.0, 0.2, k, t)
        avg = Ht.mean(axis=0)
        G0 = g0 * (1 + np.exp(1j * (k @ GEOM.b1)) + np.exp(-1j * (k @ GEOM.b2)))
        want = np.array([[0.2, np.conj(G0)], [G0, -0.2]])
        assert np.abs(avg - want).max() < 1e-10


# ---------------------------------------------------------------------------
# propagator

def test_settings_validation():
    with pytest.raises(ValueError):
        PropagatorSettings(steps_per_period=100)
    with pytest.raises(ValueError):
        PropagatorSettings(steps_per_period=300)
    with pytest.raises(ValueError):
        PropagatorSettings(integrator="rk4")


def test_propagator_zero_force_commuting_limit():
    settings = PropagatorSettings(steps_per_period=512)
    rng = np.random.default_rng(2)
    for _ in range(4):
        k = rng.normal(size=2)
        U = period_propagator(ZERO, GEOM, 0.7, 0.2, k, settings)
        H = bloch_hamiltonian_t(ZERO, GEOM, 0.7, 0.2, k, 0.0)
        assert mat_norm(U - expm_h(H, ZERO.period)) < 1e-10


def test_propagator_unitary():
    spec = build_family_drive("plus", 1.0, [2.0, 1.5], [0.0, -0.9])
    settings = PropagatorSettings(steps_per_period=1024)
    rng = np.random.default_rng(3)
    for _ in range(4):
        U = period_propagator(spec, GEOM, 0.3, 0.1, rng.normal(size=2), settings)
        assert np.abs(np.abs(np.linalg.det(U)) - 1) < 1e-10
        assert mat_norm(U.conj().T @ U - np.eye(2)) < 1e-10


def test_backward_stepping_inverts_propagator():
    # group property: stepping the same midpoints with dt -> -dt in reverse
    # order builds U^{-1}
    spec = build_family_drive("plus", 1.0, [2.0, 1.0], [0.0, 0.4])
    k = np.array([0.3, -0.8])
    steps = 512
    dt = spec.period / steps
    U = _propagators(spec, GEOM, 0.4, 0.2, [k], steps)[0]
    Uback = np.eye(2, dtype=complex)
    for n in reversed(range(steps)):
        H = bloch_hamiltonian_t(spec, GEOM, 0.4, 0.2, k, (n + 0.5) * dt)
        Uback = expm_h(H, -dt) @ Uback
    assert mat_norm(Uback @ U - np.eye(2)) < 1e-9


def test_second_order_convergence():
    # strong drive so the splitting error dominates roundoff
    spec = build_family_drive("plus", 1.0, [2.5, 1.5], [0.0, 1.3])
    k = np.array([0.7, 0.2])
    ref = _propagators(spec, GEOM, 0.4, 0.1, [k], 8192)[0]
    e256 = mat_norm(_propagators(spec, GEOM, 0.4, 0.1, [k], 256)[0] - ref)
    e512 = mat_norm(_propagators(spec, GEOM, 0.4, 0.1, [k], 512)[0] - ref)
    assert 3.0 < e256 / e512 < 5.0


def test_richardson_check():
    spec = build_family_drive("plus", 1.0, [3.0, 2.0], [0.0, 0.8])
    bad = PropagatorSettings(steps_per_period=256, richardson_check=True)
    with pytest.raises(StepCountError):
        period_propagator(spec, GEOM, 0.6, 0.0, np.array([0.5, 0.5]), bad)
    good = PropagatorSettings(steps_per_period=4096, richardson_check=True)
    period_propagator(spec, GEOM, 0.02, 0.0, np.array([0.5, 0.5]), good)


def test_fold_quasienergy_window():
    w = 2.0
    assert fold_quasienergy(1.0, w) == pytest.approx(1.0)
    assert fold_quasienergy(-1.0, w) == pytest.approx(1.0)   # maps to +w/2
    assert fold_quasienergy(1.2, w) == pytest.approx(-0.8)
    assert fold_quasienergy(0.0, w) == pytest.approx(0.0)


# ---------------------------------------------------------------------------
# exact vs effective

def test_zero_force_effective_is_exact():
    settings = PropagatorSettings(steps_per_period=512)
    rep = compare_effective(ZERO, GEOM, 0.05, 0.01, 6, settings)
    assert rep.max_abs_deviation < 1e-10
    assert rep.unitarity_defect < 1e-10


def test_circular_drive_quasienergy_deviation():
    spec = build_family_drive("plus", 1.0, [1.5], [0.0])
    j0 = 0.02
    settings = PropagatorSettings(steps_per_period=2048)
    rep = compare_effective(spec, GEOM, j0, 0.0, 12, settings)
    assert rep.max_abs_deviation <= 5e-3 * j0
    assert rep.unitarity_defect < 1e-10
    assert not rep.pairing_flag.any()


def test_deviation_scaling_one_doubling():
    spec = build_family_drive("plus", 1.0, [2.302, 1.09], [0.0, -2.884])
    settings = PropagatorSettings(steps_per_period=2048)
    lad = omega_ladder(spec, GEOM, 0.02, 0.0, 6, settings, factors=(1.0, 2.0))
    assert 2.8 <= lad.shrink_factors[0] <= 5.2


def test_gauge_robustness():
    # conjugating the exact propagator by the sublattice gauge leaves the
    # quasienergy comparison untouched
    spec = build_family_drive("plus", 1.0, [2.0, 1.0], [0.0, 0.9])
    j0 = 0.02
    rates = derive_rates(fourier_components(spec, GEOM, j0))
    ks = torus_grid(GEOM, 4, 4)
    U = _propagators(spec, GEOM, j0, 0.0, ks, 1024)
    V = np.diag([1.0, np.exp(1j * rates.gauge_phase)])
    T = spec.period
    for i in range(len(ks)):
        e1 = np.sort(fold_quasienergy(-np.angle(np.linalg.eigvals(U[i])) / T, 1.0))
        Ug = V @ U[i] @ V.conj().T
        e2 = np.sort(fold_quasienergy(-np.angle(np.linalg.eigvals(Ug)) / T, 1.0))
        assert np.abs(e1 - e2).max() < 1e-12


def test_stroboscopic_growth_bounded():
    spec = build_family_drive("plus", 1.0, [1.8], [0.0])
    j0 = 0.02
    rates = derive_rates(fourier_components(spec, GEOM, j0))
    settings = PropagatorSettings(steps_per_period=1024)
    rng = np.random.default_rng(4)
    from floqchern.validate import _effective_h
    for _ in range(3):
        k = rng.normal(size=2)
        U = period_propagator(spec, GEOM, j0, 0.0, k, settings)
        He = _effective_h(rates, 0.0, GEOM, np.array([k]))[0]
        V = np.diag([1.0, np.exp(1j * rates.gauge_phase)])
        E = V @ expm_h(He, spec.period) @ V.conj().T
        base = mat_norm(U - E)
        Um, Em = np.eye(2), np.eye(2)
        for m in range(1, 51):
            Um = Um @ U
            Em = Em @ E
            assert mat_norm(Um - Em) <= 1.5 * m * base + 1e-12


# ---------------------------------------------------------------------------
# exact-band Chern

def test_floquet_chern_zero_force_trivial():
    settings = PropagatorSettings(steps_per_period=512)
    assert floquet_chern(ZERO, GEOM, 0.05, 0.02, 12, settings) == 0


def test_floquet_chern_matches_effective_and_flips():
    j0 = 0.05
    settings = PropagatorSettings(steps_per_period=1024)
    for family, sign in (("plus", +1), ("minus", -1)):
        spec = build_family_drive(family, 1.0, [1.2], [0.0])
        rates = derive_rates(fourier_components(spec, GEOM, j0))
        model = model_from_rates(rates, 0.0, geom=GEOM)
        c_eff = chern_number(model, 24, 24)
        c_exact = floquet_chern(spec, GEOM, j0, 0.0, 12, settings)
        assert c_exact == c_eff == sign
