"""Constrained maximization of the NNN tunneling enhancement.

The figure of merit is the dimensionless ratio R = (j2/j1)*(omega/j0),
maximized over the free drive parameters p = (A_1/w ... A_N/w,
delta_2 ... delta_N) subject to a target NNN phase phi = phi_target and a
floor j1/j0 >= r_threshold on the NN rate.  R is invariant under
rescaling of omega and j0, so candidates are evaluated at omega = j0 = 1.

Method: multistart derivative-free simplex descent on a quadratically
penalized objective, with two penalty-escalation rounds (x100 each).
Starts come from a seeded scrambled Sobol sequence over the box
(amplitudes in [0, bound], phases in (-pi, pi]), so identical problem +
seed reproduce identical results bit for bit.  Starts are independent
tasks; the reduction picks the best feasible point with a lexicographic
tie-break on p, independent of execution order.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize as _sciopt
from scipy.stats import qmc

from .drive import build_family_drive, default_geometry, fourier_components
from .effective import derive_rates

#: penalty weights (phi, feasibility) per escalation round, with the
#: simplex convergence tolerances (xatol, fatol) tightening alongside
RHO_SCHEDULE = ((1e4, 1e4, 1e-6, 1e-9),
                (1e6, 1e6, 1e-8, 1e-11),
                (1e8, 1e8, 1e-11, 1e-13))

#: slack added to the j1 threshold inside the penalty so the converged
#: point lands strictly feasible rather than a hair below the constraint
FEAS_MARGIN = 1e-6

#: stiffness of the amplitude box penalty
RHO_BOX = 1e8


def worker_count() -> int:
    """Worker hint: FCF_THREADS env var, else all available cores."""
    env = os.environ.get("FCF_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def wrap_angle(x):
    """Wrap to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(x), 2 * np.pi)


@dataclass(frozen=True)
class OptimizationProblem:
    phi_target: float
    r_threshold: float
    family: str = "plus"
    N: int = 2
    amp_bound: float = 5.0
    n_starts: int = 64
    seed: int = 0
    phi_tol: float = 1e-3
    feas_tol: float = 1e-9
    max_iter: int = 600

    def __post_init__(self):
        if not 0.0 <= self.r_threshold <= 1.0:
            raise ValueError("r_threshold must lie in [0, 1]")
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.family not in ("plus", "minus"):
            raise ValueError("optimization families are 'plus' and 'minus'")

    @property
    def dim(self) -> int:
        return 2 * self.N - 1


@dataclass
class OptimizationResult:
    p_star: np.ndarray
    R_value: float
    j1_over_j0: float
    phi_achieved: float
    feasible: bool
    starts_converged: int
    best_per_start: list = field(default_factory=list)
    phi_residual: float = 0.0
    r_residual: float = 0.0


def _params(p, N):
    """Split p into (amps, deltas) with delta_1 = 0 and deltas wrapped."""
    p = np.asarray(p, dtype=float)
    amps = p[:N]
    deltas = np.concatenate(([0.0], wrap_angle(p[N:])))
    return amps, deltas


def _candidate_rates(family, N, p):
    """(R, j1/j0, phi, phi_defined, j2) at omega = j0 = 1."""
    amps, deltas = _params(p, N)
    spec = build_family_drive(family, 1.0, amps, deltas)
    rates = derive_rates(fourier_components(spec, default_geometry(), 1.0))
    if not (rates.isotropic_nn and rates.isotropic_nnn):
        raise AssertionError(
            f"family {family!r} drive broke isotropy (residuals {rates.residual_nn:.2e}, "
            f"{rates.residual_nnn:.2e}); this cannot happen for plus/minus drives")
    R = rates.j2 / rates.j1 if rates.j1 > 0 else math.inf
    return R, rates.j1, rates.phi, rates.phi_defined, rates.j2


def evaluate_candidate(family: str, N: int, p):
    """(R, j1_over_j0, phi) for a parameter vector; phi is NaN when the
    NNN rate vanishes (no phase constraint can then be met)."""
    R, j1, phi, defined, _ = _candidate_rates(family, N, p)
    return R, j1, (phi if defined else math.nan)


def _penalized(p, problem: OptimizationProblem, rho_phi: float, rho_feas: float) -> float:
    """-R plus quadratic penalties.

    The merit ratio uses j1 clamped at half the threshold: the true R
    diverges as j1 -> 0, which no finite quadratic penalty could
    dominate; the clamp is inactive anywhere near the feasible set.
    """
    R, j1, phi, defined, j2 = _candidate_rates(problem.family, problem.N, p)
    floor = 0.5 * problem.r_threshold if problem.r_threshold > 0 else 1e-9
    merit = j2 / max(j1, floor)
    pen = rho_phi * (wrap_angle(phi - problem.phi_target) ** 2 if defined else np.pi ** 2)
    violation = (problem.r_threshold + FEAS_MARGIN) - j1
    if violation > 0:
        pen += rho_feas * violation ** 2
    for A in np.asarray(p[:problem.N]):
        excess = abs(A) - problem.amp_bound
        if excess > 0:
            pen += RHO_BOX * excess ** 2
    return -merit + pen


def _canonical(p, N):
    """Canonical representative of a parameter vector's gauge class.

    Three exact redundancies are quotiented out: a half-period time shift
    (negates the amplitudes of odd harmonic integers, used to make A_1
    nonnegative), per-harmonic amplitude sign flips absorbed into the
    phase lags (A_n >= 0 for n >= 2), and the reflection
    delta_n -> pi - delta_n applied to every free phase at once (pins
    delta_2 into [-pi/2, pi/2]).  All leave (R, j1/j0, phi) invariant.
    """
    from .drive import family_harmonic_integer
    p = np.array(p, dtype=float)
    p[N:] = wrap_angle(p[N:])
    if p[0] < 0:
        for n in range(N):
            if family_harmonic_integer(n + 1) % 2 == 1:
                p[n] = -p[n]
    for n in range(1, N):
        if p[n] < 0:
            p[n] = -p[n]
            p[N + n - 1] = wrap_angle(p[N + n - 1] + np.pi)
    if N >= 2 and not -np.pi / 2 <= p[N] <= np.pi / 2:
        p[N:] = wrap_angle(np.pi - p[N:])
    return p


def _run_start(args):
    """Penalty-escalated simplex descent from one start point."""
    problem, x0 = args
    x = np.asarray(x0, dtype=float)
    converged = False
    for rho_phi, rho_feas, xatol, fatol in RHO_SCHEDULE:
        res = _sciopt.minimize(
            _penalized, x, args=(problem, rho_phi, rho_feas),
            method="Nelder-Mead",
            options={"maxiter": problem.max_iter, "xatol": xatol,
                     "fatol": fatol, "adaptive": True})
        x = res.x
        converged = bool(res.success)
    p = _canonical(x, problem.N)
    R, j1, phi, defined, _ = _candidate_rates(problem.family, problem.N, p)
    phi_res = abs(float(wrap_angle(phi - problem.phi_target))) if defined else np.pi
    r_res = max(0.0, problem.r_threshold - j1)
    amps_ok = bool(np.all(np.abs(p[:problem.N]) <= problem.amp_bound + 1e-9))
    feasible = (defined and phi_res <= problem.phi_tol
                and j1 >= problem.r_threshold - problem.feas_tol and amps_ok)
    return {"p": p, "R": R, "j1": j1, "phi": phi, "feasible": feasible,
            "converged": converged, "phi_residual": phi_res, "r_residual": r_res}


def sobol_starts(problem: OptimizationProblem) -> np.ndarray:
    """Seeded low-discrepancy start points over the search box."""
    import warnings
    sampler = qmc.Sobol(d=problem.dim, scramble=True, seed=problem.seed)
    with warnings.catch_warnings():
        # Sobol balance only matters for integration, not for start spreading
        warnings.simplefilter("ignore", UserWarning)
        u = sampler.random(problem.n_starts)
    lo = np.concatenate((np.zeros(problem.N), np.full(problem.N - 1, -np.pi)))
    hi = np.concatenate((np.full(problem.N, problem.amp_bound), np.full(problem.N - 1, np.pi)))
    return lo + u * (hi - lo)


def maximize(problem: OptimizationProblem, workers: int | None = None) -> OptimizationResult:
    """Multistart maximization of R under the phase and NN-rate constraints.

    Returns the best feasible point, or the smallest-residual point
    flagged infeasible when no start satisfies the constraints.
    """
    starts = sobol_starts(problem)
    tasks = [(problem, x0) for x0 in starts]
    workers = worker_count() if workers is None else max(1, workers)
    if workers > 1 and problem.n_starts >= 2 * workers:
        import multiprocessing as mp
        with mp.get_context("fork").Pool(workers) as pool:
            # fine-grained chunks: starts vary widely in iteration count
            records = pool.map(_run_start, tasks, chunksize=1)
    else:
        records = [_run_start(t) for t in tasks]

    feas = [r for r in records if r["feasible"]]
    if feas:
        best = min(feas, key=lambda r: (-r["R"], tuple(r["p"])))
        feasible = True
    else:
        best = min(records, key=lambda r: (r["phi_residual"] + r["r_residual"], tuple(r["p"])))
        feasible = False
    return OptimizationResult(
        p_star=best["p"], R_value=best["R"], j1_over_j0=best["j1"],
        phi_achieved=best["phi"], feasible=feasible,
        starts_converged=sum(r["converged"] for r in records),
        best_per_start=records,
        phi_residual=best["phi_residual"], r_residual=best["r_residual"])


def random_search_best(problem: OptimizationProblem, n_samples: int, seed: int = 0) -> float:
    """Best R among uniformly sampled feasible points on the search box;
    -inf when no sample is feasible.  Serves as an optimality floor for
    the multistart result."""
    rng = np.random.default_rng(seed)
    lo = np.concatenate((np.zeros(problem.N), np.full(problem.N - 1, -np.pi)))
    hi = np.concatenate((np.full(problem.N, problem.amp_bound), np.full(problem.N - 1, np.pi)))
    best = -math.inf
    for _ in range(n_samples):
        p = lo + rng.random(problem.dim) * (hi - lo)
        R, j1, phi, defined, _ = _candidate_rates(problem.family, problem.N, p)
        if (defined and abs(wrap_angle(phi - problem.phi_target)) <= problem.phi_tol
                and j1 >= problem.r_threshold):
            best = max(best, R)
    return best


# ---------------------------------------------------------------------------
# Target sweeps (polar R e^{i phi_tg} data) and discontinuity detection

@dataclass
class SweepResult:
    rows: list                 # (phi_target, r_th, OptimizationResult)
    jumps: dict                # r_th -> list of (gap_index, jump_norm)

    def iter_rows(self):
        for phi_tg, r_th, res in self.rows:
            yield phi_tg, r_th, res


def _param_jump(p_a, p_b, N):
    """Distance between parameter vectors in the complex-harmonic
    representation A_n exp(-i delta_n): phases are weighted by their
    amplitudes, so the undefined phase of a vanishing harmonic carries
    no spurious distance."""
    def z(p):
        p = np.asarray(p, dtype=float)
        return p[:N] * np.exp(-1j * np.concatenate(([0.0], p[N:])))
    return float(np.linalg.norm(z(p_b) - z(p_a)))


def sweep_targets(phi_targets, r_thresholds, template: OptimizationProblem,
                  workers: int | None = None) -> SweepResult:
    """One maximization per (phi_target, r_threshold).

    Parameter jumps between adjacent targets exceeding 10x the median
    jump for that threshold are recorded as discontinuities.
    """
    phi_targets = list(phi_targets)
    r_thresholds = list(r_thresholds)
    if not phi_targets or not r_thresholds:
        raise ValueError("target lists must be nonempty")
    rows = []
    jumps = {}
    for r_th in r_thresholds:
        series = []
        for phi_tg in phi_targets:
            problem = OptimizationProblem(
                phi_target=phi_tg, r_threshold=r_th, family=template.family,
                N=template.N, amp_bound=template.amp_bound,
                n_starts=template.n_starts, seed=template.seed,
                phi_tol=template.phi_tol, feas_tol=template.feas_tol,
                max_iter=template.max_iter)
            res = maximize(problem, workers=workers)
            rows.append((phi_tg, r_th, res))
            series.append(res)
        ds = [_param_jump(series[i].p_star, series[i + 1].p_star, template.N)
              for i in range(len(series) - 1)]
        med = float(np.median(ds)) if ds else 0.0
        jumps[r_th] = [(i, d) for i, d in enumerate(ds) if d > max(10 * med, 1e-6)]
    return SweepResult(rows=rows, jumps=jumps)


# ---------------------------------------------------------------------------
# Phase map over (A1, A2) at fixed delta_2

@dataclass(frozen=True)
class PhaseMap:
    """Achieved NNN phase and NN ratio over an amplitude grid (N = 2,
    fixed delta_2).  phi is NaN where the NNN rate vanishes."""

    A1: np.ndarray
    A2: np.ndarray
    delta2: float
    family: str
    phi: np.ndarray
    j1_over_j0: np.ndarray

    def phase_bin_coverage(self, nbins: int = 64) -> float:
        """Fraction of uniform (-pi, pi] bins containing an achieved phi."""
        vals = self.phi[~np.isnan(self.phi)]
        idx = np.clip(((vals + np.pi) / (2 * np.pi) * nbins).astype(int), 0, nbins - 1)
        return len(np.unique(idx)) / nbins

    def superlevel_components(self, level: float) -> int:
        """Number of connected components (4-neighbor) of j1/j0 >= level."""
        from scipy import ndimage
        _, n = ndimage.label(self.j1_over_j0 >= level)
        return int(n)

    def level_segments(self, level: float):
        """Contour of j1/j0 = level as short line segments in (A1, A2)."""
        from .svg import marching_squares
        return marching_squares(self.A1, self.A2, self.j1_over_j0, level)

    def rows(self):
        for i, A1 in enumerate(self.A1):
            for j, A2 in enumerate(self.A2):
                yield (float(A1), float(A2), float(self.phi[i, j]),
                       float(self.j1_over_j0[i, j]),
                       int(not np.isnan(self.phi[i, j])))


def phase_map(A1_values, A2_values, delta2: float, family: str = "plus") -> PhaseMap:
    """Evaluate phi and j1/j0 on an (A1, A2) grid for an N = 2 drive."""
    A1_values = np.asarray(A1_values, dtype=float)
    A2_values = np.asarray(A2_values, dtype=float)
    phi = np.full((len(A1_values), len(A2_values)), np.nan)
    r = np.zeros_like(phi)
    for i, A1 in enumerate(A1_values):
        for j, A2 in enumerate(A2_values):
            R, j1, ph, defined, _ = _candidate_rates(family, 2, [A1, A2, delta2])
            r[i, j] = j1
            if defined:
                phi[i, j] = ph
    return PhaseMap(A1=A1_values.copy(), A2=A2_values.copy(), delta2=float(delta2),
                    family=family, phi=phi, j1_over_j0=r)
