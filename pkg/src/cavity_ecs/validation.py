"""Self-checks: closed form vs matrix exponential, invariants, and the Fock oracle."""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np

from . import fock_oracle as fo
from .cat_dynamics import (
    CatStateSpec,
    CoherenceModel,
    even_cat_photons,
    mean_cavity_photons,
    odd_cat_photons,
    reduced_exciton_state,
)
from .propagator import SystemParams, mode_coefficients, propagator_numeric
from .qubit_witness import Target, check_qubit_state, encode_qubits, fidelity_squared

__all__ = [
    "Level",
    "CheckResult",
    "ValidationReport",
    "random_params",
    "check_propagator_equivalence",
    "check_unitarity",
    "check_photon_formulas",
    "check_encoding",
    "check_single_excitation_sector",
    "check_oracle_closed",
    "check_oracle_lindblad",
    "validate",
]

SEED = 20240611


class Level(str, enum.Enum):
    FAST = "fast"
    FULL = "full"


@dataclass
class CheckResult:
    name: str
    measured: float
    required: float
    passed: bool
    detail: str = ""
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"  {self.detail}" if self.detail else ""
        return f"[{status}] {self.name}: measured {self.measured:.3e}, required < {self.required:.0e}{extra}"


@dataclass
class ValidationReport:
    level: Level
    checks: list = field(default_factory=list)
    favored_model: CoherenceModel | None = None
    model_distances: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        out = [c.line() for c in self.checks]
        if self.favored_model is not None:
            d = self.model_distances
            other = [m for m in d if m is not self.favored_model][0]
            out.append(
                f"oracle favours {self.favored_model.value}: max trace distance "
                f"{d[self.favored_model]:.3e} vs {other.value} {d[other]:.3e} "
                f"(margin x{d[other] / max(d[self.favored_model], 1e-300):.1f})"
            )
        out.append(f"{sum(c.passed for c in self.checks)}/{len(self.checks)} checks passed")
        return out


def _timed(fn):
    def wrapper(*args, **kwargs):
        start = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - start
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def random_params(rng: np.random.Generator) -> SystemParams:
    """A parameter draw covering resonant, detuned and lossy regimes."""
    return SystemParams(
        omega_c=rng.uniform(-5, 5),
        delta=rng.uniform(-600, 600),
        g=50.0 - rng.uniform(0, 49.999),
        c_hop=rng.uniform(0, 5),
        gamma_c=rng.uniform(0, 0.2),
        gamma_e=rng.uniform(0, 0.2),
    )


def _draws(n: int):
    rng = np.random.default_rng(SEED)
    return [(random_params(rng), rng.uniform(0, 1)) for _ in range(n)]


@_timed
def check_propagator_equivalence(n_draws: int = 200, tol: float = 1e-9, omit_prefactor: bool = False) -> CheckResult:
    """Closed-form entries vs ``exp(-iMt)``, closed and lossy."""
    worst = 0.0
    for params, t in _draws(n_draws):
        for dissipative in (False, True):
            closed = mode_coefficients(params, t, dissipative, omit_coupling_prefactor=omit_prefactor).matrix()
            worst = max(worst, float(np.abs(closed - propagator_numeric(params, t, dissipative)).max()))
    return CheckResult("propagator equivalence", worst, tol, worst < tol, f"{n_draws} draws x 2")


@_timed
def check_unitarity(n_draws: int = 200, tol: float = 1e-12) -> CheckResult:
    worst = 0.0
    for params, t in _draws(n_draws):
        u = mode_coefficients(params, t).matrix()
        worst = max(worst, float(np.abs(u @ u.conj().T - np.eye(6)).max()), float(np.abs(u - u.T).max()))
    return CheckResult("unitarity and symmetry", worst, tol, worst < tol, f"{n_draws} draws")


@_timed
def check_photon_formulas(n_points: int = 1000, tol: float = 1e-12) -> CheckResult:
    """General photon number vs the even/odd cat closed expressions."""
    worst = 0.0
    for delta in (0.0, -500.0):
        params = SystemParams(delta=delta)
        t = np.linspace(0, 3 if delta == 0 else 600, n_points)
        coeffs = mode_coefficients(params, t)
        for alpha in (0.01, 0.5, 2.0):
            even = mean_cavity_photons(params, CatStateSpec.symmetric(alpha, 0.0), t)
            odd = mean_cavity_photons(params, CatStateSpec.symmetric(alpha, np.pi), t)
            worst = max(
                worst,
                float(np.abs(even - even_cat_photons(alpha, coeffs)).max()),
                float(np.abs(odd - odd_cat_photons(alpha, coeffs)).max()),
            )
    return CheckResult("photon number reduction", worst, tol, worst < tol, f"{n_points}-point grids")


@_timed
def check_encoding(tol: float = 1e-10) -> CheckResult:
    """Encoded 8x8 states are valid density matrices, with and without loss."""
    worst = 0.0
    lossy = SystemParams(gamma_c=0.05, gamma_e=0.001)
    cases = [
        (SystemParams(), CatStateSpec.symmetric(2.0), False, CoherenceModel.DILATION_CONSISTENT),
        (SystemParams(delta=-500), CatStateSpec.symmetric(0.01, np.pi), False, CoherenceModel.DILATION_CONSISTENT),
        (lossy, CatStateSpec.symmetric(2.0), True, CoherenceModel.DILATION_CONSISTENT),
        (lossy, CatStateSpec.symmetric(2.0), True, CoherenceModel.CAVITY_ONLY),
    ]
    for params, cat, diss, model in cases:
        for t in np.linspace(0, 5, 11):
            rho = encode_qubits(reduced_exciton_state(params, cat, t, diss, model))
            check_qubit_state(rho)
            for target in Target:
                f = fidelity_squared(rho, target)
                worst = max(worst, -f, f - 1)
            worst = max(worst, abs(np.trace(rho).real - 1))
    return CheckResult("qubit encoding validity", max(worst, 0.0), tol, worst < tol)


@_timed
def check_single_excitation_sector(tol: float = 1e-10) -> CheckResult:
    """One excitation in b1: Fock evolution reproduces the 6x6 propagator column."""
    worst = 0.0
    basis = fo.build_basis(1)
    for params in (SystemParams(), SystemParams(delta=-500, omega_c=2.0, c_hop=1.5)):
        psi = np.zeros(basis.dim, dtype=complex)
        psi[basis.index((0, 0, 0, 1, 0, 0))] = 1
        state = fo.OracleState(basis, 0.0, vector=psi)
        for t in (0.1, 0.7, 3.3):
            out = fo.evolve_closed(params, state, t)
            amps = np.array([out.vector[basis.index(tuple(int(k == m) for k in range(6)))] for m in range(6)])
            worst = max(worst, float(np.abs(amps - propagator_numeric(params, t)[:, 3]).max()))
    return CheckResult("single-excitation sector", worst, tol, worst < tol)


@_timed
def check_oracle_closed(alpha: float = 0.5, n_max: int = 10, n_times: int = 20, tol: float = 1e-6) -> CheckResult:
    """Six-mode Fock evolution reduced to the excitons vs the coherent-state formula."""
    params = SystemParams()
    cat = CatStateSpec.symmetric(alpha)
    basis = fo.build_basis(n_max, "full")
    psi0 = fo.cat_initial_vector(cat, basis)
    worst = 0.0
    for t in np.linspace(0.1, 6.0, n_times):
        reduced = fo.reduce_to_excitons(fo.evolve_closed(params, psi0, t))
        closed = fo.closed_form_exciton_fock(reduced_exciton_state(params, cat, t), n_max)
        worst = max(worst, fo.trace_distance(reduced, closed))
    return CheckResult("oracle closed trace distance", worst, tol, worst < tol, f"alpha={alpha}, n_max={n_max}")


def oracle_lindblad_distances(
    params: SystemParams | None = None, alpha: float = 0.5, times=None, dt_fraction: float = 1 / 8
):
    """Lindblad trace distances for both coherence models, plus integrator health.

    Runs on the symmetric four-mode layout (exact for this initial state).
    Returns ``(times, {model: distances}, min_eigenvalue, max_trace_error)``.
    """
    params = params or SystemParams(gamma_c=0.05, gamma_e=0.001)
    cat = CatStateSpec.symmetric(alpha)
    n_max = fo.required_n_max(cat)
    basis = fo.build_basis(n_max, "symmetric")
    times = np.linspace(0.25, 2.5, 10) if times is None else np.asarray(times, float)
    integ = fo.LindbladIntegrator(params, basis, dt=fo.max_lindblad_step(params) * dt_fraction)
    states = integ.trajectory(fo.cat_initial_vector(cat, basis), times)
    dist = {m: [] for m in CoherenceModel}
    min_eig, trace_err = np.inf, 0.0
    for st in states:
        rho = st.density
        min_eig = min(min_eig, float(np.linalg.eigvalsh(rho).min()))
        trace_err = max(trace_err, abs(np.trace(rho).real - 1))
        reduced = fo.reduce_to_excitons(st)
        for model in CoherenceModel:
            closed = fo.closed_form_exciton_fock(
                reduced_exciton_state(params, cat, st.t, True, model), n_max, "symmetric"
            )
            dist[model].append(fo.trace_distance(reduced, closed))
    return times, {m: np.array(v) for m, v in dist.items()}, min_eig, trace_err


def check_oracle_lindblad(tol: float = 1e-4):
    """Returns the check result and the per-model maximum distances."""
    start = time.perf_counter()
    _, dist, min_eig, trace_err = oracle_lindblad_distances()
    worst = {m: float(v.max()) for m, v in dist.items()}
    d = worst[CoherenceModel.DILATION_CONSISTENT]
    res = CheckResult(
        "oracle Lindblad trace distance (dilation_consistent)",
        d,
        tol,
        d < tol,
        f"cavity_only {worst[CoherenceModel.CAVITY_ONLY]:.3e}; min eigenvalue {min_eig:.1e}; "
        f"trace error {trace_err:.1e}",
    )
    res.seconds = time.perf_counter() - start
    return res, worst


def validate(level: Level | str = Level.FAST, *, omit_prefactor: bool = False, progress=None) -> ValidationReport:
    """Run the check suite. ``omit_prefactor`` swaps in the unscaled ``u21``/``u22`` prefactor."""
    level = Level(level)
    report = ValidationReport(level)
    steps = [
        lambda: check_propagator_equivalence(omit_prefactor=omit_prefactor),
        check_unitarity,
        check_photon_formulas,
        check_encoding,
        check_single_excitation_sector,
    ]
    if level is Level.FULL:
        steps.append(check_oracle_closed)
    for step in steps:
        res = step()
        report.checks.append(res)
        if progress:
            progress(res.line())
    if level is Level.FULL:
        res, worst = check_oracle_lindblad()
        report.checks.append(res)
        report.model_distances = worst
        report.favored_model = min(worst, key=worst.get)
        if progress:
            progress(res.line())
    return report
