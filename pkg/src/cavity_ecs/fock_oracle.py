"""Brute-force check of the coherent-state results in a truncated Fock space.

The Hamiltonian conserves the total excitation number and photon/exciton
loss only lowers it, so truncating at ``n_max`` total excitations is exact for
everything below the cut; the only error is the Poisson tail of the initial
cat. States are ordered by total excitation, then lexicographically, so each
excitation sector is a contiguous block.

Two mode layouts exist. ``"full"`` holds the six physical modes
``(a1, a2, a3, b1, b2, b3)``. ``"symmetric"`` keeps ``(a1, a_s, b1, b_s)``
with ``a_s = (a2 + a3)/sqrt(2)``: the antisymmetric combinations couple only
to each other, start empty and decay with the same rates as every other mode,
so they stay in vacuum and can be dropped without approximation. The
symmetric layout makes density-matrix integration at moderate ``n_max`` cheap.
"""
from __future__ import annotations

import functools
import math
import os
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.stats import poisson

from .cat_dynamics import CatStateSpec, ReducedExcitonState, coherent_overlap, normalization
from .propagator import SystemParams, aux_frequencies
from .qubit_witness import Target

__all__ = [
    "OracleError",
    "OracleMemoryError",
    "OracleTruncationError",
    "OracleStepError",
    "TruncatedBasis",
    "OracleState",
    "LAYOUTS",
    "memory_budget",
    "build_basis",
    "quadratic_operator",
    "annihilation",
    "build_hamiltonian",
    "loss_operators",
    "required_n_max",
    "cat_initial_vector",
    "ClosedEvolver",
    "evolve_closed",
    "LindbladIntegrator",
    "max_lindblad_step",
    "evolve_lindblad",
    "reduce_to_excitons",
    "exciton_layout_amplitudes",
    "closed_form_exciton_fock",
    "encoded_fidelity",
    "trace_distance",
    "mode_occupations",
    "mode_means",
]

BUDGET_ENV = "CAVITY_ECS_ORACLE_BUDGET"
DEFAULT_BUDGET = 2 * 1024**3
TAIL_TOL = 1e-10


class OracleError(RuntimeError):
    pass


class OracleMemoryError(OracleError):
    def __init__(self, dim: int, needed: int, budget: int):
        super().__init__(
            f"truncated basis of {dim} states needs {needed} bytes per dense operator, "
            f"over the budget of {budget} bytes (set {BUDGET_ENV} to change it)"
        )
        self.dim = dim
        self.needed = needed
        self.budget = budget


class OracleTruncationError(OracleError):
    pass


class OracleStepError(OracleError):
    pass


# name -> (number of modes, cavity modes, exciton modes)
LAYOUTS = {
    "full": (6, (0, 1, 2), (3, 4, 5)),
    "symmetric": (4, (0, 1), (2, 3)),
    "excitons": (3, (), (0, 1, 2)),
    "symmetric_excitons": (2, (), (0, 1)),
}
_EXCITON_LAYOUT = {"full": "excitons", "symmetric": "symmetric_excitons"}


def memory_budget() -> int:
    return int(os.environ.get(BUDGET_ENV, DEFAULT_BUDGET))


def _compositions(n: int, m: int):
    if m == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, m - 1):
            yield (first,) + rest


@dataclass(frozen=True, eq=False)
class TruncatedBasis:
    n_max: int
    layout: str
    states: np.ndarray
    sector_starts: tuple

    @property
    def dim(self) -> int:
        return self.states.shape[0]

    @property
    def n_modes(self) -> int:
        return self.states.shape[1]

    @property
    def cavity_modes(self) -> tuple:
        return LAYOUTS[self.layout][1]

    @property
    def exciton_modes(self) -> tuple:
        return LAYOUTS[self.layout][2]

    def sector(self, n: int) -> slice:
        return slice(self.sector_starts[n], self.sector_starts[n + 1])

    @functools.cached_property
    def _keys(self):
        keys = self.states @ (self.n_max + 1) ** np.arange(self.n_modes)
        order = np.argsort(keys)
        return keys[order], order

    def lookup(self, states: np.ndarray) -> np.ndarray:
        """Indices of occupation tuples (rows of ``states``); -1 where absent."""
        states = np.atleast_2d(states)
        sorted_keys, order = self._keys
        valid = np.all(states >= 0, axis=1) & (states.sum(axis=1) <= self.n_max)
        keys = np.where(valid[:, None], states, 0) @ (self.n_max + 1) ** np.arange(self.n_modes)
        pos = np.clip(np.searchsorted(sorted_keys, keys), 0, len(sorted_keys) - 1)
        found = valid & (sorted_keys[pos] == keys)
        return np.where(found, order[pos], -1)

    def index(self, occupation) -> int:
        i = int(self.lookup(np.asarray(occupation)[None, :])[0])
        if i < 0:
            raise KeyError(occupation)
        return i


@functools.lru_cache(maxsize=32)
def _cached_basis(n_max: int, layout: str) -> TruncatedBasis:
    n_modes = LAYOUTS[layout][0]
    rows, starts = [], [0]
    for n in range(n_max + 1):
        rows.extend(_compositions(n, n_modes))
        starts.append(len(rows))
    return TruncatedBasis(n_max, layout, np.array(rows, dtype=np.int64).reshape(-1, n_modes), tuple(starts))


def build_basis(n_max: int, layout: str = "full", budget: int | None = None) -> TruncatedBasis:
    """All occupation tuples with total excitation at most ``n_max``.

    Refuses (``OracleMemoryError``) when one dense complex operator on the
    basis would exceed the memory budget.
    """
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    if layout not in LAYOUTS:
        raise ValueError(f"unknown layout {layout!r}")
    dim = math.comb(n_max + LAYOUTS[layout][0], LAYOUTS[layout][0])
    budget = memory_budget() if budget is None else budget
    needed = dim * dim * 16
    if needed > budget:
        raise OracleMemoryError(dim, needed, budget)
    return _cached_basis(n_max, layout)


def quadratic_operator(basis: TruncatedBasis, terms) -> sp.csr_matrix:
    """Sparse matrix of ``sum coef * c_i^dag c_j`` over ``terms = [(coef, i, j), ...]``."""
    states = basis.states
    rows, cols, vals = [], [], []
    for coef, i, j in terms:
        if coef == 0:
            continue
        if i == j:
            idx = np.arange(basis.dim)
            rows.append(idx)
            cols.append(idx)
            vals.append(coef * states[:, i].astype(complex))
            continue
        src = np.flatnonzero(states[:, j] > 0)
        moved = states[src].copy()
        amp = np.sqrt(moved[:, j] * (moved[:, i] + 1.0))
        moved[:, j] -= 1
        moved[:, i] += 1
        dst = basis.lookup(moved)
        keep = dst >= 0
        rows.append(dst[keep])
        cols.append(src[keep])
        vals.append(coef * amp[keep])
    if not rows:
        return sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(basis.dim, basis.dim),
        dtype=complex,
    )


def annihilation(basis: TruncatedBasis, mode: int) -> sp.csr_matrix:
    states = basis.states
    src = np.flatnonzero(states[:, mode] > 0)
    lowered = states[src].copy()
    amp = np.sqrt(lowered[:, mode].astype(float))
    lowered[:, mode] -= 1
    dst = basis.lookup(lowered)
    return sp.csr_matrix((amp.astype(complex), (dst, src)), shape=(basis.dim, basis.dim))


def _hamiltonian_terms(params: SystemParams, layout: str):
    wc, we, g, c = params.omega_c, params.omega_c - params.delta, params.g, params.c_hop
    if layout == "full":
        terms = [(wc, i, i) for i in range(3)] + [(we, i, i) for i in range(3, 6)]
        for i in range(3):
            terms += [(g, 3 + i, i), (g, i, 3 + i)]
            k = (i + 1) % 3
            terms += [(c, i, k), (c, k, i)]
        return terms
    if layout == "symmetric":
        # a2^dag a3 + a3^dag a2 = a_s^dag a_s - a_d^dag a_d ; a1^dag (a2 + a3) = sqrt(2) a1^dag a_s
        s = np.sqrt(2.0) * c
        return [
            (wc, 0, 0), (wc + c, 1, 1), (we, 2, 2), (we, 3, 3),
            (g, 2, 0), (g, 0, 2), (g, 3, 1), (g, 1, 3),
            (s, 0, 1), (s, 1, 0),
        ]  # fmt: skip
    raise ValueError(f"no Hamiltonian for layout {layout!r}")


def build_hamiltonian(params: SystemParams, basis: TruncatedBasis) -> sp.csr_matrix:
    """Hamiltonian of the three cavities and dots in the occupation basis.

    ``wc sum a^dag a + (wc - delta) sum b^dag b + g sum (b^dag a + a^dag b)
    + c sum_cyclic (a_i^dag a_{i+1} + h.c.)``.
    """
    h = quadratic_operator(basis, _hamiltonian_terms(params, basis.layout))
    return ((h + h.conj().T) * 0.5).tocsr()


def loss_operators(params: SystemParams, basis: TruncatedBasis) -> list:
    """Jump operators ``sqrt(gamma_c) a_i`` and ``sqrt(gamma_e) b_i`` (zero rates skipped)."""
    ops = []
    for modes, rate in ((basis.cavity_modes, params.gamma_c), (basis.exciton_modes, params.gamma_e)):
        if rate > 0:
            ops += [np.sqrt(rate) * annihilation(basis, m) for m in modes]
    return ops


def required_n_max(cat: CatStateSpec, tail_tol: float = TAIL_TOL) -> int:
    """Smallest cut whose Poisson tail is below ``tail_tol`` for both branches."""
    lam = max(abs(cat.alpha1), abs(cat.alpha2)) ** 2
    n = 0
    while poisson.sf(n, lam) >= tail_tol:
        n += 1
    return n


@dataclass
class OracleState:
    """Pure state (``vector``) or density matrix (``density``) on a basis."""

    basis: TruncatedBasis
    t: float
    vector: np.ndarray | None = None
    density: np.ndarray | None = None

    def density_matrix(self) -> np.ndarray:
        if self.density is not None:
            return self.density
        return np.outer(self.vector, self.vector.conj())


def _coherent_fock(beta: complex, n_max: int) -> np.ndarray:
    # e^{-|beta|^2/2} beta^n / sqrt(n!) by recursion, exact in sign for real beta
    out = np.empty(n_max + 1, dtype=complex)
    out[0] = np.exp(-0.5 * abs(beta) ** 2)
    for n in range(1, n_max + 1):
        out[n] = out[n - 1] * beta / np.sqrt(n)
    return out


def cat_initial_vector(
    cat: CatStateSpec, basis: TruncatedBasis, tail_tol: float = TAIL_TOL
) -> OracleState:
    """Fock expansion of the cat prepared in exciton 1, all other modes empty."""
    norm = normalization(cat)
    lam = max(abs(cat.alpha1), abs(cat.alpha2)) ** 2
    tail = poisson.sf(basis.n_max, lam)
    if tail >= tail_tol:
        raise OracleTruncationError(
            f"Poisson tail {tail:.2e} beyond n_max={basis.n_max} exceeds {tail_tol:g}; "
            f"use n_max >= {required_n_max(cat, tail_tol)}"
        )
    amps = _coherent_fock(complex(cat.alpha1), basis.n_max) + np.exp(1j * cat.theta) * _coherent_fock(
        complex(cat.alpha2), basis.n_max
    )
    occ = np.zeros((basis.n_max + 1, basis.n_modes), dtype=np.int64)
    occ[:, basis.exciton_modes[0]] = np.arange(basis.n_max + 1)
    vec = np.zeros(basis.dim, dtype=complex)
    vec[basis.lookup(occ)] = amps / np.sqrt(norm)
    return OracleState(basis, 0.0, vector=vec / np.linalg.norm(vec))


class ClosedEvolver:
    """``exp(-iHt)`` applied sector by sector, each sector diagonalised once."""

    def __init__(self, params: SystemParams, basis: TruncatedBasis):
        self.basis = basis
        h = build_hamiltonian(params, basis)
        self._eig = []
        for n in range(basis.n_max + 1):
            sl = basis.sector(n)
            block = h[sl, sl].toarray()
            if not np.any(block.imag):
                block = block.real  # real symmetric eigh is several times faster
            self._eig.append((sl, *np.linalg.eigh(block)))

    def evolve(self, psi0: OracleState, t: float) -> OracleState:
        if psi0.vector is None:
            raise ValueError("closed evolution takes a pure state")
        out = np.empty_like(psi0.vector)
        for sl, w, v in self._eig:
            out[sl] = v @ (np.exp(-1j * w * t) * (v.conj().T @ psi0.vector[sl]))
        return OracleState(self.basis, psi0.t + t, vector=out)


@functools.lru_cache(maxsize=8)
def _closed_evolver(params: SystemParams, n_max: int, layout: str) -> ClosedEvolver:
    return ClosedEvolver(params, build_basis(n_max, layout))


def evolve_closed(params: SystemParams, psi0: OracleState, t: float) -> OracleState:
    return _closed_evolver(params, psi0.basis.n_max, psi0.basis.layout).evolve(psi0, t)


def max_lindblad_step(params: SystemParams) -> float:
    """Largest admissible RK4 step: ``0.1 / max(|A|, |B|, gamma_c, gamma_e, |wc|, |we|)``."""
    aux = aux_frequencies(params)
    scale = max(
        abs(aux.a_freq), abs(aux.b_freq), params.gamma_c, params.gamma_e,
        abs(params.omega_c), abs(params.omega_c - params.delta),
    )  # fmt: skip
    return 0.1 / scale if scale > 0 else np.inf


class LindbladIntegrator:
    """Classical RK4 for ``d rho/dt = -i[H, rho] + sum_k (2 L rho L^dag - L^dag L rho - rho L^dag L)``.

    The dissipator normalisation makes amplitudes decay as ``exp(-gamma t)``
    and populations as ``exp(-2 gamma t)``. Written as
    ``-i(H_eff rho - rho H_eff^dag) + 2 sum L rho L^dag`` with
    ``H_eff = H - i sum L^dag L``.
    """

    def __init__(self, params: SystemParams, basis: TruncatedBasis, dt: float | None = None):
        limit = max_lindblad_step(params)
        if dt is None:
            dt = limit / 8
        if dt > limit * (1 + 1e-12):
            raise OracleStepError(f"dt={dt:g} exceeds the stability/accuracy limit {limit:g}")
        self.dt = dt
        self.basis = basis
        h = build_hamiltonian(params, basis)
        self.jumps = loss_operators(params, basis)
        decay = sum((l.conj().T @ l for l in self.jumps), sp.csr_matrix(h.shape, dtype=complex))
        self.h_eff = (h - 1j * decay).tocsr()
        self._restricted = {}

    def rhs(self, rho: np.ndarray) -> np.ndarray:
        # rho Hermitian: rho H_eff^dag = (H_eff rho)^dag, and L rho L^dag = (L (L rho)^dag)^dag
        x = self.h_eff @ rho
        out = -1j * x
        out += 1j * x.conj().T
        for l in self.jumps:
            y = l @ rho
            out += 2.0 * (l @ y.conj().T).conj().T
        return out

    def liouvillian(self, keep: np.ndarray | None = None) -> sp.csr_matrix:
        """Superoperator on row-major ``vec(rho)``, optionally restricted to entries ``keep``."""
        dim = self.basis.dim
        nnz = 2 * self.h_eff.nnz * dim + sum(l.nnz**2 for l in self.jumps)
        needed = 32 * nnz  # COO assembly of complex entries with int64 indices
        if needed > memory_budget():
            raise OracleMemoryError(dim, needed, memory_budget())
        eye = sp.identity(dim, format="csr", dtype=complex)
        sup = -1j * sp.kron(self.h_eff, eye) + 1j * sp.kron(eye, self.h_eff.conj())
        for l in self.jumps:
            sup = sup + 2.0 * sp.kron(l, l.conj())
        sup = sup.tocsr()
        return sup if keep is None else sup[keep][:, keep].tocsr()

    def _support(self, rho: np.ndarray):
        # H keeps every sector and each jump lowers both indices of rho by one,
        # so the sector difference n - m of each block is conserved.
        sector = np.repeat(np.arange(self.basis.n_max + 1), np.diff(self.basis.sector_starts))
        diff = sector[:, None] - sector[None, :]
        present = tuple(sorted(set(diff[np.abs(rho) > 0].tolist())))
        if present not in self._restricted:
            keep = np.flatnonzero(np.isin(diff.ravel(), present))
            self._restricted[present] = (keep, self.liouvillian(keep))
        return self._restricted[present]

    def trajectory(self, rho0: OracleState, times) -> list[OracleState]:
        """States at each of the increasing ``times`` (measured from ``rho0.t``).

        Classical RK4 on the vectorised density matrix, restricted to the
        blocks the initial state populates.
        """
        rho = rho0.density_matrix().astype(complex)
        keep, sup = self._support(rho)
        x = rho.ravel()[keep]
        dim = self.basis.dim
        now = 0.0
        out = []
        for t in np.asarray(times, dtype=float):
            if t < now:
                raise ValueError("times must be non-decreasing and non-negative")
            span = t - now
            n = int(np.ceil(span / self.dt - 1e-9)) if span > 0 else 0
            h = span / n if n else 0.0
            for _ in range(n):
                k1 = sup @ x
                k2 = sup @ (x + 0.5 * h * k1)
                k3 = sup @ (x + 0.5 * h * k2)
                k4 = sup @ (x + h * k3)
                x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            now = t
            full = np.zeros(dim * dim, dtype=complex)
            full[keep] = x
            full = full.reshape(dim, dim)
            out.append(OracleState(self.basis, rho0.t + t, density=0.5 * (full + full.conj().T)))
        return out


def evolve_lindblad(
    params: SystemParams, rho0: OracleState, t: float, dt: float | None = None
) -> OracleState:
    return LindbladIntegrator(params, rho0.basis, dt).trajectory(rho0, [t])[0]


def _split_indices(basis: TruncatedBasis):
    exc_basis = _cached_basis(basis.n_max, _EXCITON_LAYOUT[basis.layout])
    exc_idx = exc_basis.lookup(basis.states[:, list(basis.exciton_modes)])
    cav_states = basis.states[:, list(basis.cavity_modes)]
    _, cav_idx = np.unique(cav_states, axis=0, return_inverse=True)
    return exc_basis, exc_idx, cav_idx.ravel()


def reduce_to_excitons(state: OracleState) -> np.ndarray:
    """Partial trace over the cavity modes; result lives on the exciton basis."""
    basis = state.basis
    exc_basis, exc_idx, cav_idx = _split_indices(basis)
    if state.vector is not None:
        m = np.zeros((cav_idx.max() + 1, exc_basis.dim), dtype=complex)
        m[cav_idx, exc_idx] = state.vector
        return m.T @ m.conj()
    rho = state.density
    out = np.zeros((exc_basis.dim, exc_basis.dim), dtype=complex)
    for c in range(cav_idx.max() + 1):
        sel = np.flatnonzero(cav_idx == c)
        e = exc_idx[sel]
        out[np.ix_(e, e)] += rho[np.ix_(sel, sel)]
    return out


def exciton_layout_amplitudes(beta: np.ndarray, layout: str) -> np.ndarray:
    """Map per-dot exciton amplitudes ``(e1, e2, e3)`` onto the layout's exciton modes."""
    beta = np.asarray(beta, dtype=complex)
    if layout == "full":
        return beta
    if layout == "symmetric":
        return np.array([beta[0], (beta[1] + beta[2]) / np.sqrt(2)])
    raise ValueError(layout)


def _product_fock(amps: np.ndarray, exc_basis: TruncatedBasis) -> np.ndarray:
    cols = [_coherent_fock(b, exc_basis.n_max) for b in amps]
    vec = np.ones(exc_basis.dim, dtype=complex)
    for k, col in enumerate(cols):
        vec = vec * col[exc_basis.states[:, k]]
    return vec


def closed_form_exciton_fock(
    state: ReducedExcitonState, n_max: int, layout: str = "full", tail_tol: float = TAIL_TOL
) -> np.ndarray:
    """Fock-space matrix of the coherent-state exciton density operator."""
    exc_basis = _cached_basis(n_max, _EXCITON_LAYOUT[layout])
    v1 = _product_fock(exciton_layout_amplitudes(state.exciton_beta1, layout), exc_basis)
    v2 = _product_fock(exciton_layout_amplitudes(state.exciton_beta2, layout), exc_basis)
    tail = max(1 - np.vdot(v1, v1).real, 1 - np.vdot(v2, v2).real)
    if tail >= tail_tol:
        raise OracleTruncationError(f"coherent tail {tail:.2e} exceeds {tail_tol:g} at n_max={n_max}")
    coh = complex(state.kappa) * np.exp(-1j * state.theta)
    rho = (
        np.outer(v1, v1.conj())
        + np.outer(v2, v2.conj())
        + coh * np.outer(v1, v2.conj())
        + np.conj(coh) * np.outer(v2, v1.conj())
    )
    return rho / float(state.norm_n)


def encoded_fidelity(rho_exc: np.ndarray, state: ReducedExcitonState, target: Target | str, n_max: int) -> float:
    """``<T|rho|T>`` with the qubit target pulled back into exciton Fock space.

    Per dot, ``|0>`` is the branch-1 coherent state and ``|1>`` the normalised
    part of the branch-2 state orthogonal to it; ``rho_exc`` is on the
    three-dot (``"full"``) exciton basis.
    """
    exc_basis = _cached_basis(n_max, "excitons")
    n = np.arange(n_max + 1)
    kets = []
    for x, y in zip(state.exciton_beta1, state.exciton_beta2):
        zero = _coherent_fock(complex(x), n_max)
        other = _coherent_fock(complex(y), n_max)
        p = coherent_overlap(x, y)
        one = other - p * zero
        size = np.linalg.norm(one)
        if size < 1e-12:
            # colinear branches: any unit vector orthogonal to |0> will do
            one = (n == 1).astype(complex) - zero[1].conj() * zero
            size = np.linalg.norm(one)
        kets.append((zero, one / size))
    coeffs = Target(target).vector
    vec = np.zeros(exc_basis.dim, dtype=complex)
    for q in range(8):
        if coeffs[q] == 0:
            continue
        bits = ((q >> 2) & 1, (q >> 1) & 1, q & 1)
        term = np.full(exc_basis.dim, coeffs[q], dtype=complex)
        for k, b in enumerate(bits):
            term = term * kets[k][b][exc_basis.states[:, k]]
        vec += term
    return float(np.real(vec.conj() @ rho_exc @ vec))


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    if rho.shape != sigma.shape:
        raise ValueError(f"dimension mismatch: {rho.shape} vs {sigma.shape}")
    diff = rho - sigma
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T)))))


def mode_occupations(state: OracleState) -> np.ndarray:
    """Mean occupation of every mode of the layout."""
    if state.vector is not None:
        probs = np.abs(state.vector) ** 2
    else:
        probs = np.real(np.diag(state.density))
    return probs @ state.basis.states


def mode_means(state: OracleState) -> np.ndarray:
    """``<c_k>`` for every mode of the layout."""
    basis = state.basis
    out = np.empty(basis.n_modes, dtype=complex)
    rho = state.density_matrix()
    for k in range(basis.n_modes):
        out[k] = np.sum(annihilation(basis, k).multiply(rho.T))
    return out
