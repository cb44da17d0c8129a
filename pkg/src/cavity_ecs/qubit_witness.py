"""Three-qubit encoding of the exciton cat state and projector witnesses.

Each exciton mode only ever holds one of two coherent amplitudes (one per
branch), so it lives in a two-dimensional span. Gram-Schmidt on that span maps
branch 1 to ``|0>`` and branch 2 to ``p|0> + sqrt(1-|p|^2)|1>`` with
``p = <x|y>``. The map is an isometry, so the encoded 8x8 matrix carries the
full exciton state.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cat_dynamics import (
    CatStateSpec,
    CoherenceModel,
    ReducedExcitonState,
    coherent_overlap,
    mean_cavity_photons,
    reduced_exciton_state,
)
from .propagator import SystemParams, fast_period

__all__ = [
    "Target",
    "EncodingError",
    "WitnessSeries",
    "GHZ",
    "W",
    "WITNESS_OFFSET",
    "encode_modes",
    "encode_qubits",
    "check_qubit_state",
    "ghz_witness_value",
    "w_witness_value",
    "fidelity_squared",
    "witness_series",
    "scan_grid",
    "find_optimal_time",
    "revival_minima",
]

GHZ = np.zeros(8, dtype=complex)
GHZ[[0, 7]] = 1 / np.sqrt(2)
W = np.zeros(8, dtype=complex)
W[[1, 2, 4]] = 1 / np.sqrt(3)


class Target(str, enum.Enum):
    GHZ = "ghz"
    W = "w"

    @property
    def vector(self) -> np.ndarray:
        return GHZ if self is Target.GHZ else W


# largest squared overlap of each target with a biseparable state
WITNESS_OFFSET = {Target.GHZ: 0.5, Target.W: 2.0 / 3.0}


class EncodingError(RuntimeError):
    pass


def encode_modes(x, y):
    """Per-mode qubit images of two coherent amplitudes.

    Returns ``(p, s)`` so that ``|x> -> |0>`` and ``|y> -> p|0> + s|1>`` with
    ``s >= 0``. ``s`` is computed from ``|p|^2 = exp(-|x-y|^2)`` directly, so it
    is exactly 0 for colinear branches and accurate when they nearly are.
    """
    p = coherent_overlap(x, y)
    if np.any(np.abs(p) > 1 + 1e-12):
        raise EncodingError("coherent overlap exceeds 1")
    s = np.sqrt(np.maximum(-np.expm1(-np.abs(np.asarray(x) - np.asarray(y)) ** 2), 0.0))
    return p, s


def _branch_vectors(state: ReducedExcitonState):
    # returns (phi1, phi2) with shape (..., 8), basis |e1 e2 e3>, e1 most significant
    p, s = encode_modes(state.exciton_beta1, state.exciton_beta2)
    zeros = np.zeros_like(p)
    ones = np.ones_like(p)
    q1 = np.stack([ones, zeros], axis=-1)
    q2 = np.stack([p, s.astype(complex)], axis=-1)

    def kron3(q):
        v = q[..., 0, :, None, None] * q[..., 1, None, :, None] * q[..., 2, None, None, :]
        return v.reshape(v.shape[:-3] + (8,))

    return kron3(q1), kron3(q2)


def encode_qubits(state: ReducedExcitonState) -> np.ndarray:
    """8x8 density matrix of the encoded exciton state (scalar time only)."""
    phi1, phi2 = _branch_vectors(state)
    if phi1.ndim != 1:
        raise ValueError("encode_qubits takes a state at a single time")
    coh = state.kappa * np.exp(-1j * state.theta)
    rho = (
        np.outer(phi1, phi1.conj())
        + np.outer(phi2, phi2.conj())
        + coh * np.outer(phi1, phi2.conj())
        + np.conj(coh) * np.outer(phi2, phi1.conj())
    )
    return rho / state.norm_n


def check_qubit_state(rho: np.ndarray, *, herm_tol=1e-12, trace_tol=1e-10, eig_tol=1e-10) -> None:
    """Raise ``EncodingError`` unless ``rho`` is a valid 8x8 density matrix."""
    if rho.shape != (8, 8):
        raise EncodingError(f"expected 8x8, got {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
        raise EncodingError("not Hermitian")
    if abs(np.trace(rho) - 1) > trace_tol:
        raise EncodingError(f"trace {np.trace(rho).real:.12f} != 1")
    if np.linalg.eigvalsh(rho).min() < -eig_tol:
        raise EncodingError("not positive semidefinite")


def fidelity_squared(rho: np.ndarray, target: Target | str) -> float:
    """``<target|rho|target>``."""
    v = Target(target).vector
    return float(np.real(v.conj() @ rho @ v))


def ghz_witness_value(rho: np.ndarray) -> float:
    return WITNESS_OFFSET[Target.GHZ] - fidelity_squared(rho, Target.GHZ)


def w_witness_value(rho: np.ndarray) -> float:
    return WITNESS_OFFSET[Target.W] - fidelity_squared(rho, Target.W)


@dataclass
class WitnessSeries:
    """Witness expectation and cavity photon number on a time grid."""

    times: np.ndarray
    values: np.ndarray
    photon_numbers: np.ndarray
    kind: Target
    kappa_abs: np.ndarray
    fidelity_sq: np.ndarray
    evaluate: Callable[[np.ndarray], np.ndarray] | None = field(default=None, repr=False, compare=False)


def _target_fidelity(state: ReducedExcitonState, target: Target):
    phi1, phi2 = _branch_vectors(state)
    v = target.vector.conj()
    f1 = phi1 @ v
    f2 = phi2 @ v
    coh = state.kappa * np.exp(-1j * state.theta)
    return (np.abs(f1) ** 2 + np.abs(f2) ** 2 + 2 * np.real(coh * f1 * np.conj(f2))) / state.norm_n


_CHUNK = 200_000


def witness_series(
    params: SystemParams,
    cat: CatStateSpec,
    t_grid,
    kind: Target | str = Target.GHZ,
    dissipative: bool = False,
    model: CoherenceModel = CoherenceModel.DILATION_CONSISTENT,
) -> WitnessSeries:
    """Evaluate the witness on ``t_grid`` without forming 8x8 matrices.

    ``<T|rho|T>`` only needs the projections of the two encoded branch
    vectors onto the target, which keeps million-point scans cheap.
    """
    kind = Target(kind)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0:
        raise ValueError("t_grid must be a non-empty 1-D array")
    if np.any(t_grid < 0) or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be non-negative and strictly increasing")

    def fidelity_and_kappa(times):
        state = reduced_exciton_state(params, cat, times, dissipative, model)
        return _target_fidelity(state, kind), np.abs(state.kappa)

    def evaluate(times):
        return WITNESS_OFFSET[kind] - fidelity_and_kappa(np.asarray(times, float))[0]

    fid = np.empty(t_grid.size)
    kap = np.empty(t_grid.size)
    photons = np.empty(t_grid.size)
    for lo in range(0, t_grid.size, _CHUNK):
        sl = slice(lo, lo + _CHUNK)
        fid[sl], kap[sl] = fidelity_and_kappa(t_grid[sl])
        photons[sl] = mean_cavity_photons(params, cat, t_grid[sl], dissipative, model)
    return WitnessSeries(
        times=t_grid,
        values=WITNESS_OFFSET[kind] - fid,
        photon_numbers=photons,
        kind=kind,
        kappa_abs=kap,
        fidelity_sq=fid,
        evaluate=evaluate,
    )


def scan_grid(params: SystemParams, t_start: float, t_end: float, points_per_period: int = 40) -> np.ndarray:
    """Uniform grid with at least ``points_per_period`` samples per fastest period."""
    if not t_end > t_start:
        raise ValueError("t_end must exceed t_start")
    period = fast_period(params)
    n = int(np.ceil((t_end - t_start) / period * points_per_period)) + 1
    return np.linspace(t_start, t_end, max(n, 2))


_INV_PHI = (np.sqrt(5) - 1) / 2


def _golden_section(f, a, b, tol):
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def find_optimal_time(series: WitnessSeries, refine: bool = True, tol: float = 1e-6) -> tuple[float, float]:
    """Time and value of the witness minimum.

    Grid argmin (earliest on ties), optionally polished by golden-section
    search inside the two neighbouring grid cells. Refinement never returns a
    worse value than the grid point.
    """
    if series.values.size == 0:
        raise ValueError("empty series")
    i = int(np.argmin(series.values))
    t_best, v_best = float(series.times[i]), float(series.values[i])
    if not refine or series.evaluate is None or series.times.size < 2:
        return t_best, v_best
    lo = series.times[max(i - 1, 0)]
    hi = series.times[min(i + 1, series.times.size - 1)]

    def f(t):
        return float(series.evaluate(np.array([t]))[0])

    t_ref, v_ref = _golden_section(f, float(lo), float(hi), tol)
    if v_ref < v_best:
        return float(t_ref), float(v_ref)
    return t_best, v_best


def revival_minima(series: WitnessSeries, half_period: float) -> np.ndarray:
    """Deepest witness value in each consecutive half period of the slow beat.

    The relative phase between the symmetric and the degenerate exciton
    sectors reaches 2pi/3 and 4pi/3 once per half period each, so every
    window holds exactly one revival. Only complete windows are returned.
    """
    t0 = series.times[0]
    n_windows = int(np.floor((series.times[-1] - t0) / half_period + 1e-9))
    idx = np.minimum(((series.times - t0) / half_period).astype(int), n_windows)
    return np.array([series.values[idx == k].min() for k in range(n_windows)])
