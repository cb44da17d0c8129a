"""Single-excitation propagator of three coupled cavities, each holding one
quantum-dot exciton mode.

Mode ordering throughout is ``(a1, a2, a3, b1, b2, b3)``: three cavity field
modes followed by the three exciton modes. The Heisenberg equations of the
linear model close on the annihilation operators, ``d/dt x = -i M x``, so the
whole dynamics is the 6x6 matrix ``U(t) = exp(-i M t)``. Losses enter through
the complex substitution ``omega_c -> omega_c - i gamma_c`` and
``delta -> delta + i (gamma_e - gamma_c)``.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np
import scipy.linalg

__all__ = [
    "SystemParams",
    "AuxFrequencies",
    "ModeCoefficients",
    "PropagatorError",
    "aux_frequencies",
    "mode_coefficients",
    "generator_matrix",
    "propagator_numeric",
    "revival_half_period",
    "fast_period",
]

CAVITIES = (0, 1, 2)
EXCITONS = (3, 4, 5)
_HOPPING_PAIRS = ((0, 1), (1, 2), (2, 0))


class PropagatorError(ValueError):
    """Raised for parameter sets the propagator cannot handle."""


@dataclass(frozen=True)
class SystemParams:
    """Physical constants of the three-cavity model (hbar = 1).

    The exciton frequency is ``omega_c - delta``. Loss rates are per mode and
    identical across the three sites.
    """

    omega_c: float = 0.0
    delta: float = 0.0
    g: float = 30.0
    c_hop: float = 1.0
    gamma_c: float = 0.0
    gamma_e: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not np.isfinite(value) or np.iscomplexobj(value):
                raise PropagatorError(f"{f.name} must be a finite real number, got {value!r}")
        for name in ("g", "c_hop", "gamma_c", "gamma_e"):
            if getattr(self, name) < 0:
                raise PropagatorError(f"{name} must be non-negative, got {getattr(self, name)}")

    def effective(self, dissipative: bool) -> tuple[complex, complex]:
        """Return ``(omega_c, delta)`` after the loss substitution (if any)."""
        if not dissipative:
            return complex(self.omega_c), complex(self.delta)
        return (
            self.omega_c - 1j * self.gamma_c,
            self.delta + 1j * (self.gamma_e - self.gamma_c),
        )

    def replace(self, **changes) -> "SystemParams":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return SystemParams(**values)


@dataclass(frozen=True)
class AuxFrequencies:
    a_freq: complex
    b_freq: complex


@dataclass(frozen=True)
class ModeCoefficients:
    """The eight distinct entries of the symmetric 6x6 propagator.

    ``u1j``/``v1j`` form the row of ``a1(t)``, ``u2j``/``v2j`` the row of
    ``b1(t)``; index ``j=1`` is the same-site entry and ``j=2`` the entry for
    either of the two other sites. Fields may be arrays when ``t`` is.
    """

    u11: complex
    u12: complex
    u21: complex
    u22: complex
    v11: complex
    v12: complex
    v21: complex
    v22: complex
    t: float

    def matrix(self) -> np.ndarray:
        """Assemble the 6x6 propagator (scalar ``t`` only)."""
        u = np.full((3, 3), self.u12, dtype=complex)
        np.fill_diagonal(u, self.u11)
        v = np.full((3, 3), self.v12, dtype=complex)
        np.fill_diagonal(v, self.v11)
        x = np.full((3, 3), self.u22, dtype=complex)
        np.fill_diagonal(x, self.u21)
        y = np.full((3, 3), self.v22, dtype=complex)
        np.fill_diagonal(y, self.v21)
        return np.block([[u, v], [x, y]])

    def exciton_weight(self):
        """``|v21|^2 + 2|v22|^2``: the excitation fraction left in the excitons."""
        return np.abs(self.v21) ** 2 + 2 * np.abs(self.v22) ** 2

    def cavity_weight(self):
        """``|u21|^2 + 2|u22|^2``: the excitation fraction sitting in the cavities."""
        return np.abs(self.u21) ** 2 + 2 * np.abs(self.u22) ** 2


def _aux_squares(params: SystemParams, dissipative: bool) -> tuple[complex, complex, complex]:
    _, d = params.effective(dissipative)
    c, g = params.c_hop, params.g
    a2 = 4 * c**2 + 4 * c * d + d**2 + 4 * g**2
    b2 = c**2 - 2 * c * d + d**2 + 4 * g**2
    return a2, b2, d


def aux_frequencies(params: SystemParams, dissipative: bool = False) -> AuxFrequencies:
    """Auxiliary frequencies A and B (principal square root).

    Every propagator entry is even in the sign of A and B, so the branch does
    not matter.
    """
    a2, b2, _ = _aux_squares(params, dissipative)
    return AuxFrequencies(complex(np.sqrt(a2 + 0j)), complex(np.sqrt(b2 + 0j)))


def _sin_over(freq, t):
    # sin(freq*t/2)/freq, finite at freq -> 0 (series below |z| = 1e-3, error ~ z^6/5040)
    z = np.asarray(freq * t / 2)
    small = np.abs(z) < 1e-3
    safe = np.where(small, 1.0, z)
    z2 = z * z
    ratio = np.where(small, 1 - z2 / 6 + z2 * z2 / 120, np.sin(safe) / safe)
    return 0.5 * t * ratio


def mode_coefficients(
    params: SystemParams,
    t,
    dissipative: bool = False,
    *,
    omit_coupling_prefactor: bool = False,
    branch_signs: tuple[int, int] = (1, 1),
) -> ModeCoefficients:
    """Closed-form propagator entries at time(s) ``t``.

    ``branch_signs`` picks the square-root branch of A and B; the result does
    not depend on it.

    ``omit_coupling_prefactor`` reproduces the misprinted ``1/6`` prefactor
    (instead of ``1/(6g)``) of ``u21``/``u22``; it exists only so the
    validation suite can show that variant is wrong.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise PropagatorError("t must be non-negative")
    if params.g == 0:
        raise PropagatorError("g = 0 makes the 1/(6g) prefactor singular")
    a2, b2, d = _aux_squares(params, dissipative)
    wc, _ = params.effective(dissipative)
    c, g = params.c_hop, params.g
    freq_a = branch_signs[0] * np.sqrt(a2 + 0j)
    freq_b = branch_signs[1] * np.sqrt(b2 + 0j)

    phase = np.exp(-1j * wc * t)
    e_a = np.exp(-1j * (c - d / 2) * t)
    e_b = np.exp(1j * (c + d) / 2 * t)
    cos_a, cos_b = np.cos(freq_a * t / 2), np.cos(freq_b * t / 2)
    s_a, s_b = _sin_over(freq_a, t), _sin_over(freq_b, t)

    # (-A + (2c+d)^2/A) sin(At/2) = -(A^2 - (2c+d)^2) sin(At/2)/A and A^2 - (2c+d)^2 = 4g^2;
    # likewise (B - (c-d)^2/B) sin(Bt/2) = 4g^2 sin(Bt/2)/B.
    x_a = e_a * (-4 * g**2) * s_a
    x_b = e_b * (4 * g**2) * s_b
    pref = 1j * phase / (6 if omit_coupling_prefactor else 6 * g)
    v_pref = 1j * phase / (6 * g)

    exc_a = e_a * (cos_a + 1j * (2 * c + d) * s_a)
    exc_b = e_b * (cos_b - 1j * (c - d) * s_b)
    cav_a = e_a * (cos_a - 1j * (2 * c + d) * s_a)
    cav_b = e_b * (cos_b + 1j * (c - d) * s_b)

    return ModeCoefficients(
        u11=phase / 3 * (cav_a + 2 * cav_b),
        u12=phase / 3 * (cav_a - cav_b),
        u21=pref * (x_a - 2 * x_b),
        u22=pref * (x_a + x_b),
        v11=v_pref * (x_a - 2 * x_b),
        v12=v_pref * (x_a + x_b),
        v21=phase / 3 * (exc_a + 2 * exc_b),
        v22=phase / 3 * (exc_a - exc_b),
        t=t[()] if t.ndim == 0 else t,
    )


def generator_matrix(params: SystemParams, dissipative: bool = False) -> np.ndarray:
    """The 6x6 generator ``M`` of the Heisenberg equations ``dx/dt = -i M x``."""
    m = np.zeros((6, 6), dtype=complex)
    cav = params.omega_c - (1j * params.gamma_c if dissipative else 0)
    exc = params.omega_c - params.delta - (1j * params.gamma_e if dissipative else 0)
    for i, j in zip(CAVITIES, EXCITONS):
        m[i, i] = cav
        m[j, j] = exc
        m[i, j] = m[j, i] = params.g
    for i, j in _HOPPING_PAIRS:
        m[i, j] = m[j, i] = params.c_hop
    return m


def propagator_numeric(
    params: SystemParams, t: float, dissipative: bool = False, *, max_condition: float = 1e6
) -> np.ndarray:
    """``exp(-i M t)`` by eigendecomposition, independent of the closed form.

    The closed generator is Hermitian and goes through ``eigh``. A dissipative
    generator is diagonalised with ``eig`` when its eigenvector matrix is well
    conditioned; otherwise scaling-and-squaring (``scipy.linalg.expm``) is used.
    """
    if t < 0:
        raise PropagatorError("t must be non-negative")
    m = generator_matrix(params, dissipative)
    if not dissipative:
        w, v = np.linalg.eigh(m)
        return (v * np.exp(-1j * w * t)) @ v.conj().T
    try:
        w, v = np.linalg.eig(m)
        cond = np.linalg.cond(v)
    except np.linalg.LinAlgError:
        cond = np.inf
    if np.isfinite(cond) and cond < max_condition:
        out = (v * np.exp(-1j * w * t)) @ np.linalg.inv(v)
    else:
        out = scipy.linalg.expm(-1j * m * t)
    if not np.all(np.isfinite(out)):
        raise PropagatorError(f"matrix exponential did not converge for t={t}")
    return out


def _polariton_pairs(params: SystemParams):
    # The symmetric (k=0) and the two degenerate (k=1,2) Fourier sectors of the
    # triangle each reduce to a 2x2 cavity-exciton block.
    out = []
    for hop in (2 * params.c_hop, -params.c_hop):
        block = np.array([[params.omega_c + hop, params.g], [params.g, params.omega_c - params.delta]])
        w, v = np.linalg.eigh(block)
        out.append((w, np.abs(v[1]) ** 2))
    return out


def revival_half_period(params: SystemParams) -> float:
    """Half period of the slow beat that moves excitation between the dots.

    The beat is between the exciton-dominated polariton of the symmetric
    sector and its partner in the degenerate sectors; each half period holds
    one near-optimal revival of the GHZ and W witnesses.
    """
    (w0, x0), (w1, x1) = _polariton_pairs(params)
    branch = int(np.argmax(x0 + x1))
    beat = abs(w0[branch] - w1[branch])
    if beat == 0:
        return np.inf
    return np.pi / beat


def fast_period(params: SystemParams) -> float:
    """Shortest oscillation period ``2 pi / max(|A|, |B|)`` of the closed dynamics."""
    aux = aux_frequencies(params)
    top = max(abs(aux.a_freq), abs(aux.b_freq))
    return 2 * np.pi / top if top > 0 else np.inf
