"""Coherent-state superpositions carried through the linear propagator.

Because the model is linear, a product of coherent states stays a product of
coherent states: if exciton 1 starts in ``|alpha>`` the six modes at time t
hold ``|alpha * U[k, b1]>``. A cat ``(|alpha1> + e^{i theta}|alpha2>)/sqrt(N)``
therefore evolves branch by branch, and everything below is coherent-state
overlap algebra on the two branches.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .propagator import ModeCoefficients, SystemParams, mode_coefficients

__all__ = [
    "CoherenceModel",
    "CatStateSpec",
    "DegenerateSuperpositionError",
    "BranchAmplitudes",
    "ReducedExcitonState",
    "coherent_overlap",
    "normalization",
    "branch_amplitudes",
    "coherence_factor",
    "reduced_exciton_state",
    "mean_cavity_photons",
    "even_cat_photons",
    "odd_cat_photons",
    "initial_mean_excitation",
]

NORM_FLOOR = 1e-12


class DegenerateSuperpositionError(ValueError):
    def __init__(self, norm):
        super().__init__(f"degenerate superposition: normalization {norm:.3e} is below {NORM_FLOOR:g}")
        self.norm = norm


class CoherenceModel(str, enum.Enum):
    """How the branch coherence of the exciton state is obtained with losses.

    ``CAVITY_ONLY`` traces out the cavity modes only, exactly as in the
    lossless derivation, and renormalises. ``DILATION_CONSISTENT`` also traces
    out the modes of the loss reservoir, which carry which-branch
    information; it is the physically complete reduced state. Both agree when
    there is no loss.
    """

    DILATION_CONSISTENT = "dilation_consistent"
    CAVITY_ONLY = "cavity_only"


@dataclass(frozen=True)
class CatStateSpec:
    alpha1: complex
    alpha2: complex
    theta: float = 0.0

    @classmethod
    def symmetric(cls, alpha: complex, theta: float = 0.0) -> "CatStateSpec":
        """Even (theta=0) or odd (theta=pi) cat with ``alpha1 = -alpha2 = alpha``."""
        return cls(complex(alpha), -complex(alpha), float(theta))

    @property
    def distance_sq(self) -> complex:
        """``|alpha1|^2 + |alpha2|^2 - 2 alpha2^* alpha1`` (real part is ``|alpha1 - alpha2|^2``)."""
        a1, a2 = complex(self.alpha1), complex(self.alpha2)
        return abs(a1) ** 2 + abs(a2) ** 2 - 2 * np.conj(a2) * a1


def coherent_overlap(x, y):
    """``<x|y>`` for coherent states, elementwise."""
    x = np.asarray(x)
    y = np.asarray(y)
    return np.exp(-0.5 * np.abs(x) ** 2 - 0.5 * np.abs(y) ** 2 + np.conj(x) * y)


def _product_overlap(x, y):
    # <x1,x2,...|y1,y2,...> over the last axis
    return np.prod(coherent_overlap(x, y), axis=-1)


def normalization(cat: CatStateSpec) -> float:
    """Squared norm N of ``|alpha1> + e^{i theta}|alpha2>``.

    Evaluated as ``2 (2 cos^2(phi/2) + cos(phi) expm1(x))`` so that odd cats
    with small amplitude do not lose their digits to cancellation.
    """
    a1, a2 = complex(cat.alpha1), complex(cat.alpha2)
    cross = np.conj(a1) * a2
    phi = cat.theta + cross.imag
    x = -0.5 * (abs(a1) ** 2 + abs(a2) ** 2) + cross.real
    n = 2.0 * (2.0 * np.cos(phi / 2) ** 2 + np.cos(phi) * np.expm1(x))
    if not n > NORM_FLOOR:
        raise DegenerateSuperpositionError(n)
    return float(n)


def initial_mean_excitation(cat: CatStateSpec) -> float:
    """Mean exciton number of the initial cat; bounds every later photon number."""
    n = normalization(cat)
    a1, a2 = complex(cat.alpha1), complex(cat.alpha2)
    cross = np.exp(-1j * cat.theta) * np.conj(a2) * a1 * coherent_overlap(a2, a1)
    return float((abs(a1) ** 2 + abs(a2) ** 2 + 2 * cross.real) / n)


@dataclass(frozen=True)
class BranchAmplitudes:
    """Coherent amplitudes of both branches on ``(c1, c2, c3, e1, e2, e3)``.

    ``beta1``/``beta2`` have shape ``t.shape + (6,)``.
    """

    beta1: np.ndarray
    beta2: np.ndarray
    t: np.ndarray


def _column(coeffs: ModeCoefficients) -> np.ndarray:
    # response of every mode to unit amplitude in exciton 1; u21 = v11 and u22 = v12
    return np.stack(
        np.broadcast_arrays(
            coeffs.u21, coeffs.u22, coeffs.u22, coeffs.v21, coeffs.v22, coeffs.v22
        ),
        axis=-1,
    )


def branch_amplitudes(
    params: SystemParams, cat: CatStateSpec, t, dissipative: bool = False
) -> BranchAmplitudes:
    coeffs = mode_coefficients(params, t, dissipative)
    col = _column(coeffs)
    return BranchAmplitudes(
        beta1=complex(cat.alpha1) * col, beta2=complex(cat.alpha2) * col, t=np.asarray(t, float)
    )


def _kappa(cat: CatStateSpec, coeffs: ModeCoefficients, dissipative: bool, model: CoherenceModel):
    model = CoherenceModel(model)
    if dissipative and model is CoherenceModel.DILATION_CONSISTENT:
        traced = 1.0 - coeffs.exciton_weight()
    else:
        traced = coeffs.cavity_weight()
    return np.exp(-0.5 * cat.distance_sq * traced)


def coherence_factor(
    params: SystemParams,
    cat: CatStateSpec,
    t,
    dissipative: bool = False,
    model: CoherenceModel = CoherenceModel.DILATION_CONSISTENT,
):
    """Factor kappa multiplying ``e^{-i theta}|B1><B2|`` in the exciton state.

    Without loss it is the overlap of the two cavity branches,
    ``exp{-(D/2)(|u21|^2 + 2|u22|^2)}``. With loss the dilation-consistent
    model replaces the cavity weight by everything that left the excitons,
    ``1 - |v21|^2 - 2|v22|^2``.
    """
    return _kappa(cat, mode_coefficients(params, t, dissipative), dissipative, model)


@dataclass(frozen=True)
class ReducedExcitonState:
    """Exciton state ``(|B1><B1| + |B2><B2| + kappa e^{-i theta}|B1><B2| + h.c.)/N``.

    ``|Bk>`` is the three-mode coherent product with amplitudes
    ``exciton_betak`` (last axis, shape ``(..., 3)``). Fields broadcast over a
    leading time axis when the state was built for an array of times.
    """

    exciton_beta1: np.ndarray
    exciton_beta2: np.ndarray
    norm_n: np.ndarray
    kappa: np.ndarray
    theta: float
    coherence_model: CoherenceModel

    def branch_overlap(self):
        """``<B2|B1>``."""
        return _product_overlap(self.exciton_beta2, self.exciton_beta1)

    def trace(self):
        cross = self.kappa * np.exp(-1j * self.theta) * self.branch_overlap()
        return (2.0 + 2.0 * cross.real) / self.norm_n


def reduced_exciton_state(
    params: SystemParams,
    cat: CatStateSpec,
    t,
    dissipative: bool = False,
    model: CoherenceModel = CoherenceModel.DILATION_CONSISTENT,
) -> ReducedExcitonState:
    model = CoherenceModel(model)
    coeffs = mode_coefficients(params, t, dissipative)
    col = _column(coeffs)[..., 3:]
    b1 = complex(cat.alpha1) * col
    b2 = complex(cat.alpha2) * col
    kappa = _kappa(cat, coeffs, dissipative, model)
    if dissipative and model is CoherenceModel.CAVITY_ONLY:
        # kappa * <B2|B1> no longer equals the initial overlap: renormalise
        cross = kappa * np.exp(-1j * cat.theta) * _product_overlap(b2, b1)
        norm = 2.0 + 2.0 * cross.real
    else:
        norm = np.full(np.shape(kappa), normalization(cat))
    return ReducedExcitonState(
        exciton_beta1=b1,
        exciton_beta2=b2,
        norm_n=norm[()] if np.ndim(norm) == 0 else norm,
        kappa=kappa,
        theta=float(cat.theta),
        coherence_model=model,
    )


def mean_cavity_photons(
    params: SystemParams,
    cat: CatStateSpec,
    t,
    dissipative: bool = False,
    model: CoherenceModel = CoherenceModel.DILATION_CONSISTENT,
):
    """Total mean photon number in the three cavities.

    ``[sum_i |b1_i|^2 + |b2_i|^2 + 2 Re(e^{-i theta} Omega b2_i^* b1_i)] / N``
    over cavity modes i, with Omega the overlap of the two branches on
    everything except the measured mode's own displacement: the six system
    modes, plus the loss reservoir for the dilation-consistent model.
    """
    model = CoherenceModel(model)
    coeffs = mode_coefficients(params, t, dissipative)
    col = _column(coeffs)
    b1, b2 = complex(cat.alpha1) * col, complex(cat.alpha2) * col
    omega = _product_overlap(b2, b1)
    norm = normalization(cat)
    if dissipative and model is CoherenceModel.DILATION_CONSISTENT:
        lost = 1.0 - np.sum(np.abs(col) ** 2, axis=-1)
        omega = omega * np.exp(-0.5 * cat.distance_sq * lost)
    elif dissipative:
        norm = 2.0 + 2.0 * np.real(np.exp(-1j * cat.theta) * omega)
    cav1, cav2 = b1[..., :3], b2[..., :3]
    terms = (
        np.abs(cav1) ** 2
        + np.abs(cav2) ** 2
        + 2 * np.real(np.exp(-1j * cat.theta) * omega[..., None] * np.conj(cav2) * cav1)
    )
    return np.sum(terms, axis=-1) / norm


def even_cat_photons(alpha: complex, coeffs: ModeCoefficients):
    """Closed expression for the even cat ``alpha1 = -alpha2 = alpha``, theta = 0."""
    a2 = abs(alpha) ** 2
    return -np.expm1(-2 * a2) * a2 * coeffs.cavity_weight() / (1 + np.exp(-2 * a2))


def odd_cat_photons(alpha: complex, coeffs: ModeCoefficients):
    """Closed expression for the odd cat ``alpha1 = -alpha2 = alpha``, theta = pi."""
    a2 = abs(alpha) ** 2
    return (1 + np.exp(-2 * a2)) * a2 * coeffs.cavity_weight() / -np.expm1(-2 * a2)
