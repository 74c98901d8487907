"""Information quantities and emergence coefficients, all in bits.

Every function here is pure. Scalar functions validate their domain and
raise :class:`~ina.errors.DomainError`; the ``*_array`` variants are the
vectorised forms used by training and assume the caller already filtered
out zero counts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import DomainError, ValidationError

_LN2 = math.log(2.0)
_PROB_TOL = 1e-9

EMERGENCE_MODES = ("none", "global", "per_group")


@dataclass(frozen=True)
class EmergenceConfig:
    """Which emergence coefficient scales the weights.

    ``mode`` is one of ``none`` (psi = 1), ``global`` (one psi for the whole
    system, from class count and total event count) or ``per_group`` (one
    psi per feature, from the classes that feature was seen with).
    ``z`` is the maximal complexity used by the global mode; ``z == 1`` is
    the minimal-complexity case where phi equals 1. ``psi_min`` floors the
    per-group coefficient.
    """

    mode: str = "none"
    z: int = 1
    psi_min: float = 0.0

    def __post_init__(self):
        if self.mode not in EMERGENCE_MODES:
            raise ValidationError(f"unknown emergence mode {self.mode!r}")
        if self.z < 1:
            raise ValidationError("z must be >= 1")
        if not 0.0 <= self.psi_min <= 1.0:
            raise ValidationError("psi_min must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {"mode": self.mode, "z": self.z, "psi_min": self.psi_min}

    @classmethod
    def from_dict(cls, d: dict) -> "EmergenceConfig":
        return cls(mode=d["mode"], z=int(d["z"]), psi_min=float(d["psi_min"]))


def hartley_information(num_states: int) -> float:
    if num_states < 1:
        raise DomainError(f"num_states must be >= 1, got {num_states}")
    return math.log2(num_states)


def shannon_entropy(probabilities: Sequence[float]) -> float:
    p = np.asarray(probabilities, dtype=float)
    if p.size == 0:
        raise ValidationError("empty distribution")
    if np.any(p < 0) or np.any(p > 1) or not np.all(np.isfinite(p)):
        raise ValidationError("probabilities must lie in [0, 1]")
    if abs(p.sum() - 1.0) > _PROB_TOL:
        raise ValidationError(f"probabilities sum to {p.sum()!r}, not 1")
    nz = p[p > 0]
    return float(-(nz * np.log2(nz)).sum()) + 0.0


def pmi(p_ij: float, p_i: float, p_j: float) -> float:
    """Pointwise mutual information ``log2(p_ij / (p_i * p_j))``."""
    for name, v in (("p_ij", p_ij), ("p_i", p_i), ("p_j", p_j)):
        if not 0.0 < v <= 1.0:
            raise DomainError(f"{name} must lie in (0, 1], got {v!r}")
    if p_ij > min(p_i, p_j) + 1e-12:
        raise DomainError("joint probability exceeds a marginal")
    return math.log2(p_ij) - math.log2(p_i) - math.log2(p_j)


def average_mutual_information(joint) -> float:
    """Mean of the pointwise information over a joint table.

    Marginals are taken from the table itself; zero cells contribute 0.
    """
    p = np.asarray(joint, dtype=float)
    if p.ndim != 2:
        raise ValidationError("joint must be a 2-D table")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValidationError("joint has negative or non-finite entries")
    if abs(p.sum() - 1.0) > _PROB_TOL:
        raise ValidationError(f"joint sums to {p.sum()!r}, not 1")
    rows = p.sum(axis=1, keepdims=True)
    cols = p.sum(axis=0, keepdims=True)
    mask = p > 0
    ratio = p[mask] / (rows * cols)[mask]
    return float((p[mask] * np.log2(ratio)).sum()) + 0.0


def log2_binomial_sum(W: int, Z: int) -> float:
    """``log2(sum(C(W, m) for m in 1..Z))`` via log-gamma and log-sum-exp."""
    if W < 1:
        raise DomainError(f"W must be >= 1, got {W}")
    if not 1 <= Z <= W:
        raise DomainError(f"need 1 <= Z <= W, got Z={Z}, W={W}")
    m = np.arange(1, Z + 1, dtype=float)
    log_c = gammaln(W + 1.0) - gammaln(m + 1.0) - gammaln(W - m + 1.0)
    return float(logsumexp(log_c)) / _LN2


def phi(W: int, Z: int) -> float:
    """Hartley emergence coefficient of a W-state system at complexity Z."""
    if W < 2:
        raise DomainError(f"phi needs W >= 2, got {W}")
    if Z == 1:
        return 1.0
    return log2_binomial_sum(W, Z) / math.log2(W)


def synergic_share(W: int, Z: int) -> float:
    """Fraction of ``log2 W**phi`` that exceeds the classical ``log2 W``."""
    f = phi(W, Z)
    return (f - 1.0) / f


def psi_global(W: int, N: int, Z: int = 1, assume_phi_one: bool = False,
               clamp: bool = True) -> float:
    """System emergence coefficient ``phi(W, Z) * log2 W / log2 N``.

    With ``assume_phi_one`` the complexity term is dropped. The raw value
    exceeds 1 whenever ``W**phi > N``; it is clamped to [0, 1] unless
    ``clamp`` is False.
    """
    if W < 2:
        raise DomainError(f"psi_global needs W >= 2, got {W}")
    if N < 2:
        raise DomainError(f"psi_global needs N >= 2, got {N}")
    f = 1.0 if assume_phi_one else phi(W, Z)
    value = f * math.log2(W) / math.log2(N)
    if clamp:
        value = min(max(value, 0.0), 1.0)
    return value


def _log2_pow2_minus_one(w: float) -> float:
    # log2(2**w - 1) = w + log2(1 - 2**-w); exact for w > 53 in doubles.
    return w + math.log1p(-math.pow(2.0, -w)) / _LN2


def psi_group(W_g: int, N_g: int, N: int) -> float:
    """Emergence coefficient of one feature group, normalised to [0, 1].

    Groups spanning more than ``log2(2N)`` classes are treated as fully
    determined. Otherwise ``log2(2**W_g - 1) / log2(N_g)``.
    """
    if W_g < 1:
        raise DomainError(f"W_g must be >= 1, got {W_g}")
    if N < 2:
        raise DomainError(f"N must be >= 2, got {N}")
    if N_g < 2:
        raise DomainError(f"N_g must be >= 2, got {N_g}")
    if W_g > math.log2(2 * N):
        return 1.0
    value = _log2_pow2_minus_one(W_g) / math.log2(N_g)
    return min(max(value, 0.0), 1.0)


def harkevich_info(N_ij: int, N_i: int, N_j: int, N: int,
                   zero_value: float = 0.0) -> float:
    """Information in feature i about class j: ``log2(N_ij N / (N_i N_j))``.

    ``zero_value`` is returned for cells that were never observed.
    """
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    if N_i < 1 or N_j < 1:
        raise DomainError(f"marginals must be >= 1, got N_i={N_i}, N_j={N_j}")
    if N_ij < 0 or N_ij > min(N_i, N_j):
        raise DomainError(f"N_ij={N_ij} outside [0, min(N_i, N_j)]")
    if N_ij == 0:
        return zero_value
    return (math.log2(N_ij) + math.log2(N)) - (math.log2(N_i) + math.log2(N_j))


def lutsenko_info(N_ij: int, N_i: int, N_j: int, N: int, psi: float,
                  zero_value: float = 0.0) -> float:
    """Harkevich information scaled by the emergence coefficient ``psi``."""
    if not 0.0 <= psi <= 1.0:
        raise DomainError(f"psi must lie in [0, 1], got {psi!r}")
    return psi * harkevich_info(N_ij, N_i, N_j, N, zero_value)


def harkevich_info_array(n_ij, n_i, n_j, n) -> np.ndarray:
    """Elementwise :func:`harkevich_info` for strictly positive counts."""
    n_ij = np.asarray(n_ij, dtype=float)
    return (np.log2(n_ij) + np.log2(np.asarray(n, dtype=float))) - (
        np.log2(np.asarray(n_i, dtype=float)) + np.log2(np.asarray(n_j, dtype=float))
    )
