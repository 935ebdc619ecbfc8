"""Model of the multiplexed photon-memory entangled source.

The ideal source emits one excitation shared coherently over D memory
modes, perfectly correlated between the signal photon and the stored spin
wave: sum_i C_i e^{i phi_i} |i>_signal |i>_idler.  Two dominant
imperfections are modeled on top:

* per-mode relative phases between the write and read deflector settings
  (``phase_mismatch``), and
* an isotropic mixed component standing in for uncorrelated background
  coincidences (``noise_fraction`` p): rho = (1-p) |Psi><Psi| + p I/D^2.

The same background can instead be represented at the counts level by the
counting module's accidental channel; the two descriptions agree exactly
for this source because its reduced states are maximally mixed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ValidationError
from .linalg import DensityOperator, StateVector, outcome_probabilities
from . import bases

__all__ = [
    "SourceConfig",
    "ideal_state",
    "noisy_state",
    "fit_noise_to_visibility",
    "mean_pair_visibility",
]

NOISE_FIT_TOL = 1e-6


@dataclass(frozen=True)
class SourceConfig:
    """Source description: mode count, amplitudes, phases, noise weight.

    ``coefficients`` must already be normalized (sum |C_i|^2 = 1 within
    1e-12); use the factories to build normalized configs.
    """

    num_modes: int = 10
    coefficients: np.ndarray = field(default=None)  # type: ignore[assignment]
    phase_mismatch: np.ndarray = field(default=None)  # type: ignore[assignment]
    noise_fraction: float = 0.0

    def __post_init__(self) -> None:
        if self.num_modes < 1:
            raise ValidationError("num_modes must be positive")
        coeffs = (
            np.full(self.num_modes, 1 / np.sqrt(self.num_modes), dtype=complex)
            if self.coefficients is None
            else np.array(self.coefficients, dtype=complex).reshape(-1)
        )
        phases = (
            np.zeros(self.num_modes)
            if self.phase_mismatch is None
            else np.array(self.phase_mismatch, dtype=float).reshape(-1)
        )
        if coeffs.size != self.num_modes:
            raise ValidationError("coefficients length must equal num_modes")
        if phases.size != self.num_modes:
            raise ValidationError("phase_mismatch length must equal num_modes")
        total = float(np.sum(np.abs(coeffs) ** 2))
        if abs(total - 1.0) > 1e-12:
            raise ValidationError(f"sum |C_i|^2 = {total!r}, expected 1 within 1e-12")
        if not (0.0 <= self.noise_fraction <= 1.0):
            raise ValidationError("noise_fraction must lie in [0, 1]")
        coeffs.setflags(write=False)
        phases.setflags(write=False)
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "phase_mismatch", phases)

    @classmethod
    def uniform(cls, num_modes: int = 10, noise_fraction: float = 0.0,
                phases: np.ndarray | None = None) -> "SourceConfig":
        """Equal-amplitude source over ``num_modes`` modes."""
        return cls(
            num_modes=num_modes,
            coefficients=np.full(num_modes, 1 / np.sqrt(num_modes), dtype=complex),
            phase_mismatch=None if phases is None else np.asarray(phases, dtype=float),
            noise_fraction=noise_fraction,
        )

    @classmethod
    def with_amplitude_spread(cls, num_modes: int, spread: float, seed: int,
                              noise_fraction: float = 0.0) -> "SourceConfig":
        """Uniform amplitudes perturbed by a relative Gaussian spread (seeded)."""
        rng = np.random.default_rng(seed)
        amps = 1.0 + spread * rng.standard_normal(num_modes)
        amps = np.abs(amps).astype(complex)
        amps /= np.linalg.norm(amps)
        return cls(num_modes=num_modes, coefficients=amps, noise_fraction=noise_fraction)

    def truncated(self, d: int) -> "SourceConfig":
        """Source restricted to the first d modes, renormalized."""
        if not (1 <= d <= self.num_modes):
            raise ValidationError(f"cannot truncate {self.num_modes} modes to {d}")
        coeffs = self.coefficients[:d].copy()
        norm = np.linalg.norm(coeffs)
        if norm < 1e-300:
            raise ValidationError("truncated coefficients vanish")
        return SourceConfig(
            num_modes=d,
            coefficients=coeffs / norm,
            phase_mismatch=self.phase_mismatch[:d].copy(),
            noise_fraction=self.noise_fraction,
        )

    def with_noise(self, noise_fraction: float) -> "SourceConfig":
        return replace(self, noise_fraction=noise_fraction)

    def to_json_dict(self) -> dict:
        return {
            "D": self.num_modes,
            "coefficients_re": self.coefficients.real.tolist(),
            "coefficients_im": self.coefficients.imag.tolist(),
            "phases_deg": np.degrees(self.phase_mismatch).tolist(),
            "noise_fraction": self.noise_fraction,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "SourceConfig":
        try:
            num_modes = int(data["D"])
            coeffs = np.asarray(data["coefficients_re"], dtype=float) + 1j * np.asarray(
                data["coefficients_im"], dtype=float
            )
            phases = np.radians(np.asarray(data["phases_deg"], dtype=float))
            noise = float(data["noise_fraction"])
        except KeyError as exc:
            raise ValidationError(f"source config missing field {exc}") from exc
        return cls(num_modes=num_modes, coefficients=coeffs,
                   phase_mismatch=phases, noise_fraction=noise)


def ideal_state(cfg: SourceConfig) -> StateVector:
    """The pure diagonal source ket sum_i C_i e^{i phi_i} |i, i>."""
    d = cfg.num_modes
    amps = np.zeros(d * d, dtype=complex)
    diag = cfg.coefficients * np.exp(1j * cfg.phase_mismatch)
    amps[np.arange(d) * d + np.arange(d)] = diag
    return StateVector(d, d, amps)


def noisy_state(cfg: SourceConfig) -> DensityOperator:
    """(1 - p) |Psi><Psi| + p I/D^2 with p = cfg.noise_fraction."""
    d = cfg.num_modes
    psi = ideal_state(cfg)
    pure = np.outer(psi.amplitudes, psi.amplitudes.conj())
    p = cfg.noise_fraction
    mat = (1.0 - p) * pure + p * np.eye(d * d) / (d * d)
    return DensityOperator(d, d, mat)


def _pair_visibility_sum(rho: DensityOperator, j: int, k: int) -> float:
    """V_x + V_y + V_z for one spatial mode pair (zero if the pair is dark)."""
    total = 0.0
    for axis in bases.AXES:
        b_s = bases.pair_basis("X", j, k, axis, rho.dim_signal, side="signal")
        b_i = bases.pair_basis("X", j, k, axis, rho.dim_idler, side="idler")
        table = outcome_probabilities(rho, b_s.vector_matrix, b_i.vector_matrix)
        denom = table.sum()
        if denom < 1e-14:
            continue
        total += abs(table[0, 0] + table[1, 1] - table[0, 1] - table[1, 0]) / denom
    return total


def mean_pair_visibility(rho: DensityOperator) -> float:
    """Mean over all spatial mode pairs of the per-pair visibility sum, / 3."""
    d = min(rho.dim_signal, rho.dim_idler)
    pairs = [(j, k) for j in range(d) for k in range(j + 1, d)]
    sums = [_pair_visibility_sum(rho, j, k) for j, k in pairs]
    return float(np.mean(sums)) / 3.0


def fit_noise_to_visibility(target_mean_visibility: float, cfg: SourceConfig) -> float:
    """Noise fraction whose mean spatial-pair visibility matches the target.

    Solved by bisection to 1e-6; the mean visibility is strictly decreasing
    in the noise fraction, from its p=0 ceiling down to 0 at p=1.  Targets
    above the ceiling (or non-positive) are unreachable and raise.
    """
    if not (0.0 < target_mean_visibility <= 1.0):
        raise ValidationError("target mean visibility must lie in (0, 1]")

    def mean_vis(p: float) -> float:
        return mean_pair_visibility(noisy_state(cfg.with_noise(p)))

    ceiling = mean_vis(0.0)
    if target_mean_visibility > ceiling + 1e-12:
        raise ValidationError(
            f"target visibility {target_mean_visibility} exceeds the noise-free "
            f"ceiling {ceiling:.6f} for this source"
        )
    lo, hi = 0.0, 1.0  # mean_vis(lo) >= target >= mean_vis(hi)
    while hi - lo > NOISE_FIT_TOL:
        mid = (lo + hi) / 2
        if mean_vis(mid) >= target_mean_visibility:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2
