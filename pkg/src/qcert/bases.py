"""Measurement-basis synthesis for the multiplexed mode space.

Conventions used throughout the toolkit:

* The spatial (X) basis is the computational basis of mode labels 0..d-1.
* The momentum (K) basis is the discrete Fourier basis
  |k> = (1/sqrt(d)) sum_x exp(2 pi i x k / d) |x>.
* A K-label on the idler side refers to the conjugated Fourier ket, so that
  the diagonal source produces correlations at equal labels on both sides.
  (Measuring both sides with same-sign Fourier kets anti-correlates the
  labels instead: k_s = -k_i mod d.)
* Bell-test detector bases carry fractional label offsets: the signal side
  uses offsets (0, 0.5) for its two settings, the idler side (0.25, -0.25).

Each synthesized basis also has a hardware realization as a multi-tone RF
program for an acousto-optic deflector: tone x carries the amplitude and
phase of the ket component on mode x at frequency offset x * tone spacing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .linalg import DensityOperator, Projector, outcome_probabilities

MAX_MODES = 10
TONE_SPACING_MHZ = 0.8
AXES = ("x", "y", "z")

SIGNAL_SETTING_OFFSETS = (0.0, 0.5)
IDLER_SETTING_OFFSETS = (0.25, -0.25)

__all__ = [
    "MeasurementBasis",
    "RfToneProgram",
    "x_basis",
    "k_basis",
    "mub_pair_basis",
    "pair_basis",
    "cglmp_basis",
    "mode_vector",
    "rf_tone_program",
    "ket_from_tone_program",
    "joint_probability_table",
    "AXES",
]


@dataclass(frozen=True)
class MeasurementBasis:
    """An ordered set of orthonormal outcome projectors with labels.

    ``dim`` is the embedding dimension; a basis is complete when it has one
    outcome per dimension.  Incomplete (embedded) bases model post-selection:
    the remaining weight falls on an implicit no-click outcome spanning the
    orthogonal complement.
    """

    name: str
    side: str
    dim: int
    projectors: tuple[Projector, ...]

    def __post_init__(self) -> None:
        if self.side not in ("signal", "idler"):
            raise ValidationError(f"side must be 'signal' or 'idler', got {self.side!r}")
        if not self.projectors:
            raise ValidationError("a basis needs at least one outcome")
        mat = self.vector_matrix
        if mat.shape[1] != self.dim:
            raise ValidationError("projector vectors do not match the basis dimension")
        gram = mat.conj() @ mat.T
        if np.max(np.abs(gram - np.eye(len(self.projectors)))) > 1e-10:
            raise ValidationError(f"basis {self.name!r} is not orthonormal within 1e-10")

    @property
    def vector_matrix(self) -> np.ndarray:
        """Outcome kets stacked as rows, shape (n_outcomes, dim)."""
        return np.array([p.vector for p in self.projectors])

    @property
    def labels(self) -> tuple:
        return tuple(p.label for p in self.projectors)

    @property
    def complete(self) -> bool:
        return len(self.projectors) == self.dim

    def lost_weight(self, rho: DensityOperator) -> float:
        """Probability routed to the no-click complement outcome."""
        mat = self.vector_matrix
        if self.side == "signal":
            marg = np.einsum("ax,xiyi,ay->a", mat.conj(), rho.reshaped(), mat)
        else:
            marg = np.einsum("ax,ixiy,ay->a", mat.conj(), rho.reshaped(), mat)
        return float(max(0.0, 1.0 - marg.real.sum()))

    def to_json_dict(self) -> dict:
        mat = self.vector_matrix
        return {
            "name": self.name,
            "side": self.side,
            "dim": self.dim,
            "labels": list(self.labels),
            "vectors_re": mat.real.tolist(),
            "vectors_im": mat.imag.tolist(),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "MeasurementBasis":
        vecs = np.asarray(data["vectors_re"]) + 1j * np.asarray(data["vectors_im"])
        projs = tuple(Projector(v, lab) for v, lab in zip(vecs, data["labels"]))
        return cls(name=data["name"], side=data["side"], dim=int(data["dim"]), projectors=projs)


@dataclass(frozen=True)
class RfToneProgram:
    """Multi-tone RF drive realizing one measurement ket on a deflector.

    Each tone is (frequency offset in MHz, amplitude, phase in radians);
    offsets sit on the tone-spacing grid and amplitudes are normalized so
    the squared sum is one.
    """

    tones: tuple[tuple[float, float, float], ...]
    tone_spacing_mhz: float = TONE_SPACING_MHZ

    def __post_init__(self) -> None:
        if not self.tones:
            raise ValidationError("a tone program needs at least one tone")
        power = sum(a * a for _, a, _ in self.tones)
        if abs(power - 1.0) > 1e-10:
            raise ValidationError(f"tone power {power!r} is not normalized within 1e-10")
        for f, _, _ in self.tones:
            steps = f / self.tone_spacing_mhz
            if abs(steps - round(steps)) > 1e-9:
                raise ValidationError(f"tone offset {f} MHz is off the spacing grid")


def _check_mode_count(d: int) -> None:
    if not (1 <= d <= MAX_MODES):
        raise ValidationError(f"mode count must be between 1 and {MAX_MODES}, got {d}")


def _embed(vec: np.ndarray, dim: int) -> np.ndarray:
    if dim == vec.size:
        return vec
    out = np.zeros(dim, dtype=complex)
    out[: vec.size] = vec
    return out


def _unit(label: int, dim: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[label] = 1.0
    return v


def _fourier(k: float, d: int) -> np.ndarray:
    x = np.arange(d)
    return np.exp(2j * np.pi * x * k / d) / np.sqrt(d)


def mode_vector(space: str, label: int, d: int, side: str = "signal") -> np.ndarray:
    """The ket a given mode label refers to, per space and side conventions."""
    if not (0 <= label < d):
        raise ValidationError(f"mode label {label} outside 0..{d - 1}")
    if space == "X":
        return _unit(label, d)
    if space == "K":
        vec = _fourier(label, d)
        return vec.conj() if side == "idler" else vec
    raise ValidationError(f"unknown space {space!r}, expected 'X' or 'K'")


def x_basis(d: int, side: str = "signal") -> MeasurementBasis:
    """The spatial basis: one projector per mode label."""
    _check_mode_count(d)
    projs = tuple(Projector(_unit(x, d), x) for x in range(d))
    return MeasurementBasis(name=f"X{d}", side=side, dim=d, projectors=projs)


def k_basis(d: int, side: str = "signal") -> MeasurementBasis:
    """The Fourier basis |k> = (1/sqrt(d)) sum_x e^{2 pi i x k / d} |x>.

    On the idler side the kets are conjugated so equal labels mark the
    correlated outcomes of the diagonal source.
    """
    _check_mode_count(d)
    projs = tuple(
        Projector(mode_vector("K", k, d, side=side), k) for k in range(d)
    )
    return MeasurementBasis(name=f"K{d}", side=side, dim=d, projectors=projs)


def _pair_vectors(u: np.ndarray, v: np.ndarray, axis: str):
    if axis == "z":
        return u, v
    if axis == "x":
        return (u + v) / np.sqrt(2), (u - v) / np.sqrt(2)
    if axis == "y":
        return (u + 1j * v) / np.sqrt(2), (u - 1j * v) / np.sqrt(2)
    raise ValidationError(f"unknown axis {axis!r}, expected one of {AXES}")


def pair_basis(
    space: str, j: int, k: int, axis: str, d_total: int, side: str = "signal"
) -> MeasurementBasis:
    """Two-outcome basis on the subspace spanned by modes j and k.

    Axis z projects onto the pair modes themselves; x and y onto their
    balanced superpositions with relative phase 0/pi and +-pi/2.  Outcomes
    are labeled +1 and -1.  The basis is embedded in the full mode space,
    so outside-subspace weight is post-selected away (no click).
    """
    _check_mode_count(d_total)
    if j == k:
        raise ValidationError("pair modes must differ")
    u = mode_vector(space, j, d_total, side=side)
    v = mode_vector(space, k, d_total, side=side)
    plus, minus = _pair_vectors(u, v, axis)
    projs = (Projector(plus, 1), Projector(minus, -1))
    name = f"pair{space}:{j}-{k}:{axis}"
    return MeasurementBasis(name=name, side=side, dim=d_total, projectors=projs)


def mub_pair_basis(j: int, k: int, axis: str, d_total: int, side: str = "signal") -> MeasurementBasis:
    """Spatial-pair unbiased-triple basis (sigma_x / sigma_y / sigma_z analogue)."""
    return pair_basis("X", j, k, axis, d_total, side=side)


def cglmp_basis(side: str, setting: int, d: int, embed_dim: int | None = None) -> MeasurementBasis:
    """Bell-test detector basis for one side and setting.

    Signal outcomes k use kets (1/sqrt(d)) sum_x e^{2 pi i x (k + theta_s)/d} |x>
    with theta = (0, 0.5); idler outcomes l use
    (1/sqrt(d)) sum_x e^{2 pi i x (-l + phi_i)/d} |x> with phi = (0.25, -0.25).
    With ``embed_dim`` the d-outcome basis is embedded in a larger mode space
    (outcomes span modes 0..d-1 only), modeling post-selected measurements.
    """
    if d < 2:
        raise ValidationError("detector bases need at least two outcomes")
    if setting not in (0, 1):
        raise ValidationError(f"setting must be 0 or 1, got {setting}")
    dim = embed_dim if embed_dim is not None else d
    if dim < d:
        raise ValidationError("embedding dimension smaller than the basis")
    projs = []
    for out in range(d):
        if side == "signal":
            vec = _fourier(out + SIGNAL_SETTING_OFFSETS[setting], d)
        elif side == "idler":
            vec = _fourier(-out + IDLER_SETTING_OFFSETS[setting], d)
        else:
            raise ValidationError(f"side must be 'signal' or 'idler', got {side!r}")
        projs.append(Projector(_embed(vec, dim), out))
    name = f"bell{side[0].upper()}{setting}:d{d}"
    return MeasurementBasis(name=name, side=side, dim=dim, projectors=tuple(projs))


def rf_tone_program(outcome, tone_spacing_mhz: float = TONE_SPACING_MHZ) -> RfToneProgram:
    """Tone program realizing one measurement ket: tone x at offset x*spacing
    carries amplitude |v_x| and phase arg(v_x); zero-amplitude modes are omitted."""
    vec = outcome.vector if isinstance(outcome, Projector) else np.asarray(outcome, dtype=complex)
    tones = []
    for x, amp in enumerate(vec):
        mag = abs(amp)
        if mag < 1e-15:
            continue
        tones.append((x * tone_spacing_mhz, float(mag), float(np.angle(amp))))
    return RfToneProgram(tones=tuple(tones), tone_spacing_mhz=tone_spacing_mhz)


def ket_from_tone_program(program: RfToneProgram, dim: int) -> np.ndarray:
    """Inverse synthesis: rebuild the ket a tone program realizes."""
    vec = np.zeros(dim, dtype=complex)
    for f, amp, phase in program.tones:
        mode = round(f / program.tone_spacing_mhz)
        if not (0 <= mode < dim):
            raise ValidationError(f"tone at {f} MHz maps outside the {dim}-mode space")
        vec[mode] = amp * np.exp(1j * phase)
    return vec


def joint_probability_table(
    rho: DensityOperator, basis_s: MeasurementBasis, basis_i: MeasurementBasis
) -> np.ndarray:
    """Outcome-pair probabilities Tr(rho (P_a x P_b)), shape (n_s, n_i)."""
    return outcome_probabilities(rho, basis_s.vector_matrix, basis_i.vector_matrix)
