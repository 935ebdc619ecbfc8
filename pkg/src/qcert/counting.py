"""Finite-statistics photon counting: simulation, accidental subtraction, tables.

Count model for one measurement setting with outcome cells (a, b), joint
outcome probabilities P(a,b) and side marginals P(a), Q(b) taken against the
full mode space:

    true coincidences   N * P_S * eta_r * P(a,b)
    accidentals         N * P_S * P(a) * P_I * Q(b)
    signal singles      N * P_S * P(a)
    idler singles       N * P_I * Q(b)

with P_I = eta_r * P_S + P_bg_idler (retrieved excitations at the per-trial
occupancy scale P_S, plus uncorrelated background).  The accidental mean is
the product of the singles means over N, so the standard subtraction
C' = C_SI - C_S C_I / N removes it without bias, cell by cell.

Counts are drawn Poisson from deterministic per-outcome random streams keyed
by (master seed, setting name, outcome key), so tables are reproducible
regardless of execution order, thread count, or outcome ordering.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .linalg import DensityOperator
from .bases import MeasurementBasis, joint_probability_table

__all__ = [
    "CountingParams",
    "CountRecord",
    "CorrectedCount",
    "CoincidenceTable",
    "SettingMeans",
    "setting_means",
    "simulate_setting",
    "subtract_accidentals",
    "raw_count",
    "with_accidental_noise",
    "outcome_stream",
    "save_table",
    "load_table",
    "bootstrap_table",
    "CSV_HEADER",
]

CSV_HEADER = ("setting", "outcome_s", "outcome_i",
              "coincidences", "singles_s", "singles_i", "trials")


@dataclass(frozen=True)
class CountingParams:
    """Detection model parameters.

    P_S: per-trial probability of recording a signal photon.
    eta_r: retrieval efficiency of the stored excitation.
    P_bg_idler: per-trial uncorrelated idler background probability.
    """

    P_S: float = 0.006
    eta_r: float = 0.1
    P_bg_idler: float = 0.0

    def __post_init__(self) -> None:
        for name in ("P_S", "eta_r", "P_bg_idler"):
            val = getattr(self, name)
            if not (0.0 <= val <= 1.0):
                raise ValidationError(f"{name} must lie in [0, 1], got {val}")
        if self.eta_r + self.P_I > 1.0:
            raise ValidationError("eta_r + P_I exceeds 1; coincidence rate is ill-defined")

    @property
    def P_I(self) -> float:
        """Total per-trial idler detection probability."""
        return self.eta_r * self.P_S + self.P_bg_idler


def with_accidental_noise(params: CountingParams, noise_fraction: float) -> CountingParams:
    """Raise the idler background so accidentals mimic an isotropic noise admixture.

    A source with isotropic noise fraction p has maximally mixed reduced
    states, and so do the accidentals of this count model; the two coincide
    exactly when P_I / eta_r = p / (1 - p).  The returned parameters add the
    required background on top of the existing one.
    """
    if not (0.0 <= noise_fraction < 1.0):
        raise ValidationError("noise fraction must lie in [0, 1) for the counting channel")
    extra = params.eta_r * noise_fraction / (1.0 - noise_fraction)
    return replace(params, P_bg_idler=params.P_bg_idler + extra)


@dataclass(frozen=True)
class CountRecord:
    """Counts for one (setting, signal outcome, idler outcome) cell."""

    setting: str
    outcome_s: int
    outcome_i: int
    coincidences: int
    singles_s: int
    singles_i: int
    trials: int

    def __post_init__(self) -> None:
        for name in ("coincidences", "singles_s", "singles_i"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")
        if self.trials < 1:
            raise ValidationError("trials must be at least 1")
        if self.coincidences > min(self.singles_s, self.singles_i):
            raise ValidationError("coincidences exceed the singles counts")
        if max(self.coincidences, self.singles_s, self.singles_i) > self.trials:
            raise ValidationError("counts exceed the trial count")

    @property
    def key(self) -> tuple:
        return (self.setting, self.outcome_s, self.outcome_i)


@dataclass(frozen=True)
class CorrectedCount:
    """A coincidence estimate with its propagated standard error."""

    value: float
    std_error: float


def subtract_accidentals(record: CountRecord) -> CorrectedCount:
    """C' = C_SI - C_S C_I / N with independent-Poisson error propagation.

    The corrected value may be negative; it is kept as-is so downstream sums
    stay unbiased.  With either singles count at zero the correction term
    vanishes.  The standard error is
    sqrt(C_SI + (C_S C_I / N)^2 (1/C_S + 1/C_I)).
    """
    c, s, i, n = record.coincidences, record.singles_s, record.singles_i, record.trials
    if s == 0 or i == 0:
        return CorrectedCount(value=float(c), std_error=math.sqrt(c))
    acc = s * i / n
    var = c + acc * acc * (1.0 / s + 1.0 / i)
    return CorrectedCount(value=c - acc, std_error=math.sqrt(var))


def raw_count(record: CountRecord) -> CorrectedCount:
    """Uncorrected coincidence count with its Poisson standard error."""
    return CorrectedCount(value=float(record.coincidences),
                          std_error=math.sqrt(record.coincidences))


@dataclass(frozen=True)
class SettingMeans:
    """Analytic count means for one setting (before Poisson sampling)."""

    coincidences: np.ndarray  # (n_s, n_i)
    singles_s: np.ndarray     # (n_s,)
    singles_i: np.ndarray     # (n_i,)


def setting_means(
    rho: DensityOperator,
    basis_s: MeasurementBasis,
    basis_i: MeasurementBasis,
    trials: int,
    params: CountingParams,
) -> SettingMeans:
    """Expected counts for every cell of one setting."""
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    table = joint_probability_table(rho, basis_s, basis_i)
    r4 = rho.reshaped()
    v_s = basis_s.vector_matrix
    v_i = basis_i.vector_matrix
    marg_s = np.einsum("ax,xiyi,ay->a", v_s.conj(), r4, v_s, optimize=True).real
    marg_i = np.einsum("bx,ixiy,by->b", v_i.conj(), r4, v_i, optimize=True).real
    marg_s = np.clip(marg_s, 0.0, 1.0)
    marg_i = np.clip(marg_i, 0.0, 1.0)
    for total, what in ((table.sum(), "joint"), (marg_s.sum(), "signal"), (marg_i.sum(), "idler")):
        if total > 1.0 + 1e-9:
            raise ValidationError(f"{what} probability table sums to {total}, above 1")
    n = float(trials)
    lam_true = n * params.P_S * params.eta_r * table
    lam_acc = n * params.P_S * params.P_I * np.outer(marg_s, marg_i)
    return SettingMeans(
        coincidences=lam_true + lam_acc,
        singles_s=n * params.P_S * marg_s,
        singles_i=n * params.P_I * marg_i,
    )


def outcome_stream(seed: int, setting: str, *key_parts) -> np.random.Generator:
    """Deterministic random stream for one (seed, setting, outcome key)."""
    text = "\x1f".join([setting, *map(str, key_parts)])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    word = int.from_bytes(digest[:8], "little")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), word])))


def simulate_setting(
    rho: DensityOperator,
    basis_s: MeasurementBasis,
    basis_i: MeasurementBasis,
    trials: int,
    params: CountingParams,
    seed: int,
    setting_name: str | None = None,
) -> list[CountRecord]:
    """Draw one setting's count table from the detection model.

    Every outcome cell and every singles counter draws from its own keyed
    stream.  Singles are built as the sum of the cell's coincidences plus an
    independent top-up, which keeps C_SI <= min(C_S, C_I) record by record.
    """
    name = setting_name or f"{basis_s.name}|{basis_i.name}"
    means = setting_means(rho, basis_s, basis_i, trials, params)
    labels_s = basis_s.labels
    labels_i = basis_i.labels
    n_s, n_i = means.coincidences.shape

    cells = np.zeros((n_s, n_i), dtype=np.int64)
    for a, lab_a in enumerate(labels_s):
        for b, lab_b in enumerate(labels_i):
            rng = outcome_stream(seed, name, "cell", lab_a, lab_b)
            cells[a, b] = rng.poisson(means.coincidences[a, b])

    singles_s = np.zeros(n_s, dtype=np.int64)
    for a, lab_a in enumerate(labels_s):
        rng = outcome_stream(seed, name, "singles_s", lab_a)
        topup = max(means.singles_s[a] - means.coincidences[a, :].sum(), 0.0)
        singles_s[a] = cells[a, :].sum() + rng.poisson(topup)

    singles_i = np.zeros(n_i, dtype=np.int64)
    for b, lab_b in enumerate(labels_i):
        rng = outcome_stream(seed, name, "singles_i", lab_b)
        topup = max(means.singles_i[b] - means.coincidences[:, b].sum(), 0.0)
        singles_i[b] = cells[:, b].sum() + rng.poisson(topup)

    records = []
    for a, lab_a in enumerate(labels_s):
        for b, lab_b in enumerate(labels_i):
            records.append(CountRecord(
                setting=name,
                outcome_s=int(lab_a),
                outcome_i=int(lab_b),
                coincidences=int(cells[a, b]),
                singles_s=int(singles_s[a]),
                singles_i=int(singles_i[b]),
                trials=int(trials),
            ))
    return records


@dataclass(frozen=True)
class CoincidenceTable:
    """An immutable collection of count records plus run metadata."""

    records: tuple[CountRecord, ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))
        seen = set()
        for rec in self.records:
            if rec.key in seen:
                raise ValidationError(f"duplicate record key {rec.key}")
            seen.add(rec.key)

    def settings(self) -> list[str]:
        out, seen = [], set()
        for rec in self.records:
            if rec.setting not in seen:
                seen.add(rec.setting)
                out.append(rec.setting)
        return out

    def by_setting(self, setting: str) -> dict[tuple[int, int], CountRecord]:
        return {(r.outcome_s, r.outcome_i): r for r in self.records if r.setting == setting}

    def merged(self, other: "CoincidenceTable") -> "CoincidenceTable":
        """Cell-wise merge of two tables from identically configured runs."""
        index = {r.key: r for r in self.records}
        merged = dict(index)
        for rec in other.records:
            if rec.key in index:
                prev = index[rec.key]
                merged[rec.key] = CountRecord(
                    setting=rec.setting,
                    outcome_s=rec.outcome_s,
                    outcome_i=rec.outcome_i,
                    coincidences=prev.coincidences + rec.coincidences,
                    singles_s=prev.singles_s + rec.singles_s,
                    singles_i=prev.singles_i + rec.singles_i,
                    trials=prev.trials + rec.trials,
                )
            else:
                merged[rec.key] = rec
        return CoincidenceTable(records=tuple(merged.values()), metadata=dict(self.metadata))


def _meta_path(path: Path) -> Path:
    return path.with_name(path.stem + ".meta.json")


def save_table(table: CoincidenceTable, path) -> None:
    """Write the counts CSV plus its JSON metadata sidecar."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for rec in table.records:
            writer.writerow([rec.setting, rec.outcome_s, rec.outcome_i,
                             rec.coincidences, rec.singles_s, rec.singles_i, rec.trials])
    with open(_meta_path(path), "w", encoding="utf-8") as fh:
        json.dump(table.metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_table(path) -> CoincidenceTable:
    """Read a counts CSV (strict schema); parse errors name the line number."""
    path = Path(path)
    records = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty counts file") from None
        if tuple(header) != CSV_HEADER:
            raise ValidationError(
                f"{path}: unexpected columns {header}; expected {list(CSV_HEADER)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise ValidationError(f"{path}:{lineno}: expected {len(CSV_HEADER)} fields")
            try:
                rec = CountRecord(
                    setting=row[0],
                    outcome_s=int(row[1]),
                    outcome_i=int(row[2]),
                    coincidences=int(row[3]),
                    singles_s=int(row[4]),
                    singles_i=int(row[5]),
                    trials=int(row[6]),
                )
            except (ValueError, ValidationError) as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
            records.append(rec)
    try:
        table = CoincidenceTable(records=tuple(records))
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    meta = _meta_path(path)
    metadata = {}
    if meta.exists():
        with open(meta, "r", encoding="utf-8") as fh:
            metadata = json.load(fh)
    return CoincidenceTable(records=table.records, metadata=metadata)


def bootstrap_table(table: CoincidenceTable, seed: int) -> CoincidenceTable:
    """Poisson-resample every record; the cross-check error estimator."""
    records = []
    for rec in table.records:
        rng = outcome_stream(seed, rec.setting, "bootstrap", rec.outcome_s, rec.outcome_i)
        c = int(rng.poisson(rec.coincidences))
        s = c + int(rng.poisson(max(rec.singles_s - rec.coincidences, 0)))
        i = c + int(rng.poisson(max(rec.singles_i - rec.coincidences, 0)))
        records.append(CountRecord(
            setting=rec.setting, outcome_s=rec.outcome_s, outcome_i=rec.outcome_i,
            coincidences=c, singles_s=min(s, rec.trials), singles_i=min(i, rec.trials),
            trials=rec.trials,
        ))
    return CoincidenceTable(records=tuple(records), metadata=dict(table.metadata))
