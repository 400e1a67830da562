"""Population-level error profiles, trajectory tables and normality screening."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .data import LongitudinalDataset, Participant, format_float
from .errors import ConfigError, DimensionError
from .fcm import ActivationSpec, simulate_batch
from .ga import LearnResult
from .normality import dagostino_pearson
from .population import PopulationResult

__all__ = [
    "ErrorReport",
    "NormalityResult",
    "TrajectoryTable",
    "evaluate_population",
    "normality_screen",
    "trajectory_report",
]


@dataclass
class ErrorReport:
    """Mean signed difference (simulated - observed), shape ``(T, n)`` for waves 1..T."""

    per_concept_per_wave: np.ndarray
    sample_ids: list
    concept_labels: list

    @property
    def mean_abs_error(self) -> float:
        return float(np.mean(np.abs(self.per_concept_per_wave)))

    @property
    def max_abs_error(self) -> float:
        return float(np.max(np.abs(self.per_concept_per_wave)))

    @property
    def per_concept_mean(self) -> np.ndarray:
        return self.per_concept_per_wave.mean(axis=0)

    def to_dict(self) -> dict:
        return {
            "per_concept_per_wave": self.per_concept_per_wave.tolist(),
            "mean_abs_error": self.mean_abs_error,
            "max_abs_error": self.max_abs_error,
            "per_concept_mean": self.per_concept_mean.tolist(),
            "sample_ids": list(self.sample_ids),
            "concept_labels": list(self.concept_labels),
        }

    def write_csv(self, fh) -> None:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["wave", *self.concept_labels])
        for s, row in enumerate(self.per_concept_per_wave, start=1):
            out.writerow([s, *(format_float(x) for x in row)])

    def write_json(self, fh) -> None:
        json.dump(self.to_dict(), fh, indent=2)
        fh.write("\n")


@dataclass
class NormalityResult:
    """Per wave (0..T) and concept: K^2 statistic and p-value across participants."""

    statistic: np.ndarray
    p_value: np.ndarray
    concept_labels: list

    @property
    def reject_at_005(self) -> np.ndarray:
        return self.p_value < 0.05

    def write_csv(self, fh) -> None:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["wave", "concept", "k2", "p_value", "reject_at_005"])
        for t in range(self.statistic.shape[0]):
            for c, lab in enumerate(self.concept_labels):
                out.writerow(
                    [t, lab, format_float(self.statistic[t, c]), format_float(self.p_value[t, c]),
                     str(bool(self.reject_at_005[t, c])).lower()]
                )


def _matrix_for(result, participant_id):
    if isinstance(result, LearnResult):
        return result.weights
    if isinstance(result, PopulationResult):
        return result.per_participant[participant_id].weights
    if isinstance(result, dict):
        w = result[participant_id]
        return w.weights if isinstance(w, LearnResult) else np.asarray(w)
    return np.asarray(result)


def evaluate_population(
    data: LongitudinalDataset,
    result,
    sample_size: int | None = None,
    rng: np.random.Generator | None = None,
    activation: ActivationSpec = ActivationSpec(),
) -> ErrorReport:
    """Simulate sampled participants from their baselines and average the residuals.

    ``result`` is a :class:`PopulationResult` (or a mapping id -> matrix) giving
    each participant its own map, or a :class:`LearnResult` / single matrix
    shared by everyone. Participants are drawn without replacement.
    """
    p = data.p
    if sample_size is None:
        sample_size = p
    if not 1 <= sample_size <= p:
        raise ConfigError(f"sample_size must lie in [1, {p}], got {sample_size}")
    if sample_size == p:
        chosen = list(range(p))
    else:
        rng = rng if rng is not None else np.random.default_rng()
        chosen = rng.choice(p, size=sample_size, replace=False).tolist()
    sample = sorted((data.participants[i] for i in chosen), key=lambda q: q.participant_id)
    T = data.T

    diffs = []
    for part in sample:
        w = _matrix_for(result, part.participant_id)
        if w.shape != (data.n, data.n):
            raise DimensionError("weight matrix", data.n, w.shape)
        sim = simulate_batch(part.baseline, w[None], T, activation)[0]
        diffs.append(sim[1:] - part.waves[1:])
    return ErrorReport(
        per_concept_per_wave=np.mean(np.stack(diffs), axis=0),
        sample_ids=[q.participant_id for q in sample],
        concept_labels=list(data.concept_labels),
    )


def normality_screen(data: LongitudinalDataset) -> NormalityResult:
    """Test each concept at each wave for normality across participants."""
    arr = data.array()
    waves, n = arr.shape[1], arr.shape[2]
    stat = np.full((waves, n), np.nan)
    pval = np.full((waves, n), np.nan)
    for t in range(waves):
        for c in range(n):
            col = arr[:, t, c]
            if np.all(col == col[0]):
                # a constant column is as far from normal as it gets
                stat[t, c], pval[t, c] = np.inf, 0.0
                continue
            stat[t, c], pval[t, c] = dagostino_pearson(col)
    return NormalityResult(stat, pval, list(data.concept_labels))


@dataclass
class TrajectoryTable:
    concept_labels: list
    ground_truth: np.ndarray  # (T + 1, n)
    simulated: dict  # label -> (T + 1, n)

    def deviation(self, label) -> np.ndarray:
        """Absolute deviation from the ground truth at waves 1..T."""
        return np.abs(self.simulated[label][1:] - self.ground_truth[1:])

    def rows(self):
        labels = list(self.simulated)
        yield ["concept", "wave", "ground_truth", *labels]
        for c, name in enumerate(self.concept_labels):
            for t in range(self.ground_truth.shape[0]):
                yield [name, t, format_float(self.ground_truth[t, c]),
                       *(format_float(self.simulated[k][t, c]) for k in labels)]

    def write_csv(self, fh) -> None:
        csv.writer(fh, lineterminator="\n").writerows(self.rows())


def trajectory_report(
    individual: Participant,
    matrices,
    activation: ActivationSpec = ActivationSpec(),
    concept_labels=None,
) -> TrajectoryTable:
    """Simulate each labelled matrix from the individual's baseline next to their data."""
    matrices = list(matrices)
    if not matrices:
        raise ValueError("need at least one matrix")
    n = individual.waves.shape[1]
    T = individual.waves.shape[0] - 1
    sims = {}
    for label, w in matrices:
        w = np.asarray(w, dtype=np.float64)
        if w.shape != (n, n):
            raise DimensionError(f"matrix {label!r}", n, w.shape)
        sims[label] = simulate_batch(individual.baseline, w[None], T, activation)[0]
    labels = concept_labels if concept_labels is not None else [f"c{i}" for i in range(n)]
    return TrajectoryTable(list(labels), individual.waves.copy(), sims)
