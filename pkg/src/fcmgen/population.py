"""Scale the individual learner to whole longitudinal datasets.

``one_for_each`` learns a separate map per participant; ``one_fits_all`` learns a
single map from the participant-averaged waves. Every (participant, restart)
task gets a seed derived from the master seed, so results do not depend on the
number of workers or on scheduling order.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import LongitudinalDataset, Participant
from .errors import ConfigError, DataError
from .ga import GaConfig, LearnResult, learn_individual

__all__ = [
    "PopulationResult",
    "derive_seed",
    "config_digest",
    "one_for_each",
    "one_fits_all",
    "mean_participant",
    "MEAN_ID",
]

MEAN_ID = "__mean__"


@dataclass
class PopulationResult:
    per_participant: dict  # participant_id -> LearnResult
    config_digest: str
    restart_used: dict = dataclasses.field(default_factory=dict)  # participant_id -> restart index


def derive_seed(master_seed: int, participant_id: str, restart: int) -> int:
    key = f"{int(master_seed)}\x1f{participant_id}\x1f{int(restart)}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little")


def config_digest(config: GaConfig, data: LongitudinalDataset, restarts: int | None = None) -> str:
    payload = {"config": config.to_dict(), "dataset": data.digest(), "restarts": restarts}
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def mean_participant(data: LongitudinalDataset) -> Participant:
    """Element-wise mean over participants, per wave and concept."""
    if not data.participants:
        raise DataError("dataset has no participants")
    waves = np.mean(np.stack([p.waves for p in data.participants]), axis=0)
    return Participant(MEAN_ID, waves)


def _run_task(participant: Participant, config: GaConfig, restart: int, initial_population):
    cfg = dataclasses.replace(config, seed=derive_seed(config.seed, participant.participant_id, restart))
    return learn_individual(participant.waves[0], participant.waves[1:], cfg, initial_population)


def _reduce(results: dict, restarts: int, threshold: float, early_exit: bool):
    # results: restart index -> LearnResult (possibly sparse past an early exit).
    # Best fitness wins, ties go to the lowest restart index. With early exit the
    # answer is the first restart reaching the threshold, which the sequential
    # schedule would also stop at.
    if early_exit:
        for r in range(restarts):
            if r in results and results[r].fitness >= threshold:
                return r, results[r]
    best = None
    for r in range(restarts):
        if r in results and (best is None or results[r].fitness > results[best].fitness):
            best = r
    return best, results[best]


def _learn_many(participants, config, restarts, threads, early_exit, initial_population):
    if restarts < 1:
        raise ConfigError("restarts must be >= 1")
    thr = config.fitness_threshold
    out = {}
    if threads is None or threads <= 1:
        for p in participants:
            res = {}
            for r in range(restarts):
                res[r] = _run_task(p, config, r, initial_population)
                if early_exit and res[r].fitness >= thr:
                    break
            out[p.participant_id] = _reduce(res, restarts, thr, early_exit)
        return out

    with ProcessPoolExecutor(max_workers=threads) as pool:
        futures = {
            (i, r): pool.submit(_run_task, p, config, r, initial_population)
            for i, p in enumerate(participants)
            for r in range(restarts)
        }
        for i, p in enumerate(participants):
            res = {}
            for r in range(restarts):
                res[r] = futures[(i, r)].result()
                if early_exit and res[r].fitness >= thr:
                    for rr in range(r + 1, restarts):
                        futures[(i, rr)].cancel()
                    break
            out[p.participant_id] = _reduce(res, restarts, thr, early_exit)
    return out


def one_for_each(
    data: LongitudinalDataset,
    config: GaConfig,
    restarts: int = 100,
    threads: int | None = 1,
    early_exit: bool = True,
    initial_population=None,
) -> PopulationResult:
    """Learn one weight matrix per participant, best of ``restarts`` GA runs each."""
    if not data.participants:
        raise DataError("dataset has no participants")
    best = _learn_many(data.participants, config, restarts, threads, early_exit, initial_population)
    return PopulationResult(
        per_participant={pid: r for pid, (_, r) in best.items()},
        config_digest=config_digest(config, data, restarts),
        restart_used={pid: i for pid, (i, _) in best.items()},
    )


def one_fits_all(
    data: LongitudinalDataset,
    config: GaConfig,
    restarts: int = 100,
    threads: int | None = 1,
    early_exit: bool = True,
) -> LearnResult:
    """Learn a single weight matrix for the average participant."""
    mean = mean_participant(data)
    best = _learn_many([mean], config, restarts, threads, early_exit, None)
    return best[MEAN_ID][1]
