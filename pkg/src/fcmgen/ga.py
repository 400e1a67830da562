"""Real-coded genetic algorithm that learns an FCM weight matrix from target data.

Two fitness modes are supported. ``trajectory`` scores a candidate against every
observed wave; ``endpoint`` scores only the final state, as in the classic RCGA.
Fitness is ``1 / (100 * error + 1)`` where error is a sum of absolute deviations.

Population-level operators work on stacked ``(g, n, n)`` arrays; the single
matrix functions (:func:`crossover_pair`, :func:`mutate`) call the same code.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateDistributionError, DimensionError
from .fcm import ActivationSpec, as_concept_vector, simulate_batch

__all__ = [
    "GaConfig",
    "LearnResult",
    "make_rng",
    "init_population",
    "trajectory_error",
    "endpoint_error",
    "fitness_of",
    "crossover_pair",
    "crossover_population",
    "mutate",
    "mutate_population",
    "select_next_generation",
    "roulette_indices",
    "learn_individual",
]

MUTATION_GRID = np.arange(-100, 101) / 100.0


@dataclass(frozen=True)
class GaConfig:
    max_generations: int = 100_000
    gen_size: int = 100
    fitness_threshold: float = 0.99
    p_crossover: float = 0.9
    p_mutation: float = 0.5
    n_mutation: int = 2
    mutation_schedule: str = "constant"
    fitness_mode: str = "trajectory"
    activation: ActivationSpec = field(default_factory=ActivationSpec)
    seed: int = 0
    # Return the best matrix ever evaluated at the generation cap instead of the
    # best of the final generation only.
    track_best: bool = True

    def __post_init__(self):
        if self.max_generations < 0:
            raise ConfigError("max_generations must be >= 0")
        if self.gen_size < 2 or self.gen_size % 2:
            raise ConfigError(f"gen_size must be an even integer >= 2, got {self.gen_size}")
        if not 0.0 < self.fitness_threshold <= 1.0:
            raise ConfigError("fitness_threshold must lie in (0, 1]")
        for name in ("p_crossover", "p_mutation"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {v}")
        if self.n_mutation < 0:
            raise ConfigError("n_mutation must be >= 0")
        if self.mutation_schedule not in ("constant", "decaying"):
            raise ConfigError(f"unknown mutation_schedule {self.mutation_schedule!r}")
        if self.fitness_mode not in ("trajectory", "endpoint"):
            raise ConfigError(f"unknown fitness_mode {self.fitness_mode!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if isinstance(self.activation, dict):
            object.__setattr__(self, "activation", ActivationSpec(**self.activation))

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "GaConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class LearnResult:
    weights: np.ndarray
    fitness: float
    generations_used: int
    reached_threshold: bool


def make_rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def init_population(gen_size: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """``gen_size`` matrices with entries uniform on [-1, 1], shape ``(gen_size, n, n)``."""
    if gen_size < 2 or n < 1:
        raise ConfigError(f"need gen_size >= 2 and n >= 1, got {gen_size}, {n}")
    return rng.uniform(-1.0, 1.0, size=(gen_size, n, n))


def _abs_dev_sum(a, b):
    # Fixed accumulation order: element by element along the flattened trailing axes.
    a = a.reshape(a.shape[0], -1)
    b = b.reshape(b.shape[0], -1)
    total = np.zeros(a.shape[0])
    for k in range(a.shape[1]):
        total += np.abs(a[:, k] - b[:, k])
    return total


def trajectory_error(simulated, desired) -> float:
    """Sum of absolute deviations between simulated steps 1..t and the t desired waves.

    ``simulated`` holds at least t+1 states (row 0 is the shared initial state);
    ``desired`` holds the t target waves.
    """
    sim = np.asarray(simulated, dtype=np.float64)
    des = np.asarray(desired, dtype=np.float64)
    if des.ndim != 2 or sim.ndim != 2:
        raise DimensionError("trajectory", "2-D", (sim.shape, des.shape))
    t, n = des.shape
    if sim.shape[1] != n:
        raise DimensionError("trajectory width", n, sim.shape[1])
    if sim.shape[0] < t + 1:
        raise DimensionError("trajectory length", t + 1, sim.shape[0])
    return float(_abs_dev_sum(sim[None, 1 : t + 1], des[None])[0])


def endpoint_error(final, desired) -> float:
    f = np.asarray(final, dtype=np.float64).ravel()
    d = np.asarray(desired, dtype=np.float64).ravel()
    if f.size != d.size:
        raise DimensionError("endpoint", d.size, f.size)
    return float(_abs_dev_sum(f[None], d[None])[0])


def fitness_of(error):
    """Map a nonnegative error to (0, 1]; 1 only for a perfect fit."""
    e = np.asarray(error, dtype=np.float64)
    if np.any(e < 0) or np.any(np.isnan(e)):
        raise ValueError("error must be nonnegative")
    out = 1.0 / (100.0 * e + 1.0)
    return float(out) if out.ndim == 0 else out


def crossover_population(pop, rng, p_crossover=1.0, points=None):
    """One-point crossover of adjacent pairs (0,1), (2,3), ... in place.

    Each pair crosses with probability ``p_crossover``; from a uniformly drawn
    cell of the row-major flattened genome to the end, values are exchanged.
    ``points`` overrides the random cut per pair (used for tests).
    """
    g = pop.shape[0]
    npairs = g // 2
    cells = pop.shape[1] * pop.shape[2]
    flat = pop.reshape(g, cells)
    do = rng.random(npairs) < p_crossover
    cut = rng.integers(0, cells, size=npairs) if points is None else np.asarray(points)
    mask = do[:, None] & (np.arange(cells)[None, :] >= cut[:, None])
    a = flat[0 : 2 * npairs : 2]
    b = flat[1 : 2 * npairs : 2]
    new_a = np.where(mask, b, a)
    new_b = np.where(mask, a, b)
    flat[0 : 2 * npairs : 2] = new_a
    flat[1 : 2 * npairs : 2] = new_b
    return pop


def crossover_pair(wa, wb, rng, point=None):
    """Return copies of ``wa``/``wb`` with their genome suffixes from ``point`` swapped."""
    wa = np.asarray(wa, dtype=np.float64)
    wb = np.asarray(wb, dtype=np.float64)
    if wa.shape != wb.shape or wa.ndim != 2:
        raise DimensionError("crossover operands", wa.shape, wb.shape)
    pop = np.stack([wa, wb])
    pts = None if point is None else [point]
    crossover_population(pop, rng, 1.0, points=pts)
    return pop[0], pop[1]


def mutate_population(pop, n_mutation, rng, p_mutation=1.0):
    """Reassign ``n_mutation`` distinct cells of each selected matrix in place.

    A matrix is selected with probability ``p_mutation``; new values come from
    the grid {-1.00, -0.99, ..., 1.00}.
    """
    g, n, _ = pop.shape
    cells = n * n
    if n_mutation > cells:
        raise ConfigError(f"n_mutation={n_mutation} exceeds n*n={cells}")
    chosen = np.flatnonzero(rng.random(g) < p_mutation)
    if n_mutation == 0 or chosen.size == 0:
        return pop
    # distinct cells per matrix: the first k of a random permutation
    idx = np.argsort(rng.random((chosen.size, cells)), axis=1)[:, :n_mutation]
    vals = MUTATION_GRID[rng.integers(0, MUTATION_GRID.size, size=(chosen.size, n_mutation))]
    flat = pop.reshape(g, cells)
    flat[chosen[:, None], idx] = vals
    return pop


def mutate(w, n_mutation, rng):
    w = np.array(w, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise DimensionError("weight matrix", "square", w.shape)
    return mutate_population(w[None], n_mutation, rng, 1.0)[0]


def roulette_indices(fitnesses, rng, size=None) -> np.ndarray:
    """Draw indices with replacement, index i with probability fitness_i / sum."""
    fit = np.asarray(fitnesses, dtype=np.float64)
    if np.any(fit < 0):
        raise ValueError("fitness values must be nonnegative")
    cum = np.cumsum(fit)
    total = cum[-1] if cum.size else 0.0
    if not total > 0:
        raise DegenerateDistributionError("fitness sum is zero")
    r = rng.random(fit.size if size is None else size) * total
    return np.minimum(np.searchsorted(cum, r, side="right"), fit.size - 1)


def select_next_generation(matrices, fitnesses, rng):
    """Fitness-proportional selection with replacement; keeps the population size."""
    pop = np.asarray(matrices)
    idx = roulette_indices(fitnesses, rng)
    return pop[idx]


def _mutation_count(config, generation, rng):
    if config.mutation_schedule == "constant" or config.n_mutation <= 1:
        return config.n_mutation
    if rng.random() >= 0.5:
        return config.n_mutation
    frac = generation / max(config.max_generations, 1)
    return max(1, int(round(config.n_mutation - (config.n_mutation - 1) * frac)))


def learn_individual(initial, desired, config: GaConfig, initial_population=None) -> LearnResult:
    """Learn one weight matrix reproducing ``desired`` from ``initial``.

    ``desired`` is a ``(t, n)`` array of target waves 1..t. Candidates are
    simulated for exactly t steps. Returns the lowest-index matrix of the first
    generation containing a fitness >= threshold, or the best matrix found when
    ``max_generations`` is exhausted.
    """
    a0 = as_concept_vector(initial)
    n = a0.size
    des = np.asarray(desired, dtype=np.float64)
    if des.ndim == 1:
        des = des[None, :]
    if des.ndim != 2 or des.shape[0] < 1:
        raise DimensionError("desired waves", "(t, n)", des.shape)
    if des.shape[1] != n:
        raise DimensionError("desired waves", n, des.shape[1])
    if config.n_mutation > n * n:
        raise ConfigError(f"n_mutation={config.n_mutation} exceeds n*n={n * n}")
    t = des.shape[0]
    rng = make_rng(config.seed)
    spec = config.activation
    thr = config.fitness_threshold

    if initial_population is None:
        pop = init_population(config.gen_size, n, rng)
    else:
        pop = np.array(initial_population, dtype=np.float64)
        if pop.shape != (config.gen_size, n, n):
            raise DimensionError("initial population", (config.gen_size, n, n), pop.shape)

    if config.fitness_mode == "trajectory":
        target = des[None]

        def evaluate(p):
            return fitness_of(_abs_dev_sum(simulate_batch(a0, p, t, spec)[:, 1:], target))

    else:
        target = des[-1][None]

        def evaluate(p):
            return fitness_of(_abs_dev_sum(simulate_batch(a0, p, t, spec)[:, -1], target))

    fit = evaluate(pop)
    hit = np.flatnonzero(fit >= thr)
    if hit.size:
        i = hit[0]
        return LearnResult(pop[i].copy(), float(fit[i]), 0, True)

    best_i = int(np.argmax(fit))
    best_w, best_fit = pop[best_i].copy(), float(fit[best_i])

    for gen in range(1, config.max_generations + 1):
        crossover_population(pop, rng, config.p_crossover)
        mutate_population(pop, _mutation_count(config, gen, rng), rng, config.p_mutation)
        fit = evaluate(pop)
        hit = np.flatnonzero(fit >= thr)
        if hit.size:
            i = hit[0]
            return LearnResult(pop[i].copy(), float(fit[i]), gen, True)
        gi = int(np.argmax(fit))
        if fit[gi] > best_fit:
            best_w, best_fit = pop[gi].copy(), float(fit[gi])
        idx = roulette_indices(fit, rng)
        pop = pop[idx]
        fit = fit[idx]

    if not config.track_best:
        gi = int(np.argmax(fit))
        best_w, best_fit = pop[gi].copy(), float(fit[gi])
    return LearnResult(best_w, best_fit, config.max_generations, False)
