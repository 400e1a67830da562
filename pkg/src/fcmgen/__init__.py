"""Learn one fuzzy cognitive map per individual from longitudinal data."""

__version__ = "0.1.0"

from .data import (
    ConceptSchema,
    LongitudinalDataset,
    Participant,
    SyntheticSpec,
    generate_synthetic,
    load_longitudinal,
    normalize,
)
from .evaluation import ErrorReport, evaluate_population, normality_screen, trajectory_report
from .fcm import ActivationSpec, SimulationSpec, activate, simulate_fcm, step_fcm
from .ga import GaConfig, LearnResult, fitness_of, learn_individual
from .normality import dagostino_pearson
from .population import PopulationResult, mean_participant, one_fits_all, one_for_each
