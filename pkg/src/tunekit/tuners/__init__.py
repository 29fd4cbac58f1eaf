from .acquisition import draw_qlcb_kappas, expected_improvement, lcb_utility
from .base import Proposal, TerminationStack, Tuner, TuningResult, run_tuning, should_stop
from .bo import BOTuner
from .es import ESTuner
from .gp import GPSurrogate, gp_fit, gp_predict
from .grid_random import GridTuner, RandomTuner
from .hyperband import (
    Bracket,
    HyperbandTuner,
    Stage,
    budget_bound,
    fidelity_ladder,
    hyperband_run,
    hyperband_schedule,
    max_exploration_level,
    sh_bracket,
)
from .racing import (
    IRaceConfig,
    IRaceResult,
    RaceResult,
    default_race_count,
    irace_run,
    paired_t_worse,
    parent_probabilities,
    race,
)

__all__ = [
    "BOTuner",
    "Bracket",
    "ESTuner",
    "GPSurrogate",
    "GridTuner",
    "HyperbandTuner",
    "IRaceConfig",
    "IRaceResult",
    "Proposal",
    "RaceResult",
    "RandomTuner",
    "Stage",
    "TerminationStack",
    "Tuner",
    "TuningResult",
    "budget_bound",
    "default_race_count",
    "draw_qlcb_kappas",
    "expected_improvement",
    "fidelity_ladder",
    "gp_fit",
    "gp_predict",
    "hyperband_run",
    "hyperband_schedule",
    "irace_run",
    "lcb_utility",
    "max_exploration_level",
    "paired_t_worse",
    "parent_probabilities",
    "race",
    "run_tuning",
    "sh_bracket",
    "should_stop",
]
