"""Visual-search psychophysics lab.

Generates search-display datasets, simulates capacity-limited
signal-detection observers, turns trial responses into d' set-size
curves, and fits the max-rule capacity model by maximum likelihood.
"""

from .capacity import (CapacityFit, ModelEval, ModelParams, fit_capacity,
                       item_dprime, neg_log_likelihood, optimal_criterion,
                       predicted_pc, predicted_rates)
from .errors import (BracketError, InsufficientDataError, PlacementError,
                     ValidationError, VslError)
from .observer import ObserverParams, sample_trial, sample_trials, simulate_observer
from .psychometrics import (CellStats, DPrimePoint, SlopeEstimate,
                            aggregate_cells, cell_dprime, loglog_slope,
                            normal_cdf, normal_quantile, pc_to_dprime)
from .records import ManifestRow, ResponseRecord
from .stimgen import (DisplaySpec, ItemSpec, TaskKind, generate_dataset,
                      plan_display, render_display, validate_display)

__version__ = "0.1.0"
