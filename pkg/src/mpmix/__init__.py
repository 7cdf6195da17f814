"""Multiple-partition mixture models for mixed-type data.

Variables are grouped into independent blocks; each block carries its own
latent class model and so its own partition of the rows. Model structure is
chosen either by BIC through a penalized EM or by the maximum integrated
complete-data likelihood (MICL).
"""

from importlib import resources

from .bic import fit_penalized_em, search_bic
from .data import (
    BINARY,
    CONTINUOUS,
    COUNT,
    DataError,
    DataSet,
    ModelError,
    ModelSpec,
    MultiPartition,
    Theta,
    categorical,
    load_dataset,
)
from .distributions import PriorHyper, default_priors, log_marginal_proportions, log_marginal_variable
from .em import EMConfig, FitResult, fit_em
from .evaluation import adjusted_rand_index, block_recovery_ari, cross_tabulate
from .micl import MiclConfig, MiclResult, complete_data_evidence, optimize_micl, search_micl
from .selection import RankedModels, SearchConfig
from .simulation import SimScenario, sample_mpm, sample_scenario

__version__ = "0.1.0"


def load_cmc() -> DataSet:
    """The contraceptive method choice survey (1473 rows, 9 variables).

    The response column (method used) is dropped.
    """
    root = resources.files(__name__) / "datasets"
    with resources.as_file(root / "cmc.csv") as csv_path, resources.as_file(root / "cmc_schema.json") as schema:
        return load_dataset(csv_path, schema)


__all__ = [
    "BINARY", "CONTINUOUS", "COUNT", "DataError", "DataSet", "EMConfig", "FitResult", "MiclConfig",
    "MiclResult", "ModelError", "ModelSpec", "MultiPartition", "PriorHyper", "RankedModels",
    "SearchConfig", "SimScenario", "Theta", "adjusted_rand_index", "block_recovery_ari", "categorical",
    "complete_data_evidence", "cross_tabulate", "default_priors", "fit_em", "fit_penalized_em",
    "load_cmc", "load_dataset", "log_marginal_proportions", "log_marginal_variable", "optimize_micl",
    "sample_mpm", "sample_scenario", "search_bic", "search_micl",
]
