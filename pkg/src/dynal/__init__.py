"""Active learning for regression with a dynamically estimated
exploration-exploitation trade-off."""

from .acquisition import (
    AcquisitionScore,
    Committee,
    combine,
    committee_kernel_specs,
    fit_committee,
    score_igs,
    score_maxent,
    score_maxvar,
    score_qbc,
    score_random,
)
from .benchmarks import BENCHMARKS, NoiseModel, get_benchmark, rmse, sample_label
from .gpr import FittedGp, GpPosterior, GprConfig, fit, posterior_entropy, predict
from .kernels import GramMatrix, KernelSpec, eval_kernel, gram
from .loop import (
    Dataset,
    LoopSettings,
    RunRecord,
    Strategy,
    SyntheticOracle,
    TabularOracle,
    run_active_learning,
    select_next,
)
from .tradeoff import (
    AldConfig,
    HyperPriorBounds,
    McmcConfig,
    TradeOffChain,
    adaptive_tau2,
    ald_distance,
    beta_log_density,
    run_chain,
)

__version__ = "0.1.0"
