"""Two-stage sequential estimation of risk and odds ratios with guaranteed MSE.

Quick use::

    from seqratio import kind_from_name, derive_design, SyntheticSource, estimate

    kind = kind_from_name("rr")
    design = derive_design(0.05, 1.0, kind)
    src = SyntheticSource(0.08, 0.02, master_seed=7)
    res = estimate(kind, design, src)
    print(res.value, res.ledger.n_pop1, res.ledger.n_pop2)
"""

from .design import (
    KINDS,
    ConfigError,
    DesignParams,
    EstimatorKind,
    SecondStageParams,
    SecondStageReal,
    derive_design,
    error_fn,
    kind_from_name,
    round_sus,
    select_suf1,
    solve_sus,
)
from .estimators import (
    EstimateResult,
    Stage2Counts,
    StageOneResult,
    bernoulli_factory_pq,
    estimate,
    point_estimate,
    run_stage1,
    run_stage2,
)
from .grouping import GroupConfig, GroupedSource, estimate_grouped
from .harness import (
    CSV_COLUMNS,
    ExperimentSpec,
    SummaryRow,
    empirical_efficiency,
    grid_from_ratio_scale,
    run_experiment,
    write_csv,
)
from .sampling import (
    DRAW_CAP,
    DrawCapExceeded,
    ExternalOracleSource,
    PopulationId,
    ProtocolError,
    SampleLedger,
    SampleSource,
    SyntheticSource,
    ibs_count,
    ibs_failures_count,
)
from .theory import (
    TheoryPoint,
    avg_size_bound,
    conditional_mse_bound,
    crossing_ratio,
    efficiency_bound_element,
    efficiency_group_approx,
    expected_abs_gap_approx,
    expected_groups_approx,
    probabilities_from_normalized,
    ratio_param,
    scale_param,
    stage1_ratio_moments,
    theory_point,
    true_value,
    variance_decomposition,
)

__version__ = "0.1.0"
