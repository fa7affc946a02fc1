"""Joint image clustering and registration from partition information.

Images are fixed-length pixel sequences over a finite alphabet, corrupted by
memoryless noise and scrambled by unknown transforms from a commutative group
(ring shifts, torus translations).  This package estimates which images show
the same scene and undoes the transforms, using empirical information
measures only — plus model-aware oracles and analytic counting tools to
benchmark against.
"""

from .analysis import (
    CurvePoint,
    ErrorCurve,
    SlopeFit,
    SlopeUndefined,
    TrialPlan,
    TrialRecord,
    TypeClassCount,
    clustering_outcomes,
    error_curve,
    exponent_slope,
    kailath_bound,
    registration_outcomes,
    run_trials,
    trial_record_json,
    trial_records_jsonl,
    type_class_count,
    whittle_count,
    wilson_interval,
)
from .blockwise import (
    BlockPlan,
    block_size_objective,
    choose_block_size,
    cluster_register_blockwise,
    register_blockwise,
)
from .clustering import (
    ClusteringResult,
    Dendrogram,
    ThresholdSchedule,
    closed_form_partition_prior,
    cluster_epsilon_like,
    cluster_hierarchical,
    cluster_k_info,
    cluster_map_oracle,
    cluster_thresholded,
    dendrogram_to_json,
)
from .config import (
    ConfigError,
    ExperimentConfig,
    config_digest,
    load_config,
    parse_config,
)
from .info import (
    TOL_BITS,
    FundamentalResult,
    InfoValue,
    JointHistogram,
    NoFinestMinimizer,
    cluster_information,
    entropy,
    fundamental_partition,
    joint_histogram,
    multiinformation,
    mutual_information,
    partition_information,
)
from .model import (
    Alphabet,
    Channel,
    ChannelAnalysis,
    Ensemble,
    Image,
    JointChannel,
    SceneModel,
    analytic_pixel_joint,
    cascade,
    channel_analysis,
    conditional_given_reference,
    ensemble_from_json,
    ensemble_to_json,
    generate_ensemble,
    make_channel,
    make_joint_channel,
    marginal_joint_channel,
    uniform_scene_model,
)
from .partitions import (
    IncomparableCandidates,
    Partition,
    bell_number,
    densest,
    enumerate_partitions,
    finest,
    from_labels,
    is_coarser,
    is_finer,
    one_block,
    singletons,
)
from .registration import (
    RegistrationResult,
    register_ml_oracle,
    register_mm,
    register_mmi_pair,
    register_sequential_degraded,
)
from .transforms import (
    CycleStructure,
    GroupReport,
    Transform,
    TransformGroup,
    apply,
    build_group,
    compose,
    cycle_structure,
    identity,
    inverse,
    is_non_overlapping,
    verify_group,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
