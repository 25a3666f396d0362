"""Exact linear-assignment solving with learned dual warm starts.

The solver accepts injected dual potentials and exploits them: good seeds
shrink the augmentation work without ever costing optimality. A row-wise
neural model (or any of several baseline heuristics) produces the seeds;
a columnwise-minimum completion makes any row potentials feasible, and a
density gate falls back to a cold start when a seed looks unhelpful.
"""

from .errors import (
    BadMagic,
    CorruptCheckpoint,
    DimensionMismatch,
    DualseedError,
    EmptyDataset,
    InfeasibleMask,
    InfeasibleSeed,
    InsufficientTrials,
    NonFinite,
    NonSquare,
    ShapeMismatch,
    SingularSystem,
    TooLarge,
    TruncatedFile,
    VersionMismatch,
)
from .lap_core import (
    Assignment,
    CertificateResult,
    CostMatrix,
    DualPotentials,
    SolveStats,
    brute_force,
    center_duals,
    reduced_costs,
    solve_cold,
    solve_seeded,
    verify_certificate,
)
from .warmstart import (
    FEATURE_NAMES,
    FeatureMatrix,
    PipelineConfig,
    PipelineReport,
    equality_density,
    extract_features,
    min_trick,
    run_pipeline,
    warm_solve,
)
from .rowdualnet import (
    ModelParams,
    TrainConfig,
    backward,
    forward,
    init_model,
    load_checkpoint,
    loss,
    save_checkpoint,
    train,
)
from .datagen import (
    BlockParams,
    LabeledInstance,
    gen_block,
    gen_dense,
    gen_labels,
    read_csv,
    read_dataset,
    read_matrix,
    sparsify,
    write_dataset,
    write_matrix,
)
from .baselines import (
    LinregWeights,
    SubgradientConfig,
    seed_learned_median,
    seed_linreg,
    seed_random,
    seed_row_mean,
    seed_subgradient,
    train_linreg,
)

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "BadMagic",
    "BlockParams",
    "CertificateResult",
    "CorruptCheckpoint",
    "CostMatrix",
    "DimensionMismatch",
    "DualPotentials",
    "DualseedError",
    "EmptyDataset",
    "FEATURE_NAMES",
    "FeatureMatrix",
    "InfeasibleMask",
    "InfeasibleSeed",
    "InsufficientTrials",
    "LabeledInstance",
    "LinregWeights",
    "ModelParams",
    "NonFinite",
    "NonSquare",
    "PipelineConfig",
    "PipelineReport",
    "ShapeMismatch",
    "SingularSystem",
    "SolveStats",
    "SubgradientConfig",
    "TooLarge",
    "TrainConfig",
    "TruncatedFile",
    "VersionMismatch",
    "backward",
    "brute_force",
    "center_duals",
    "equality_density",
    "extract_features",
    "forward",
    "gen_block",
    "gen_dense",
    "gen_labels",
    "init_model",
    "load_checkpoint",
    "loss",
    "min_trick",
    "read_csv",
    "read_dataset",
    "read_matrix",
    "reduced_costs",
    "run_pipeline",
    "save_checkpoint",
    "seed_learned_median",
    "seed_linreg",
    "seed_random",
    "seed_row_mean",
    "seed_subgradient",
    "solve_cold",
    "solve_seeded",
    "sparsify",
    "train",
    "train_linreg",
    "verify_certificate",
    "warm_solve",
    "write_dataset",
    "write_matrix",
    "__version__",
]
