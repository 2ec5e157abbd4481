"""Imputation quality assessment for incomplete tabular data.

The package scores every feature of a dataset on how well its missing
values can be recovered (mask-and-reimpute evaluation with a statistical
bias veto), combines that with completeness into a single quality number,
and turns the per-feature winners into a reusable, serializable imputation
pipeline.  A detectability audit measures whether the imputed cells could
be told apart from real ones.
"""

from .audit import (
    AuditReport,
    FeatureAudit,
    audit_all,
    audit_feature,
    build_completed_dataset,
    inject_to_level,
    pipeline_strategy,
    single_imputer_strategy,
)
from .config import Config, parse_config, parse_config_dict
from .depgraph import (
    DependencyGraph,
    build_dependency_graph,
    restrict_training_view,
    transitive_dependencies,
)
from .engine import (
    AssessConfig,
    ImputerEvaluation,
    PipelinePlan,
    QualityRecord,
    apply_pipeline,
    assess,
    deserialize_pipeline,
    efficiency,
    fit_pipeline,
    imputation_score,
    quality_score,
    recommend_imputations,
    records_to_jsonable,
    select_imputer,
    serialize_pipeline,
)
from .errors import (
    ConstantTargetWarning,
    CorruptModel,
    DataIoError,
    DegenerateInput,
    ImputeQError,
    ImputeQWarning,
    ImputerTrainingError,
    InvalidArgument,
    InvalidFoldCount,
    ParseError,
    RaggedRows,
    SchemaError,
    SchemaMismatch,
    SmallSampleWarning,
    UntrainableImputer,
    VersionMismatch,
)
from .imputers import FittedImputer, ImputerSpec, default_imputer_roster
from .metrics import (
    auroc,
    balanced_accuracy,
    macro_balanced_accuracy,
    mean_ci,
    nrmse_score,
    r2,
    rmse,
)
from .report import (
    audit_document,
    dumps_canonical,
    emit_quality_svg,
    quality_document,
    quality_summary_text,
    write_bytes_atomic,
)
from .stattests import (
    TestKind,
    TestResult,
    chi2_independence,
    distribution_compatible,
    ks_two_sample,
)
from .table import (
    Column,
    ColumnKind,
    Table,
    completeness,
    infer_column_kinds,
    inject_mcar,
    kfold_split,
    label_encode,
    load_csv,
    missing_fraction,
    write_csv,
)

__version__ = "0.1.0"

__all__ = [
    "AssessConfig",
    "AuditReport",
    "Column",
    "ColumnKind",
    "Config",
    "ConstantTargetWarning",
    "CorruptModel",
    "DataIoError",
    "DegenerateInput",
    "DependencyGraph",
    "FeatureAudit",
    "FittedImputer",
    "ImputeQError",
    "ImputeQWarning",
    "ImputerEvaluation",
    "ImputerSpec",
    "ImputerTrainingError",
    "InvalidArgument",
    "InvalidFoldCount",
    "ParseError",
    "PipelinePlan",
    "QualityRecord",
    "RaggedRows",
    "SchemaError",
    "SchemaMismatch",
    "SmallSampleWarning",
    "Table",
    "TestKind",
    "TestResult",
    "UntrainableImputer",
    "VersionMismatch",
    "apply_pipeline",
    "assess",
    "audit_all",
    "audit_document",
    "audit_feature",
    "auroc",
    "balanced_accuracy",
    "build_completed_dataset",
    "build_dependency_graph",
    "chi2_independence",
    "completeness",
    "default_imputer_roster",
    "deserialize_pipeline",
    "distribution_compatible",
    "dumps_canonical",
    "efficiency",
    "emit_quality_svg",
    "fit_pipeline",
    "imputation_score",
    "infer_column_kinds",
    "inject_mcar",
    "inject_to_level",
    "kfold_split",
    "ks_two_sample",
    "label_encode",
    "load_csv",
    "macro_balanced_accuracy",
    "mean_ci",
    "missing_fraction",
    "nrmse_score",
    "parse_config",
    "parse_config_dict",
    "pipeline_strategy",
    "quality_document",
    "quality_score",
    "quality_summary_text",
    "r2",
    "recommend_imputations",
    "records_to_jsonable",
    "restrict_training_view",
    "rmse",
    "select_imputer",
    "serialize_pipeline",
    "single_imputer_strategy",
    "transitive_dependencies",
    "write_bytes_atomic",
    "write_csv",
]
