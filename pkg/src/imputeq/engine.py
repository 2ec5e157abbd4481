"""Per-feature imputation quality assessment and trainable pipelines.

The assessment walks a (feature x imputer x fold) grid: candidate imputers
are fit on training folds, the test fold's observed target cells are masked
and re-imputed, and a kind-appropriate scorer measures how close the
re-imputations land.  Candidates whose pooled re-imputations are statistically
distinguishable from the observed distribution are vetoed; among the
survivors the best scorer wins the feature.  Combining the winner's score
delta with the feature's completeness mu gives the quality

    omega = mu + (1 - mu) * delta

which callers can threshold to decide which features to keep.  Thresholded
features are only dropped at the very end, so they still help impute others.

Everything is deterministic for a fixed seed: each grid task derives its own
generator, and parallel execution (IQA_THREADS) reduces results in a fixed
order.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    CorruptModel,
    DegenerateInput,
    ImputeQWarning,
    ImputerTrainingError,
    InvalidArgument,
    SchemaMismatch,
    UntrainableImputer,
    VersionMismatch,
)
from .imputers import (
    FittedImputer,
    ImputerSpec,
    fit as fit_imputer,
    fitted_from_jsonable,
    fitted_to_jsonable,
    transform,
)
from .metrics import balanced_accuracy, macro_balanced_accuracy, nrmse_score
from .stattests import TestResult, distribution_compatible
from .table import (
    Column,
    ColumnKind,
    SplitIndices,
    Table,
    completeness,
    kfold_split,
)

PIPELINE_FORMAT = "imputeq-pipeline"
PIPELINE_SCHEMA_VERSION = 1
THREADS_ENV_VAR = "IQA_THREADS"
DEFAULT_FOLDS = 5
DEFAULT_ALPHA = 0.05
_FINAL_FIT_TAG = 0x7FFFFFFF  # seed-stream component for full-table fits


SCORER_REGISTRY = {
    "nrmse": nrmse_score,
    "balanced_accuracy": balanced_accuracy,
    "macro_balanced_accuracy": macro_balanced_accuracy,
}


def default_scorer_for(kind: ColumnKind):
    if kind is ColumnKind.BINARY:
        return balanced_accuracy
    if kind is ColumnKind.CATEGORICAL:
        return macro_balanced_accuracy
    return nrmse_score


@dataclass(frozen=True)
class AssessConfig:
    """Engine knobs; the CLI config file parses into this."""

    imputers: tuple[ImputerSpec, ...]
    n_folds: int = DEFAULT_FOLDS
    seed: int = 0
    alpha: float = DEFAULT_ALPHA
    threshold: float | None = None
    dependencies: dict[str, list[str]] | None = None
    scorers: dict[str, str] | None = None  # kind value -> registry name
    split_seed: int | None = None

    def __post_init__(self):
        if not self.imputers:
            raise InvalidArgument("at least one imputer is required")
        ids = [s.id for s in self.imputers]
        if len(set(ids)) != len(ids):
            raise InvalidArgument("imputer ids must be unique")
        if self.n_folds < 2:
            raise InvalidArgument("n_folds must be >= 2")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidArgument("alpha must be in (0, 1)")
        if self.threshold is not None and not 0.0 <= self.threshold <= 1.0:
            raise InvalidArgument("threshold must be in [0, 1]")
        if self.scorers:
            kinds = {k.value for k in ColumnKind}
            for kind_name, scorer_name in self.scorers.items():
                if kind_name not in kinds:
                    raise InvalidArgument(f"unknown column kind {kind_name!r}")
                if scorer_name not in SCORER_REGISTRY:
                    raise InvalidArgument(f"unknown scorer {scorer_name!r}")

    def scorer_for(self, kind: ColumnKind):
        if self.scorers and kind.value in self.scorers:
            return SCORER_REGISTRY[self.scorers[kind.value]]
        return default_scorer_for(kind)

    def to_jsonable(self) -> dict:
        return {
            "imputers": [s.to_jsonable() for s in self.imputers],
            "n_folds": self.n_folds,
            "seed": self.seed,
            "alpha": self.alpha,
            "threshold": self.threshold,
            "dependencies": self.dependencies,
            "scorers": self.scorers,
            "split_seed": self.split_seed,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.to_jsonable(), sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()


def with_apprandom(config: AssessConfig) -> AssessConfig:
    """Guarantee an empirical-sampling fallback candidate in the roster."""
    if any(s.family == "apprandom" for s in config.imputers):
        return config
    extra = ImputerSpec("apprandom", "apprandom", {}, config.seed)
    return replace(config, imputers=(*config.imputers, extra))


@dataclass(frozen=True)
class ScoreOutcome:
    """Fold-aggregated result for one (feature, imputer) pair."""

    mean: float  # clamped to [0, 1]
    std: float
    pooled: np.ndarray  # re-imputed values at originally observed cells
    fold_scores: tuple[float, ...]
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class ImputerEvaluation:
    imputer_id: str
    delta_mean: float
    delta_std: float
    n_predictors: int
    bias: TestResult | None
    skipped: bool
    notes: tuple[str, ...] = ()


@dataclass(frozen=True)
class QualityRecord:
    feature: str
    completeness: float
    evaluations: tuple[ImputerEvaluation, ...]
    chosen_imputer: str
    delta: float
    omega: float
    kept: bool
    fallback_used: bool
    notes: tuple[str, ...] = ()


def quality_score(mu: float, delta: float) -> float:
    """omega = mu + (1 - mu) * delta; both arguments must be in [0, 1]."""
    if not 0.0 <= mu <= 1.0:
        raise InvalidArgument(f"mu must be in [0, 1], got {mu}")
    if not 0.0 <= delta <= 1.0:
        raise InvalidArgument(f"delta must be in [0, 1], got {delta}")
    return mu + (1.0 - mu) * delta


def _predictors_for(t: Table, feature: str, deps) -> list[str]:
    if deps is None:
        return [n for n in t.column_names if n != feature]
    return list(deps.get(feature, []))


def _task_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0] % (2**31))


def imputation_score(
    t: Table,
    feature: str,
    spec: ImputerSpec,
    splits: SplitIndices,
    scorer=None,
    deps: dict[str, list[str]] | None = None,
    seed: int = 0,
) -> ScoreOutcome:
    """Mask-and-reimpute evaluation of one imputer on one feature.

    Per fold: fit on the training rows of the (possibly dependency-restricted)
    view, mask every originally observed target cell in the test rows,
    transform, and score re-imputations against the originals.  Cells that
    were missing to begin with are filled too but never scored.  Returns the
    fold mean (clamped to [0, 1]), fold std, and the pooled re-imputations
    for the bias veto.
    """
    col = t.column(feature)
    if scorer is None:
        scorer = default_scorer_for(col.kind)
    predictors = _predictors_for(t, feature, deps)
    if spec.is_multivariate and not predictors:
        raise UntrainableImputer(
            f"{spec.id}: no predictors available for {feature!r}"
        )
    view = t.select_columns([*predictors, feature])

    fold_scores = []
    pooled = []
    notes = set()
    for fold_idx, (train_idx, test_idx) in enumerate(splits):
        fold_spec = replace(spec, seed=_task_seed(seed, fold_idx))
        fitted = fit_imputer(
            fold_spec, view.select_rows(train_idx), feature, tuple(predictors)
        )
        test = view.select_rows(test_idx)
        tcol = test.column(feature)
        observed_pos = np.flatnonzero(~tcol.mask)
        if observed_pos.size == 0:
            notes.add("empty_fold")
            continue
        blank = Column(
            feature,
            np.full(test.n_rows, np.nan),
            np.ones(test.n_rows, dtype=bool),
            kind=tcol.kind,
            labels=tcol.labels,
        )
        out = transform(fitted, test.with_column(blank))
        got = out.column(feature).values[observed_pos]
        want = tcol.values[observed_pos]
        pooled.append(got)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                fold_scores.append(float(scorer(want, got)))
        except DegenerateInput:
            notes.add("unscorable_fold")

    if not fold_scores:
        raise UntrainableImputer(
            f"{spec.id}: no scorable fold for {feature!r}"
        )
    raw_mean = float(np.mean(fold_scores))
    mean = min(max(raw_mean, 0.0), 1.0)
    if mean != raw_mean:
        notes.add("clamped")
    std = float(np.std(fold_scores))
    return ScoreOutcome(
        mean, std, np.concatenate(pooled), tuple(fold_scores),
        tuple(sorted(notes)),
    )


@dataclass(frozen=True)
class _Candidate:
    spec: ImputerSpec
    roster_pos: int
    n_predictors: int
    outcome: ScoreOutcome | None  # None when skipped
    skip_note: str = ""


def select_imputer(
    candidates: list[_Candidate], col: Column, alpha: float = DEFAULT_ALPHA
) -> tuple[str, bool, dict[str, TestResult]]:
    """Veto-then-argmax choice of the feature's imputer.

    Candidates whose pooled re-imputations fail the distribution test are
    discarded.  The best remaining mean score wins; ties prefer fewer
    predictors, then roster order.  When nothing but empirical sampling
    remains eligible (or nothing at all), the fallback flag is raised.
    """
    observed = col.observed_values()
    verdicts: dict[str, TestResult] = {}
    survivors = []
    for c in candidates:
        if c.outcome is None:
            continue
        verdict = distribution_compatible(col, observed, c.outcome.pooled, alpha)
        verdicts[c.spec.id] = verdict
        if not verdict.rejected:
            survivors.append(c)

    fallback = next(
        (c for c in candidates if c.spec.family == "apprandom"), None
    )
    real_survivors = [s for s in survivors if s.spec.family != "apprandom"]
    if not real_survivors:
        if fallback is None:
            raise InvalidArgument("no empirical-sampling fallback in roster")
        return fallback.spec.id, True, verdicts
    best = min(
        survivors,
        key=lambda c: (-c.outcome.mean, c.n_predictors, c.roster_pos),
    )
    return best.spec.id, False, verdicts


def _thread_count() -> int:
    raw = os.environ.get(THREADS_ENV_VAR, "1")
    try:
        n = int(raw)
    except ValueError:
        raise InvalidArgument(
            f"{THREADS_ENV_VAR} must be an integer, got {raw!r}"
        ) from None
    if n < 1:
        raise InvalidArgument(f"{THREADS_ENV_VAR} must be >= 1")
    return n


def _check_assessable(t: Table, config: AssessConfig) -> None:
    if t.n_rows < config.n_folds:
        raise InvalidArgument("fewer rows than folds")
    for c in t.columns:
        if not c.is_encoded:
            raise InvalidArgument(
                f"column {c.name!r} is not encoded; run label_encode first"
            )
        if c.kind is None:
            raise InvalidArgument(
                f"column {c.name!r} has no kind; run infer_column_kinds first"
            )


def assess(t: Table, config: AssessConfig) -> list[QualityRecord]:
    """Score every feature under every candidate imputer and pick winners.

    Failures are contained per (feature, imputer) pair: an untrainable
    candidate is recorded as skipped and the rest of the grid proceeds.  The
    result is bit-reproducible for a fixed seed regardless of IQA_THREADS.
    """
    config = with_apprandom(config)
    _check_assessable(t, config)
    split_seed = config.seed if config.split_seed is None else config.split_seed
    splits = kfold_split(t.n_rows, config.n_folds, split_seed)
    names = t.column_names
    tasks = [
        (fi, ii)
        for fi in range(len(names))
        for ii in range(len(config.imputers))
    ]

    def run_task(task):
        fi, ii = task
        feature = names[fi]
        spec = config.imputers[ii]
        try:
            return imputation_score(
                t, feature, spec, splits,
                scorer=config.scorer_for(t.column(feature).kind),
                deps=config.dependencies,
                seed=_task_seed(config.seed, fi, ii),
            )
        except (UntrainableImputer, ImputerTrainingError) as exc:
            return exc

    threads = _thread_count()
    if threads == 1:
        results = {task: run_task(task) for task in tasks}
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = dict(zip(tasks, pool.map(run_task, tasks)))

    records = []
    for fi, feature in enumerate(names):
        col = t.column(feature)
        mu = completeness(col)
        candidates = []
        for ii, spec in enumerate(config.imputers):
            outcome = results[(fi, ii)]
            n_preds = (
                len(_predictors_for(t, feature, config.dependencies))
                if spec.is_multivariate
                else 0
            )
            if isinstance(outcome, Exception):
                candidates.append(
                    _Candidate(spec, ii, n_preds, None, str(outcome))
                )
            else:
                candidates.append(_Candidate(spec, ii, n_preds, outcome))

        notes = []
        if all(c.outcome is None for c in candidates):
            # nothing scorable; 100%-missing features land here
            fallback = next(
                c for c in candidates if c.spec.family == "apprandom"
            )
            chosen, fallback_used, verdicts = fallback.spec.id, True, {}
            delta = 0.0
            notes.append("unscorable_feature")
        else:
            chosen, fallback_used, verdicts = select_imputer(
                candidates, col, config.alpha
            )
            chosen_cand = next(c for c in candidates if c.spec.id == chosen)
            delta = chosen_cand.outcome.mean if chosen_cand.outcome else 0.0

        evaluations = tuple(
            ImputerEvaluation(
                imputer_id=c.spec.id,
                delta_mean=c.outcome.mean if c.outcome else 0.0,
                delta_std=c.outcome.std if c.outcome else 0.0,
                n_predictors=c.n_predictors,
                bias=verdicts.get(c.spec.id),
                skipped=c.outcome is None,
                notes=(c.outcome.notes if c.outcome else (c.skip_note,)),
            )
            for c in candidates
        )
        omega = quality_score(mu, delta)
        kept = True if config.threshold is None else omega >= config.threshold
        records.append(
            QualityRecord(
                feature=feature,
                completeness=mu,
                evaluations=evaluations,
                chosen_imputer=chosen,
                delta=delta,
                omega=omega,
                kept=kept,
                fallback_used=fallback_used,
                notes=tuple(notes),
            )
        )
    return records


# ---------------------------------------------------------------------------
# multiple-imputation efficiency


def efficiency(gamma: float, m) -> float:
    """Relative efficiency (1 + gamma/m)^-1 of an m-imputation estimate."""
    if not 0.0 <= gamma <= 1.0:
        raise InvalidArgument(f"gamma must be in [0, 1], got {gamma}")
    if m < 1:
        raise InvalidArgument(f"m must be >= 1, got {m}")
    return 1.0 / (1.0 + gamma / m)


def recommend_imputations(gamma: float, target_efficiency: float) -> int:
    """Smallest integer m with efficiency(gamma, m) >= the target.

    Inverts the efficiency formula, m = gamma * eps / (1 - eps), and rounds
    up; a tiny slack keeps exact inverse pairs from ceiling one too high.
    """
    if not 0.0 <= gamma <= 1.0:
        raise InvalidArgument(f"gamma must be in [0, 1], got {gamma}")
    if not 0.0 < target_efficiency < 1.0:
        raise InvalidArgument(
            f"target efficiency must be in (0, 1), got {target_efficiency}"
        )
    if gamma == 0.0:
        return 1
    exact = gamma * target_efficiency / (1.0 - target_efficiency)
    return max(1, math.ceil(exact - 1e-9))


# ---------------------------------------------------------------------------
# pipeline fitting / application / serialization


@dataclass(frozen=True)
class ColumnSchema:
    name: str
    kind: ColumnKind
    labels: dict[int, str] | None = None

    def to_jsonable(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind.value,
            "labels": (
                None
                if self.labels is None
                else {str(k): v for k, v in self.labels.items()}
            ),
        }

    @classmethod
    def from_jsonable(cls, d: dict) -> "ColumnSchema":
        labels = d.get("labels")
        return cls(
            d["name"],
            ColumnKind(d["kind"]),
            None if labels is None else {int(k): v for k, v in labels.items()},
        )


@dataclass(frozen=True)
class PipelinePlan:
    schema: tuple[ColumnSchema, ...]
    fitted: tuple[FittedImputer, ...]
    drop_list: tuple[str, ...]
    dependencies: dict[str, list[str]] | None
    seed: int
    config_hash: str
    notes: tuple[str, ...] = ()


def fit_pipeline(
    t: Table, records: list[QualityRecord], config: AssessConfig
) -> PipelinePlan:
    """Fit each feature's chosen imputer on the full table.

    Features below the quality threshold go on the drop list but still serve
    as predictors while everything else is fit.  A kept feature with no
    observed values at all cannot be fit and is moved to the drop list with a
    note rather than failing the pipeline.
    """
    config = with_apprandom(config)
    by_id = {s.id: s for s in config.imputers}
    fitted = []
    drop = [r.feature for r in records if not r.kept]
    notes = []
    for fi, record in enumerate(records):
        if not record.kept:
            continue
        col = t.column(record.feature)
        if col.observed_values().size == 0:
            drop.append(record.feature)
            notes.append(f"dropped_unfittable:{record.feature}")
            continue
        spec = replace(
            by_id[record.chosen_imputer],
            seed=_task_seed(config.seed, fi, _FINAL_FIT_TAG),
        )
        predictors = tuple(_predictors_for(t, record.feature, config.dependencies))
        if spec.is_multivariate and not predictors:
            spec_fallback = next(
                s for s in config.imputers if s.family == "apprandom"
            )
            spec = replace(
                spec_fallback, seed=_task_seed(config.seed, fi, _FINAL_FIT_TAG)
            )
            predictors = ()
            notes.append(f"univariate_fallback:{record.feature}")
        fitted.append(fit_imputer(spec, t, record.feature, predictors))

    schema = tuple(
        ColumnSchema(c.name, c.kind, c.labels) for c in t.columns
    )
    return PipelinePlan(
        schema=schema,
        fitted=tuple(fitted),
        drop_list=tuple(drop),
        dependencies=config.dependencies,
        seed=config.seed,
        config_hash=config.config_hash(),
        notes=tuple(notes),
    )


def _encode_with_schema(col: Column, schema: ColumnSchema) -> Column:
    """Encode one raw column against the stored schema; unseen categories
    become missing cells so a downstream imputer can fill them."""
    if schema.labels is None:
        if not col.is_encoded:
            raise SchemaMismatch(
                f"column {col.name!r}: expected numeric values"
            )
        return replace(col, kind=schema.kind)
    code_of = {v: k for k, v in schema.labels.items()}
    values = np.full(col.n_rows, np.nan)
    mask = col.mask.copy()
    unseen = 0
    for i in range(col.n_rows):
        if mask[i]:
            continue
        cell = col.values[i]
        if not col.is_encoded:
            code = code_of.get(cell)
        else:
            code = int(cell) if int(cell) in schema.labels else None
        if code is None:
            unseen += 1
            mask[i] = True
        else:
            values[i] = code
    if unseen:
        warnings.warn(
            f"column {col.name!r}: {unseen} unseen categories treated as "
            "missing",
            ImputeQWarning,
            stacklevel=3,
        )
    return Column(col.name, values, mask, kind=schema.kind, labels=schema.labels)


def apply_pipeline(plan: PipelinePlan, t: Table) -> Table:
    """Encode, impute kept features in plan order, and drop the drop list.

    The input must carry exactly the plan's columns.  Output columns are
    encoded; kept features come back with no missing cells.
    """
    plan_names = [s.name for s in plan.schema]
    have = set(t.column_names)
    want = set(plan_names)
    if have != want:
        missing = sorted(want - have)
        extra = sorted(have - want)
        raise SchemaMismatch(
            f"column set differs from plan (missing: {missing}, extra: {extra})"
        )
    by_name = {s.name: s for s in plan.schema}
    cols = tuple(
        _encode_with_schema(t.column(n), by_name[n]) for n in plan_names
    )
    work = Table(cols, t.n_rows)
    for f in plan.fitted:
        work = transform(f, work)
    keep = [n for n in plan_names if n not in set(plan.drop_list)]
    return work.select_columns(keep)


def plan_to_jsonable(plan: PipelinePlan) -> dict:
    return {
        "format": PIPELINE_FORMAT,
        "schema_version": PIPELINE_SCHEMA_VERSION,
        "schema": [s.to_jsonable() for s in plan.schema],
        "fitted": [fitted_to_jsonable(f) for f in plan.fitted],
        "drop_list": list(plan.drop_list),
        "dependencies": plan.dependencies,
        "seed": plan.seed,
        "config_hash": plan.config_hash,
        "notes": list(plan.notes),
    }


def serialize_pipeline(plan: PipelinePlan) -> bytes:
    blob = json.dumps(
        plan_to_jsonable(plan), sort_keys=True, indent=2, allow_nan=False
    )
    return blob.encode("utf-8")


def deserialize_pipeline(
    data: bytes, expected_config_hash: str | None = None
) -> PipelinePlan:
    """Parse pipeline JSON back into a plan.

    A version or format mismatch is an error; a mere config-hash difference
    only warns, since the learned state is still usable.
    """
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorruptModel(f"unreadable pipeline data: {exc}") from exc
    if not isinstance(doc, dict):
        raise CorruptModel("pipeline document is not an object")
    if doc.get("format") != PIPELINE_FORMAT:
        raise VersionMismatch(
            f"not a pipeline file (format={doc.get('format')!r})"
        )
    if doc.get("schema_version") != PIPELINE_SCHEMA_VERSION:
        raise VersionMismatch(
            f"unsupported schema_version {doc.get('schema_version')!r}"
        )
    if expected_config_hash is not None and doc.get("config_hash") != (
        expected_config_hash
    ):
        warnings.warn(
            "pipeline was fit under a different configuration",
            ImputeQWarning,
            stacklevel=2,
        )
    try:
        deps = doc["dependencies"]
        return PipelinePlan(
            schema=tuple(
                ColumnSchema.from_jsonable(s) for s in doc["schema"]
            ),
            fitted=tuple(fitted_from_jsonable(f) for f in doc["fitted"]),
            drop_list=tuple(doc["drop_list"]),
            dependencies=(
                None if deps is None
                else {k: list(v) for k, v in deps.items()}
            ),
            seed=int(doc["seed"]),
            config_hash=doc["config_hash"],
            notes=tuple(doc.get("notes", [])),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptModel(f"pipeline data missing or malformed: {exc}") from exc


# ---------------------------------------------------------------------------
# report payload


def _test_result_jsonable(r: TestResult | None):
    if r is None:
        return None
    return {
        "statistic": r.statistic,
        "p_value": r.p_value,
        "test": r.test.value,
        "rejected": r.rejected,
        "notes": list(r.notes),
    }


def records_to_jsonable(records: list[QualityRecord]) -> list[dict]:
    out = []
    for r in records:
        out.append(
            {
                "feature": r.feature,
                "completeness": r.completeness,
                "delta": r.delta,
                "omega": r.omega,
                "chosen_imputer": r.chosen_imputer,
                "kept": r.kept,
                "fallback_used": r.fallback_used,
                "notes": list(r.notes),
                "imputers": [
                    {
                        "id": e.imputer_id,
                        "delta_mean": e.delta_mean,
                        "delta_std": e.delta_std,
                        "n_predictors": e.n_predictors,
                        "skipped": e.skipped,
                        "bias": _test_result_jsonable(e.bias),
                        "notes": list(e.notes),
                    }
                    for e in r.evaluations
                ],
            }
        )
    return out
