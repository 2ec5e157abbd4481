"""Imputer families behind one fit/transform contract.

Four families cover the useful spectrum: constant statistics (mean, median,
mode), empirical-distribution sampling, k-nearest-neighbor averaging with a
missingness-aware distance, and chained-equation iterative modeling.  Every
fitted imputer targets exactly one column; multivariate families read an
ordered predictor list so a dependency graph can restrict their inputs.

After filling, outputs are pseudo-rounded to stay plausible for the column
kind: adaptive rounding for binary columns, censoring to the nearest observed
value for discrete and categorical ones, nothing for continuous ones.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .errors import (
    ImputeQWarning,
    ImputerTrainingError,
    InvalidArgument,
    UntrainableImputer,
)
from .estimators import (
    forest_fit,
    gbt_fit,
    model_from_jsonable,
    model_predict,
    ridge_fit,
)
from .table import Column, ColumnKind, Table

FAMILIES = ("simple", "apprandom", "knn", "iterative")
SIMPLE_STATISTICS = ("mean", "median", "mode")
ITERATIVE_ESTIMATORS = ("ridge", "forest", "gbt")

ROUND_NONE = "none"
ROUND_ADAPTIVE_BINARY = "adaptive_binary"
ROUND_CENSOR = "censor_to_observed"


@dataclass(frozen=True)
class ImputerSpec:
    """Declarative description of one imputer; `id` names it in reports."""

    id: str
    family: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidArgument(
                f"imputer {self.id!r}: unknown family {self.family!r}"
            )
        p = self.params
        if self.family == "simple":
            if p.get("statistic") not in SIMPLE_STATISTICS:
                raise InvalidArgument(
                    f"imputer {self.id!r}: statistic must be one of "
                    f"{SIMPLE_STATISTICS}"
                )
        elif self.family == "knn":
            k = p.get("n_neighbors")
            if not isinstance(k, int) or k < 1:
                raise InvalidArgument(
                    f"imputer {self.id!r}: n_neighbors must be a positive int"
                )
        elif self.family == "iterative":
            est = p.get("estimator")
            if est not in ITERATIVE_ESTIMATORS:
                raise InvalidArgument(
                    f"imputer {self.id!r}: estimator must be one of "
                    f"{ITERATIVE_ESTIMATORS}"
                )

    @property
    def is_multivariate(self) -> bool:
        return self.family in ("knn", "iterative")

    def to_jsonable(self) -> dict:
        return {
            "id": self.id,
            "family": self.family,
            "params": dict(self.params),
            "seed": self.seed,
        }

    @classmethod
    def from_jsonable(cls, d: dict) -> "ImputerSpec":
        return cls(d["id"], d["family"], dict(d.get("params", {})),
                   int(d.get("seed", 0)))


def default_imputer_roster(seed: int = 0) -> list[ImputerSpec]:
    """The stock candidate set: three constants, empirical sampling, three
    neighborhood sizes, and three chained-model variants."""
    it = {"init_strategy": "mode", "max_iter": 20}
    return [
        ImputerSpec("mean", "simple", {"statistic": "mean"}, seed),
        ImputerSpec("median", "simple", {"statistic": "median"}, seed),
        ImputerSpec("mode", "simple", {"statistic": "mode"}, seed),
        ImputerSpec("random", "apprandom", {}, seed),
        ImputerSpec("knn3", "knn", {"n_neighbors": 3}, seed),
        ImputerSpec("knn5", "knn", {"n_neighbors": 5}, seed),
        ImputerSpec("knn10", "knn", {"n_neighbors": 10}, seed),
        ImputerSpec("iter_ridge", "iterative",
                    dict(it, estimator="ridge", reg=1.0), seed),
        ImputerSpec("iter_forest", "iterative",
                    dict(it, estimator="forest", n_estimators=100), seed),
        ImputerSpec("iter_gbt", "iterative",
                    dict(it, estimator="gbt", n_estimators=100, max_depth=6,
                         learning_rate=0.1), seed),
    ]


@dataclass(frozen=True)
class FittedImputer:
    spec: ImputerSpec
    target_column: str
    predictor_columns: tuple[str, ...]
    state: dict
    rounding_rule: str
    observed_value_set: np.ndarray
    target_kind: ColumnKind


def _mode(values: np.ndarray) -> float:
    uniq, counts = np.unique(values, return_counts=True)
    return float(uniq[np.argmax(counts)])  # first max -> smallest value


def _rounding_rule_for(kind: ColumnKind) -> str:
    if kind is ColumnKind.BINARY:
        return ROUND_ADAPTIVE_BINARY
    if kind in (ColumnKind.DISCRETE, ColumnKind.CATEGORICAL):
        return ROUND_CENSOR
    return ROUND_NONE


def _predictor_matrix(table: Table, names: tuple[str, ...]) -> np.ndarray:
    if not names:
        return np.empty((table.n_rows, 0))
    return np.column_stack([table.column(n).values for n in names])


def fit(
    spec: ImputerSpec,
    train: Table,
    target: str,
    predictors: tuple[str, ...] = (),
) -> FittedImputer:
    """Train one imputer for one target column.

    Univariate families ignore `predictors`; multivariate ones require at
    least one.  A target with no observed training values cannot be fit by
    any family here.
    """
    if target in predictors:
        raise InvalidArgument("target cannot be its own predictor")
    col = train.column(target)
    if col.kind is None:
        raise InvalidArgument(f"column {target!r} has no kind assigned")
    observed = col.observed_values()
    if observed.size == 0:
        raise UntrainableImputer(
            f"{spec.id}: target {target!r} has no observed training values"
        )
    predictors = tuple(predictors)
    if spec.is_multivariate and not predictors:
        raise UntrainableImputer(
            f"{spec.id}: family {spec.family!r} needs at least one predictor"
        )

    if spec.family == "simple":
        stat = spec.params["statistic"]
        if stat == "mean":
            fill = float(observed.mean())
        elif stat == "median":
            fill = float(np.median(observed))
        else:
            fill = _mode(observed)
        state = {"fill": fill}
    elif spec.family == "apprandom":
        state = {"observed": observed.copy()}
    elif spec.family == "knn":
        X = _predictor_matrix(train, predictors)
        keep = ~col.mask
        state = {
            "ref_X": X[keep],
            "ref_y": col.values[keep].copy(),
            "k": spec.params["n_neighbors"],
            "global_mean": float(observed.mean()),
        }
    else:
        state = _iterative_fit(spec, train, target, predictors)

    return FittedImputer(
        spec=spec,
        target_column=target,
        predictor_columns=predictors,
        state=state,
        rounding_rule=_rounding_rule_for(col.kind),
        observed_value_set=np.unique(observed),
        target_kind=col.kind,
    )


def transform(f: FittedImputer, t: Table) -> Table:
    """Fill the target column's missing cells, then pseudo-round the fills.

    Only originally-missing target cells change; their mask bits clear.  The
    result is deterministic for a fixed (fitted state, seed, input).
    """
    col = t.column(f.target_column)
    missing = np.flatnonzero(col.mask)
    if missing.size == 0:
        return t
    if f.spec.family == "simple":
        fills = np.full(missing.size, f.state["fill"])
    elif f.spec.family == "apprandom":
        fills = apprandom_sample(f.state["observed"], missing.size, f.spec.seed)
    elif f.spec.family == "knn":
        X = _predictor_matrix(t, f.predictor_columns)
        fills = np.array([_knn_one(f.state, X[i]) for i in missing])
    else:
        fills = _iterative_transform(f, t, missing)

    fills = _apply_rounding(f, col, fills, missing)
    values = col.values.copy()
    values[missing] = fills
    mask = col.mask.copy()
    mask[missing] = False
    new_col = Column(col.name, values, mask, kind=col.kind, labels=col.labels)
    return t.with_column(new_col)


def _apply_rounding(f, col, fills, missing_idx):
    if f.rounding_rule == ROUND_NONE:
        return fills
    if f.rounding_rule == ROUND_CENSOR or len(f.observed_value_set) == 1:
        return censor_to_observed(fills, f.observed_value_set)
    lo, hi = float(f.observed_value_set[0]), float(f.observed_value_set[-1])
    span = hi - lo
    unit_fills = (fills - lo) / span
    unit_obs = (col.observed_values() - lo) / span
    marginal = float(np.concatenate([unit_obs, unit_fills]).mean())
    rounded = adaptive_round_binary(unit_fills, marginal)
    return lo + rounded * span


def apprandom_sample(observed: np.ndarray, n: int, seed: int) -> np.ndarray:
    """Draw n values with replacement from the observed empirical
    distribution."""
    observed = np.asarray(observed, dtype=float)
    if observed.size == 0:
        raise UntrainableImputer("no observed values to sample from")
    if n == 0:
        return np.empty(0)
    rng = np.random.default_rng(seed)
    return observed[rng.integers(0, observed.size, n)]


def _knn_one(state: dict, row: np.ndarray) -> float:
    d = _knn_distances(state["ref_X"], row)
    finite = np.isfinite(d)
    if not finite.any():
        warnings.warn(
            "no reference row shares an observed coordinate; falling back "
            "to the global mean",
            ImputeQWarning,
            stacklevel=2,
        )
        return state["global_mean"]
    k = min(state["k"], int(finite.sum()))
    order = np.argsort(d, kind="mergesort")  # stable: ties keep row order
    return float(state["ref_y"][order[:k]].mean())


def _knn_distances(ref_X: np.ndarray, row: np.ndarray) -> np.ndarray:
    """Euclidean distance over mutually observed coordinates, scaled up by
    total/shared coordinate count; no overlap gives +inf."""
    p = ref_X.shape[1]
    shared = ~np.isnan(ref_X) & ~np.isnan(row)[None, :]
    counts = shared.sum(axis=1)
    diff = np.where(shared, ref_X - row[None, :], 0.0)
    ss = (diff * diff).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = np.sqrt(p / counts * ss)
    d[counts == 0] = np.inf
    return d


def knn_impute(state: dict, row: np.ndarray) -> float:
    return _knn_one(state, np.asarray(row, dtype=float))


# ---------------------------------------------------------------------------
# iterative (chained-equation) family

_EARLY_STOP_REL_TOL = 1e-3


def _init_fill(values: np.ndarray, mask: np.ndarray, strategy: str) -> float:
    obs = values[~mask]
    if obs.size == 0:
        return 0.0
    if strategy == "mean":
        return float(obs.mean())
    return _mode(obs)


def _fit_column_estimator(spec: ImputerSpec, X, y, col_idx: int, round_idx: int):
    params = spec.params
    seed = int(
        np.random.SeedSequence([spec.seed, col_idx, round_idx]).generate_state(1)[0]
        % (2**31)
    )
    try:
        est = params["estimator"]
        if est == "ridge":
            return ridge_fit(X, y, reg=float(params.get("reg", 1.0)))
        if est == "forest":
            return forest_fit(
                X, y,
                n_estimators=int(params.get("n_estimators", 100)),
                max_depth=params.get("max_depth"),
                seed=seed,
            )
        return gbt_fit(
            X, y,
            n_estimators=int(params.get("n_estimators", 100)),
            max_depth=params.get("max_depth", 6),
            learning_rate=float(params.get("learning_rate", 0.1)),
            seed=seed,
        )
    except Exception as exc:
        raise ImputerTrainingError(
            f"{spec.id}: estimator failed on column index {col_idx}: {exc}"
        ) from exc


def _iterative_fit(spec, train, target, predictors) -> dict:
    """Chained-equation training over [predictors..., target].

    Missing cells start at the column mode; columns are revisited in
    descending-missingness order, each refit against all the others, until
    the imputed cells stop moving or max_iter rounds pass.  The last model
    per visited column is kept for transform; the target always gets one.
    """
    names = list(predictors) + [target]
    cols = [train.column(n) for n in names]
    M = np.column_stack([c.values for c in cols])
    masks = np.column_stack([c.mask for c in cols])
    strategy = spec.params.get("init_strategy", "mode")
    if strategy not in ("mode", "mean"):
        raise InvalidArgument(
            f"{spec.id}: init_strategy must be 'mode' or 'mean'"
        )
    init_values = np.array(
        [_init_fill(M[:, j], masks[:, j], strategy) for j in range(M.shape[1])]
    )
    for j in range(M.shape[1]):
        M[masks[:, j], j] = init_values[j]

    miss_counts = masks.sum(axis=0)
    visit = [
        int(j)
        for j in np.argsort(-miss_counts, kind="mergesort")
        if miss_counts[j] > 0
    ]
    scales = np.array(
        [
            float(np.std(M[~masks[:, j], j])) if (~masks[:, j]).any() else 1.0
            for j in range(M.shape[1])
        ]
    )
    scales[scales == 0.0] = 1.0

    max_iter = int(spec.params.get("max_iter", 20))
    models: dict[int, object] = {}
    other = {j: [i for i in range(M.shape[1]) if i != j] for j in visit}
    deltas = []
    for round_idx in range(max_iter):
        max_delta = 0.0
        for j in visit:
            rows_obs = ~masks[:, j]
            model = _fit_column_estimator(
                spec, M[rows_obs][:, other[j]], M[rows_obs, j], j, round_idx
            )
            models[j] = model
            rows_mis = masks[:, j]
            pred = model_predict(model, M[rows_mis][:, other[j]])
            delta = np.abs(pred - M[rows_mis, j]).max() if pred.size else 0.0
            max_delta = max(max_delta, delta / scales[j])
            M[rows_mis, j] = pred
        deltas.append(max_delta)
        if max_delta < _EARLY_STOP_REL_TOL:
            break

    t_idx = len(names) - 1
    if t_idx not in models:
        rows_obs = ~masks[:, t_idx]
        models[t_idx] = _fit_column_estimator(
            spec, M[rows_obs][:, other.get(t_idx, list(range(t_idx)))],
            M[rows_obs, t_idx], t_idx, max_iter,
        )
    return {
        "columns": tuple(names),
        "init_values": init_values,
        "visit": tuple(visit),
        "models": {j: m for j, m in models.items()},
        "deltas": deltas,  # diagnostic trace; not serialized
    }


def _iterative_transform(f: FittedImputer, t: Table, missing_idx) -> np.ndarray:
    """Mode-initialize, run one pass of the stored chained models, and read
    the target predictions off the working matrix."""
    state = f.state
    names = state["columns"]
    cols = [t.column(n) for n in names]
    M = np.column_stack([c.values for c in cols])
    masks = np.column_stack([c.mask for c in cols])
    for j in range(M.shape[1]):
        M[masks[:, j], j] = state["init_values"][j]

    t_idx = len(names) - 1
    order = [j for j in state["visit"] if j != t_idx] + [t_idx]
    for j in order:
        model = state["models"].get(j)
        if model is None:
            continue
        rows_mis = masks[:, j]
        if not rows_mis.any():
            continue
        other = [i for i in range(M.shape[1]) if i != j]
        M[rows_mis, j] = model_predict(model, M[rows_mis][:, other])
    return M[missing_idx, t_idx]


# ---------------------------------------------------------------------------
# pseudo-rounding


def adaptive_round_binary(values: np.ndarray, marginal: float) -> np.ndarray:
    """Round to {0,1} with a cutoff from the binomial-normal approximation.

    c = w - ndtri(w) * sqrt(w * (1 - w)) for marginal w; values at or above
    the cutoff become 1.  Degenerate marginals collapse to a constant.
    """
    values = np.asarray(values, dtype=float)
    if not 0.0 <= marginal <= 1.0:
        raise InvalidArgument(f"marginal must be in [0, 1], got {marginal}")
    if marginal == 0.0:
        return np.zeros_like(values)
    if marginal == 1.0:
        return np.ones_like(values)
    cutoff = marginal - ndtri(marginal) * math.sqrt(marginal * (1.0 - marginal))
    return (values >= cutoff).astype(float)


def censor_to_observed(values: np.ndarray, observed_set: np.ndarray) -> np.ndarray:
    """Snap each value to the nearest member of the observed set; exact
    midpoints take the smaller neighbor."""
    values = np.asarray(values, dtype=float)
    s = np.asarray(observed_set, dtype=float)
    if s.size == 0:
        raise InvalidArgument("observed set is empty")
    pos = np.searchsorted(s, values)
    left = np.clip(pos - 1, 0, s.size - 1)
    right = np.clip(pos, 0, s.size - 1)
    pick_left = np.abs(values - s[left]) <= np.abs(s[right] - values)
    return np.where(pick_left, s[left], s[right])


# ---------------------------------------------------------------------------
# serialization (arrays may hold NaN, which JSON cannot; None stands in)


def encode_array(a: np.ndarray) -> list:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        return [None if math.isnan(v) else v for v in a.tolist()]
    return [encode_array(row) for row in a]


def decode_array(x: list) -> np.ndarray:
    if x and isinstance(x[0], list):
        return np.array([decode_array(row) for row in x], dtype=float)
    return np.array([np.nan if v is None else float(v) for v in x], dtype=float)


def fitted_to_jsonable(f: FittedImputer) -> dict:
    state = f.state
    if f.spec.family == "simple":
        enc_state = {"fill": state["fill"]}
    elif f.spec.family == "apprandom":
        enc_state = {"observed": encode_array(state["observed"])}
    elif f.spec.family == "knn":
        enc_state = {
            "ref_X": encode_array(state["ref_X"]),
            "ref_y": encode_array(state["ref_y"]),
            "k": state["k"],
            "global_mean": state["global_mean"],
        }
    else:
        enc_state = {
            "columns": list(state["columns"]),
            "init_values": encode_array(state["init_values"]),
            "visit": list(state["visit"]),
            "models": {
                str(j): m.to_jsonable() for j, m in state["models"].items()
            },
        }
    return {
        "spec": f.spec.to_jsonable(),
        "target_column": f.target_column,
        "predictor_columns": list(f.predictor_columns),
        "state": enc_state,
        "rounding_rule": f.rounding_rule,
        "observed_value_set": encode_array(f.observed_value_set),
        "target_kind": f.target_kind.value,
    }


def fitted_from_jsonable(d: dict) -> FittedImputer:
    spec = ImputerSpec.from_jsonable(d["spec"])
    raw = d["state"]
    if spec.family == "simple":
        state = {"fill": float(raw["fill"])}
    elif spec.family == "apprandom":
        state = {"observed": decode_array(raw["observed"])}
    elif spec.family == "knn":
        ref_X = decode_array(raw["ref_X"])
        if ref_X.ndim == 1:
            ref_X = ref_X.reshape(len(raw["ref_X"]), 0)
        state = {
            "ref_X": ref_X,
            "ref_y": decode_array(raw["ref_y"]),
            "k": int(raw["k"]),
            "global_mean": float(raw["global_mean"]),
        }
    else:
        state = {
            "columns": tuple(raw["columns"]),
            "init_values": decode_array(raw["init_values"]),
            "visit": tuple(int(j) for j in raw["visit"]),
            "models": {
                int(j): model_from_jsonable(m)
                for j, m in raw["models"].items()
            },
        }
    return FittedImputer(
        spec=spec,
        target_column=d["target_column"],
        predictor_columns=tuple(d["predictor_columns"]),
        state=state,
        rounding_rule=d["rounding_rule"],
        observed_value_set=decode_array(d["observed_value_set"]),
        target_kind=ColumnKind(d["target_kind"]),
    )
