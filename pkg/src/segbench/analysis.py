"""Result aggregation and analysis: cross-dataset consistency statistics,
train/test characteristics, Wasserstein-1 distance, and the OLS regression
of scores on those characteristics.

Score grids are indexed scores[model][dataset][split][metric]. Aggregation
averages over splits first; every consistency statistic then operates on
per-dataset averages. "Best" always means a strict win: a model tied for
the top score on some data set is not best on it.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping, Sequence

import numpy as np
from scipy import linalg as sla
from scipy import stats as sst

if TYPE_CHECKING:
    from .splits import Split

CHARACTERISTIC_NAMES = (
    "word_overlap",
    "morpheme_overlap",
    "ratio_avg_morphs",
    "wasserstein_morph_dist",
    "ratio_avg_morph_len",
)


class IncompleteGridError(ValueError):
    """A score grid has holes where aggregation expects a full cell."""


class RankDeficiencyError(ValueError):
    """Design matrix is rank deficient; names the offending columns."""

    def __init__(self, columns: Sequence[str]):
        self.columns = tuple(columns)
        super().__init__(f"design matrix is rank deficient in columns: {', '.join(self.columns)}")


# --------------------------------------------------------------------------
# Wasserstein-1 between empirical distributions


def wasserstein1(a: Sequence[float], b: Sequence[float]) -> float:
    """W1 distance between two empirical distributions of reals.

    Integrates |F_a - F_b| over the merged support; sample sizes need not
    match. For equal sizes this equals mean |sorted(a)_i - sorted(b)_i|.
    """
    if len(a) == 0 or len(b) == 0:
        raise ValueError("wasserstein1 requires nonempty samples")
    xs = sorted(float(v) for v in a)
    ys = sorted(float(v) for v in b)
    support = sorted(set(xs) | set(ys))
    na, nb = len(xs), len(ys)
    total = 0.0
    for x0, x1 in zip(support, support[1:]):
        fa = bisect_right(xs, x0) / na
        fb = bisect_right(ys, x0) / nb
        total += abs(fa - fb) * (x1 - x0)
    return total


# --------------------------------------------------------------------------
# Score aggregation and consistency


def aggregate_setting(
    scores: Mapping[str, Sequence[Sequence[Mapping[str, float]]]],
) -> dict[str, dict[str, tuple[float, ...]]]:
    """Average each metric over splits: model -> metric -> per-dataset means.

    The grid must be complete: every model over the same number of data
    sets, every data set over the same number of splits, every split cell
    carrying the same metric keys.
    """
    if not scores:
        raise IncompleteGridError("empty score grid")
    n_datasets = None
    metric_keys: tuple[str, ...] | None = None
    out: dict[str, dict[str, tuple[float, ...]]] = {}
    for model, per_dataset in scores.items():
        if n_datasets is None:
            n_datasets = len(per_dataset)
        if len(per_dataset) != n_datasets or n_datasets == 0:
            raise IncompleteGridError(f"model {model!r}: expected {n_datasets} data sets")
        per_metric: dict[str, list[float]] = {}
        for ds_id, cells in enumerate(per_dataset):
            if len(cells) == 0:
                raise IncompleteGridError(f"model {model!r}, data set {ds_id}: no splits")
            for cell in cells:
                keys = tuple(cell.keys())
                if metric_keys is None:
                    metric_keys = keys
                if set(keys) != set(metric_keys):
                    raise IncompleteGridError(
                        f"model {model!r}, data set {ds_id}: metric keys differ"
                    )
            for name in metric_keys:
                per_metric.setdefault(name, []).append(
                    sum(cell[name] for cell in cells) / len(cells)
                )
        out[model] = {name: tuple(vals) for name, vals in per_metric.items()}
    return out


def _strict_best(per_model: Mapping[str, Sequence[float]], ds: int) -> str | None:
    """Model strictly winning data set `ds`, or None on a tie for the top."""
    best_model, best_score, tied = None, None, False
    for model, vals in per_model.items():
        v = vals[ds]
        if best_score is None or v > best_score:
            best_model, best_score, tied = model, v, False
        elif v == best_score:
            tied = True
    return None if tied else best_model


def best_model_consistency(per_model: Mapping[str, Sequence[float]]) -> float:
    """Fraction of data sets strictly won by the first data set's winner.

    The first data set is part of the denominator; any tie for the top on
    a data set counts against consistency (including on the first one).
    """
    n = _check_grid(per_model)
    first = _strict_best(per_model, 0)
    if first is None:
        return 0.0
    wins = sum(1 for ds in range(n) if _strict_best(per_model, ds) == first)
    return wins / n


def _ranking(per_model: Mapping[str, Sequence[float]], ds: int) -> tuple[str, ...] | None:
    """Descending ranking of models on data set `ds`; None if any tie."""
    vals = [(per_model[m][ds], m) for m in per_model]
    scores = [v for v, _ in vals]
    if len(set(scores)) != len(scores):
        return None
    return tuple(m for _, m in sorted(vals, key=lambda t: -t[0]))


def ranking_consistency(per_model: Mapping[str, Sequence[float]]) -> float:
    """Fraction of data sets whose full model ranking matches the first's.

    A data set with tied scores has no well-defined full ranking and counts
    as non-matching; if the first data set is tied the result is 0.
    """
    n = _check_grid(per_model)
    reference = _ranking(per_model, 0)
    if reference is None:
        return 0.0
    return sum(1 for ds in range(n) if _ranking(per_model, ds) == reference) / n


def _check_grid(per_model: Mapping[str, Sequence[float]]) -> int:
    if not per_model:
        raise IncompleteGridError("no models")
    lengths = {len(v) for v in per_model.values()}
    if len(lengths) != 1 or 0 in lengths:
        raise IncompleteGridError("models cover unequal numbers of data sets")
    return lengths.pop()


@dataclass(frozen=True)
class ModelSummary:
    model: str
    first_dataset_avg: float
    all_datasets_avg: float
    score_min: float
    score_max: float
    score_std: float
    pct_best: float  # percent of data sets strictly won


@dataclass(frozen=True)
class SettingSummary:
    metric: str
    models: tuple[ModelSummary, ...]
    best_model_consistency: float
    ranking_consistency: float
    tied_datasets: tuple[int, ...]  # data sets with tied per-model averages


def summarize_setting(
    scores: Mapping[str, Sequence[Sequence[Mapping[str, float]]]],
    metric: str,
) -> SettingSummary:
    """Table-style summary of one setting under one metric."""
    aggregated = aggregate_setting(scores)
    per_model = {m: vals[metric] for m, vals in aggregated.items()}
    n = _check_grid(per_model)
    rows = []
    for model, vals in per_model.items():
        arr = np.asarray(vals, dtype=float)
        wins = sum(1 for ds in range(n) if _strict_best(per_model, ds) == model)
        rows.append(
            ModelSummary(
                model=model,
                first_dataset_avg=float(arr[0]),
                all_datasets_avg=float(arr.mean()),
                score_min=float(arr.min()),
                score_max=float(arr.max()),
                score_std=float(arr.std()),
                pct_best=100.0 * wins / n,
            )
        )
    tied = tuple(ds for ds in range(n) if _ranking(per_model, ds) is None)
    return SettingSummary(
        metric=metric,
        models=tuple(rows),
        best_model_consistency=best_model_consistency(per_model),
        ranking_consistency=ranking_consistency(per_model),
        tied_datasets=tied,
    )


# --------------------------------------------------------------------------
# Split characteristics


@dataclass(frozen=True)
class CharacteristicsVector:
    """Five train/test characteristics of one split.

    word_overlap is None when the sampling strategy makes it degenerate
    (without replacement, surfaces are unique, overlap is identically 0).
    Ratios are train over test.
    """

    word_overlap: float | None
    morpheme_overlap: float
    ratio_avg_morphs: float
    wasserstein_morph_dist: float
    ratio_avg_morph_len: float

    def as_dict(self) -> dict[str, float | None]:
        return {name: getattr(self, name) for name in CHARACTERISTIC_NAMES}


def compute_characteristics(split: "Split", with_word_overlap: bool = True) -> CharacteristicsVector:
    """Characteristics of a train/test split, all token-level over test."""
    train, test = split.train, split.test
    if not train or not test:
        raise ValueError("both split halves must be nonempty")

    train_surfaces = {w.surface for w in train}
    train_morphs = {m for w in train for m in w.morphs}

    overlap = None
    if with_word_overlap:
        overlap = sum(1 for w in test if w.surface in train_surfaces) / len(test)

    test_morph_tokens = [m for w in test for m in w.morphs]
    morph_overlap = sum(1 for m in test_morph_tokens if m in train_morphs) / len(test_morph_tokens)

    train_counts = [float(len(w.morphs)) for w in train]
    test_counts = [float(len(w.morphs)) for w in test]
    ratio_morphs = (sum(train_counts) / len(train_counts)) / (sum(test_counts) / len(test_counts))

    train_morph_tokens = [m for w in train for m in w.morphs]
    train_len = sum(len(m) for m in train_morph_tokens) / len(train_morph_tokens)
    test_len = sum(len(m) for m in test_morph_tokens) / len(test_morph_tokens)

    return CharacteristicsVector(
        word_overlap=overlap,
        morpheme_overlap=morph_overlap,
        ratio_avg_morphs=ratio_morphs,
        wasserstein_morph_dist=wasserstein1(train_counts, test_counts),
        ratio_avg_morph_len=train_len / test_len,
    )


# --------------------------------------------------------------------------
# OLS regression


@dataclass(frozen=True)
class RegressionResult:
    predictors: tuple[str, ...]
    coefficients: tuple[float, ...]
    std_errors: tuple[float, ...]
    t_stats: tuple[float, ...]
    p_values: tuple[float, ...]
    df_resid: int
    r_squared: float

    def coefficient(self, name: str) -> float:
        return self.coefficients[self.predictors.index(name)]

    def p_value(self, name: str) -> float:
        return self.p_values[self.predictors.index(name)]


def significance_stars(p: float) -> str:
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    if p < 0.05:
        return "*"
    return ""


def ols_regression(
    y: Sequence[float],
    design: np.ndarray,
    names: Sequence[str],
) -> RegressionResult:
    """Least squares of y on the design matrix via pivoted QR.

    Raises RankDeficiencyError naming the dependent columns when the
    design is not full column rank; requires positive residual df.
    """
    X = np.asarray(design, dtype=float)
    yv = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != yv.shape[0]:
        raise ValueError("design matrix and response lengths differ")
    n, p = X.shape
    if len(names) != p:
        raise ValueError("one name per design column required")
    if n - p <= 0:
        raise ValueError(f"nonpositive residual df: n={n}, p={p}")

    # Rank check on the pivoted factorization; the pivot order localizes
    # which columns sit in the null space.
    _, r_piv, piv = sla.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r_piv))
    tol = diag.max() * max(n, p) * np.finfo(float).eps if diag.size else 0.0
    rank = int((diag > tol).sum())
    if rank < p:
        offending = sorted(names[j] for j in piv[rank:])
        raise RankDeficiencyError(offending)

    q, r = sla.qr(X, mode="economic")
    beta = sla.solve_triangular(r, q.T @ yv)
    resid = yv - X @ beta
    rss = float(resid @ resid)
    df = n - p
    sigma2 = rss / df

    r_inv = sla.solve_triangular(r, np.eye(p))
    cov = sigma2 * (r_inv @ r_inv.T)
    se = np.sqrt(np.diag(cov))
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(se > 0, beta / se, np.inf * np.sign(beta))
    pvals = 2.0 * sst.t.sf(np.abs(t), df)

    if "intercept" in names:
        tss = float(((yv - yv.mean()) ** 2).sum())
    else:
        tss = float((yv**2).sum())
    r2 = 1.0 - rss / tss if tss > 0 else 1.0

    return RegressionResult(
        predictors=tuple(names),
        coefficients=tuple(float(b) for b in beta),
        std_errors=tuple(float(s) for s in se),
        t_stats=tuple(float(v) for v in t),
        p_values=tuple(float(v) for v in pvals),
        df_resid=df,
        r_squared=r2,
    )


@dataclass(frozen=True)
class RegressionRow:
    """One observation for the characteristics regression: a single score
    with its experimental coordinates and its split's characteristics."""

    score: float
    model: str
    metric: str
    strategy: str
    size: int
    characteristics: CharacteristicsVector


def build_design(
    rows: Sequence[RegressionRow],
) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Design matrix for the per-language regression.

    Predictors: intercept, the five characteristics, one-hot controls for
    model, metric, strategy, and size (first level dropped as reference),
    plus strategy x characteristic and size x characteristic interactions.
    Absent word_overlap values enter as 0; interactions that would be
    structurally zero (strategy x word_overlap when only one strategy has
    word overlap defined) are skipped rather than left to fail rank checks.
    """
    if not rows:
        raise ValueError("no rows")

    def levels(values: list) -> list:
        seen = dict.fromkeys(values)
        return list(seen)

    models = levels([r.model for r in rows])
    metrics = levels([r.metric for r in rows])
    strategies = levels([r.strategy for r in rows])
    sizes = sorted(set(r.size for r in rows))

    char_cols = {name: [] for name in CHARACTERISTIC_NAMES}
    for r in rows:
        vals = r.characteristics.as_dict()
        for name in CHARACTERISTIC_NAMES:
            v = vals[name]
            char_cols[name].append(0.0 if v is None else float(v))

    overlap_defined = [r.characteristics.word_overlap is not None for r in rows]
    cols: list[tuple[str, list[float]]] = [("intercept", [1.0] * len(rows))]
    for name in CHARACTERISTIC_NAMES:
        cols.append((name, char_cols[name]))

    def onehot(name: str, values: list, lvls: list) -> list[tuple[str, list[float]]]:
        return [
            (f"{name}[{lvl}]", [1.0 if v == lvl else 0.0 for v in values])
            for lvl in lvls[1:]
        ]

    strategy_dummies = onehot("strategy", [r.strategy for r in rows], strategies)
    size_dummies = onehot("size", [r.size for r in rows], sizes)
    cols.extend(onehot("model", [r.model for r in rows], models))
    cols.extend(onehot("metric", [r.metric for r in rows], metrics))
    cols.extend(strategy_dummies)
    cols.extend(size_dummies)

    for dummy_name, dummy in strategy_dummies + size_dummies:
        for cname in CHARACTERISTIC_NAMES:
            if cname == "word_overlap":
                # Zero wherever the dummy is on -> structurally collinear.
                if not any(d == 1.0 and o for d, o in zip(dummy, overlap_defined)):
                    continue
            col = [d * c for d, c in zip(dummy, char_cols[cname])]
            cols.append((f"{dummy_name}:{cname}", col))

    names = [name for name, _ in cols]
    X = np.column_stack([np.asarray(col, dtype=float) for _, col in cols])
    y = np.asarray([r.score for r in rows], dtype=float)
    return y, X, names


def drop_constant_columns(
    X: np.ndarray, names: Sequence[str]
) -> tuple[np.ndarray, list[str], list[str]]:
    """Remove non-intercept columns with zero variance.

    Returns (reduced design, kept names, dropped names). Single-level
    factors and identically-zero characteristics otherwise guarantee a
    rank-deficiency error.
    """
    keep, dropped = [], []
    for j, name in enumerate(names):
        col = X[:, j]
        if name != "intercept" and np.ptp(col) == 0.0:
            dropped.append(name)
        else:
            keep.append(j)
    return X[:, keep], [names[j] for j in keep], dropped
