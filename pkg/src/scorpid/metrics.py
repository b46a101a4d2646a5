"""Confusion matrices, accuracy/precision/recall/F1, ROC/AUC, and reconstruction.

All metric arithmetic is exact (integer/rational); floats appear only at the
presentation boundary. 0/0 cases are reported as undefined (None), never
silently coerced to 0 or 1.

The reconstruction oracles invert published metric tables: given rounded
metric values and a total count, they enumerate every integer confusion
matrix consistent with the targets. Matching uses round-half-away-from-zero
to two decimals with a parameterized tolerance (default +/-0.005, i.e. the
print precision of the tables).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Literal, Sequence

import numpy as np

DEFAULT_TOL = Fraction(5, 1000)


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


@dataclass(frozen=True)
class BinaryConfusion:
    """TP/TN/FP/FN tallies for a binary decision."""

    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        for name in ("tp", "tn", "fp", "fn"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {v!r}")

    @property
    def n(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def swapped(self) -> "BinaryConfusion":
        """Relabel the positive class: tp<->tn, fp<->fn."""
        return BinaryConfusion(tp=self.tn, tn=self.tp, fp=self.fn, fn=self.fp)

    def to_json(self) -> dict:
        return {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn}


@dataclass(frozen=True)
class MultiConfusion:
    """K x K tallies; rows are true classes, columns are predictions."""

    labels: tuple[str, ...]
    counts: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        k = len(self.labels)
        if k < 2:
            raise ValueError("need at least two classes")
        if len(self.counts) != k or any(len(row) != k for row in self.counts):
            raise ValueError("counts must be K x K")
        for row in self.counts:
            for v in row:
                if not isinstance(v, int) or v < 0:
                    raise ValueError(f"counts must be non-negative integers, got {v!r}")

    @property
    def n(self) -> int:
        return sum(sum(row) for row in self.counts)

    def one_vs_rest(self, label: str) -> BinaryConfusion:
        if label not in self.labels:
            raise KeyError(f"unknown class {label!r}")
        c = self.labels.index(label)
        tp = self.counts[c][c]
        fn = sum(self.counts[c]) - tp
        fp = sum(row[c] for row in self.counts) - tp
        tn = self.n - tp - fn - fp
        return BinaryConfusion(tp=tp, tn=tn, fp=fp, fn=fn)

    def to_json(self) -> dict:
        return {"labels": list(self.labels), "counts": [list(r) for r in self.counts]}


@dataclass(frozen=True)
class MetricSet:
    """Accuracy, precision, recall, F1; None marks an undefined 0/0 case."""

    accuracy: float | None
    precision: float | None
    recall: float | None
    f_measure: float | None

    def rounded(self, digits: int = 2) -> "MetricSet":
        return MetricSet(*(
            None if v is None else float(round_half_away(_as_fraction(v), digits))
            for v in (self.accuracy, self.precision, self.recall, self.f_measure)
        ))

    def to_json(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f_measure": self.f_measure,
        }


def _metric_fractions(
    tp: int, tn: int, fp: int, fn: int
) -> tuple[Fraction | None, Fraction | None, Fraction | None, Fraction | None]:
    n = tp + tn + fp + fn
    accuracy = Fraction(tp + tn, n) if n else None
    precision = Fraction(tp, tp + fp) if tp + fp else None
    recall = Fraction(tp, tp + fn) if tp + fn else None
    # F1 = 2PR/(P+R); when P and R are both defined and both zero the harmonic
    # mean degenerates to 0 (tp = 0), matching 2tp/(2tp+fp+fn).
    if precision is not None and recall is not None:
        f_measure = Fraction(2 * tp, 2 * tp + fp + fn)
    else:
        f_measure = None
    return accuracy, precision, recall, f_measure


def metrics_from_binary(m: BinaryConfusion) -> MetricSet:
    """Accuracy (tp+tn)/n, precision tp/(tp+fp), recall tp/(tp+fn), F1 2PR/(P+R)."""
    if m.n == 0:
        raise ValueError("empty confusion matrix")
    return MetricSet(*(
        None if f is None else float(f)
        for f in _metric_fractions(m.tp, m.tn, m.fp, m.fn)
    ))


def per_class_metrics(m: MultiConfusion, label: str) -> MetricSet:
    """One-vs-rest reduction of one class, then the binary metrics."""
    if m.n == 0:
        raise ValueError("empty confusion matrix")
    return metrics_from_binary(m.one_vs_rest(label))


def round_half_away(value: Fraction, digits: int = 2) -> Fraction:
    """Round to `digits` decimals, halves away from zero (table print convention)."""
    scale = 10**digits
    scaled = value * scale
    if scaled >= 0:
        rounded = (scaled.numerator * 2 + scaled.denominator) // (2 * scaled.denominator)
    else:
        rounded = -((-scaled.numerator * 2 + scaled.denominator) // (2 * scaled.denominator))
    return Fraction(rounded, scale)


# --------------------------------------------------------------------------
# ROC


@dataclass(frozen=True)
class RocCurve:
    """Ordered ROC points (fp_rate, tp_rate, threshold) and the trapezoidal AUC.

    Points start at (0,0) (threshold +inf) and end at (1,1); both rates are
    non-decreasing along the list. Ties share one threshold, so the AUC equals
    the tie-adjusted rank statistic.
    """

    points: tuple[tuple[float, float, float], ...]
    auc: float

    def __post_init__(self):
        if len(self.points) < 2:
            raise ValueError("a ROC curve needs at least two points")
        if self.points[0][:2] != (0.0, 0.0) or self.points[-1][:2] != (1.0, 1.0):
            raise ValueError("ROC curve must run from (0,0) to (1,1)")
        for (f0, t0, _), (f1, t1, _) in zip(self.points, self.points[1:]):
            if f1 < f0 or t1 < t0:
                raise ValueError("ROC rates must be non-decreasing")

    def to_json(self) -> dict:
        return {"points": [[f, t, thr] for f, t, thr in self.points], "auc": self.auc}


def roc_from_scores(samples: Iterable[tuple[float, bool]]) -> RocCurve:
    """Build a ROC curve from (score, is_positive) samples.

    Thresholds sweep the distinct scores in descending order (a +inf sentinel
    contributes the (0,0) start; the minimum score yields (1,1)). A sample is
    predicted positive when score >= threshold.
    """
    samples = list(samples)
    pos = sorted((s for s, y in samples if y), reverse=True)
    neg = sorted((s for s, y in samples if not y), reverse=True)
    if not pos or not neg:
        raise ValueError("need at least one positive and one negative sample")
    for s in pos + neg:
        if not math.isfinite(s):
            raise ValueError(f"scores must be finite, got {s!r}")

    thresholds = sorted({s for s, _ in samples}, reverse=True)
    exact_points: list[tuple[Fraction, Fraction, float]] = [
        (Fraction(0), Fraction(0), math.inf)
    ]
    tp = fp = 0
    for t in thresholds:
        tp += sum(1 for s in pos if s == t)
        fp += sum(1 for s in neg if s == t)
        exact_points.append((Fraction(fp, len(neg)), Fraction(tp, len(pos)), t))
    return RocCurve(
        points=tuple((float(f), float(t), thr) for f, t, thr in exact_points),
        auc=float(_trapezoid_exact(exact_points)),
    )


def _trapezoid_exact(points: Sequence[tuple[Fraction, Fraction, float]]) -> Fraction:
    area = Fraction(0)
    for (f0, t0, _), (f1, t1, _) in zip(points, points[1:]):
        area += (f1 - f0) * (t0 + t1) / 2
    return area


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the curve's points."""
    area = 0.0
    for (f0, t0, _), (f1, t1, _) in zip(curve.points, curve.points[1:]):
        area += (f1 - f0) * (t0 + t1) / 2.0
    return area


# --------------------------------------------------------------------------
# Reconstruction oracles


@dataclass(frozen=True)
class MetricTargets:
    """Rounded table values to match; None leaves a metric unconstrained."""

    accuracy: Fraction | None = None
    precision: Fraction | None = None
    recall: Fraction | None = None
    f_measure: Fraction | None = None

    @classmethod
    def of(cls, accuracy=None, precision=None, recall=None, f_measure=None) -> "MetricTargets":
        conv = lambda v: None if v is None else _as_fraction(v)
        return cls(conv(accuracy), conv(precision), conv(recall), conv(f_measure))

    def as_tuple(self):
        return (self.accuracy, self.precision, self.recall, self.f_measure)


def matches_target(num: int, den: int, target: Fraction | None, tol: Fraction) -> bool:
    """|num/den - target| <= tol in exact integer arithmetic; undefined never matches."""
    if target is None:
        return True
    if den == 0:
        return False
    lhs = abs(num * target.denominator - target.numerator * den) * tol.denominator
    return lhs <= tol.numerator * den * target.denominator


def matches_all_targets(m: BinaryConfusion, targets: MetricTargets, tol: Fraction) -> bool:
    """The match predicate reconstruct_confusion applies to each candidate."""
    n = m.n
    f1_den = 2 * m.tp + m.fp + m.fn if (m.tp + m.fp) and (m.tp + m.fn) else 0
    return (
        matches_target(m.tp + m.tn, n, targets.accuracy, tol)
        and matches_target(m.tp, m.tp + m.fp, targets.precision, tol)
        and matches_target(m.tp, m.tp + m.fn, targets.recall, tol)
        and matches_target(2 * m.tp, f1_den, targets.f_measure, tol)
    )


def reconstruct_confusion(
    targets: MetricTargets, n: int, tol: Fraction | float = DEFAULT_TOL
) -> list[BinaryConfusion]:
    """Enumerate every (tp, tn, fp, fn) summing to n whose metrics match targets.

    The enumeration is exhaustive over all compositions of n into four parts;
    an empty result means the targets are infeasible at this n. Candidates with
    an undefined metric never match a defined target.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    tol = _as_fraction(tol)
    ta, tp_t, tr, tf = targets.as_tuple()

    solutions: list[BinaryConfusion] = []
    fp_grid, fn_grid = np.meshgrid(
        np.arange(n + 1, dtype=np.int64), np.arange(n + 1, dtype=np.int64), indexing="ij"
    )
    for tp in range(n + 1):
        limit = n - tp
        fp_a = fp_grid[: limit + 1, : limit + 1]
        fn_a = fn_grid[: limit + 1, : limit + 1]
        ok = fp_a + fn_a <= limit
        ok &= _matches_vec(np.int64(n) - fp_a - fn_a, np.int64(n), ta, tol)
        ok &= _matches_vec(np.int64(tp), np.int64(tp) + fp_a, tp_t, tol)
        ok &= _matches_vec(np.int64(tp), np.int64(tp) + fn_a, tr, tol)
        f1_den = np.where((tp + fp_a > 0) & (tp + fn_a > 0), 2 * tp + fp_a + fn_a, 0)
        ok &= _matches_vec(np.int64(2 * tp), f1_den, tf, tol)
        for fp, fn in zip(*np.nonzero(ok)):
            solutions.append(
                BinaryConfusion(tp=tp, tn=n - tp - int(fp) - int(fn), fp=int(fp), fn=int(fn))
            )
    solutions.sort(key=lambda m: (m.tp, m.tn, m.fp, m.fn))
    return solutions


def _matches_vec(num, den, target: Fraction | None, tol: Fraction):
    if target is None:
        return np.ones(np.broadcast(num, den).shape, dtype=bool)
    defined = den > 0
    lhs = np.abs(num * target.denominator - target.numerator * den) * tol.denominator
    rhs = tol.numerator * den * target.denominator
    return defined & (lhs <= rhs)


SearchStatus = Literal["feasible", "infeasible", "budget_exceeded"]


@dataclass(frozen=True)
class MulticlassSearch:
    """Outcome of reconstruct_multiclass: a definitive status or a budget stop."""

    status: SearchStatus
    solutions: tuple[MultiConfusion, ...]
    examined: int


def reconstruct_multiclass(
    per_class_targets: dict[str, MetricTargets],
    n: int,
    row_sums: Sequence[int] | None = None,
    tol: Fraction | float = DEFAULT_TOL,
    budget: int = 20_000_000,
) -> MulticlassSearch:
    """Find every K x K matrix with total n whose one-vs-rest metrics match.

    Per class c the one-vs-rest reduction depends only on the diagonal d_c,
    row sum r_c and column sum col_c, so the search first enumerates feasible
    (d, r, col) triples per class, then combines them under sum(r) = sum(col)
    = n, and finally fills the off-diagonal cells by exhausting the resulting
    transportation polytope. `row_sums`, when given, pins each class's row sum
    exactly. Exceeding `budget` explored nodes aborts with a distinct status
    (found solutions are still returned, but absence proves nothing).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    labels = tuple(per_class_targets.keys())
    k = len(labels)
    if k < 2:
        raise ValueError("need at least two classes")
    if row_sums is not None and len(row_sums) != k:
        raise ValueError("row_sums must give one value per class")
    tol = _as_fraction(tol)

    examined = 0
    budget_hit = False

    def spend(cost: int = 1) -> bool:
        nonlocal examined, budget_hit
        examined += cost
        if examined > budget:
            budget_hit = True
        return budget_hit

    # Per-class feasible (diagonal, row, col) triples.
    triples: list[list[tuple[int, int, int]]] = []
    for ci, label in enumerate(labels):
        t = per_class_targets[label]
        found: list[tuple[int, int, int]] = []
        rows = [row_sums[ci]] if row_sums is not None else range(n + 1)
        for r in rows:
            for d in range(0, r + 1):
                if not matches_target(d, r, t.recall, tol):
                    continue
                for col in _col_candidates(d, n, t.precision, tol):
                    if spend():
                        return MulticlassSearch("budget_exceeded", (), examined)
                    tp_tn = n - r - col + 2 * d
                    if tp_tn < 0 or not matches_target(tp_tn, n, t.accuracy, tol):
                        continue
                    f1_den = 2 * d + (r - d) + (col - d) if r and col else 0
                    if not matches_target(2 * d, f1_den, t.f_measure, tol):
                        continue
                    found.append((d, r, col))
        triples.append(found)

    # Combine one triple per class such that rows and columns both sum to n.
    last_index: dict[tuple[int, int], list[int]] = {}
    for d, r, col in triples[-1]:
        last_index.setdefault((r, col), []).append(d)

    solutions: list[MultiConfusion] = []

    def combine(ci: int, chosen: list[tuple[int, int, int]], row_acc: int, col_acc: int):
        if budget_hit:
            return
        if ci == k - 1:
            r_last, col_last = n - row_acc, n - col_acc
            if r_last < 0 or col_last < 0:
                return
            for d_last in last_index.get((r_last, col_last), ()):
                if spend():
                    return
                _fill_off_diagonal(
                    chosen + [(d_last, r_last, col_last)], labels, solutions, spend
                )
            return
        for d, r, col in triples[ci]:
            if row_acc + r > n or col_acc + col > n:
                continue
            if spend():
                return
            combine(ci + 1, chosen + [(d, r, col)], row_acc + r, col_acc + col)

    combine(0, [], 0, 0)

    if budget_hit:
        return MulticlassSearch("budget_exceeded", tuple(solutions), examined)
    status: SearchStatus = "feasible" if solutions else "infeasible"
    return MulticlassSearch(status, tuple(solutions), examined)


def _col_candidates(d: int, n: int, precision: Fraction | None, tol: Fraction):
    if precision is None:
        return range(0, n + 1)
    # |d/col - p| <= tol  =>  col in [d/(p+tol), d/(p-tol)]
    lo_bound = precision + tol
    hi_bound = precision - tol
    lo = max(d, math.ceil(d / lo_bound) if lo_bound > 0 else 0)
    if hi_bound <= 0:
        hi = n
    elif d == 0:
        hi = 0 if precision > tol else n
    else:
        hi = min(n, math.floor(d / hi_bound))
    return (c for c in range(lo, hi + 1) if matches_target(d, c, precision, tol))


def _fill_off_diagonal(chosen, labels, solutions, spend):
    """Exhaust non-negative off-diagonal fills for fixed diagonals/row/col sums."""
    k = len(labels)
    diag = [d for d, _, _ in chosen]
    row_rest = [r - d for d, r, _ in chosen]
    col_rest = [c - d for d, _, c in chosen]
    if any(v < 0 for v in row_rest + col_rest) or sum(row_rest) != sum(col_rest):
        return
    cells = [(i, j) for i in range(k) for j in range(k) if i != j]
    matrix = [[0] * k for _ in range(k)]
    for i in range(k):
        matrix[i][i] = diag[i]

    def rec(idx: int, row_left: list[int], col_left: list[int]):
        if spend():
            return
        if idx == len(cells):
            if all(v == 0 for v in row_left) and all(v == 0 for v in col_left):
                solutions.append(
                    MultiConfusion(labels, tuple(tuple(row) for row in matrix))
                )
            return
        i, j = cells[idx]
        # Remaining cells in row i after this one:
        later_in_row = sum(1 for (a, b) in cells[idx + 1:] if a == i)
        lo = 0 if later_in_row else row_left[i]
        hi = min(row_left[i], col_left[j])
        if lo > hi:
            return
        for v in range(lo, hi + 1):
            matrix[i][j] = v
            row_left[i] -= v
            col_left[j] -= v
            rec(idx + 1, row_left, col_left)
            row_left[i] += v
            col_left[j] += v
            matrix[i][j] = 0

    rec(0, row_rest[:], col_rest[:])
