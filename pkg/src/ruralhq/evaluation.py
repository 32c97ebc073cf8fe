"""Model-fit metrics and the statistical comparisons used downstream.

The fit of predicted to true score distributions is summarized by the mean
squared error of the distribution means, the same for standard deviations,
and the coefficient of determination R^2 of the means. Group comparisons
use Welch's unequal-variance t-test; two-sided p-values come from the
regularized incomplete beta function, implemented here so the test suite
can check it against an independent library implementation.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .corpus import FACADES, ImageRecord, ScoreDistribution
from .errors import (
    ConstantInput,
    IdMismatch,
    InsufficientGroups,
    LengthMismatch,
    TooFewSamples,
    ZeroVariance,
)

FLOOR_BUCKETS = ("1", "2", "3", ">3")


@dataclass(frozen=True)
class EvalReport:
    r_squared: float
    mse_avg: float
    mse_std: float
    n: int

    def to_json_dict(self) -> dict:
        return {
            "r_squared": self.r_squared,
            "mse_avg": self.mse_avg,
            "mse_std": self.mse_std,
            "n": self.n,
        }


def eval_metrics(
    pred: Mapping[str, ScoreDistribution], truth: Mapping[str, ScoreDistribution]
) -> EvalReport:
    """MSE of distribution means and stds, plus R^2 of the means."""
    if not truth or set(pred) != set(truth):
        raise IdMismatch(
            f"prediction ids and truth ids differ ({len(pred)} vs {len(truth)} entries)"
        )
    ids = sorted(truth)
    y_avg = np.array([truth[i].mean for i in ids], dtype=np.float64)
    p_avg = np.array([pred[i].mean for i in ids], dtype=np.float64)
    y_std = np.array([truth[i].std for i in ids], dtype=np.float64)
    p_std = np.array([pred[i].std for i in ids], dtype=np.float64)

    mse_avg = float(np.mean((p_avg - y_avg) ** 2))
    mse_std = float(np.mean((p_std - y_std) ** 2))
    denom = float(np.sum((y_avg.mean() - y_avg) ** 2))
    if denom == 0.0:
        raise ZeroVariance("all true means are equal; R^2 is undefined")
    r_squared = 1.0 - float(np.sum((p_avg - y_avg) ** 2)) / denom
    return EvalReport(r_squared=r_squared, mse_avg=mse_avg, mse_std=mse_std, n=len(ids))


def pearson_r(x: Sequence[float], y: Sequence[float]) -> float:
    """Product-moment correlation coefficient."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"need two equal-length vectors, got {x.shape} and {y.shape}")
    if x.size < 2:
        raise LengthMismatch("need at least 2 points")
    dx = x - x.mean()
    dy = y - y.mean()
    sx = float(np.sqrt(np.sum(dx * dx)))
    sy = float(np.sqrt(np.sum(dy * dy)))
    if sx == 0.0 or sy == 0.0:
        raise ConstantInput("correlation is undefined for a constant input")
    return float(np.dot(dx, dy)) / (sx * sy)


def welch_t_test(a: Sequence[float], b: Sequence[float]) -> tuple[float, float, float]:
    """Welch's unequal-variance t statistic, Welch-Satterthwaite df, two-sided p."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.size < 2 or b.size < 2:
        raise TooFewSamples(f"need at least 2 samples per group, got {a.size} and {b.size}")
    va = float(a.var(ddof=1))
    vb = float(b.var(ddof=1))
    if va == 0.0 and vb == 0.0:
        raise ConstantInput("both samples have zero variance")
    sa, sb = va / a.size, vb / b.size
    t = (float(a.mean()) - float(b.mean())) / math.sqrt(sa + sb)
    df = (sa + sb) ** 2 / (sa * sa / (a.size - 1) + sb * sb / (b.size - 1))
    p = regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))
    return t, df, min(max(p, 0.0), 1.0)


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) by the continued-fraction expansion (accurate to ~1e-14)."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must be in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return x
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # The continued fraction converges fastest below the distribution mode.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cont_fraction(a, b, x) / a
    return 1.0 - front * _beta_cont_fraction(b, a, 1.0 - x) / b


def _beta_cont_fraction(a: float, b: float, x: float, max_iter: int = 300) -> float:
    """Lentz's algorithm for the incomplete-beta continued fraction."""
    tiny = 1e-300
    eps = 3e-16
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        coeff = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + coeff * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + coeff / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        coeff = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + coeff * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + coeff / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < eps:
            return h
    raise ArithmeticError(f"incomplete beta did not converge for a={a}, b={b}, x={x}")


# --- attribute group comparisons ---------------------------------------------


@dataclass(frozen=True)
class GroupStat:
    label: str
    mean: float
    count: int


@dataclass(frozen=True)
class PairwiseTest:
    label_a: str
    label_b: str
    t: float
    df: float
    p: float


@dataclass(frozen=True)
class GroupReport:
    attribute: str
    groups: tuple[GroupStat, ...]
    pairwise: tuple[PairwiseTest, ...]

    def to_json_dict(self) -> dict:
        return {
            "attribute": self.attribute,
            "groups": [{"label": g.label, "mean": g.mean, "count": g.count} for g in self.groups],
            "pairwise": [
                {"a": t.label_a, "b": t.label_b, "t": t.t, "df": t.df, "p": t.p}
                for t in self.pairwise
            ],
        }


def floor_bucket(floors: int) -> str:
    return str(floors) if floors <= 3 else ">3"


def attribute_group_report(
    images: Sequence[ImageRecord], means: Mapping[str, float], attribute: str
) -> GroupReport:
    """Group predicted means by a physical attribute and run all pairwise tests.

    Images missing the attribute or a predicted mean are skipped. Groups with
    fewer than two members are listed but excluded from the pairwise tests;
    at least two testable groups are required.
    """
    if attribute not in ("floors", "has_ac", "facade"):
        raise ValueError(f"unknown grouping attribute {attribute!r}")
    buckets: dict[str, list[float]] = {}
    for record in images:
        if record.image_id not in means:
            continue
        value = getattr(record, attribute)
        if value is None:
            continue
        if attribute == "floors":
            label = floor_bucket(value)
        elif attribute == "has_ac":
            label = "with_ac" if value else "without_ac"
        else:
            label = value
        buckets.setdefault(label, []).append(means[record.image_id])

    order = {
        "floors": FLOOR_BUCKETS,
        "has_ac": ("without_ac", "with_ac"),
        "facade": FACADES,
    }[attribute]
    labels = [lb for lb in order if lb in buckets]
    groups = tuple(
        GroupStat(label=lb, mean=float(np.mean(buckets[lb])), count=len(buckets[lb]))
        for lb in labels
    )
    testable = [lb for lb in labels if len(buckets[lb]) >= 2]
    if len(testable) < 2:
        raise InsufficientGroups(
            f"attribute {attribute!r} yields {len(testable)} group(s) with >= 2 members"
        )
    pairwise = []
    for i, la in enumerate(testable):
        for lb in testable[i + 1 :]:
            t, df, p = welch_t_test(buckets[la], buckets[lb])
            pairwise.append(PairwiseTest(label_a=la, label_b=lb, t=t, df=df, p=p))
    return GroupReport(attribute=attribute, groups=groups, pairwise=tuple(pairwise))


# --- report export ------------------------------------------------------------


def write_eval_json(
    path: str | os.PathLike, report: EvalReport, groups: Sequence[GroupReport] = ()
) -> None:
    payload = {
        "metrics": report.to_json_dict(),
        "groups": [g.to_json_dict() for g in groups],
    }
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_eval_csv(
    path: str | os.PathLike, report: EvalReport, groups: Sequence[GroupReport] = ()
) -> None:
    """Flat export: section,attribute,group_a,group_b,name,value."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["section", "attribute", "group_a", "group_b", "name", "value"])
        for name, value in report.to_json_dict().items():
            writer.writerow(["metric", "", "", "", name, repr(value)])
        for g in groups:
            for stat in g.groups:
                writer.writerow(["group", g.attribute, stat.label, "", "mean", repr(stat.mean)])
                writer.writerow(["group", g.attribute, stat.label, "", "count", stat.count])
            for test in g.pairwise:
                for name, value in (("t", test.t), ("df", test.df), ("p", test.p)):
                    writer.writerow(
                        ["pairwise", g.attribute, test.label_a, test.label_b, name, repr(value)]
                    )
