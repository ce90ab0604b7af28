"""Demand models and data handling.

Integer daily demand on [0, d_max] from a moment-matched, discretized Gamma
distribution; transaction-file ingestion; calendar/lag feature extraction
for the demand forecaster; and a synthetic history generator that stands in
for real transaction data.
"""

import csv
import datetime as dt
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .env import DomainError

D_MAX_DEFAULT = 10

_PMF_TOL = 1e-9


@dataclass(frozen=True)
class DemandDistribution:
    """Probability mass function over integer demand 0..d_max."""

    pmf: np.ndarray

    def __post_init__(self):
        pmf = np.asarray(self.pmf, dtype=float)
        object.__setattr__(self, "pmf", pmf)
        if pmf.ndim != 1 or len(pmf) < 1:
            raise DomainError("pmf must be a non-empty vector")
        if np.any(pmf < 0) or abs(pmf.sum() - 1.0) > _PMF_TOL:
            raise DomainError("pmf entries must be >= 0 and sum to 1")

    @property
    def d_max(self) -> int:
        return len(self.pmf) - 1

    def mean(self) -> float:
        return float(np.dot(np.arange(len(self.pmf)), self.pmf))


@dataclass(frozen=True)
class DemandSeries:
    """Daily demand quantities on contiguous calendar dates."""

    dates: tuple
    quantities: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        q = np.asarray(self.quantities, dtype=int)
        object.__setattr__(self, "quantities", q)
        if len(self.dates) != len(q):
            raise DomainError("dates and quantities must have equal length")
        if np.any(q < 0):
            raise DomainError("quantities must be >= 0")
        for a, b in zip(self.dates, self.dates[1:]):
            if (b - a).days != 1:
                raise DomainError("dates must be contiguous daily")

    def __len__(self) -> int:
        return len(self.dates)


@dataclass(frozen=True)
class FeatureVector:
    """Numeric lag/moving-average block u and calendar block v."""

    u: np.ndarray
    v: np.ndarray

    def concat(self) -> np.ndarray:
        return np.concatenate([self.u, self.v])


def feature_dim(window: int) -> int:
    # window lags + window mean, then 7 day-of-week + weekend flag +
    # week number + sin/cos day-in-month + sin/cos day-in-year
    return window + 1 + 13


def discretized_gamma(
    mean: float,
    variance: float,
    d_max: int = D_MAX_DEFAULT,
    binning: str = "center",
) -> DemandDistribution:
    """Moment-matched Gamma density binned to an integer pmf on [0, d_max].

    shape k = mean^2/variance, scale = variance/mean.  "center" binning
    integrates over [i-0.5, i+0.5); "floor" over [i, i+1).  The right tail
    folds into pmf[d_max].
    """
    if mean <= 0 or variance <= 0:
        raise DomainError("mean and variance must be > 0")
    if binning not in ("center", "floor"):
        raise DomainError(f"unknown binning rule {binning!r}")
    shape = mean * mean / variance
    scale = variance / mean
    cdf = stats.gamma(a=shape, scale=scale).cdf
    if binning == "center":
        edges = np.concatenate([[0.0], np.arange(d_max) + 0.5, [np.inf]])
    else:
        edges = np.concatenate([np.arange(d_max + 1), [np.inf]])
    pmf = np.diff(cdf(edges))
    pmf = pmf / pmf.sum()
    return DemandDistribution(pmf=pmf)


def point_mass(value: int, d_max: int = D_MAX_DEFAULT) -> DemandDistribution:
    pmf = np.zeros(d_max + 1)
    pmf[value] = 1.0
    return DemandDistribution(pmf=pmf)


def sample(dist: DemandDistribution, rng: np.random.Generator) -> int:
    """Inverse-CDF draw of a single integer demand."""
    cdf = np.cumsum(dist.pmf)
    return int(np.searchsorted(cdf, rng.random(), side="right"))


def load_transactions(
    path,
    product_name: str,
    date_range: tuple | None = None,
    delimiter: str = ",",
) -> DemandSeries:
    """Aggregate a delimited transactions file into a daily demand series.

    Expects a header with date, product and quantity columns (ISO-8601
    dates).  Rows are filtered to `product_name`, summed per day, and
    missing days inside the observed span are zero-filled.
    """
    totals: dict[dt.date, int] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        required = {"date", "product", "quantity"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise DomainError(f"{path}: need columns {sorted(required)}")
        for rownum, row in enumerate(reader, start=2):
            try:
                day = dt.date.fromisoformat(row["date"].strip())
                qty = int(float(row["quantity"]))
            except (ValueError, AttributeError) as exc:
                raise DomainError(f"{path}: unparseable row {rownum}: {exc}") from exc
            if row["product"].strip() != product_name:
                continue
            if date_range is not None and not (date_range[0] <= day <= date_range[1]):
                continue
            totals[day] = totals.get(day, 0) + qty
    if not totals:
        raise DomainError(f"{path}: no rows for product {product_name!r}")
    first, last = min(totals), max(totals)
    dates = [first + dt.timedelta(days=i) for i in range((last - first).days + 1)]
    quantities = np.array([totals.get(d, 0) for d in dates])
    return DemandSeries(dates=tuple(dates), quantities=quantities)


def save_series(series: DemandSeries, path, product_name: str, delimiter: str = ","):
    """Write a series in the same transactions format load_transactions reads."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow(["date", "product", "quantity"])
        for day, qty in zip(series.dates, series.quantities):
            writer.writerow([day.isoformat(), product_name, int(qty)])


def extract_features(series: DemandSeries, day_index: int, window: int) -> FeatureVector:
    """Features for predicting the demand of day `day_index`.

    u holds the `window` previous demands (most recent first) and their
    mean; v encodes the calendar of the day before: one-hot day-of-week,
    weekend flag, ISO week scaled to [0, 1], and sin/cos positions within
    the month and the year.
    """
    if day_index < window:
        raise DomainError(f"day_index {day_index} needs >= {window} days of history")
    # day_index == len(series) is allowed: predicting the day right after
    # the recorded history only needs past quantities and yesterday's date
    if day_index > len(series):
        raise DomainError(f"day_index {day_index} outside series of length {len(series)}")
    lags = series.quantities[day_index - window:day_index][::-1].astype(float)
    u = np.concatenate([lags, [lags.mean()]])

    date = series.dates[day_index - 1]
    dow = np.zeros(7)
    dow[date.weekday()] = 1.0
    weekend = 1.0 if date.weekday() >= 5 else 0.0
    week = date.isocalendar().week / 53.0
    days_in_month = (
        dt.date(date.year + (date.month == 12), date.month % 12 + 1, 1)
        - dt.date(date.year, date.month, 1)
    ).days
    month_angle = 2.0 * math.pi * date.day / days_in_month
    year_len = 366 if date.year % 4 == 0 and (date.year % 100 != 0 or date.year % 400 == 0) else 365
    year_angle = 2.0 * math.pi * date.timetuple().tm_yday / year_len
    v = np.concatenate([
        dow,
        [weekend, week],
        [math.sin(month_angle), math.cos(month_angle)],
        [math.sin(year_angle), math.cos(year_angle)],
    ])
    return FeatureVector(u=u, v=v)


def synthesize_history(
    dist: DemandDistribution,
    days: int,
    start_date: dt.date,
    rng: np.random.Generator,
) -> DemandSeries:
    """Stand-in for real transaction history: i.i.d. draws on daily dates."""
    dates = [start_date + dt.timedelta(days=i) for i in range(days)]
    quantities = np.array([sample(dist, rng) for _ in range(days)], dtype=int)
    return DemandSeries(dates=tuple(dates), quantities=quantities)
