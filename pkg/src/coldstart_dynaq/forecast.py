"""Transfer-learning pipeline for cold-start products.

An MC-dropout forecaster is fitted to the demand history of a similar
existing product, rolled out autoregressively to produce a short offline
demand series for the new product, and that series seeds a warm-start
Q-table and environment model for the training loops.
"""

import datetime as dt
import math
from dataclasses import dataclass

import numpy as np

from . import nn
from .demand import (
    D_MAX_DEFAULT,
    DemandSeries,
    extract_features,
    feature_dim,
)
from .env import Action, DomainError, InventoryState, num_actions, num_states, state_index, step
from .envmodel import EnvModel, ModelSpaces, model_update
from .qcore import QTable, q_update, select_action

_HIDDEN = (128, 64)


@dataclass
class Forecaster:
    """MC-dropout network over lag/calendar features, scalar demand output.

    Inputs and the target are scaled by d_max internally; predictions are
    clamped to [0, d_max] and rounded half-up when generating demand.
    """

    net: nn.Network
    window: int
    history: DemandSeries
    d_max: int


@dataclass
class WarmStart:
    q0: QTable
    m0: EnvModel
    offline_series: DemandSeries


def _design_row(f_window: int, d_max: int, series: DemandSeries, day: int) -> np.ndarray:
    feats = extract_features(series, day, f_window)
    x = feats.concat()
    x[: f_window + 1] /= d_max
    return x


def train_forecaster(
    series: DemandSeries,
    window: int = 7,
    epochs: int = 200,
    rng: np.random.Generator | None = None,
    d_max: int = D_MAX_DEFAULT,
    dropout: float = 0.5,
    batch_size: int = 32,
    learning_rate: float = 0.001,
) -> Forecaster:
    """Fit the forecaster to (features, next-day demand) pairs by Adam/MSE."""
    if rng is None:
        rng = np.random.default_rng()
    if len(series) <= window + 1:
        raise DomainError(
            f"series of length {len(series)} too short for window {window}"
        )
    days = range(window, len(series))
    X = np.stack([_design_row(window, d_max, series, day) for day in days])
    y = series.quantities[window:].astype(float)[:, None] / d_max

    net = nn.Network(
        [feature_dim(window), *_HIDDEN, 1], dropout=dropout, head="regression", rng=rng
    )
    adam = nn.AdamState(net, learning_rate=learning_rate)
    n = len(X)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            nn.train_step(net, adam, X[idx], y[idx], rng=rng)
    return Forecaster(net=net, window=window, history=series, d_max=d_max)


def predict_mean(f: Forecaster, series: DemandSeries, day_index: int) -> float:
    """Deterministic (dropout off) demand prediction, clamped to [0, d_max]."""
    x = _design_row(f.window, f.d_max, series, day_index)
    raw = float(nn.forward(f.net, x)[0]) * f.d_max
    return min(max(raw, 0.0), float(f.d_max))


def predict_next(
    f: Forecaster,
    series: DemandSeries,
    day_index: int,
    rng: np.random.Generator | None = None,
    stochastic: bool = True,
) -> int:
    """One demand prediction, clamped to [0, d_max] and rounded half-up.

    stochastic=True draws a single dropout-sampled forward pass, which
    preserves day-to-day variability in generated series.
    """
    x = _design_row(f.window, f.d_max, series, day_index)
    if stochastic and f.net.dropout > 0.0:
        if rng is None:
            raise ValueError("stochastic prediction needs an rng")
        raw = float(nn.forward(f.net, x, training=True, rng=rng)[0])
    else:
        raw = float(nn.forward(f.net, x)[0])
    value = math.floor(raw * f.d_max + 0.5)
    return min(max(value, 0), f.d_max)


def generate_offline(
    f: Forecaster,
    start_date: dt.date,
    h: int,
    rng: np.random.Generator | None = None,
) -> DemandSeries:
    """Autoregressive rollout of h forecasted days from the training history.

    Each generated day is appended to the working history so later days
    condition on earlier forecasts. start_date labels the emitted series;
    feature calendars follow the history's own dates.
    """
    if h < 1:
        raise DomainError(f"horizon must be >= 1, got {h}")
    working_dates = list(f.history.dates)
    working_q = list(f.history.quantities)
    generated = []
    for _ in range(h):
        working = DemandSeries(dates=tuple(working_dates), quantities=np.array(working_q))
        d = predict_next(f, working, len(working), rng=rng)
        generated.append(d)
        working_dates.append(working_dates[-1] + dt.timedelta(days=1))
        working_q.append(d)
    dates = [start_date + dt.timedelta(days=i) for i in range(h)]
    return DemandSeries(dates=tuple(dates), quantities=np.array(generated))


def build_warm_start(
    offline: DemandSeries,
    spaces: ModelSpaces,
    alpha: float = 0.1,
    gamma: float = 0.9,
    epochs: int = 50,
    epsilon: float = 0.2,
    model_variant: str = "tabular",
    transition_loss: str = "categorical",
    initial_state: InventoryState = InventoryState(0, 0, 5),
    seed: int = 0,
) -> WarmStart:
    """Q-learning over the offline series, replayed cyclically for `epochs`.

    Every offline transition also feeds the environment model, so both the
    warm Q-table and the warm model reflect only demand values present in
    the offline series.
    """
    if len(offline) == 0:
        raise DomainError("offline series is empty")
    ss = np.random.SeedSequence(seed)
    explore_rng, model_rng = (np.random.default_rng(c) for c in ss.spawn(2))
    q = QTable(num_states(spaces.s_max), num_actions(spaces.a_max), alpha, gamma)
    model = EnvModel(
        spaces, variant=model_variant, rng=model_rng, transition_loss=transition_loss
    )
    for _ in range(epochs):
        s = initial_state
        for d in offline.quantities:
            s_idx = state_index(s, spaces.s_max)
            a_idx = select_action(q, s_idx, epsilon, explore_rng)
            out = step(
                s, Action(a_idx), int(d), spaces.cost_params,
                s_max=spaces.s_max, a_max=spaces.a_max,
            )
            q_update(q, s_idx, a_idx, out.cost, state_index(out.next_state, spaces.s_max))
            model_update(model, s, Action(a_idx), out.next_state, out.cost)
            s = out.next_state
    return WarmStart(q0=q, m0=model, offline_series=offline)
