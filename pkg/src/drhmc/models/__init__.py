"""Experiment models and a registry used by the command line."""
import csv
from pathlib import Path

import numpy as np

from ..errors import ConfigError, InvalidData
from .base import METHODS, ModelSpec, make_target
from .funnel import funnel_model
from .gaussian import gaussian_marginals, gaussian_model
from .lgssm import (
    LgssmData,
    dataset,
    kalman_loglik,
    kalman_smoother_mean,
    lgssm_exact_posterior,
    lgssm_model,
    simulate_lgssm,
)
from .stock_watson import simulate_stock_watson, stock_watson_model
from .sv import simulate_sv, sv_model

MODELS = ("funnel", "lgssm1", "lgssm2", "lgssm3", "sv", "stock-watson", "gaussian")

__all__ = [
    "METHODS",
    "MODELS",
    "ModelSpec",
    "make_target",
    "funnel_model",
    "gaussian_model",
    "gaussian_marginals",
    "LgssmData",
    "dataset",
    "kalman_loglik",
    "kalman_smoother_mean",
    "lgssm_exact_posterior",
    "lgssm_model",
    "simulate_lgssm",
    "simulate_stock_watson",
    "stock_watson_model",
    "simulate_sv",
    "sv_model",
    "load_series",
    "build_model",
]


def load_series(path):
    """One numeric column from a CSV file; a non-numeric first row is a header."""
    rows = []
    with open(Path(path), newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or not row[0].strip():
                continue
            try:
                rows.append(float(row[0]))
            except ValueError:
                if i == 0 and not rows:
                    continue
                raise InvalidData(f"{path}: non-numeric value {row[0]!r} on line {i + 1}")
    if not rows:
        raise InvalidData(f"{path}: no observations")
    y = np.asarray(rows)
    if not np.all(np.isfinite(y)):
        raise InvalidData(f"{path}: non-finite observation")
    return y


def build_model(name, data=None, dataset_id=1, T=None, seed=0, y1=0.5):
    """Model by registry name.

    ``data`` is a CSV path with the observation series; otherwise data are
    simulated (LGSSM data set ``dataset_id``, or the SV / Stock-Watson
    simulators) with ``seed``.
    """
    y = load_series(data) if data is not None else None
    if name == "funnel":
        return funnel_model(y1 if y is None else float(y[0]))
    if name in ("lgssm1", "lgssm2", "lgssm3"):
        ref = dataset(dataset_id, T=T or 100, seed=seed)
        if y is not None:
            ref = LgssmData(y, ref.lam, ref.tau, ref.omega, ref.mu, seed)
        return lgssm_model(int(name[-1]), ref)
    if name == "sv":
        return sv_model(y if y is not None else simulate_sv(T or 250, seed=seed)["y"])
    if name == "stock-watson":
        return stock_watson_model(y if y is not None else simulate_stock_watson(T or 100, seed=seed)["y"])
    if name == "gaussian":
        return gaussian_model()
    raise ConfigError(f"unknown model {name!r}; choose from {', '.join(MODELS)}")
