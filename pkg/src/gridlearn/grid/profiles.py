"""Synthetic hourly load / solar profiles with contextual features.

The generator is fully deterministic for a given seed.  Solar follows a
clear-sky bell (zero outside the daylight window) scaled by a seasonal term
and a per-plant autoregressive daily weather factor; load combines diurnal,
weekly and seasonal shapes scaled so the yearly system peak is about 80 % of
total generation capacity.  Features include calendar encodings, per-plant
clear-sky potential and the weather factors, which is what makes the solar
columns learnable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import GridModel

__all__ = ["Profile", "generate_profiles", "save_profile", "load_profile"]

DAY_START, DAY_END = 6, 18
PEAK_FRACTION = 0.8


@dataclass
class Profile:
    load: np.ndarray            # (T, n_load) MW
    solar: np.ndarray           # (T, n_ren) MW
    features: np.ndarray        # (T, n_feat)
    feature_names: list

    @property
    def horizon(self):
        return self.load.shape[0]

    def day(self, d, hours=24):
        sl = slice(d * hours, (d + 1) * hours)
        return Profile(self.load[sl], self.solar[sl], self.features[sl],
                       self.feature_names)

    def hour(self, t):
        return self.load[t], self.solar[t], self.features[t]


def _clear_sky(hod):
    bell = np.sin(np.pi * (hod - DAY_START) / (DAY_END - DAY_START))
    bell = np.where((hod >= DAY_START) & (hod <= DAY_END), np.maximum(bell, 0.0), 0.0)
    return bell ** 2


def generate_profiles(g: GridModel, seed: int, days: int) -> Profile:
    if days < 1:
        raise ValueError("days must be >= 1")
    rng = np.random.default_rng(seed)
    T = 24 * days
    h = np.arange(T)
    hod = h % 24
    day = h // 24
    doy = day % 365
    weekend = ((day % 7) >= 5).astype(float)

    season_solar = 0.75 + 0.25 * np.cos(2 * np.pi * (doy - 172) / 365.0)
    potential = _clear_sky(hod)[:, None] * season_solar[:, None]   # (T, 1)

    # Daily AR(1) weather per plant, constant within the day.
    nr = g.n_ren
    w_daily = np.empty((days, nr))
    w = np.full(nr, 0.7)
    for d in range(days):
        w = 0.7 + 0.6 * (w - 0.7) + 0.25 * rng.standard_normal(nr)
        w = np.clip(w, 0.15, 1.0)
        w_daily[d] = w
    weather = w_daily[day]                                          # (T, nr)
    solar = g.ren_capacity[None, :] * potential * weather

    diurnal = (0.65 + 0.25 * np.exp(-((hod - 10) / 3.5) ** 2)
               + 0.35 * np.exp(-((hod - 19) / 3.0) ** 2))
    season_load = 1.0 + 0.12 * np.cos(2 * np.pi * (doy - 15) / 365.0)
    wk = np.where(weekend > 0, 0.88, 1.0)
    noise = 1.0 + 0.02 * rng.standard_normal(T)
    shape = diurnal * season_load * wk * np.clip(noise, 0.9, 1.1)
    system = shape / shape.max() * PEAK_FRACTION * g.p_max.sum()
    load = system[:, None] * g.load_share[g.load_buses][None, :] \
        / g.load_share[g.load_buses].sum()

    feats = [np.sin(2 * np.pi * hod / 24), np.cos(2 * np.pi * hod / 24),
             np.sin(2 * np.pi * doy / 365), np.cos(2 * np.pi * doy / 365),
             weekend, potential[:, 0]]
    names = ["sin_hour", "cos_hour", "sin_doy", "cos_doy", "weekend",
             "clear_sky"]
    for r in range(nr):
        feats.append(weather[:, r])
        names.append(f"weather_{r}")
    features = np.column_stack(feats)
    return Profile(load=load, solar=solar, features=features,
                   feature_names=names)


def save_profile(p: Profile, path):
    """Delimited text, one row per hour; header names the column roles."""
    cols = ([f"load_{i}" for i in range(p.load.shape[1])]
            + [f"solar_{i}" for i in range(p.solar.shape[1])]
            + [f"feat_{n}" for n in p.feature_names])
    with open(path, "w", encoding="utf-8") as f:
        f.write(",".join(["hour"] + cols) + "\n")
        for t in range(p.horizon):
            row = np.concatenate([p.load[t], p.solar[t], p.features[t]])
            f.write(",".join([str(t)] + [repr(float(v)) for v in row]) + "\n")


def load_profile(path) -> Profile:
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip().split(",")
        rows = [line.strip().split(",") for line in f if line.strip()]
    nl = sum(1 for c in header if c.startswith("load_"))
    nr = sum(1 for c in header if c.startswith("solar_"))
    names = [c[5:] for c in header if c.startswith("feat_")]
    data = np.array([[float(v) for v in r[1:]] for r in rows])
    return Profile(load=data[:, :nl], solar=data[:, nl:nl + nr],
                   features=data[:, nl + nr:], feature_names=names)
