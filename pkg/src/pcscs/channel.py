"""Analytic model of the honest channel and the interferometric measurement."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DegenerateChannelError(ValueError):
    """Both detectors have zero click probability; no error rate is defined."""


@dataclass(frozen=True)
class ChannelParams:
    """Physical link between each sender and the central measurement.

    Attributes
    ----------
    loss_db : float
        Total Alice-to-Bob loss in dB.  Each arm sees half of it.
    dark_rate : float
        Dark-count probability per window per detector.
    det_eff : float
        Detector efficiency, folded into the arm transmittance.
    e_mis : float
        Misalignment error rate; visibility is ``1 - 2 e_mis``.
    attenuation_db_per_km : float
        Fibre attenuation, only used to convert between loss and distance.
    """

    loss_db: float = 0.0
    dark_rate: float = 5e-11
    det_eff: float = 0.3
    e_mis: float = 0.015
    attenuation_db_per_km: float = 0.2

    def __post_init__(self):
        if not self.loss_db >= 0:
            raise ValueError(f"loss_db must be >= 0, got {self.loss_db}")
        if not 0 <= self.dark_rate <= 1:
            raise ValueError(f"dark_rate must lie in [0, 1], got {self.dark_rate}")
        if not 0 < self.det_eff <= 1:
            raise ValueError(f"det_eff must lie in (0, 1], got {self.det_eff}")
        if not 0 <= self.e_mis < 0.5:
            raise ValueError(f"e_mis must lie in [0, 0.5), got {self.e_mis}")
        if not self.attenuation_db_per_km > 0:
            raise ValueError("attenuation_db_per_km must be positive")

    @property
    def visibility(self) -> float:
        return 1.0 - 2.0 * self.e_mis

    @property
    def distance_km(self) -> float:
        return self.loss_db / self.attenuation_db_per_km

    @classmethod
    def from_distance(cls, distance_km: float, **kwargs) -> "ChannelParams":
        att = kwargs.get("attenuation_db_per_km", cls.attenuation_db_per_km)
        return cls(loss_db=distance_km * att, **kwargs)

    def with_loss(self, loss_db: float) -> "ChannelParams":
        return ChannelParams(loss_db, self.dark_rate, self.det_eff, self.e_mis,
                             self.attenuation_db_per_km)


@dataclass(frozen=True)
class ClickRates:
    """Per-window single-click probabilities of the two interferometer outputs."""

    s_large: np.ndarray | float
    s_small: np.ndarray | float

    @property
    def total(self):
        return self.s_large + self.s_small


@dataclass(frozen=True)
class ExpectedTallies:
    n_sig_rate: np.ndarray | float
    e_bit: np.ndarray | float
    n_est_bit_rate: np.ndarray | float


def transmittance(ch: ChannelParams) -> float:
    """Per-arm transmittance including detector efficiency."""
    return ch.det_eff * 10.0 ** (-ch.loss_db / 20.0)


def _click_prob(intensity, dark):
    # 1 - (1 - d) e^{-I}, accurate for tiny I
    return -np.expm1(-intensity) + dark * np.exp(-intensity)


def click_rates(mu, ch: ChannelParams) -> ClickRates:
    """Probabilities that only the constructive / only the destructive port clicks."""
    mu = np.asarray(mu, dtype=float)
    if np.any(mu < 0):
        raise ValueError("mu must be nonnegative")
    x = transmittance(ch) * mu
    v = ch.visibility
    d = ch.dark_rate
    i_con = (1.0 + v) * x
    i_des = (1.0 - v) * x
    s_large = _click_prob(i_con, d) * (1.0 - d) * np.exp(-i_des)
    s_small = _click_prob(i_des, d) * (1.0 - d) * np.exp(-i_con)
    if s_large.ndim == 0:
        return ClickRates(float(s_large), float(s_small))
    return ClickRates(s_large, s_small)


def bit_error_rate(cr: ClickRates):
    total = np.asarray(cr.s_large + cr.s_small)
    if np.any(total <= 0):
        raise DegenerateChannelError("no clicks: s_large + s_small == 0")
    e = np.asarray(cr.s_small) / total
    return float(e) if e.ndim == 0 else e


def expected_tallies(mu, p_est, ch: ChannelParams) -> ExpectedTallies:
    """Expected per-window rates of signal clicks and estimation bit errors."""
    p_est = np.asarray(p_est, dtype=float)
    if not np.all((p_est > 0) & (p_est < 1)):
        raise ValueError(f"p_est must lie in (0, 1), got {p_est}")
    cr = click_rates(mu, ch)
    sig = (1.0 - p_est) * cr.total
    est_bit = p_est * cr.s_small
    if np.ndim(sig) == 0:
        sig, est_bit = float(sig), float(est_bit)
    return ExpectedTallies(n_sig_rate=sig, e_bit=bit_error_rate(cr), n_est_bit_rate=est_bit)
