"""Phase-error certification, key length and key rate.

The finite-key path nests the concentration bounds as

    N_ph <= U_m( 2 (1-p)/p * U_e(N_est,bit)
                 + 2 sqrt(2) sqrt((1-p)/p) * sqrt(U_e(N_est,bit) * U_e(C_U(C0)))
                 + 2 U_e(C_U(C0)) ),      C0 = N (1-p) (1 - e^{-mu})^2

with every inequality at failure probability eps^2 and n = N windows.
All functions broadcast over numpy arrays so the optimizer can evaluate a
whole parameter grid in one call.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import bounds
from .channel import ChannelParams, click_rates

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class ProtocolParams:
    """Source and protocol knobs.

    ``eps_total`` is split as six equal parts: four for the bound chain
    (through eps' = 2 eps), one each for privacy amplification and
    error-correction verification.
    """

    mu: float
    p_est: float
    n_windows: float
    f_ec: float = 1.1
    eps_total: float = 1e-10

    def __post_init__(self):
        if np.any(np.asarray(self.mu) < 0):
            raise ValueError("mu must be nonnegative")
        p = np.asarray(self.p_est)
        if not np.all((p > 0) & (p < 1)):
            raise ValueError(f"p_est must lie in (0, 1), got {self.p_est}")
        if not (self.n_windows >= 1 and math.isfinite(self.n_windows)):
            raise ValueError(f"n_windows must be a finite count >= 1, got {self.n_windows}")
        if not self.f_ec >= 1:
            raise ValueError(f"f_ec must be >= 1, got {self.f_ec}")
        if not 0 < self.eps_total < 1:
            raise ValueError(f"eps_total must lie in (0, 1), got {self.eps_total}")

    @property
    def eps(self) -> float:
        return self.eps_total / 6.0


@dataclass(frozen=True)
class Tallies:
    """Observed (or expected) counts entering the key-length formula.

    Counts may be real-valued when they come from the analytic channel model.
    """

    n_sig: float
    n_est_bit: float
    n_sig_bit_err: float = 0.0
    n_est: float = 0.0

    def __post_init__(self):
        for name in ("n_sig", "n_est_bit", "n_sig_bit_err", "n_est"):
            if np.any(np.asarray(getattr(self, name)) < 0):
                raise ValueError(f"{name} must be nonnegative")

    @classmethod
    def expected(cls, ch: ChannelParams, p: ProtocolParams) -> "Tallies":
        """Expected tallies of ``p.n_windows`` windows through channel ``ch``."""
        cr = click_rates(p.mu, ch)
        n = float(p.n_windows)
        n_sig = n * (1.0 - p.p_est) * cr.total
        return cls(
            n_sig=n_sig,
            n_est_bit=n * p.p_est * cr.s_small,
            n_sig_bit_err=n * (1.0 - p.p_est) * cr.s_small,
            n_est=n * p.p_est * cr.total,
        )


@dataclass(frozen=True)
class PhaseErrorCertificate:
    n_ph_bar: np.ndarray | float
    term_bit: np.ndarray | float
    term_cross: np.ndarray | float
    term_oo: np.ndarray | float
    eps_consumed: float
    # intermediate bounds, innermost first
    ue_bit: np.ndarray | float = 0.0
    cu_oo: np.ndarray | float = 0.0
    ue_oo: np.ndarray | float = 0.0
    vacuous: np.ndarray | bool = False

    @property
    def sum_bound(self):
        return self.term_bit + self.term_cross + self.term_oo


@dataclass(frozen=True)
class KeyRateResult:
    key_length: np.ndarray | float
    rate: np.ndarray | float
    e_bit: np.ndarray | float
    e_ph_bound: np.ndarray | float
    eps_total: float
    n_sig: np.ndarray | float = 0.0
    clamped: np.ndarray | bool = False
    s_large: np.ndarray | float = field(default=math.nan)
    s_small: np.ndarray | float = field(default=math.nan)


def _out(x):
    x = np.asarray(x)
    return x.item() if x.ndim == 0 else x


def binary_entropy(p):
    """H2(p) in bits, with 0 log 0 = 0."""
    p = np.asarray(p, dtype=float)
    if np.any(np.isnan(p)) or np.any(p < 0) or np.any(p > 1):
        raise ValueError(f"binary entropy argument outside [0, 1]: {p}")
    q = np.clip(p, 1e-300, 1.0)
    r = np.clip(1.0 - p, 1e-300, 1.0)
    h = -np.where(p > 0, p * np.log2(q), 0.0) - np.where(p < 1, (1.0 - p) * np.log2(r), 0.0)
    return _out(h)


def p_oo_upper(mu):
    """Upper bound (1 - e^{-mu})^2 on the odd-odd weight of the joint source state."""
    mu = np.asarray(mu, dtype=float)
    return _out(np.expm1(-mu) ** 2)


def phase_error_bound(t: Tallies, p: ProtocolParams, eps: float | None = None) -> PhaseErrorCertificate:
    """Certified upper bound on the number of phase errors in signal windows.

    Each of the three Kato applications and the Chernoff bound runs at
    failure probability ``eps**2`` (default ``p.eps``), for ``4 eps**2`` total.
    If the final observation bound is vacuous the trivial bound N is used and
    the certificate is flagged.
    """
    eps = p.eps if eps is None else eps
    e2 = eps * eps
    n = float(p.n_windows)
    q = np.asarray(p.p_est, dtype=float)
    if not np.all((q > 0) & (q < 1)):
        raise ValueError("p_est must lie strictly between 0 and 1")

    ue_bit = np.asarray(bounds.kato_upper_expectation(t.n_est_bit, n, e2))
    c0 = n * (1.0 - q) * np.asarray(p_oo_upper(p.mu))
    # a count of at most n windows: a Chernoff value above n is replaced by n
    cu = np.minimum(np.asarray(bounds.chernoff_upper(c0, e2)), n)
    ue_oo = np.asarray(bounds.kato_upper_expectation(cu, n, e2))

    term_bit = 2.0 * (1.0 - q) / q * ue_bit
    term_cross = 2.0 * SQRT2 * np.sqrt((1.0 - q) / q) * np.sqrt(ue_bit * ue_oo)
    term_oo = 2.0 * ue_oo
    total = term_bit + term_cross + term_oo

    um = bounds.kato_upper_observation_unchecked(np.minimum(total, n), n, e2)
    vacuous = (total >= n) | ~np.isfinite(um)
    n_ph = np.where(vacuous, n, um)
    return PhaseErrorCertificate(
        n_ph_bar=_out(n_ph),
        term_bit=_out(term_bit),
        term_cross=_out(term_cross),
        term_oo=_out(term_oo),
        eps_consumed=4.0 * e2,
        ue_bit=_out(ue_bit),
        cu_oo=_out(cu),
        ue_oo=_out(ue_oo),
        vacuous=_out(vacuous),
    )


def _log_penalty(eps: float) -> float:
    # 2 log2(1/(2 eps~)) + log2(2/eps_cor) with eps~ = eps_cor = eps
    return 2.0 * math.log2(1.0 / (2.0 * eps)) + math.log2(2.0 / eps)


def key_length(t: Tallies, cert: PhaseErrorCertificate, p: ProtocolParams) -> KeyRateResult:
    """Secret key length and rate from tallies and a phase-error certificate.

    Negative lengths are reported as 0 with ``clamped`` set.  Phase-error
    ratios of 1/2 or more give zero key.
    """
    n_sig = np.asarray(t.n_sig, dtype=float)
    ok = n_sig > 0
    safe = np.where(ok, n_sig, 1.0)
    e_bit = np.where(ok, np.asarray(t.n_sig_bit_err) / safe, 0.0)
    ratio = np.where(ok, np.asarray(cert.n_ph_bar) / safe, 1.0)
    e_ph = np.clip(ratio, 0.0, 0.5)
    e_bit_c = np.clip(e_bit, 0.0, 0.5)

    raw = n_sig * (1.0 - binary_entropy(e_ph) - p.f_ec * binary_entropy(e_bit_c)) - _log_penalty(p.eps)
    dead = (ratio >= 0.5) | ~ok
    length = np.where(dead, 0.0, np.maximum(raw, 0.0))
    return KeyRateResult(
        key_length=_out(length),
        rate=_out(length / float(p.n_windows)),
        e_bit=_out(e_bit),
        e_ph_bound=_out(e_ph),
        eps_total=6.0 * p.eps,
        n_sig=_out(n_sig),
        clamped=_out(dead | (raw <= 0)),
    )


def finite_key_rate(mu, p_est, ch: ChannelParams, n_windows: float,
                    eps_total: float = 1e-10, f_ec: float = 1.1) -> KeyRateResult:
    """Analytic finite-key rate: expected tallies pushed through the bound chain."""
    p = ProtocolParams(mu, p_est, n_windows, f_ec, eps_total)
    t = Tallies.expected(ch, p)
    res = key_length(t, phase_error_bound(t, p), p)
    cr = click_rates(mu, ch)
    return _with_clicks(res, cr)


def _with_clicks(res: KeyRateResult, cr) -> KeyRateResult:
    shape = np.shape(res.rate)
    sl = np.broadcast_to(cr.s_large, shape) if shape else cr.s_large
    ss = np.broadcast_to(cr.s_small, shape) if shape else cr.s_small
    return KeyRateResult(**{**res.__dict__, "s_large": _out(sl), "s_small": _out(ss)})


def key_rate_asymptotic(mu, ch: ChannelParams, f_ec: float = 1.1) -> KeyRateResult:
    """Infinite-key rate under collective attacks.

    Per window, P_err = S_small is the bit-error click probability and the
    phase-error probability is bounded by 2 P_err + 2 sqrt(2 P_err P_oo) + 2 P_oo.
    """
    cr = click_rates(mu, ch)
    q = np.asarray(cr.total)
    ok = q > 0
    safe = np.where(ok, q, 1.0)
    p_err = np.asarray(cr.s_small)
    p_oo = np.asarray(p_oo_upper(mu))
    ph = 2.0 * p_err + 2.0 * SQRT2 * np.sqrt(p_err * p_oo) + 2.0 * p_oo
    ratio = np.where(ok, ph / safe, 1.0)
    e_bit = np.where(ok, p_err / safe, 0.0)
    e_ph = np.clip(ratio, 0.0, 0.5)
    raw = q * (1.0 - binary_entropy(e_ph) - f_ec * binary_entropy(np.clip(e_bit, 0.0, 0.5)))
    dead = (ratio >= 0.5) | ~ok
    rate = np.where(dead, 0.0, np.maximum(raw, 0.0))
    return KeyRateResult(
        key_length=_out(np.where(rate > 0, np.inf, 0.0)),
        rate=_out(rate),
        e_bit=_out(e_bit),
        e_ph_bound=_out(e_ph),
        eps_total=0.0,
        n_sig=math.nan,
        clamped=_out(dead | (raw <= 0)),
        s_large=_out(cr.s_large),
        s_small=_out(cr.s_small),
    )
