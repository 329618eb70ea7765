"""Pulse-level Monte Carlo of the honest protocol run.

Each window: Alice and Bob pick uniform bits and encode them as phases 0/pi.
Equal bits send intensity (1+V) eta mu to the left detector and (1-V) eta mu
to the right one; unequal bits swap the two.  Each detector clicks
independently with probability 1 - (1-d) e^{-I}.  A window with exactly one
click succeeds; a right click makes Bob flip his bit.  Successful windows are
estimation windows with probability P_est, signal windows otherwise.

Randomness is counter based: window ``w`` always consumes the same five
uniforms from a Philox stream keyed by the seed, with block ``w // BLOCK``
selecting the high counter word.  Tallies therefore do not depend on the
batch size or on how batches are spread over workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields

import numpy as np

from .channel import ChannelParams, click_rates, transmittance
from .security import ProtocolParams, Tallies

BLOCK = 1 << 16
_DRAWS = 5  # alice bit, bob bit, left detector, right detector, window role
_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SimConfig:
    n_windows: int
    protocol: ProtocolParams
    channel: ChannelParams
    seed: int = 0
    batch_size: int = 1 << 20

    def __post_init__(self):
        if int(self.n_windows) != self.n_windows or self.n_windows < 1:
            raise ValueError(f"n_windows must be a positive integer, got {self.n_windows}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")


@dataclass(frozen=True)
class SimTallies:
    n_windows: int = 0
    n_sig: int = 0
    n_est: int = 0
    n_est_bit: int = 0
    n_sig_bit_err: int = 0
    n_left_clicks: int = 0
    n_right_clicks: int = 0
    n_double_clicks: int = 0
    n_no_click: int = 0

    def __add__(self, other: "SimTallies") -> "SimTallies":
        return SimTallies(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))

    @property
    def e_bit(self) -> float:
        return self.n_sig_bit_err / self.n_sig if self.n_sig else math.nan


def _block_uniforms(seed: int, block: int) -> np.ndarray:
    gen = np.random.Generator(np.random.Philox(key=seed & _MASK64, counter=block << 192))
    return gen.random((_DRAWS, BLOCK))


def window_uniforms(seed: int, start: int, stop: int) -> np.ndarray:
    """The (5, stop-start) uniforms consumed by windows ``start..stop-1``."""
    parts = []
    for block in range(start // BLOCK, (stop - 1) // BLOCK + 1):
        u = _block_uniforms(seed, block)
        lo = max(start - block * BLOCK, 0)
        hi = min(stop - block * BLOCK, BLOCK)
        parts.append(u[:, lo:hi])
    return parts[0] if len(parts) == 1 else np.concatenate(parts, axis=1)


def _detector_probs(cfg: SimConfig):
    x = transmittance(cfg.channel) * cfg.protocol.mu
    v = cfg.channel.visibility
    d = cfg.channel.dark_rate
    p_con = -math.expm1(-(1.0 + v) * x) + d * math.exp(-(1.0 + v) * x)
    p_des = -math.expm1(-(1.0 - v) * x) + d * math.exp(-(1.0 - v) * x)
    return p_con, p_des


def _simulate_range(cfg: SimConfig, start: int, stop: int) -> SimTallies:
    u = window_uniforms(cfg.seed, start, stop)
    p_con, p_des = _detector_probs(cfg)

    alice = u[0] < 0.5
    bob = u[1] < 0.5
    same = alice == bob
    # left port is constructive when the bits agree; p_con >= p_des since V >= 0
    left = (u[2] < p_des) | (same & (u[2] < p_con))
    right = (u[3] < p_des) | (~same & (u[3] < p_con))

    single = left ^ right
    n_left = int(np.count_nonzero(left & ~right))
    n_right = int(np.count_nonzero(right & ~left))
    n_double = int(np.count_nonzero(left & right))

    bob_final = bob ^ right
    err = single & (alice != bob_final)
    est = single & (u[4] < cfg.protocol.p_est)
    sig = single & ~est
    n_est = int(np.count_nonzero(est))
    return SimTallies(
        n_windows=stop - start,
        n_sig=n_left + n_right - n_est,
        n_est=n_est,
        n_est_bit=int(np.count_nonzero(err & est)),
        n_sig_bit_err=int(np.count_nonzero(err & sig)),
        n_left_clicks=n_left,
        n_right_clicks=n_right,
        n_double_clicks=n_double,
        n_no_click=(stop - start) - n_left - n_right - n_double,
    )


def simulate(cfg: SimConfig, workers: int = 1) -> SimTallies:
    """Run ``cfg.n_windows`` windows and return integer tallies.

    Batches are independent; results are merged by exact integer addition, so
    the output is the same for any ``batch_size`` and ``workers``.
    """
    n = int(cfg.n_windows)
    ranges = ((a, min(a + cfg.batch_size, n)) for a in range(0, n, cfg.batch_size))
    total = SimTallies()
    if workers <= 1:
        for a, b in ranges:
            total = total + _simulate_range(cfg, a, b)
        return total
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for part in pool.map(lambda r: _simulate_range(cfg, *r), ranges):
            total = total + part
    return total


def tallies_to_engine(st: SimTallies) -> Tallies:
    """Drop the simulator-only diagnostics."""
    return Tallies(
        n_sig=st.n_sig,
        n_est_bit=st.n_est_bit,
        n_sig_bit_err=st.n_sig_bit_err,
        n_est=st.n_est,
    )


def z_scores(st: SimTallies, cfg: SimConfig) -> dict[str, float]:
    """Binomial z-scores of simulated counts against the analytic click model."""
    cr = click_rates(cfg.protocol.mu, cfg.channel)
    p = cfg.protocol.p_est
    n = st.n_windows
    probs = {
        "clicks": (st.n_left_clicks + st.n_right_clicks, cr.total),
        "est_bit_errors": (st.n_est_bit, p * cr.s_small),
        "sig_bit_errors": (st.n_sig_bit_err, (1.0 - p) * cr.s_small),
    }
    out = {}
    for name, (count, q) in probs.items():
        sd = math.sqrt(n * q * (1.0 - q))
        out[name] = (count - n * q) / sd if sd > 0 else (0.0 if count == 0 else math.inf)
    return out
