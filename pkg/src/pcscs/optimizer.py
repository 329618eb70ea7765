"""Key-rate maximisation over the source intensity and estimation probability.

The objective is flat (exactly zero) over large parts of parameter space, so
the search is a log-spaced grid followed by zooming refinement around the
incumbent.  Ties are broken towards smaller mu, then smaller p_est.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .channel import ChannelParams
from .security import KeyRateResult, finite_key_rate, key_rate_asymptotic

Mode = Literal["finite", "asymptotic"]


@dataclass(frozen=True)
class SearchSpec:
    """Search box and resolution.

    The mu range reaches down to 1e-8 because at high loss the optimum sits
    near mu ~ 0.05 * eta, i.e. around 1e-5 at 60 dB.
    """

    mu_range: tuple[float, float] = (1e-8, 1.0)
    p_est_range: tuple[float, float] = (1e-4, 0.5)
    coarse_grid: int = 25
    refine_rounds: int = 3

    def __post_init__(self):
        lo, hi = self.mu_range
        if not 0 < lo < hi:
            raise ValueError(f"bad mu_range {self.mu_range}")
        lo, hi = self.p_est_range
        if not 0 < lo < hi < 1:
            raise ValueError(f"bad p_est_range {self.p_est_range}")
        if self.coarse_grid < 3:
            raise ValueError("coarse_grid must be at least 3")
        if self.refine_rounds < 0:
            raise ValueError("refine_rounds must be nonnegative")


@dataclass(frozen=True)
class OptimumPoint:
    mu: float
    p_est: float
    result: KeyRateResult
    history: tuple[float, ...] = ()

    @property
    def rate(self) -> float:
        return float(self.result.rate)


@dataclass(frozen=True)
class CurvePoint:
    loss_db: float
    n_windows: float
    mu: float
    p_est: float
    result: KeyRateResult

    @property
    def rate(self) -> float:
        return float(self.result.rate)


def _scalar_result(res: KeyRateResult, idx) -> KeyRateResult:
    vals = {}
    for k, v in res.__dict__.items():
        v = np.asarray(v)
        vals[k] = v[idx].item() if v.ndim else v.item()
    return KeyRateResult(**vals)


def _zoom(axis: np.ndarray, i: int, lo: float, hi: float, k: int) -> np.ndarray:
    """New log grid spanning the neighbours of ``axis[i]``, incumbent included."""
    a = axis[max(i - 1, 0)]
    b = axis[min(i + 1, len(axis) - 1)]
    grid = np.geomspace(max(a, lo), min(b, hi), k)
    return np.union1d(grid, [axis[i]])


def _evaluate(mode: Mode, mu, p_est, ch, n_windows, eps_total, f_ec) -> KeyRateResult:
    if mode == "asymptotic":
        return key_rate_asymptotic(mu, ch, f_ec)
    return finite_key_rate(mu, p_est, ch, n_windows, eps_total, f_ec)


def optimize_point(ch: ChannelParams, n_windows: float = 1e13, eps_total: float = 1e-10,
                   f_ec: float = 1.1, spec: SearchSpec | None = None,
                   mode: Mode = "finite") -> OptimumPoint:
    """Maximise the key rate at one channel point.

    Returns the best evaluated point; a zero rate (not an error) when no
    evaluated point gives key.  In asymptotic mode ``p_est`` is reported as 0.
    """
    spec = spec or SearchSpec()
    if mode not in ("finite", "asymptotic"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "finite" and not math.isfinite(n_windows):
        raise ValueError("finite mode needs a finite number of windows")
    k = spec.coarse_grid
    mus = np.geomspace(*spec.mu_range, k)
    ps = np.geomspace(*spec.p_est_range, k) if mode == "finite" else np.array([0.0])

    best = None
    history = []
    for _ in range(spec.refine_rounds + 1):
        if mode == "finite":
            res = _evaluate(mode, mus[:, None], ps[None, :], ch, n_windows, eps_total, f_ec)
            rates = np.broadcast_to(np.asarray(res.rate), (len(mus), len(ps)))
        else:
            res = _evaluate(mode, mus, None, ch, n_windows, eps_total, f_ec)
            rates = np.asarray(res.rate).reshape(len(mus), 1)
        # row-major argmax: first maximum has the smallest mu, then smallest p_est
        flat = int(np.argmax(rates))
        i, j = divmod(flat, rates.shape[1])
        cand = (float(rates[i, j]), float(mus[i]), float(ps[j]))
        if best is None or _better(cand, best[0]):
            idx = (i, j) if mode == "finite" else i
            best = (cand, _scalar_result(res, idx))
        history.append(best[0][0])
        mus = _zoom(mus, i, *spec.mu_range, k)
        if mode == "finite":
            ps = _zoom(ps, j, *spec.p_est_range, k)

    (rate, mu, p), result = best
    return OptimumPoint(mu=mu, p_est=p, result=result, history=tuple(history))


def _better(cand, inc) -> bool:
    # lexicographic (R, -mu, -p_est)
    return (cand[0], -cand[1], -cand[2]) > (inc[0], -inc[1], -inc[2])


def rate_distance_curve(ch_base: ChannelParams, loss_grid: Sequence[float],
                        n_windows: float = 1e13, eps_total: float = 1e-10,
                        f_ec: float = 1.1, spec: SearchSpec | None = None,
                        mode: Mode = "finite") -> list[CurvePoint]:
    """One optimised record per loss value; ``n_windows`` is ignored in asymptotic mode."""
    grid = list(loss_grid)
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("loss grid must be sorted ascending")
    out = []
    for loss in grid:
        opt = optimize_point(ch_base.with_loss(loss), n_windows, eps_total, f_ec, spec, mode)
        n = math.inf if mode == "asymptotic" else n_windows
        out.append(CurvePoint(loss, n, opt.mu, opt.p_est, opt.result))
    return out


def cutoff_loss(curve: Sequence[CurvePoint]) -> float | None:
    """First loss at which the rate drops to zero after being positive."""
    seen_positive = False
    for pt in curve:
        if pt.rate > 0:
            seen_positive = True
        elif seen_positive:
            return pt.loss_db
    return None
