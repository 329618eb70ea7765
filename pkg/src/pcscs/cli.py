"""Command-line front end.

Subcommands ``rate``, ``sweep``, ``simulate`` and ``validate``.  Parameters
come from built-in defaults (the reference simulation parameters), then an
optional ``key = value`` config file, then command-line flags; later sources
win.  Exit status: 0 ok, 1 invalid configuration, 2 validation failure.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Callable

from .channel import ChannelParams
from .optimizer import SearchSpec, optimize_point, rate_distance_curve
from .security import (KeyRateResult, ProtocolParams, Tallies, finite_key_rate,
                       key_length, key_rate_asymptotic, phase_error_bound)
from .simulator import SimConfig, simulate, tallies_to_engine, z_scores

COMMANDS = ("rate", "sweep", "simulate", "validate")
CSV_HEADER = ["loss_db", "distance_km", "n_windows", "mu_opt", "p_est_opt", "key_rate",
              "key_length", "e_bit", "e_ph_bound", "s_large", "s_small"]
VALIDATE_LOSSES = (10.0, 20.0, 30.0)


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    command: str = "rate"
    loss_db: float | None = None
    distance_km: float | None = None
    loss_grid: list[float] | None = None
    loss_min: float = 0.0
    loss_max: float = 80.0
    loss_step: float = 2.0
    n: list[float] | None = None
    eps_total: float = 1e-10
    mu: float | None = None
    p_est: float | None = None
    mode: str = "finite"
    seed: int = 0
    out: str | None = None
    dark_rate: float = 5e-11
    det_eff: float = 0.3
    e_mis: float = 0.015
    f_ec: float = 1.1
    attenuation_db_per_km: float = 0.2
    mu_min: float = 1e-8
    mu_max: float = 1.0
    p_est_min: float = 1e-4
    p_est_max: float = 0.5
    coarse_grid: int = 25
    refine_rounds: int = 3
    batch_size: int = 1 << 20
    workers: int = 1
    z_max: float = 5.0

    def channel(self, loss_db: float | None = None) -> ChannelParams:
        if loss_db is None:
            loss_db = self.resolved_loss()
        return ChannelParams(loss_db, self.dark_rate, self.det_eff, self.e_mis,
                             self.attenuation_db_per_km)

    def resolved_loss(self) -> float:
        if self.loss_db is not None:
            return self.loss_db
        if self.distance_km is not None:
            return self.distance_km * self.attenuation_db_per_km
        return 0.0

    def search(self) -> SearchSpec:
        return SearchSpec((self.mu_min, self.mu_max), (self.p_est_min, self.p_est_max),
                          self.coarse_grid, self.refine_rounds)

    def grid(self) -> list[float]:
        if self.loss_grid is not None:
            return list(self.loss_grid)
        if self.loss_max < self.loss_min:
            return []
        k = int(math.floor((self.loss_max - self.loss_min) / self.loss_step + 1e-9))
        return [self.loss_min + i * self.loss_step for i in range(k + 1)]


def _float(raw: str) -> float:
    return float(raw)


def _int(raw: str) -> int:
    v = float(raw)
    if not v.is_integer():
        raise ValueError(raw)
    return int(v)


def _float_list(raw: str) -> list[float]:
    return [float(x) for x in raw.split(",") if x.strip()]


def _mode(raw: str) -> str:
    if raw not in ("finite", "asymptotic"):
        raise ValueError(raw)
    return raw


def _command(raw: str) -> str:
    if raw not in COMMANDS:
        raise ValueError(raw)
    return raw


PARSERS: dict[str, Callable[[str], object]] = {
    "command": _command, "mode": _mode, "out": str,
    "loss_grid": _float_list, "n": _float_list,
    "seed": _int, "coarse_grid": _int, "refine_rounds": _int,
    "batch_size": _int, "workers": _int,
}
KEYS = [f.name for f in fields(RunConfig)]


def parse_value(key: str, raw: str):
    if key not in KEYS:
        raise ConfigError(f"unknown key {key!r}")
    try:
        return PARSERS.get(key, _float)(raw.strip())
    except ValueError:
        raise ConfigError(f"invalid value for {key!r}: {raw!r}") from None


def read_config_file(path: str | Path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        values[key] = parse_value(key, raw)
    return values


def fmt(x) -> str:
    """17 significant digits, scientific notation; inf/nan spelled literally."""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return f"{x:.16e}"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


FLAGS = {
    "--loss-db": "loss_db", "--distance-km": "distance_km", "--n": "n",
    "--eps-total": "eps_total", "--mu": "mu", "--p-est": "p_est", "--mode": "mode",
    "--seed": "seed", "--out": "out", "--loss-grid": "loss_grid",
    "--loss-min": "loss_min", "--loss-max": "loss_max", "--loss-step": "loss_step",
    "--dark-rate": "dark_rate", "--det-eff": "det_eff", "--e-mis": "e_mis",
    "--f-ec": "f_ec", "--attenuation": "attenuation_db_per_km",
    "--batch-size": "batch_size", "--workers": "workers", "--z-max": "z_max",
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pcscs", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="key = value file; flags override it")
        where = p.add_mutually_exclusive_group()
        for flag in ("--loss-db", "--distance-km"):
            where.add_argument(flag, dest=FLAGS[flag], default=None)
        for flag, dest in FLAGS.items():
            if flag not in ("--loss-db", "--distance-km"):
                p.add_argument(flag, dest=dest, default=None)
    return parser


def resolve_config(argv: list[str]) -> RunConfig:
    ns = build_parser().parse_args(argv)
    values = {}
    if ns.config:
        values.update(read_config_file(ns.config))
    for key in set(FLAGS.values()):
        raw = getattr(ns, key)
        if raw is not None:
            values[key] = parse_value(key, raw)
    if "loss_db" in values and "distance_km" in values:
        if ns.loss_db is not None:
            values.pop("distance_km")
        elif ns.distance_km is not None:
            values.pop("loss_db")
        else:
            raise ConfigError("loss_db and distance_km are mutually exclusive")
    values["command"] = ns.command
    cfg = replace(RunConfig(), **values)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig):
    try:
        cfg.channel()
        cfg.search()
        for n in cfg.n or []:
            if not n >= 1:
                raise ValueError(f"n must be >= 1, got {n}")
        if not 0 < cfg.eps_total < 1:
            raise ValueError("eps_total must lie in (0, 1)")
        if cfg.f_ec < 1:
            raise ValueError("f_ec must be >= 1")
        if cfg.p_est is not None and not 0 < cfg.p_est < 1:
            raise ValueError("p_est must lie in (0, 1)")
        if cfg.mu is not None and cfg.mu < 0:
            raise ValueError("mu must be nonnegative")
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _single_n(cfg: RunConfig, default: float) -> float:
    if not cfg.n:
        return default
    if len(cfg.n) != 1:
        raise ConfigError(f"command {cfg.command!r} takes a single --n value")
    return cfg.n[0]


def _result_lines(res: KeyRateResult, **head) -> list[str]:
    lines = [f"{k}: {fmt(v) if isinstance(v, float) else v}" for k, v in head.items()]
    for f in fields(res):
        v = getattr(res, f.name)
        lines.append(f"{f.name}: {v if isinstance(v, bool) else fmt(v)}")
    return lines


def cmd_rate(cfg: RunConfig, out) -> int:
    n = _single_n(cfg, 1e13)
    mode = "asymptotic" if math.isinf(n) else cfg.mode
    ch = cfg.channel()
    if cfg.mu is not None and (mode == "asymptotic" or cfg.p_est is not None):
        mu, p = cfg.mu, (cfg.p_est if mode == "finite" else 0.0)
        res = (key_rate_asymptotic(mu, ch, cfg.f_ec) if mode == "asymptotic"
               else finite_key_rate(mu, p, ch, n, cfg.eps_total, cfg.f_ec))
    else:
        opt = optimize_point(ch, n, cfg.eps_total, cfg.f_ec, cfg.search(), mode)
        mu, p, res = opt.mu, opt.p_est, opt.result
    head = dict(mode=mode, loss_db=ch.loss_db, distance_km=ch.distance_km,
                n_windows=math.inf if mode == "asymptotic" else float(n), mu=float(mu), p_est=float(p))
    print("\n".join(_result_lines(res, **head)), file=out)
    return 0


def sweep_rows(cfg: RunConfig) -> list[list[str]]:
    rows = []
    grid = cfg.grid()
    for n in cfg.n or [1e13]:
        mode = "asymptotic" if (math.isinf(n) or cfg.mode == "asymptotic") else "finite"
        curve = rate_distance_curve(cfg.channel(0.0), grid, n, cfg.eps_total, cfg.f_ec,
                                    cfg.search(), mode)
        for pt in curve:
            r = pt.result
            rows.append([fmt(v) for v in (
                pt.loss_db, pt.loss_db / cfg.attenuation_db_per_km, pt.n_windows, pt.mu,
                pt.p_est, r.rate, r.key_length, r.e_bit, r.e_ph_bound, r.s_large, r.s_small)])
    return rows


def cmd_sweep(cfg: RunConfig, out) -> int:
    rows = sweep_rows(cfg)
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            _write_csv(fh, rows)
        print(f"wrote {len(rows)} rows to {cfg.out}", file=out)
    else:
        _write_csv(out, rows)
    return 0


def _write_csv(fh, rows):
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    w.writerows(rows)


def read_sweep_csv(path: str | Path) -> list[dict[str, float]]:
    with open(path, encoding="utf-8", newline="") as fh:
        return [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def _sim_config(cfg: RunConfig, loss_db: float | None = None) -> SimConfig:
    n = _single_n(cfg, 1e8)
    if math.isinf(n) or not float(n).is_integer():
        raise ConfigError(f"simulation needs an integer window count, got {n}")
    mu = 0.05 if cfg.mu is None else cfg.mu
    p_est = 0.1 if cfg.p_est is None else cfg.p_est
    proto = ProtocolParams(mu, p_est, int(n), cfg.f_ec, cfg.eps_total)
    return SimConfig(int(n), proto, cfg.channel(loss_db), cfg.seed, cfg.batch_size)


def cmd_simulate(cfg: RunConfig, out) -> int:
    sc = _sim_config(cfg)
    st = simulate(sc, workers=cfg.workers)
    p = sc.protocol
    rows = []
    for label, t in (("analytic", Tallies.expected(sc.channel, p)), ("simulated", tallies_to_engine(st))):
        cert = phase_error_bound(t, p)
        res = key_length(t, cert, p)
        rows.append((label, [t.n_sig, t.n_est_bit, t.n_sig_bit_err, res.e_bit, cert.ue_bit,
                             cert.cu_oo, cert.ue_oo, cert.term_bit, cert.term_cross, cert.term_oo,
                             cert.n_ph_bar, res.e_ph_bound, res.key_length, res.rate]))
    names = ["n_sig", "n_est_bit", "n_sig_bit_err", "e_bit", "ue_bit", "cu_oo", "ue_oo",
             "term_bit", "term_cross", "term_oo", "n_ph_bar", "e_ph_bound", "key_length", "rate"]
    print(f"loss_db: {fmt(sc.channel.loss_db)}  n_windows: {sc.n_windows}  mu: {fmt(p.mu)}  "
          f"p_est: {fmt(p.p_est)}  seed: {sc.seed}", file=out)
    print(f"clicks left/right/double/none: {st.n_left_clicks} {st.n_right_clicks} "
          f"{st.n_double_clicks} {st.n_no_click}", file=out)
    print(f"{'quantity':<14} {'analytic':>24} {'simulated':>24}", file=out)
    for i, name in enumerate(names):
        print(f"{name:<14} {fmt(rows[0][1][i]):>24} {fmt(rows[1][1][i]):>24}", file=out)
    return 0


def cmd_validate(cfg: RunConfig, out) -> int:
    losses = [cfg.resolved_loss()] if (cfg.loss_db is not None or cfg.distance_km is not None) \
        else list(VALIDATE_LOSSES)
    ok = True
    for loss in losses:
        sc = _sim_config(cfg, loss)
        zs = z_scores(simulate(sc, workers=cfg.workers), sc)
        for name, z in zs.items():
            passed = abs(z) <= cfg.z_max
            ok &= passed
            print(f"loss_db={loss:g} {name:<15} z={z:+.3f} {'PASS' if passed else 'FAIL'}", file=out)
    print("validation " + ("passed" if ok else "FAILED"), file=out)
    return 0 if ok else 2


def run(cfg: RunConfig, out=None) -> int:
    out = out or sys.stdout
    handler = {"rate": cmd_rate, "sweep": cmd_sweep,
               "simulate": cmd_simulate, "validate": cmd_validate}[cfg.command]
    return handler(cfg, out)


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = resolve_config(argv)
        return run(cfg)
    except ConfigError as exc:
        print(f"pcscs: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
