"""Command-line front end: validation, boundaries, pricing, analytics, sweeps."""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, replace

import numpy as np

from .analytics import credit_spread, duration, risk_free_value
from .boundaries import BoundarySchedule, build_schedule
from .domain import BondSpec, MarketParams, validate
from .errors import ConfigError, PutBondError, UnknownFigure
from .fdoracle import GridSpec, solve_backward
from .mvncdf import MvnAccuracy
from .pricer import PriceQuery, degenerate_price, locate_subinterval, price_at

# Default run data: three annual coupons of 40 on a face of 1000, 3% short
# rate, no payout, unit volatility, half recovery.
_DEFAULT = {
    "bond": {"maturity_dates": [1.0, 2.0, 3.0], "coupons": [40.0, 40.0, 40.0],
             "face_value": 1000.0},
    "market": {"short_rate": 0.03, "payout_rate": 0.0, "volatility": 1.0, "recovery": 0.5},
    "accuracy": {"abs_tol": 1e-7, "max_points": 1 << 21, "seed": 1234},
    "grid": {"x_min": None, "x_max": None, "nx": 1601, "nt_per_interval": 400,
             "scheme": "crank_nicolson"},
    "outputs": ".",
}

_BOND_FIELDS = ("maturity_dates", "coupons", "face_value")


@dataclass(frozen=True)
class RunConfig:
    bond: BondSpec
    market: MarketParams
    accuracy: MvnAccuracy
    grid: GridSpec
    outputs: str

    def to_dict(self) -> dict:
        return {
            "bond": {
                "maturity_dates": list(self.bond.maturity_dates),
                "coupons": list(self.bond.coupons),
                "face_value": self.bond.face_value,
            },
            "market": asdict(self.market),
            "accuracy": asdict(self.accuracy),
            "grid": asdict(self.grid),
            "outputs": self.outputs,
        }


def _merge_section(name: str, data: dict) -> dict:
    base = dict(_DEFAULT[name])
    if name == "bond" and data:
        missing = [f for f in _BOND_FIELDS if f not in data]
        if missing:
            raise ConfigError(f"bond section missing field '{missing[0]}'")
    for key, value in data.items():
        if key not in base:
            raise ConfigError(f"unknown field '{key}' in section '{name}'")
        base[key] = value
    return base


def config_from_dict(raw: dict) -> RunConfig:
    known = {"bond", "market", "accuracy", "grid", "outputs"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config section '{sorted(unknown)[0]}'")
    merged = {
        name: _merge_section(name, raw.get(name, {})) for name in ("bond", "market",
                                                                   "accuracy", "grid")
    }
    try:
        bond = BondSpec(
            maturity_dates=tuple(merged["bond"]["maturity_dates"]),
            coupons=tuple(merged["bond"]["coupons"]),
            face_value=merged["bond"]["face_value"],
        )
        market = MarketParams(**merged["market"])
        accuracy = MvnAccuracy(**merged["accuracy"])
        grid = GridSpec(**merged["grid"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(
        bond=bond,
        market=market,
        accuracy=accuracy,
        grid=grid,
        outputs=str(raw.get("outputs", _DEFAULT["outputs"])),
    )


def load_config(path: str | None, overrides: list[str] | None = None,
                seed: int | None = None, out: str | None = None) -> RunConfig:
    """File -> --set overrides -> shorthand flags, later wins."""
    raw: dict = {}
    if path:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
    for item in overrides or []:
        raw = _apply_override(raw, item)
    if seed is not None:
        raw.setdefault("accuracy", {})
        if isinstance(raw["accuracy"], dict):
            raw["accuracy"]["seed"] = seed
    if out is not None:
        raw["outputs"] = out
    return config_from_dict(raw)


def _apply_override(raw: dict, item: str) -> dict:
    if "=" not in item:
        raise ConfigError(f"override must look like section.field=value: {item}")
    key, text = item.split("=", 1)
    parts = key.strip().split(".")
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        if "," in text:
            try:
                value = [float(x) for x in text.split(",") if x.strip()]
            except ValueError as exc:
                raise ConfigError(f"cannot parse override value: {item}") from exc
        else:
            value = text
    if len(parts) == 1:
        raw[parts[0]] = value
    elif len(parts) == 2:
        section = raw.setdefault(parts[0], {})
        if not isinstance(section, dict):
            raise ConfigError(f"cannot override inside non-object section: {parts[0]}")
        section[parts[1]] = value
    else:
        raise ConfigError(f"override key too deep: {key}")
    return raw


def _fmt(x) -> str:
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return f"{x:.10g}"


def write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_validate(cfg: RunConfig) -> int:
    report = validate(cfg.bond, cfg.market)
    print(f"coupon_condition_holds: {report.coupon_condition_holds}")
    print(f"coupon_condition_margin: {_fmt(report.coupon_condition_margin)}")
    print(f"volatility_condition_holds: {report.volatility_condition_holds}")
    print("gradient_cap_sequence: " + ",".join(_fmt(d) for d in report.gradient_cap_sequence))
    print(f"last_redeemable_index: {report.last_redeemable_index}")
    for w in report.warnings:
        print(f"warning: {w}")
    if not report.coupon_condition_holds:
        print("advice: price with the zero-coupon fallback (degenerate bond)")
    if cfg.outputs:
        os.makedirs(cfg.outputs, exist_ok=True)
        payload = {
            "coupon_condition_holds": report.coupon_condition_holds,
            "coupon_condition_margin": report.coupon_condition_margin,
            "volatility_condition_holds": report.volatility_condition_holds,
            "gradient_cap_sequence": list(report.gradient_cap_sequence),
            "last_redeemable_index": report.last_redeemable_index,
            "warnings": list(report.warnings),
        }
        with open(os.path.join(cfg.outputs, "validation.json"), "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def cmd_boundaries(cfg: RunConfig) -> int:
    sched = build_schedule(cfg.bond, cfg.market, cfg.accuracy)
    print(f"degenerate: {sched.degenerate}")
    print(f"last_redeemable_index: {sched.last_redeemable_index}")
    print("default_boundaries: " + ",".join(_fmt(x) for x in sched.default_boundaries))
    print("redemption_boundaries: " + ",".join(_fmt(x) for x in sched.redemption_boundaries))
    print("upper_boundaries: " + ",".join(_fmt(x) for x in sched.upper_boundaries))
    print("lower_boundaries: " + ",".join(_fmt(x) for x in sched.lower_boundaries))
    print("redemption_active: " + ",".join(str(b) for b in sched.redemption_active))
    for w in sched.warnings:
        print(f"warning: {w}")
    if cfg.outputs:
        os.makedirs(cfg.outputs, exist_ok=True)
        payload = {
            "degenerate": sched.degenerate,
            "last_redeemable_index": sched.last_redeemable_index,
            "default_boundaries": list(sched.default_boundaries),
            "redemption_boundaries": list(sched.redemption_boundaries),
            "upper_boundaries": list(sched.upper_boundaries),
            "lower_boundaries": list(sched.lower_boundaries),
            "redemption_active": list(sched.redemption_active),
            "warnings": list(sched.warnings),
        }
        with open(os.path.join(cfg.outputs, "boundaries.json"), "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def _analytic_price(cfg: RunConfig, V: float, t: float):
    report = validate(cfg.bond, cfg.market)
    if not report.coupon_condition_holds:
        value = degenerate_price(V, t, cfg.bond, cfg.market, cfg.accuracy)
        return value, None
    sched = build_schedule(cfg.bond, cfg.market, cfg.accuracy)
    return price_at(PriceQuery(V, t), cfg.bond, cfg.market, sched, cfg.accuracy), sched


def cmd_price(cfg: RunConfig, V: float, t: float, engine: str) -> int:
    if V == 0.0:
        print("price: 0")
        return 0
    analytic_val = None
    if engine in ("analytic", "both"):
        result, _ = _analytic_price(cfg, V, t)
        if isinstance(result, float):
            analytic_val = result
            print(f"price_analytic: {_fmt(result)} (degenerate zero-coupon form)")
        else:
            analytic_val = result.price
            print(f"price_analytic: {_fmt(result.price)}")
            print(f"  coupon_leg: {_fmt(result.coupon_leg)}")
            print(f"  recovery_leg: {_fmt(result.recovery_leg)}")
            print(f"  redemption_leg: {_fmt(result.redemption_leg)}")
            for w in result.warnings:
                print(f"warning: {w}")
    if engine in ("fd", "both"):
        sol = solve_backward(cfg.bond, cfg.market, cfg.grid)
        fd_val = sol.price(V, t)
        print(f"price_fd: {_fmt(fd_val)}")
        if engine == "both" and analytic_val:
            print(f"relative_gap: {_fmt(analytic_val / fd_val - 1.0)}")
    return 0


def cmd_duration(cfg: RunConfig, V: float, full_sensitivity: bool) -> int:
    sched = build_schedule(cfg.bond, cfg.market, cfg.accuracy)
    value = duration(V, cfg.bond, cfg.market, sched, cfg.accuracy,
                     full_sensitivity=full_sensitivity)
    label = "duration_full_sensitivity" if full_sensitivity else "duration"
    print(f"{label}: {_fmt(value)}")
    return 0


def cmd_spread(cfg: RunConfig, V: float, t: float) -> int:
    sched = build_schedule(cfg.bond, cfg.market, cfg.accuracy)
    i = locate_subinterval(cfg.bond, t)
    value = credit_spread(i, V, t, cfg.bond, cfg.market, sched, cfg.accuracy)
    print(f"credit_spread: {_fmt(value)}")
    print(f"risk_free_reference: {_fmt(risk_free_value(i, t, cfg.bond, cfg.market))}")
    return 0


# ---------------------------------------------------------------------------
# figure sweeps
# ---------------------------------------------------------------------------


def _time_grid(cfg: RunConfig, tstep: float, include_maturity: bool) -> np.ndarray:
    horizon = cfg.bond.maturity
    n = int(round(horizon / tstep))
    grid = np.linspace(0.0, horizon, n + 1)
    return grid if include_maturity else grid[:-1]


def _value_grid(vstep: float, v_max: float = 16000.0) -> np.ndarray:
    n = int(round(v_max / vstep))
    return np.linspace(0.0, v_max, n + 1)


def _boundary_figure(cfg: RunConfig, date_index: int, vstep: float):
    sched = build_schedule(cfg.bond, cfg.market, cfg.accuracy)
    v = _value_grid(vstep)
    t = cfg.bond.maturity_dates[date_index]
    keep = price_at(
        PriceQuery(v, t, subinterval=date_index + 1), cfg.bond, cfg.market, sched, cfg.accuracy
    ).price + cfg.bond.coupons[date_index]
    redeem = np.full_like(v, cfg.bond.face_value - sum(cfg.bond.coupons[:date_index]))
    best = np.maximum(keep, redeem)
    header = ["V", "keep_value", "redeem_value", "max_value", "identity"]
    rows = zip(v, keep, redeem, best, v)
    return header, rows


def _price_slices_figure(cfg: RunConfig, subinterval: int, times, vstep: float):
    sched = build_schedule(cfg.bond, cfg.market, cfg.accuracy)
    v = _value_grid(vstep)
    columns = [
        price_at(PriceQuery(v, t, subinterval=subinterval), cfg.bond, cfg.market, sched,
                 cfg.accuracy).price
        for t in times
    ]
    header = ["V"] + [f"B_t{t:g}" for t in times]
    rows = zip(v, *columns)
    return header, rows


def _price_paths_figure(cfg: RunConfig, firm_values, tstep: float):
    sched = build_schedule(cfg.bond, cfg.market, cfg.accuracy)
    tgrid = _time_grid(cfg, tstep, include_maturity=True)
    v = np.asarray(firm_values, dtype=float)
    rows = []
    for t in tgrid:
        res = price_at(PriceQuery(v, t), cfg.bond, cfg.market, sched, cfg.accuracy)
        rows.append([t] + list(np.atleast_1d(res.price)))
    header = ["t"] + [f"B_V{int(x)}" for x in firm_values]
    return header, rows


def _redemption_vs_coupon_figure(cfg: RunConfig, date_index: int):
    from .domain import check_coupon_lower_bound
    from .errors import BracketFailure, MultipleRoots

    header = ["C", "coupon_condition_margin", "redemption_boundary"]
    rows = []
    for c in range(20, 101, 10):
        coupons = tuple(float(c) for _ in cfg.bond.coupons)
        bond = replace(cfg.bond, coupons=coupons)
        _, margin = check_coupon_lower_bound(bond, cfg.market)
        try:
            sched = build_schedule(bond, cfg.market, cfg.accuracy)
            if sched.degenerate or date_index >= sched.last_redeemable_index:
                value = math.nan
            else:
                value = sched.redemption_boundaries[date_index]
        except (BracketFailure, MultipleRoots):
            value = math.nan
        rows.append([float(c), margin, value])
    return header, rows


def _price_vs_coupon_figure(cfg: RunConfig, firm_value: float, coupons, tstep: float):
    tgrid = _time_grid(cfg, tstep, include_maturity=True)
    columns = []
    for c in coupons:
        bond = replace(cfg.bond, coupons=tuple(float(c) for _ in cfg.bond.coupons))
        sched = build_schedule(bond, cfg.market, cfg.accuracy)
        columns.append([
            float(np.atleast_1d(
                price_at(PriceQuery(firm_value, t), bond, cfg.market, sched,
                         cfg.accuracy).price
            )[0])
            for t in tgrid
        ])
    header = ["t"] + [f"B_C{int(c)}" for c in coupons]
    rows = [[t] + [col[k] for col in columns] for k, t in enumerate(tgrid)]
    return header, rows


def _spread_figure(cfg: RunConfig, tstep: float, variants, label: str):
    tgrid = _time_grid(cfg, tstep, include_maturity=False)
    columns = []
    for name, bond, mkt, firm in variants:
        sched = build_schedule(bond, mkt, cfg.accuracy)
        col = []
        for t in tgrid:
            i = locate_subinterval(bond, t)
            col.append(credit_spread(i, firm, t, bond, mkt, sched, cfg.accuracy))
        columns.append((name, col))
    header = ["t"] + [f"CS_{label}{name}" for name, _ in columns]
    rows = [[t] + [col[k] for _, col in columns] for k, t in enumerate(tgrid)]
    return header, rows


def _figure_table(cfg: RunConfig, figure: str, tstep: float, vstep: float):
    bond, mkt = cfg.bond, cfg.market
    if figure == "fig4":
        return _boundary_figure(cfg, 0, vstep)
    if figure == "fig5":
        return _boundary_figure(cfg, 1, vstep)
    if figure == "fig6":
        return _price_slices_figure(cfg, 0, [0.0, 0.25, 0.5, 0.75, 1.0], vstep)
    if figure == "fig7":
        return _price_slices_figure(cfg, 1, [1.0, 1.25, 1.5, 1.75, 2.0], vstep)
    if figure == "fig8":
        return _price_slices_figure(cfg, 2, [2.0, 2.25, 2.5, 2.75, 3.0], vstep)
    if figure == "fig9":
        return _price_paths_figure(cfg, (5000.0, 10000.0, 15000.0), tstep)
    if figure == "fig10":
        return _redemption_vs_coupon_figure(cfg, 0)
    if figure == "fig11":
        return _redemption_vs_coupon_figure(cfg, 1)
    if figure == "fig12":
        return _price_vs_coupon_figure(cfg, 10000.0, (80.0, 90.0, 100.0), tstep)
    if figure == "fig13":
        variants = [(str(int(v)), bond, mkt, float(v)) for v in (5000, 10000, 15000)]
        return _spread_figure(cfg, tstep, variants, "V")
    if figure == "fig14":
        variants = [
            (f"{s:g}", bond, replace(mkt, volatility=s), 10000.0) for s in (0.5, 1.0, 1.2)
        ]
        return _spread_figure(cfg, tstep, variants, "sv")
    if figure == "fig15":
        variants = [
            (f"{d:g}", bond, replace(mkt, recovery=d), 10000.0) for d in (0.3, 0.5, 0.8)
        ]
        return _spread_figure(cfg, tstep, variants, "delta")
    if figure == "fig16":
        variants = [
            (str(int(c)), replace(bond, coupons=tuple(float(c) for _ in bond.coupons)),
             mkt, 10000.0)
            for c in (30, 40, 50)
        ]
        return _spread_figure(cfg, tstep, variants, "C")
    raise UnknownFigure(f"unknown figure id: {figure}")


def cmd_sweep(cfg: RunConfig, figure: str, tstep: float, vstep: float) -> int:
    header, rows = _figure_table(cfg, figure, tstep, vstep)
    os.makedirs(cfg.outputs or ".", exist_ok=True)
    path = os.path.join(cfg.outputs or ".", f"{figure}.csv")
    write_csv(path, header, rows)
    print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="putbond",
        description="Structural pricing engine for discrete-coupon bonds "
                    "with an early-redemption provision.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration")
    common.add_argument("--set", dest="overrides", action="append", metavar="KEY=VALUE",
                        help="override a config field, e.g. market.volatility=1.2")
    common.add_argument("--seed", type=int, help="integrator seed override")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--emit-config", metavar="PATH",
                        help="write the effective config JSON before running")

    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="design-parameter checks")
    sub.add_parser("boundaries", parents=[common], help="solve the boundary schedule")

    p_price = sub.add_parser("price", parents=[common], help="price at one point")
    p_price.add_argument("--v", type=float, required=True, help="firm value")
    p_price.add_argument("--t", type=float, required=True, help="valuation time (years)")
    p_price.add_argument("--engine", choices=("analytic", "fd", "both"), default="analytic")

    p_dur = sub.add_parser("duration", parents=[common], help="rate sensitivity at t=0")
    p_dur.add_argument("--v", type=float, required=True, help="initial firm value")
    p_dur.add_argument("--full-sensitivity", action="store_true",
                       help="re-solve boundaries under the rate bump")

    p_spread = sub.add_parser("spread", parents=[common], help="credit spread at one point")
    p_spread.add_argument("--v", type=float, required=True, help="firm value")
    p_spread.add_argument("--t", type=float, required=True, help="valuation time (years)")

    p_sweep = sub.add_parser("sweep", parents=[common], help="emit a figure CSV")
    p_sweep.add_argument("--figure", required=True, metavar="figN",
                         help="figure id, fig4..fig16")
    p_sweep.add_argument("--tstep", type=float, default=0.05, help="time grid step")
    p_sweep.add_argument("--vstep", type=float, default=50.0, help="firm value grid step")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides, args.seed, args.out)
        if args.emit_config:
            with open(args.emit_config, "w", encoding="utf-8") as fh:
                json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
                fh.write("\n")
        if args.command == "validate":
            return cmd_validate(cfg)
        if args.command == "boundaries":
            return cmd_boundaries(cfg)
        if args.command == "price":
            return cmd_price(cfg, args.v, args.t, args.engine)
        if args.command == "duration":
            return cmd_duration(cfg, args.v, args.full_sensitivity)
        if args.command == "spread":
            return cmd_spread(cfg, args.v, args.t)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.figure, args.tstep, args.vstep)
        raise ConfigError(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except PutBondError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
