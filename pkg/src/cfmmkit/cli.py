"""Command-line front end: JSON scenarios in, CSV/JSON reports and figures out.

Exit codes: 0 success, 1 when a report contains a violated bound (so CI can
gate on the bound checks), 2 on configuration problems.  Identical config
and seed produce byte-identical delimited output.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import plotting, reporting
from .arbitrage import (
    no_arb_pair,
    normalize_orientation,
    series_process,
    simulate_rounds,
    walk_process,
)
from .curvature import curvature_bounds, kappa_closed_form, mu_closed_form
from .errors import CfmmKitError, ConfigError
from .games import GameSpec, GdaConfig, informed_edge, informed_edge_opt, lp_loss_bound, multiperiod_sim
from .greeks import greeks_two_asset
from .impact import FixedPriceImpact, PoolPriceImpact
from .incentives import SubsidyResult, subsidy_schedule, sufficient_subsidy, verify_subsidy
from .pools import KIND_CURVE, KIND_GEOMETRIC_MEAN, PoolState, marginal_price

CONFIG_VERSION = 1

# quote gaps this close to the bound count as satisfied; keeps the pass/fail
# column stable under root-solve rounding
BOUND_SLACK = 1e-9

_MISSING = object()


def _join(path: str, key) -> str:
    return f"{path}.{key}" if path else str(key)


def _get(cfg: dict, key: str, path: str, default=_MISSING):
    if not isinstance(cfg, dict):
        raise ConfigError(path, "expected an object")
    if key in cfg:
        return cfg[key]
    if default is _MISSING:
        raise ConfigError(_join(path, key), "missing required field")
    return default


def _number(value, path: str, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    v = float(value)
    if not math.isfinite(v):
        raise ConfigError(path, "must be finite")
    if positive and not v > 0.0:
        raise ConfigError(path, "must be positive")
    return v


def _integer(value, path: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(path, f"must be at least {minimum}")
    return value


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(str(path), f"invalid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(str(path), "top level must be a JSON object")
    version = _get(cfg, "version", "")
    if version != CONFIG_VERSION:
        raise ConfigError(
            "version", f"unsupported value {version!r}; this build reads {CONFIG_VERSION}"
        )
    return cfg


def dumps_config(cfg: dict) -> str:
    return json.dumps(cfg, indent=2) + "\n"


def build_pool(spec, path: str, pools: dict | None = None) -> PoolState:
    """Pool from an inline spec dict or a name in the config's pools table."""
    if isinstance(spec, str):
        if not pools or spec not in pools:
            raise ConfigError(path, f"references undefined pool {spec!r}")
        return build_pool(pools[spec], _join("pools", spec))
    if not isinstance(spec, dict):
        raise ConfigError(path, f"expected a pool spec or pool name, got {spec!r}")
    try:
        return PoolState.from_dict(spec)
    except (KeyError, TypeError, ValueError, CfmmKitError) as exc:
        raise ConfigError(path, f"invalid pool spec: {exc}") from exc


def _named_pools(cfg: dict) -> dict:
    pools = _get(cfg, "pools", "", default={})
    if not isinstance(pools, dict):
        raise ConfigError("pools", "expected an object of named pool specs")
    return pools


def _market(cfg: dict, key: str, pools: dict, allow_price: bool):
    """A pool, or (when allowed) a bare price for an infinitely liquid market."""
    spec = _get(cfg, key, "")
    if allow_price and isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return _number(spec, key, positive=True)
    return build_pool(spec, key, pools)


def sweep_values(spec, path: str, samples: int | None = None) -> list[float]:
    lo = _number(_get(spec, "lo", path), _join(path, "lo"))
    hi = _number(_get(spec, "hi", path), _join(path, "hi"))
    steps = _integer(_get(spec, "steps", path), _join(path, "steps"), minimum=0)
    if samples is not None:
        steps = samples
    if steps < 1:
        raise ConfigError(_join(path, "steps"), "sweep must have at least one point")
    spacing = _get(spec, "spacing", path, default="linear")
    if spacing == "linear":
        values = np.linspace(lo, hi, steps)
    elif spacing == "log":
        if lo <= 0.0 or hi <= 0.0:
            raise ConfigError(path, "log spacing needs positive endpoints")
        values = np.geomspace(lo, hi, steps)
    else:
        raise ConfigError(_join(path, "spacing"), f"unknown spacing {spacing!r}")
    return [float(v) for v in values]


def _seed_for(args, cfg: dict, required: bool) -> int | None:
    seed = args.seed if args.seed is not None else cfg.get("seed")
    if seed is None:
        if required:
            raise ConfigError("seed", "required for this command (field or --seed)")
        return None
    return _integer(seed, "seed", minimum=0)


def _figure_path(out: str) -> str:
    png = str(Path(out).with_suffix(".png"))
    if png == str(out):
        png = str(out) + "-figure.png"
    return png


# -- subcommands ----------------------------------------------------------------

SWEEPABLE = {
    "reserve_traded": None,
    "reserve_numeraire": None,
    "reserves": None,
    "tau": KIND_GEOMETRIC_MEAN,
    "alpha": KIND_CURVE,
    "beta": KIND_CURVE,
}


def _pool_with_parameter(base: dict, parameter: str, value: float, path: str) -> PoolState:
    spec = dict(base)
    spec["params"] = dict(spec.get("params") or {})
    if parameter == "reserves":
        spec["reserve_traded"] = value
        spec["reserve_numeraire"] = value
    elif parameter in ("reserve_traded", "reserve_numeraire"):
        spec[parameter] = value
    else:
        spec["params"][parameter] = value
    return build_pool(spec, path)


def cmd_curvature(cfg: dict, args) -> int:
    pool_spec = _get(cfg, "pool", "")
    if isinstance(pool_spec, str):
        name = pool_spec
        pool_spec = _named_pools(cfg).get(name)
        if pool_spec is None:
            raise ConfigError("pool", f"references undefined pool {name!r}")
    if not isinstance(pool_spec, dict):
        raise ConfigError("pool", "expected a pool spec")
    base = build_pool(pool_spec, "pool")
    sweep = _get(cfg, "sweep", "")
    parameter = _get(sweep, "parameter", "sweep")
    if parameter not in SWEEPABLE:
        raise ConfigError("sweep.parameter", f"cannot sweep {parameter!r}")
    needs = SWEEPABLE[parameter]
    if needs is not None and base.kind != needs:
        raise ConfigError(
            "sweep.parameter", f"{parameter!r} only applies to {needs} pools"
        )
    fraction = _number(
        _get(cfg, "interval_fraction", "", default=0.1), "interval_fraction", positive=True
    )

    rows = []
    for value in sweep_values(sweep, "sweep", args.samples):
        pool = _pool_with_parameter(pool_spec, parameter, value, "sweep")
        rows.append(
            {
                "parameter": value,
                "mu": mu_closed_form(pool).mu,
                "kappa": kappa_closed_form(pool, fraction * pool.reserve_traded).kappa,
            }
        )
    reporting.write_csv(args.out, ["parameter", "mu", "kappa"], rows)
    if not args.no_plot:
        log_x = _get(sweep, "spacing", "sweep", default="linear") == "log"
        plotting.plot_curvature_sweep(rows, _figure_path(args.out), parameter, log_x)
    return 0


def cmd_arb(cfg: dict, args) -> int:
    pools = _named_pools(cfg)
    scenarios = _get(cfg, "scenarios", "")
    if not isinstance(scenarios, list) or not scenarios:
        raise ConfigError("scenarios", "expected a nonempty list")
    rows = []
    failures = 0
    for i, scenario in enumerate(scenarios):
        path = f"scenarios[{i}]"
        external = _market(scenario, "external", pools, allow_price=True)
        secondary = _market(scenario, "secondary", pools, allow_price=False)
        f = FixedPriceImpact(external) if isinstance(external, float) else PoolPriceImpact(external)
        pair = normalize_orientation(f, PoolPriceImpact(secondary))
        result = no_arb_pair(pair)
        price_move = pair.m0_s - result.m_a
        ok = price_move <= result.bound + BOUND_SLACK
        failures += 0 if ok else 1
        rows.append(
            {
                "scenario": i,
                "m0_e": pair.m0_e,
                "m0_s": pair.m0_s,
                "m_a": result.m_a,
                "delta_star": result.delta_star,
                "price_move": price_move,
                "bound": result.bound,
                "status": "pass" if ok else "fail",
            }
        )
    reporting.write_csv(
        args.out,
        ["scenario", "m0_e", "m0_s", "m_a", "delta_star", "price_move", "bound", "status"],
        rows,
    )
    if not args.no_plot:
        plotting.plot_pair_report(rows, _figure_path(args.out))
    return 1 if failures else 0


def cmd_sim(cfg: dict, args) -> int:
    pools = _named_pools(cfg)
    external = _market(cfg, "external", pools, allow_price=True)
    secondary = _market(cfg, "secondary", pools, allow_price=False)
    rounds = _integer(_get(cfg, "rounds", ""), "rounds", minimum=0)
    if args.samples is not None:
        rounds = args.samples
    seed = _seed_for(args, cfg, required=True)

    proc_spec = _get(cfg, "process", "")
    kind = _get(proc_spec, "type", "process")
    if kind == "series":
        values = _get(proc_spec, "values", "process")
        if not isinstance(values, list) or len(values) < rounds:
            raise ConfigError("process.values", f"needs at least {rounds} price points")
        process = series_process(
            [_number(v, f"process.values[{j}]", positive=True) for j, v in enumerate(values)]
        )
    elif kind == "walk":
        sigma = _number(_get(proc_spec, "sigma", "process"), "process.sigma")
        if sigma < 0.0:
            raise ConfigError("process.sigma", "must be nonnegative")
        process = walk_process(sigma)
    else:
        raise ConfigError("process.type", f"unknown process {kind!r}")

    result = simulate_rounds(external, secondary, process, rounds, seed)
    rows = [r.to_dict() for r in result.rows]
    reporting.write_csv(
        args.out,
        ["round", "m0_e", "m0_s", "m_a", "delta_star", "bound", "pv_lp"],
        rows,
    )
    if not args.no_plot:
        plotting.plot_trajectory(rows, _figure_path(args.out))
    violated = any(r["m0_s"] - r["m_a"] > r["bound"] + BOUND_SLACK for r in rows)
    return 1 if violated else 0


def cmd_game(cfg: dict, args) -> int:
    pools = _named_pools(cfg)
    pool = _market(cfg, "pool", pools, allow_price=False)
    game = _get(cfg, "game", "")
    gamma = _number(_get(game, "gamma", "game", default=1.0), "game.gamma", positive=True)
    m0 = _get(game, "m0", "game", default=None)
    if m0 is None:
        m0 = gamma * marginal_price(pool, 0.0)
    try:
        spec = GameSpec(
            alpha=_number(_get(game, "alpha", "game"), "game.alpha"),
            m0=_number(m0, "game.m0", positive=True),
            m1=_number(_get(game, "m1", "game"), "game.m1", positive=True),
            gamma=gamma,
            interval_L=_number(
                _get(game, "interval_L", "game", default=1.0), "game.interval_L", positive=True
            ),
        )
    except CfmmKitError as exc:
        raise ConfigError("game", str(exc)) from exc

    g = PoolPriceImpact(pool)
    optimum = informed_edge_opt(spec, g)
    kappa = curvature_bounds(pool, spec.gamma * spec.interval_L).kappa
    payload = {
        "edge": spec.edge,
        "edge_optimum": optimum.to_dict(),
        "lp_loss_bound": lp_loss_bound(spec, kappa).to_dict() if kappa > 0.0 else None,
        "kappa": kappa,
        "multiperiod": None,
    }

    multi = _get(cfg, "multiperiod", "", default=None)
    if multi is not None:
        seed = _seed_for(args, cfg, required=True)
        alphas = _get(multi, "alphas", "multiperiod")
        targets = _get(multi, "price_targets", "multiperiod")
        if not isinstance(alphas, list) or not alphas:
            raise ConfigError("multiperiod.alphas", "expected a nonempty list")
        if not isinstance(targets, list) or len(targets) != len(alphas):
            raise ConfigError(
                "multiperiod.price_targets", "must match alphas in length"
            )
        gda_spec = _get(multi, "gda", "multiperiod", default={})
        gda = GdaConfig(
            target_price=1.0,
            tolerance=_number(
                _get(gda_spec, "tolerance", "multiperiod.gda", default=1e-8),
                "multiperiod.gda.tolerance",
                positive=True,
            ),
            max_steps=_integer(
                _get(gda_spec, "max_steps", "multiperiod.gda", default=10_000),
                "multiperiod.gda.max_steps",
                minimum=1,
            ),
        )
        result = multiperiod_sim(pool, alphas, targets, gda, seed=seed)
        payload["multiperiod"] = {
            "rows": [r.to_dict() for r in result.rows],
            "final": result.final.to_dict(),
        }

    reporting.write_json(args.out, payload)
    if not args.no_plot:
        lo, _ = g.domain
        cap = -lo * 0.9 / spec.gamma if math.isfinite(lo) else 10.0 * g.scale
        cap = min(cap, max(2.5 * optimum.delta_opt, spec.interval_L))
        deltas = np.linspace(0.0, cap, 160)
        values = [informed_edge(spec, g, float(d)) for d in deltas]
        plotting.plot_game_report(
            deltas, values, optimum, optimum.lower_bound, _figure_path(args.out)
        )
    return 0 if optimum.value >= optimum.lower_bound - BOUND_SLACK else 1


def _scaled_subsidy(sub: SubsidyResult, scale: float) -> SubsidyResult:
    return SubsidyResult(
        subsidy_numeraire=scale * sub.subsidy_numeraire,
        subsidy_traded=scale * sub.subsidy_traded,
        growth_h=sub.growth_h,
        ratio_mu_kappa=scale * sub.ratio_mu_kappa,
    )


def cmd_subsidy(cfg: dict, args) -> int:
    pools = _named_pools(cfg)
    schedule = _get(cfg, "schedule", "", default=None)
    if schedule is not None:
        specs = _get(schedule, "pools", "schedule")
        if not isinstance(specs, list) or len(specs) != 2:
            raise ConfigError("schedule.pools", "expected exactly two pools")
        pool1 = build_pool(specs[0], "schedule.pools[0]", pools)
        pool2 = build_pool(specs[1], "schedule.pools[1]", pools)
        trades = _get(schedule, "trades", "schedule")
        if not isinstance(trades, list) or not trades:
            raise ConfigError("schedule.trades", "expected a nonempty list")
        trades = [_number(t, f"schedule.trades[{j}]") for j, t in enumerate(trades)]
        rows = [r.to_dict() for r in subsidy_schedule(pool1, pool2, trades)]
        reporting.write_csv(args.out, ["t", "delta", "excess_loss", "cumulative"], rows)
        if not args.no_plot:
            plotting.plot_subsidy_schedule(rows, _figure_path(args.out))
        return 0

    if "external" not in cfg:
        raise ConfigError(
            "external", "subsidy needs a market pair (external/secondary) or a schedule"
        )
    external = _market(cfg, "external", pools, allow_price=True)
    secondary = _market(cfg, "secondary", pools, allow_price=False)
    f = FixedPriceImpact(external) if isinstance(external, float) else PoolPriceImpact(external)
    pair = normalize_orientation(f, PoolPriceImpact(secondary))
    scale = _number(
        _get(cfg, "subsidy_scale", "", default=1.0), "subsidy_scale"
    )
    if scale < 0.0:
        raise ConfigError("subsidy_scale", "must be nonnegative")
    subsidy = _scaled_subsidy(
        sufficient_subsidy(pair.mu, pair.kappa, pair.m0_s, pair.m0_e), scale
    )
    report = verify_subsidy(pair, subsidy)
    row = {
        "mu": pair.mu,
        "kappa": pair.kappa,
        "m0_e": pair.m0_e,
        "m0_s": pair.m0_s,
        "m_a": report.m_a,
        "delta_star": report.delta_star,
        "growth_h": subsidy.growth_h,
        "subsidy_numeraire": report.subsidy_numeraire,
        "subsidy_traded": subsidy.subsidy_traded,
        "realized_cost": report.realized_cost,
        "slack": report.slack,
        "status": "pass" if report.passed else "fail",
    }
    reporting.write_csv(args.out, list(row.keys()), [row])
    if not args.no_plot:
        plotting.plot_subsidy_pair(row, _figure_path(args.out))
    return 0 if report.passed else 1


def cmd_greeks(cfg: dict, args) -> int:
    pools = _named_pools(cfg)
    pool = _market(cfg, "pool", pools, allow_price=False)
    sweep = _get(cfg, "sweep", "", default=None)
    if sweep is not None:
        prices = sweep_values(sweep, "sweep", args.samples)
    else:
        prices = [_number(_get(cfg, "price", ""), "price", positive=True)]
    rows = []
    for m in prices:
        rep = greeks_two_asset(pool, m)
        rows.append(
            {"m": m, "p_v": rep.p_v, "p_delta": rep.p_delta, "p_gamma": rep.p_gamma}
        )
    reporting.write_csv(args.out, ["m", "p_v", "p_delta", "p_gamma"], rows)
    if not args.no_plot:
        plotting.plot_greeks_sweep(rows, _figure_path(args.out))
    return 0


COMMANDS = {
    "curvature": cmd_curvature,
    "arb": cmd_arb,
    "sim": cmd_sim,
    "game": cmd_game,
    "subsidy": cmd_subsidy,
    "greeks": cmd_greeks,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfmmkit",
        description="Curvature, arbitrage, game and sensitivity reports for CFMMs",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="scenario JSON")
        p.add_argument("--out", required=True, help="report path (CSV or JSON)")
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        p.add_argument(
            "--samples",
            type=int,
            default=None,
            help="overrides sweep steps (curvature, greeks) or rounds (sim)",
        )
        p.add_argument("--no-plot", action="store_true", help="skip the PNG figure")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CfmmKitError as exc:
        print(f"{args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
