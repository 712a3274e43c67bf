"""Command-line experiment runner: single points, sweeps, simulation, verification.

Rates are written in bits per channel use unless ``--nats`` is given.
Exit codes: 0 success, 2 configuration error, 3 a verification check failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from ._backend import BACKEND, available_backends, get_kernels
from .bounds import (CASE3, SearchConfig, eve_leakage, eve_leakage_binary, lower_bound,
                     mac_decodability_check, upper_bound)
from .hd_benchmark import hd_power, hd_power_residual, hd_secrecy_rate
from .inputs import EtInputDistribution
from .model import (Channel, ConfigError, FadingGrid, RunConfig, SystemParams, db_to_linear,
                    dbm_to_watts, load_config)
from .numerics import LN2, cal_I, binary_deficit
from .power_policy import PowerPolicy, ehu_power_residual, solve_ehu_power
from .protocol_sim import SimConfig, simulate, slack_policy

SWEEP_VARIABLES = ("p_et_dbm", "alpha1_db", "qbar1_db", "eta", "d_ehu_eve")
OUTPUTS = ("upper", "lower", "hd", "sim")
RATE_COLUMNS = ("c_s_upper", "c_s_lower", "hd_rate")


@dataclass(frozen=True)
class SweepSpec:
    variable: str
    values: tuple
    outputs: frozenset = frozenset({"upper", "lower", "hd"})

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ConfigError(f"unknown sweep variable {self.variable!r}; "
                              f"expected one of {', '.join(SWEEP_VARIABLES)}")
        if len(self.values) == 0:
            raise ConfigError("sweep needs at least one value")
        bad = set(self.outputs) - set(OUTPUTS)
        if bad:
            raise ConfigError(f"unknown sweep outputs {sorted(bad)}")


def apply_variable(params: SystemParams, variable, value):
    """Copy of ``params`` with one sweep variable set (dB/dBm converted)."""
    value = float(value)
    if variable == "p_et_dbm":
        return params.with_(p_et=dbm_to_watts(value))
    if variable == "alpha1_db":
        return params.with_(alpha1=db_to_linear(value))
    if variable == "qbar1_db":
        return params.with_(qbar1=math.sqrt(db_to_linear(value)))
    if variable == "eta":
        return params.with_(eta=value)
    if variable == "d_ehu_eve":
        return params.with_(d_ehu_eve=value)
    raise ConfigError(f"unknown sweep variable {variable!r}")


@dataclass
class RunSettings:
    """Everything a worker needs to evaluate one point."""

    n_fading_points: int = 64
    seed: int = 0
    printed: bool = False
    search: SearchConfig = field(default_factory=SearchConfig)
    sim_slots: int = 20000
    sim_k: int = 10
    sim_burn_in: int = 1000
    sim_initial_battery: float = 0.0
    sim_slack: float = 0.0

    @classmethod
    def from_config(cls, run: RunConfig, **overrides):
        ex = run.extra
        search = SearchConfig(
            j_max=int(ex.get("search_jmax", SearchConfig.j_max)),
            n_levels=int(ex.get("search_levels", SearchConfig.n_levels)),
            extra_levels=int(ex.get("search_extra_levels", SearchConfig.extra_levels)),
            screen_points=int(ex.get("search_screen_points", SearchConfig.screen_points)),
            top_k=int(ex.get("search_top_k", SearchConfig.top_k)))
        s = cls(n_fading_points=run.n_fading_points, seed=run.seed,
                printed=ex.get("printed_formulas", "0").lower() in ("1", "true", "yes"),
                search=search,
                sim_slots=int(float(ex.get("sim_slots", cls.sim_slots))),
                sim_k=int(float(ex.get("sim_k", cls.sim_k))),
                sim_burn_in=int(float(ex.get("sim_burn_in", cls.sim_burn_in))),
                sim_initial_battery=float(ex.get("sim_initial_battery", cls.sim_initial_battery)),
                sim_slack=float(ex.get("sim_slack", cls.sim_slack)))
        for k, v in overrides.items():
            if v is not None:
                setattr(s, k, v)
        return s

    def grid(self, params):
        g = FadingGrid.from_params(params, self.n_fading_points)
        return g.printed_compat() if self.printed else g


def evaluate_point(params: SystemParams, settings: RunSettings, outputs=frozenset(OUTPUTS)):
    """All requested quantities at one parameter point, in nats.

    Returns a dict with the rate columns, ``case_label``,
    ``sim_fraction_active`` and the MAC diagnostics of the lower bound.
    """
    grid = settings.grid(params)
    row = {"c_s_upper": math.nan, "c_s_lower": math.nan, "case_label": "",
           "hd_rate": math.nan, "sim_fraction_active": math.nan}
    lower = None
    if outputs & {"lower", "upper", "sim"}:
        lower = lower_bound(params, grid)
        res, dist, pol = lower
        row["case_label"] = res.case_label
        if "lower" in outputs:
            row["c_s_lower"] = res.c_s_lower
        if res.case_label != CASE3 and dist.is_binary():
            row["mac"] = mac_decodability_check(dist, pol, params, grid).as_dict()
    if "upper" in outputs:
        row["c_s_upper"] = upper_bound(params, grid, settings.search, lower=lower)[0].c_s_upper
        if "lower" in outputs:
            # the lower-bound input is inside the search space
            row["c_s_upper"] = max(row["c_s_upper"], row["c_s_lower"])
    if "hd" in outputs:
        row["hd_rate"] = hd_secrecy_rate(params, grid, printed=settings.printed, strict=False)[0]
    if "sim" in outputs and lower is not None and lower[0].diagnostics.get("feasible", True) \
            and math.isfinite(lower[2].lambda2):
        res, dist, pol = lower
        if settings.sim_slack > 0:
            pol = slack_policy(dist, params, grid, settings.sim_slack)
        cfg = SimConfig(settings.sim_slots, settings.sim_k, settings.sim_initial_battery, pol,
                        dist, settings.seed, settings.sim_burn_in,
                        secrecy_rate=res.c_s_lower)
        row["sim_fraction_active"] = simulate(cfg, params, grid).fraction_active
    return row


def _sweep_row(args):
    params, settings, outputs, variable, value = args
    t0 = time.perf_counter()
    row = {"variable": variable, "value": value}
    try:
        row.update(evaluate_point(apply_variable(params, variable, value), settings, outputs))
        row["error"] = ""
    except Exception as exc:  # isolate the row, keep the sweep going
        row.update({"c_s_upper": math.nan, "c_s_lower": math.nan, "case_label": "",
                    "hd_rate": math.nan, "sim_fraction_active": math.nan,
                    "error": f"{type(exc).__name__}: {exc}"})
    row["runtime_ms"] = 1e3 * (time.perf_counter() - t0)
    return row


def sweep_rows(params, settings, sweep: SweepSpec, jobs=1):
    """Evaluate every sweep value; rows come back in sweep order."""
    tasks = [(params, settings, frozenset(sweep.outputs), sweep.variable, v) for v in sweep.values]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_sweep_row, tasks))
    return [_sweep_row(t) for t in tasks]


def _fmt(x):
    if isinstance(x, str):
        return x
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return repr(float(x))


def write_rows(rows, fh, nats=False):
    unit = "nats" if nats else "bits"
    scale = 1.0 if nats else 1.0 / LN2
    cols = ["variable", "value", f"c_s_upper_{unit}", f"c_s_lower_{unit}", "case_label",
            f"hd_rate_{unit}", "sim_fraction_active", "runtime_ms", "error"]
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([r["variable"], _fmt(r["value"]), _fmt(r["c_s_upper"] * scale),
                    _fmt(r["c_s_lower"] * scale), r["case_label"], _fmt(r["hd_rate"] * scale),
                    _fmt(r["sim_fraction_active"]), f"{r['runtime_ms']:.1f}", r["error"]])


def run_sweep(config_path, sweep: SweepSpec, out_path=None, nats=False, jobs=1, **overrides):
    """Load a config, run a sweep and write the CSV (stdout when ``out_path`` is None)."""
    run = load_config(config_path)
    settings = RunSettings.from_config(run, **overrides)
    rows = sweep_rows(run.params, settings, sweep, jobs)
    if out_path is None:
        write_rows(rows, sys.stdout, nats)
    else:
        with open(out_path, "w", newline="") as fh:
            write_rows(rows, fh, nats)
    return rows


# ---------------------------------------------------------------- verify

def _check(name, passed, residual, tol, **detail):
    return {"name": name, "passed": bool(passed), "residual": float(residual),
            "tolerance": float(tol), **detail}


def verify(config_path, n_fading_points=8, seed=0, n_draws=40):
    """Run the invariant suites on a config; returns a JSON-able report."""
    run = load_config(config_path)
    params = run.params
    rng = np.random.default_rng(seed)
    settings = RunSettings.from_config(run, n_fading_points=n_fading_points, seed=seed)
    grid = settings.grid(params)
    checks = []

    def guarded(name, fn):
        try:
            checks.append(fn())
        except Exception as exc:
            checks.append(_check(name, False, math.inf, 0.0,
                                 error=f"{type(exc).__name__}: {exc}"))

    def cal_i_props():
        a = np.linspace(0.0, 8.0, 50)
        d = binary_deficit(a)
        worst = abs(cal_I(6.0) - (36.0 - LN2))
        ok = cal_I(0.0) == 0.0 and d.min() >= 0 and d.max() <= LN2 \
            and abs(cal_I(6.0) - (36.0 - LN2)) <= 1e-5
        return _check("deficit_function_properties", ok, worst, 1e-5)

    def leakage_oracle():
        worst = 0.0
        for _ in range(n_draws):
            n_v = 3
            dist = EtInputDistribution.binary(np.sqrt(rng.uniform(0.1, 3.0, n_v) * params.p_et), n_v)
            # P_EHU depends on x2 only through x2^2, so both signs share a power
            pol = PowerPolicy(np.repeat(rng.uniform(0, 5e-9, (n_v, 1)), 2, axis=1), 0.0, 1.0)
            g = FadingGrid(Channel.rayleigh(params.omega_v, n_v),
                           Channel.rayleigh(params.omega_f * rng.uniform(0.1, 10), 3),
                           Channel.rayleigh(params.omega_g * rng.uniform(0.1, 10), 3))
            worst = max(worst, abs(eve_leakage(dist, pol, params, g)
                                   - eve_leakage_binary(dist, pol, params, g)))
        return _check("leakage_integral_vs_closed_form", worst <= 1e-6, worst, 1e-6)

    def fd_roots():
        worst = 0.0
        for _ in range(n_draws):
            v2 = rng.exponential(params.omega_v)
            x2 = rng.uniform(0, 3) * params.p_et
            # multiplier below the switch-off point so the root is positive
            c = v2 / (params.sigma2_sq + x2 * params.alpha2)
            lam = c * 10 ** rng.uniform(-6, -0.05) / (1.0 - params.recycle)
            p = solve_ehu_power(x2, v2, lam, params, grid.f)
            r, s = ehu_power_residual(p, x2, v2, lam, params, grid.f)
            worst = max(worst, abs(r) / s if p > 0 else 0.0)
        return _check("ehu_power_root_residual", worst <= 1e-9, worst, 1e-9)

    def hd_roots():
        worst = 0.0
        for _ in range(n_draws):
            v2 = rng.exponential(params.omega_v)
            lam = v2 / params.sigma1_sq * 10 ** rng.uniform(-6, -0.05)
            p = hd_power(v2, lam, params, grid.f)
            r, s = hd_power_residual(p, v2, lam, params, grid.f)
            worst = max(worst, abs(r) / s if p > 0 else 0.0)
        return _check("hd_power_root_residual", worst <= 1e-9, worst, 1e-9)

    lower = []

    def c2_and_budget():
        res, dist, pol = lower_bound(params, grid)
        lower.append((res, dist, pol))
        if not res.diagnostics.get("feasible", True):
            return _check("energy_balance_and_budget", True, 0.0, 1e-9, note="infeasible point")
        h = params.eta * params.p_et * grid.v.mean
        c2 = abs(pol.c2_residual) / max(h, 1e-300)
        budget = abs(dist.power(grid.v.probs) - params.p_et) / params.p_et
        ok = c2 <= 1e-9 and budget <= 1e-6
        return _check("energy_balance_and_budget", ok, max(c2, budget), 1e-9,
                      c2_relative=c2, budget_relative=budget, case=res.case_label)

    def ordering(printed):
        s = RunSettings.from_config(run, n_fading_points=n_fading_points, seed=seed,
                                    printed=printed)
        row = evaluate_point(params, s, frozenset({"upper", "lower", "hd"}))
        gap = row["c_s_lower"] - row["c_s_upper"]
        ok = gap <= 1e-6 and min(row["c_s_lower"], row["c_s_upper"], row["hd_rate"]) >= 0
        return _check(f"bound_ordering{'_printed' if printed else ''}", ok, max(gap, 0.0), 1e-6,
                      c_s_upper=row["c_s_upper"], c_s_lower=row["c_s_lower"],
                      hd_rate=row["hd_rate"])

    def mac():
        res, dist, pol = lower[0] if lower else lower_bound(params, grid)
        if res.case_label == CASE3 or not dist.is_binary():
            return _check("mac_decodability", True, 0.0, 0.0, note="no binary solution")
        d = mac_decodability_check(dist, pol, params, grid).as_dict()
        ok = d["r_et_bits"] == 1.0 and d["et_secure"] and d["ehu_secure"]
        return _check("mac_decodability", ok, d["i_x2_y3_bits"], 1.0, **d)

    def sim_causality():
        res, dist, pol = lower[0] if lower else lower_bound(params, grid)
        if not math.isfinite(pol.lambda2):
            return _check("battery_causality", True, 0.0, 0.0, note="no transmit policy")
        tr = simulate(SimConfig(5000, 5, 0.0, pol, dist, seed), params, grid)
        spent = np.cumsum(tr.e_out)
        got = np.cumsum(tr.e_in)
        worst = float(np.max(spent - got - 0.0))
        ok = tr.battery_before.min() >= 0 and worst <= 1e-12 * max(got[-1], 1e-300)
        return _check("battery_causality", ok, max(worst, 0.0), 0.0)

    def backend_parity():
        names = available_backends()
        if len(names) < 2:
            return _check("backend_parity", True, 0.0, 1e-12, note="only one backend")
        mu = rng.normal(size=4)
        pr = np.full(4, 0.25)
        var = rng.uniform(0.2, 2.0, 4)
        vals = [get_kernels(n).mixture_entropy(mu, pr, var, 1e-13)[0] for n in names]
        d = abs(vals[0] - vals[1])
        return _check("backend_parity", d <= 1e-12, d, 1e-12, backends=names)

    guarded("deficit_function_properties", cal_i_props)
    guarded("leakage_integral_vs_closed_form", leakage_oracle)
    guarded("ehu_power_root_residual", fd_roots)
    guarded("hd_power_root_residual", hd_roots)
    guarded("energy_balance_and_budget", c2_and_budget)
    guarded("bound_ordering", lambda: ordering(False))
    guarded("bound_ordering_printed", lambda: ordering(True))
    guarded("mac_decodability", mac)
    guarded("battery_causality", sim_causality)
    guarded("backend_parity", backend_parity)
    return {"config": str(config_path), "backend": BACKEND, "version": __version__,
            "passed": all(c["passed"] for c in checks), "checks": checks}


# ---------------------------------------------------------------- argument parsing

def _values(text):
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if tok:
            out.append(float(tok))
    return tuple(out)


def _build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="key = value config file")
    common.add_argument("--out", help="output file (default stdout)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--fading-points", type=int, help="quantisation points per channel")
    common.add_argument("--printed-formulas", action="store_true",
                        help="G = 1 at EVE and full-log HD leakage, as typeset")
    common.add_argument("--nats", action="store_true", help="report rates in nats")

    ap = argparse.ArgumentParser(prog="fdsecrecy", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)

    b = sub.add_parser("bounds", parents=[common], help="bounds and HD rate at one point")
    b.add_argument("--outputs", default="upper,lower,hd,sim")

    s = sub.add_parser("sweep", parents=[common], help="sweep one variable, CSV out")
    s.add_argument("--variable", choices=SWEEP_VARIABLES)
    s.add_argument("--values", help="comma-separated values (-inf allowed for p_et_dbm)")
    s.add_argument("--outputs", help="subset of upper,lower,hd,sim")
    s.add_argument("--jobs", type=int, default=1, help="worker processes")

    m = sub.add_parser("simulate", parents=[common], help="battery/protocol simulation")
    m.add_argument("--slots", type=int)
    m.add_argument("--k", type=int)
    m.add_argument("--burn-in", type=int)
    m.add_argument("--initial-battery", type=float)
    m.add_argument("--slack", type=float)
    m.add_argument("--trace", help="write the per-slot trace CSV here")

    sub.add_parser("verify", parents=[common], help="run the invariant suites, JSON report")
    return ap


def _emit(text, out):
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        run = load_config(args.config)
        settings = RunSettings.from_config(run, seed=args.seed,
                                           n_fading_points=args.fading_points)
        if args.printed_formulas:
            settings.printed = True
        if args.cmd in ("bounds", "sweep"):
            if args.cmd == "bounds":
                sweep = SweepSpec("p_et_dbm", (10 * math.log10(run.params.p_et * 1e3)
                                               if run.params.p_et > 0 else -math.inf,),
                                  frozenset(_split(args.outputs)))
            else:
                var = args.variable or run.extra.get("sweep_variable")
                vals = args.values or run.extra.get("sweep_values")
                outs = args.outputs or run.extra.get("sweep_outputs", "upper,lower,hd")
                if not var or not vals:
                    raise ConfigError("sweep needs --variable/--values or "
                                      "sweep_variable/sweep_values in the config")
                try:
                    values = _values(vals)
                except ValueError as exc:
                    raise ConfigError(f"bad sweep values: {exc}") from None
                sweep = SweepSpec(var, values, frozenset(_split(outs)))
            rows = sweep_rows(run.params, settings, sweep, getattr(args, "jobs", 1))
            buf = io.StringIO()
            write_rows(rows, buf, args.nats)
            _emit(buf.getvalue(), args.out)
            return 0
        if args.cmd == "simulate":
            return _simulate(args, run, settings)
        if args.cmd == "verify":
            rep = verify(args.config, n_fading_points=args.fading_points or 8,
                         seed=settings.seed)
            _emit(json.dumps(rep, indent=2) + "\n", args.out)
            return 0 if rep["passed"] else 3
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 1


def _split(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def _simulate(args, run, settings):
    for name in ("slots", "k", "burn_in", "initial_battery", "slack"):
        v = getattr(args, name)
        if v is not None:
            setattr(settings, "sim_" + name if name != "slots" else "sim_slots", v)
    params = run.params
    grid = settings.grid(params)
    res, dist, pol = lower_bound(params, grid)
    if not math.isfinite(pol.lambda2):
        print("nothing to simulate: the EHU never transmits at this point", file=sys.stderr)
        return 1
    if settings.sim_slack > 0:
        pol = slack_policy(dist, params, grid, settings.sim_slack)
    cfg = SimConfig(settings.sim_slots, settings.sim_k, settings.sim_initial_battery, pol, dist,
                    settings.seed, settings.sim_burn_in, secrecy_rate=res.c_s_lower)
    tr = simulate(cfg, params, grid)
    if args.trace:
        tr.to_csv(args.trace)
    summ = tr.summary()
    scale = 1.0 if args.nats else 1.0 / LN2
    summ["empirical_secrecy_rate"] *= scale
    summ["unit"] = "nats" if args.nats else "bits"
    _emit(json.dumps(summ, indent=2) + "\n", args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
