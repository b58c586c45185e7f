"""Command-line front end: ``cascade-ldp {rate,moments,simulate,verify,plotdata}``.

Settings come from an optional INI file (``--config``) whose sections map
to dotted keys (``[w] kind = exp`` is ``w.kind``; ``[rate] amax = 50`` is
``rate.amax``). Command-line flags override the file. Every run writes its
outputs plus a ``manifest.json`` with content hashes under ``--out``.
"""
from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
from pathlib import Path

from . import cascade, devlab, moments, ratefn, store
from .errors import ConfigError, DomainError, NonConvergence, ResourceError
from .wmodel import model_from_config

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_DOMAIN = 0, 1, 2, 3

# seed carried by the built-in presets so `verify --preset desk` is reproducible
PRESET_SEEDS = {"desk": 20240611, "quick": 20240611}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def load_config(path) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    cp = configparser.ConfigParser()
    try:
        cp.read(p)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {p}: {exc}") from None
    out = {}
    for sec in cp.sections():
        for k, v in cp.items(sec):
            out[f"{sec}.{k}"] = v
    return out


def _level(v):
    s = str(v).strip().lower()
    if s in ("inf", "infinity"):
        return math.inf
    try:
        n = int(s)
    except ValueError:
        raise ConfigError(f"level must be a positive integer or 'inf', got {v!r}") from None
    if n < 1:
        raise ConfigError(f"level must be a positive integer or 'inf', got {v!r}")
    return n


def _int_list(v):
    try:
        return [int(x) for x in str(v).replace(";", ",").split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of integers, got {v!r}") from None


class Settings:
    """Flag value if given, else config value, else default; cast and checked."""

    def __init__(self, args, cfg, section):
        self.args, self.cfg, self.section = args, cfg, section

    def get(self, name, default=None, cast=float, key=None):
        v = getattr(self.args, name, None)
        if v is None:
            v = self.cfg.get(key or f"{self.section}.{name}", self.cfg.get(f"run.{name}", default))
        if v is None:
            return None
        try:
            return cast(v)
        except (TypeError, ValueError):
            raise ConfigError(f"bad value for {name}: {v!r}") from None

    def require(self, name, cast=float, key=None):
        v = self.get(name, None, cast, key)
        if v is None:
            raise ConfigError(f"--{name.replace('_', '-')} is required")
        return v


def _model(args, cfg):
    mcfg = {k: v for k, v in cfg.items() if k.startswith("w.")}
    if args.model is not None:
        mcfg["w.kind"] = args.model
    if args.shape is not None:
        mcfg["w.shape"] = args.shape
    if args.p_zero is not None:
        mcfg["w.p_zero"] = args.p_zero
    mcfg.setdefault("w.kind", "exp")
    return model_from_config(mcfg)


def _outdir(s):
    out = Path(s.get("out", "out", str))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _finish(out, files, argv, cfg, model, seeds=()):
    inputs = {"argv": list(argv), "config": cfg, "model": model.to_config() if model else None}
    store.write_manifest(out, files, inputs, seeds)


# --------------------------------------------------------------------------
# subcommands

def cmd_rate(args, cfg, argv):
    s = Settings(args, cfg, "rate")
    model = _model(args, cfg)
    gp = ratefn.GridParams(a_max=s.get("amax", 50.0), lin_step=s.get("lin_step", 0.01),
                           geo_ratio=s.get("geo_ratio", 1.02))
    level = s.get("n", 1, _level)
    out = _outdir(s)
    if math.isinf(level):
        grid = ratefn.rate_infinite(model, gp, tol=s.get("tol", ratefn.DEFAULT_TOL),
                                    max_level=s.get("max_level", ratefn.MAX_LEVEL, int))
        stem = out / "rate_inf"
    else:
        grid = ratefn.rate_finite(model, level, gp)
        stem = out / f"rate_n{level}"
    files = store.write_rate_grid(grid, stem)
    bp_max = s.get("breakpoints", None, int)
    if bp_max:
        bp = ratefn.breakpoints(model, bp_max, gp)
        files.append(store.dump_json({"model": bp.model_id, "a_n": bp.a_n, "half_width": bp.half_width,
                                      "beyond_grid": bp.beyond_grid}, out / "breakpoints.json"))
        print("breakpoints:", ", ".join(store.fmt(a) for a in bp.a_n))
    print(f"{model.model_id} level {grid.metadata()['level']}: {len(grid.points)} points, "
          f"I(1) = {grid.at(1.0):g}, written to {stem.with_suffix('.csv')}")
    _finish(out, files, argv, cfg, model)
    return EXIT_OK


def cmd_moments(args, cfg, argv):
    s = Settings(args, cfg, "moments")
    model = _model(args, cfg)
    r = s.require("r", int)
    h_max = s.get("hmax", 10, int)
    level = s.get("n", "inf", _level)
    mode = s.get("mode", "float", str)
    out = _outdir(s)
    extra = {}
    if math.isinf(level):
        extra["chi"] = moments.chi(model, r)
        tab = moments.cascade_moments(model, r, h_max, mode)
    else:
        tab = moments.finite_tree_moments(model, r, level, h_max, mode)
    delta = s.get("delta", None)
    if delta is not None:
        extra["upper_bound"] = {h: moments.moment_upper_bound(model, r, h, delta)
                                for h in range(1, min(h_max, r - 1) + 1)}
    eta = s.get("eta", None)
    if eta is not None:
        rows = moments.kappa_estimate(model, eta, s.get("r_list", str(r), _int_list))
        extra["kappa"] = {"eta": eta, "rows": rows, "note": "finite-r values, not the limsup"}
    stem = out / f"moments_r{r}_{'inf' if math.isinf(level) else f'n{level}'}"
    files = store.write_moment_table(tab, stem, extra)
    for h, v in enumerate(tab.values):
        print(f"h={h}\t{v}" + (f"\t({float(v):.17g})" if mode == "exact" else ""))
    if "chi" in extra:
        print(f"chi({r}) = {extra['chi']:.12g}")
    _finish(out, files, argv, cfg, model)
    return EXIT_OK


def cmd_simulate(args, cfg, argv):
    s = Settings(args, cfg, "simulate")
    model = _model(args, cfg)
    seed = s.require("seed", int)
    r = s.require("r", int)
    level = s.get("n", 1, _level)
    count = s.get("count", 100_000, int)
    threads = s.get("threads", 1, int)
    out = _outdir(s)
    if math.isinf(level):
        batch = cascade.sample_infinite(model, r, count, s.get("pool_iters", cascade.ITERS_T, int), seed)
        zero = {"zero_mass": cascade.zero_mass_infinite(model, r)}
        stem = out / f"batch_r{r}_inf"
    else:
        batch = cascade.sample_finite(model, r, level, count, seed, threads=threads)
        zero = {"zero_mass": cascade.zero_mass_finite(model, r, level)}
        stem = out / f"batch_r{r}_n{level}"
    files = store.write_batch(batch, stem, zero)
    st = batch.stats
    print(f"{len(batch)} draws: mean {st['mean']:.6g}, second moment {st['second_moment']:.6g}, "
          f"P(Z=0) exact {zero['zero_mass']:.6g}" + ("  [mean flagged]" if st["mean_flag"] else ""))
    _finish(out, files, argv, cfg, model, [seed])
    return EXIT_OK


def cmd_verify(args, cfg, argv):
    s = Settings(args, cfg, "verify")
    preset = s.get("preset", "desk", str)
    vcfg = {k.split(".", 1)[1]: v for k, v in cfg.items() if k.startswith("verify.")}
    vcfg.update({k: v for k, v in cfg.items() if k.startswith("w.")})
    model = _model(args, cfg)
    vcfg.update(model.to_config())
    vcfg["preset"] = preset
    seed = s.get("seed", PRESET_SEEDS.get(preset), int)
    if seed is None:
        raise ConfigError("verify needs --seed")
    vcfg["seed"] = seed
    for name in ("samples", "threads"):
        v = s.get(name, None, int)
        if v is not None:
            vcfg[name] = v
    out = _outdir(s)
    report = devlab.verify_suite(vcfg)
    files = store.write_report(report, out / "report")
    for c in report["checks"]:
        print(f"{c['status']:>12}  {c['name']}")
    print("summary:", json.dumps(report["summary"]))
    _finish(out, files, argv, cfg, model, [report["master_seed"]] + [c["seed"] for c in report["checks"]])
    return EXIT_OK if report["passed"] else EXIT_VERIFY


def cmd_plotdata(args, cfg, argv):
    s = Settings(args, cfg, "plotdata")
    grid = store.read_rate_grid(s.require("grid", str))
    rpath = s.get("report", None, str)
    out = _outdir(s)
    level = grid.metadata()["level"]
    rows = [{"kind": "rate", "level": level, "a": a, "value": v}
            for a, v in zip(grid.points, grid.values)]
    if rpath:
        report = json.loads(Path(rpath).read_text())
        for row in store.report_rows(report):
            rows.append({"kind": "deviation", "check": row["check"], "regime": row["regime"],
                         "level": row["level"], "a": row["a"], "r": row["r"], "speed": row["speed"],
                         "log_prob": _num(row["log_prob"]), "ci_lower": _num(row["ci_lower"]),
                         "ci_upper": _num(row["ci_upper"]), "value": _num(row["theory_value"]),
                         "fitted_slope": _num(row["fitted_slope"]), "verdict": row["verdict"]})
    cols = ["kind", "check", "regime", "level", "a", "r", "speed", "value", "log_prob", "ci_lower",
            "ci_upper", "fitted_slope", "verdict"]
    path = store.write_rows(rows, out / "plotdata.csv", cols)
    print(f"{len(rows)} rows written to {path}")
    _finish(out, [path], argv, cfg, None)
    return EXIT_OK


def _num(v):
    return float(v) if isinstance(v, str) else v


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="INI file with [w], [rate], [moments], ... sections")
    common.add_argument("--model", help="weight law: degenerate | exp | gamma | twopoint")
    common.add_argument("--shape", type=float, help="gamma shape k")
    common.add_argument("--p-zero", dest="p_zero", type=float, help="twopoint P(W = 0)")
    common.add_argument("--out", help="output directory (default ./out)")
    common.add_argument("--threads", type=int, help="worker threads for sampling")

    p = _Parser(prog="cascade-ldp", description="Deviation rates, moments and simulation of "
                "Mandelbrot cascades.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    q = sub.add_parser("rate", parents=[common], help="rate function grid (finite level or inf)")
    q.add_argument("--n", help="level: positive integer or 'inf'")
    q.add_argument("--amax", type=float)
    q.add_argument("--lin-step", dest="lin_step", type=float)
    q.add_argument("--geo-ratio", dest="geo_ratio", type=float)
    q.add_argument("--tol", type=float, help="stabilisation tolerance for level inf")
    q.add_argument("--max-level", dest="max_level", type=int)
    q.add_argument("--breakpoints", type=int, metavar="N_MAX", help="also locate a_1..a_{N_MAX-1}")

    q = sub.add_parser("moments", parents=[common], help="moment tables, chi, bound, kappa")
    q.add_argument("--r", type=int)
    q.add_argument("--hmax", type=int)
    q.add_argument("--n", help="finite level (default inf: limit mass)")
    q.add_argument("--mode", choices=moments.MODES)
    q.add_argument("--delta", type=float, help="also evaluate the moment upper bound")
    q.add_argument("--eta", type=float, help="also tabulate (1/r) log E[Z^(eta r)]")
    q.add_argument("--r-list", dest="r_list", help="r values for --eta")

    q = sub.add_parser("simulate", parents=[common], help="sample Z at level n or inf")
    q.add_argument("--r", type=int)
    q.add_argument("--n", help="level: positive integer or 'inf' (population dynamics)")
    q.add_argument("--count", type=int)
    q.add_argument("--seed", type=int)
    q.add_argument("--pool-iters", dest="pool_iters", type=int)

    q = sub.add_parser("verify", parents=[common], help="run the Monte Carlo verification suite")
    q.add_argument("--preset", choices=sorted(devlab.PRESETS))
    q.add_argument("--seed", type=int)
    q.add_argument("--samples", type=int)

    q = sub.add_parser("plotdata", parents=[common], help="join a rate grid and a report into one CSV")
    q.add_argument("--grid", help="rate grid (CSV path or stem)")
    q.add_argument("--report", help="report JSON from verify")
    return p


COMMANDS = {"rate": cmd_rate, "moments": cmd_moments, "simulate": cmd_simulate,
            "verify": cmd_verify, "plotdata": cmd_plotdata}


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise ConfigError("missing subcommand; one of " + ", ".join(COMMANDS))
        cfg = load_config(args.config)
        return COMMANDS[args.command](args, cfg, argv)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, ResourceError, NonConvergence) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (OSError, ValueError) as exc:
        # unreadable or malformed input files
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
