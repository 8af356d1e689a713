"""Command line entry point ``chill-lab``.

Configuration is plain ``key = value`` text with dotted keys; command line
flags override the file. Every subcommand writes into ``<out>/<subcommand>``
through a temporary directory that is renamed only on success, and finishes
with ``manifest.json`` listing every emitted file with its size and sha256.

Exit codes: 0 all checks pass, 1 a check failed, 2 usage or configuration
error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import shutil
import sys
import tempfile
import time
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import suite
from .errors import ChillLabError, ConfigError, RangeViolation, TypeMismatch, UnknownKey

SUBCOMMANDS = ("simulate", "toda", "ansatz-error", "verify", "kernel", "report")
DEFAULT_OUT = "chill-lab-out"
ENV_OUT = "CHILL_LAB_OUT"

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def _float_list(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(float(v) for v in text)
    return tuple(float(v) for v in str(text).replace(";", ",").split(",") if v.strip())


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    s = str(text).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(s)


def _opt_float(text):
    if text is None or str(text).strip().lower() in ("", "none", "auto"):
        return None
    return float(text)


def _positive(v):
    return v is None or v > 0


#: key -> (parser, default, validity predicate)
SCHEMA = {
    "k": (int, 2, lambda v: v >= 1),
    "T": (float, 10.0, lambda v: v > 0),
    "t_end": (float, 5e3, lambda v: v > 0),
    "grid.L": (float, 30.0, lambda v: v > 0),
    "grid.N": (int, 1201, lambda v: v >= 64),
    "solver.dt0": (float, 1e-3, lambda v: v > 0),
    "solver.dt_max": (float, 0.05, lambda v: v > 0),
    "solver.growth": (float, 1.02, lambda v: v >= 1),
    "solver.n_snapshots": (int, 200, lambda v: v >= 1),
    "solver.error_control": (_bool, True, lambda v: True),
    "ansatz.sigma": (float, 1.0, lambda v: 0 < v < np.sqrt(2)),
    "ansatz.alpha": (float, 2.0, lambda v: v > 1),
    "ansatz.times": (_float_list, (1e2, 1e3, 1e4), lambda v: len(v) >= 2 and min(v) > 0),
    "fit.t_a": (_opt_float, None, _positive),
    "fit.t_b": (_opt_float, None, _positive),
    "toda.tol": (float, 1e-10, lambda v: v > 0),
    "toda.n_samples": (int, 200, lambda v: v >= 2),
    "kernel.taus": (_float_list, (0.1, 1.0, 10.0), lambda v: len(v) >= 1 and min(v) > 0),
    "simulate.cross_time": (float, 50.0, lambda v: v > 0),
    "simulate.refine": (_bool, False, lambda v: True),
    "min_gap": (float, 3.0, lambda v: v > 0),
    "tol_scale": (float, 1.0, lambda v: v > 0),
    "seed": (int, 0, lambda v: v >= 0),
    "jobs": (int, 1, lambda v: v >= 1),
    "out": (str, None, lambda v: True),
    "report.source": (str, None, lambda v: True),
    "test.allow_k1": (_bool, False, lambda v: True),
}


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def k(self) -> int:
        return self.values["k"]

    @property
    def out(self) -> Path:
        return Path(self.values["out"])

    def tolerance(self, name: str) -> float:
        base = self.values.get(f"tol.{name}", suite.TOLERANCES[name][0])
        return base * self.values["tol_scale"]

    def echo(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(self.values.items())}


def _convert(key: str, raw):
    if key.startswith("tol."):
        name = key[4:]
        if name not in suite.TOLERANCES:
            raise UnknownKey(key, f"no check named {name!r}")
        parser, valid = float, (lambda v: v > 0)
    elif key in SCHEMA:
        parser, _, valid = SCHEMA[key]
    else:
        raise UnknownKey(key, "unknown configuration key")
    try:
        val = parser(raw)
    except (TypeError, ValueError):
        raise TypeMismatch(key, f"cannot parse {raw!r} as {getattr(parser, '__name__', 'value')}")
    if not valid(val):
        raise RangeViolation(key, f"value {raw!r} out of range")
    return val


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    text = Path(path).read_text()
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}", f"expected 'key = value', got {line!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key] = val
    return out


def parse_config(path=None, overrides: dict | None = None, subcommand: str = "verify") -> RunConfig:
    """Merge defaults, the config file and flag overrides (in that order)."""
    raw = {}
    if path is not None:
        raw.update(read_config_file(path))
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})
    vals = {k: spec[1] for k, spec in SCHEMA.items()}
    for key, v in raw.items():
        vals[key] = _convert(key, v)
    if vals["k"] == 1 and not vals["test.allow_k1"]:
        raise RangeViolation("k", "k = 1 is only available with test.allow_k1 = true")
    if vals["t_end"] <= vals["T"]:
        raise RangeViolation("t_end", f"t_end={vals['t_end']} must exceed T={vals['T']}")
    if vals["out"] is None:
        vals["out"] = os.environ.get(ENV_OUT, DEFAULT_OUT)
    return RunConfig(subcommand, vals)


# ---------------------------------------------------------------------------
# output handling

@dataclass
class RunManifest:
    subcommand: str
    config: dict
    checks: list
    files: list
    wall_clock: float
    version: str = __version__

    @property
    def all_passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def to_json(self) -> str:
        return json.dumps({"tool": "chill-lab", "version": self.version,
                           "subcommand": self.subcommand, "wall_clock_s": self.wall_clock,
                           "all_passed": self.all_passed, "config": self.config,
                           "checks": self.checks, "files": self.files}, indent=2)


class Output:
    """Collects files in a temporary directory next to the destination."""

    def __init__(self, dest: Path):
        self.dest = Path(dest)
        self.dest.parent.mkdir(parents=True, exist_ok=True)
        self.tmp = Path(tempfile.mkdtemp(prefix=f".{self.dest.name}.tmp-", dir=self.dest.parent))

    def path(self, name: str) -> Path:
        p = self.tmp / name
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def csv(self, name: str, header: str, rows) -> None:
        arr = np.asarray(rows, dtype=float)
        if arr.ndim == 1:
            arr = arr.reshape(-1, len(header.split(",")))
        np.savetxt(self.path(name), arr, delimiter=",", header=header, comments="", fmt="%.17g")

    def text(self, name: str, body: str) -> None:
        self.path(name).write_text(body)

    def listing(self) -> list:
        out = []
        for p in sorted(self.tmp.rglob("*")):
            if p.is_file() and p.name != "manifest.json":
                data = p.read_bytes()
                out.append({"name": str(p.relative_to(self.tmp)), "size": len(data),
                            "sha256": hashlib.sha256(data).hexdigest()})
        return out

    def commit(self) -> None:
        if self.dest.exists():
            old = self.dest.with_name(f".{self.dest.name}.old-{os.getpid()}")
            self.dest.rename(old)
            self.tmp.rename(self.dest)
            shutil.rmtree(old, ignore_errors=True)
        else:
            self.tmp.rename(self.dest)

    def abort(self) -> None:
        shutil.rmtree(self.tmp, ignore_errors=True)


def _run_checks(cfg: RunConfig, names, out: Output, prefix: str = "") -> list:
    rng_seed = cfg["seed"]

    def one(name):
        fn = suite.CHECKS[name]
        return fn(cfg.tolerance(name), np.random.default_rng(rng_seed))

    jobs = cfg["jobs"]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, names))
    else:
        results = [one(n) for n in names]
    for c in results:
        _evidence(out, c, prefix)
    return results


def _evidence(out: Output, c: suite.Check, prefix: str = "") -> None:
    if c.rows:
        out.csv(f"{prefix}{c.name}.csv", c.header, c.rows)


def _finish(cfg: RunConfig, out: Output, checks, started: float) -> RunManifest:
    man = RunManifest(cfg.subcommand, cfg.echo(), [c.as_dict() for c in checks],
                      out.listing(), round(time.time() - started, 3))
    out.text("manifest.json", man.to_json())
    out.commit()
    for c in checks:
        print(c.line())
    return man


# ---------------------------------------------------------------------------
# subcommands

def run_verify(cfg: RunConfig) -> RunManifest:
    """Identity suite; one evidence CSV per check."""
    started = time.time()
    out = Output(cfg.out / "verify")
    try:
        checks = _run_checks(cfg, suite.VERIFY_CHECKS, out)
        return _finish(cfg, out, checks, started)
    except BaseException:
        out.abort()
        raise


def run_kernel(cfg: RunConfig) -> RunManifest:
    """Heat-kernel profiles, normalisation, decay constants and kernel residual convergence table."""
    from .operators import heat_kernel_Q
    started = time.time()
    out = Output(cfg.out / "kernel")
    try:
        taus = cfg["kernel.taus"]
        for tau in taus:
            y = np.linspace(0.0, 50.0 * tau ** 0.25, 401)
            out.csv(f"kernel_tau{tau:g}.csv", "y,Q", np.column_stack([y, heat_kernel_Q(tau, y)]))
        checks = [
            suite.check_heat_kernel_mass(cfg.tolerance("heat_kernel_mass"), taus=taus),
            suite.check_heat_kernel_decay(cfg.tolerance("heat_kernel_decay"), taus=taus),
            suite.check_kernel_order(cfg.tolerance("kernel_order")),
        ]
        for c in checks:
            _evidence(out, c)
        return _finish(cfg, out, checks, started)
    except BaseException:
        out.abort()
        raise


def run_toda(cfg: RunConfig) -> RunManifest:
    """Integrate the Cahn-Hilliard system from its exact solution and the
    Allen-Cahn system from its expanding solution."""
    from . import toda
    from .tracker import InterfaceTrack, default_window, fit_log_law
    started = time.time()
    out = Output(cfg.out / "toda")
    try:
        k, T, t1 = cfg.k, cfg["T"], cfg["t_end"]
        tol, ns = cfg["toda.tol"], cfg["toda.n_samples"]
        ch = toda.integrate_toda(toda.TodaSystemSpec("CH_full", k), toda.explicit_solution(k, T),
                                 T, t1, tol=tol, n_samples=ns)
        ch.to_csv(out.path("toda_ch.csv"))
        ac = toda.integrate_toda(toda.TodaSystemSpec("AC_comparison", k),
                                 toda.ac_explicit_solution(k, T), T, t1, tol=tol, n_samples=ns)
        ac.to_csv(out.path("toda_ac.csv"))
        exact = toda.explicit_solution(k, t1)
        err = np.max(np.abs(ch.gamma[-1] - exact))
        checks = [suite.make("toda_final", err, cfg.tolerance("toda_final"),
                             "j,final,exact", [(j + 1, a, b) for j, (a, b) in
                                               enumerate(zip(ch.gamma[-1], exact))])]
        window = _window(cfg)
        fits = []
        for tr in (ch, ac):
            it = InterfaceTrack(tr.t, tr.gamma, np.zeros(tr.gamma.shape, dtype=int))
            fits.append(fit_log_law(it, window).gap_slope)
        ratio = fits[0] / fits[1]
        checks.append(suite.make("ch_ac_ratio", np.max(np.abs(ratio - 0.5)),
                                 cfg.tolerance("ch_ac_ratio"), "i,ch_slope,ac_slope,ratio",
                                 [(i + 2, a, b, a / b) for i, (a, b) in
                                  enumerate(zip(*fits))]))
        for c in checks:
            _evidence(out, c)
        return _finish(cfg, out, checks, started)
    except BaseException:
        out.abort()
        raise


def _window(cfg: RunConfig):
    from .tracker import default_window
    lo, hi = default_window(cfg["T"], cfg["t_end"])
    a = cfg["fit.t_a"] if cfg["fit.t_a"] is not None else lo
    b = cfg["fit.t_b"] if cfg["fit.t_b"] is not None else hi
    return (a, b)


def run_ansatz_error(cfg: RunConfig) -> RunManifest:
    """Error term, weight and weighted norm at the configured times."""
    from .ansatz import AnsatzParams, ErrorField, build, phi_weight, weighted_error_norm
    started = time.time()
    out = Output(cfg.out / "ansatz-error")
    try:
        k, sig, alp = cfg.k, cfg["ansatz.sigma"], cfg["ansatz.alpha"]
        times = tuple(sorted(cfg["ansatz.times"]))
        rows, sups = [], []
        for t in times:
            p = AnsatzParams(k, t, sigma=sig, alpha=alp)
            ef = ErrorField(p)
            wn = weighted_error_norm(p, error_field=ef)
            x = np.linspace(wn.lo, wn.hi, wn.n_points)
            E = ef(x)
            phi = phi_weight(p, x)
            a = ef.ans
            out.csv(f"ansatz_t{t:g}.csv", "x,z,z1,E,Phi,E_over_Phi",
                    np.column_stack([x, a.z(x), a.z(x, stage=1), E, phi, E / phi]))
            sups.append(np.max(np.abs(E)))
            rows.append((t, wn.value, wn.argmax, sups[-1]))
        out.csv("weighted_norm.csv", "t,sup_E_over_Phi,argmax,sup_E", rows)
        checks = [suite.check_weighted_decay(cfg.tolerance("weighted_decay"), times=times,
                                             sigma=sig, alpha=alp,
                                             rows=[r[:3] for r in rows])]
        ratios = [sups[i + 1] / sups[i] for i in range(len(sups) - 1)]
        checks.append(suite.make("sup_error_decay", max(ratios) if ratios else 0.0,
                                 cfg.tolerance("sup_error_decay")))
        return _finish(cfg, out, checks, started)
    except BaseException:
        out.abort()
        raise


def _fit_report(tr, cfg_T: float, window, k: int) -> tuple:
    from .tracker import decay_exponent, fit_log_law, grade
    fit = fit_log_law(tr, window)
    gr = grade(fit, k)
    body = json.dumps({"window": list(fit.window), "n_samples": fit.n_samples,
                       "interfaces": gr.rows, "gaps": gr.gap_rows,
                       "decay_exponent": decay_exponent(tr, k, window) if k > 1 else None},
                      indent=2)
    return fit, gr, body


def _slope_check(cfg, gr):
    errs = [r["rel_err"] for r in gr.gap_rows] or [r["rel_err"] or 0.0 for r in gr.rows]
    return suite.make("gap_slope", max(errs), cfg.tolerance("gap_slope"), extra_ok=gr.passed
                      if not gr.gap_rows else True)


def _simulate_once(cfg: RunConfig, N: int, factor: float, out: Output | None):
    from .pde import Grid1D, SolverConfig, init_from_ansatz, run
    from .tracker import track
    grid = Grid1D(cfg["grid.L"], N)
    u0 = init_from_ansatz(cfg.k, cfg["T"], grid, min_gap=cfg["min_gap"],
                          sigma=cfg["ansatz.sigma"], alpha=cfg["ansatz.alpha"])
    sc = SolverConfig(t_end=cfg["t_end"], dt0=cfg["solver.dt0"] * factor,
                      dt_max=cfg["solver.dt_max"] * factor, growth=cfg["solver.growth"],
                      error_control=cfg["solver.error_control"],
                      n_snapshots=cfg["solver.n_snapshots"],
                      extra_times=(cfg["simulate.cross_time"],))

    def dump(f):
        if out is not None:
            out.csv(f"snapshots/snap_t{f.t:.8e}.csv", "x,u", np.column_stack([f.x, f.u]))

    res = run(u0, sc, callback=dump)
    count_err = None
    try:
        tr = track(res.snapshots)
    except ChillLabError as exc:
        tr, count_err = None, exc
    return res, tr, count_err


def run_simulate(cfg: RunConfig) -> RunManifest:
    """PDE run from the ansatz, interface tracking and log-law grading."""
    from . import toda
    started = time.time()
    out = Output(cfg.out / "simulate")
    try:
        k, T, t1 = cfg.k, cfg["T"], cfg["t_end"]
        res, tr, count_err = _simulate_once(cfg, cfg["grid.N"], 1.0, out)
        res.energy.to_csv(out.path("energy.csv"))
        e = res.energy.energy
        rise = np.diff(e) - res.energy.floor
        inc = np.max(np.maximum(rise, 0) / np.abs(e[:-1])) if len(e) > 1 else 0.0
        checks = [suite.make("energy_monotone", inc, cfg.tolerance("energy_monotone"),
                             detail=f"steps={res.energy.steps} rejected={res.energy.rejected}")]
        checks.append(suite.make("interface_count", 0 if count_err is None else 1,
                                 cfg.tolerance("interface_count"),
                                 detail="" if count_err is None else str(count_err)))
        if tr is not None:
            tr.to_csv(out.path("track.csv"))
            window = _window(cfg)
            fit, gr, body = _fit_report(tr, T, window, k)
            out.text("fit.json", body)
            checks.append(_slope_check(cfg, gr))
            tc = cfg["simulate.cross_time"]
            if k >= 2 and T < tc < t1:
                g0 = tr.at(tc)
                ode = toda.integrate_toda(toda.TodaSystemSpec("CH_full", k), g0, tc, t1)
                diff = np.max(np.abs(ode.gamma[-1] - tr.gamma[-1]))
                checks.append(suite.make("toda_cross", diff, cfg.tolerance("toda_cross"),
                                         "j,pde,toda", [(j + 1, a, b) for j, (a, b) in
                                                        enumerate(zip(tr.gamma[-1], ode.gamma[-1]))]))
            if cfg["simulate.refine"]:
                _, tr2, err2 = _simulate_once(cfg, 2 * cfg["grid.N"] - 1, 0.5, None)
                if tr2 is None:
                    raise err2
                tr2.to_csv(out.path("track_refined.csv"))
                fit2, _, _ = _fit_report(tr2, T, window, k)
                a = fit.gap_slope if k > 1 else fit.slope
                b = fit2.gap_slope if k > 1 else fit2.slope
                checks.append(suite.make("refinement", np.max(np.abs(b - a) / np.abs(a)),
                                         cfg.tolerance("refinement")))
        for c in checks:
            _evidence(out, c)
        return _finish(cfg, out, checks, started)
    except BaseException:
        out.abort()
        raise


def run_report(cfg: RunConfig) -> RunManifest:
    """Refit the track of an existing simulate output."""
    from .tracker import InterfaceTrack
    started = time.time()
    src = Path(cfg["report.source"]) if cfg["report.source"] else cfg.out / "simulate"
    path = src / "track.csv"
    if not path.exists():
        raise ChillLabError(f"no track file at {path}")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    tr = InterfaceTrack(data[:, 0], data[:, 1:], np.zeros(data[:, 1:].shape, dtype=int))
    out = Output(cfg.out / "report")
    try:
        k = tr.k
        _, gr, body = _fit_report(tr, cfg["T"], _window(cfg), k)
        out.text("fit.json", body)
        return _finish(cfg, out, [_slope_check(cfg, gr)], started)
    except BaseException:
        out.abort()
        raise


RUNNERS = {"simulate": run_simulate, "toda": run_toda, "ansatz-error": run_ansatz_error,
           "verify": run_verify, "kernel": run_kernel, "report": run_report}


# ---------------------------------------------------------------------------
# argument parsing

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="chill-lab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"chill-lab {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="key = value configuration file")
        s.add_argument("--k", dest="k")
        s.add_argument("--T", dest="T")
        s.add_argument("--t-end", dest="t_end")
        s.add_argument("--L", dest="grid.L")
        s.add_argument("--N", dest="grid.N")
        s.add_argument("--jobs", dest="jobs")
        s.add_argument("--seed", dest="seed")
        s.add_argument("--out", dest="out")
        s.add_argument("--tol-scale", dest="tol_scale")
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any configuration key")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    ns = vars(args)
    sub = ns.pop("subcommand")
    path = ns.pop("config")
    extra = ns.pop("set")
    over = {k: v for k, v in ns.items() if v is not None}
    try:
        for item in extra:
            if "=" not in item:
                raise ConfigError(item, "--set expects KEY=VALUE")
            key, val = item.split("=", 1)
            over[key.strip()] = val.strip()
        cfg = parse_config(path, over, sub)
    except (ConfigError, OSError) as exc:
        print(f"chill-lab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        man = RUNNERS[sub](cfg)
    except Exception as exc:
        frames = [f for f in traceback.extract_tb(exc.__traceback__) if "chill_lab" in f.filename]
        where = f" ({frames[-1].filename}:{frames[-1].lineno})" if frames else ""
        print(f"chill-lab: {type(exc).__name__}: {exc}{where}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK if man.all_passed else EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
