"""Command-line front end.

Every run is described by a :class:`RunConfig`, read from a TOML file
(``--config``) and then overridden by flags.  Data goes to ``--output`` or
standard output; progress and errors go to standard error.

Exit codes: 0 ok, 2 configuration error, 3 runtime error.  Errors are also
reported as one JSON object on standard error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import os
import re
import sys
import time
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
import tomli_w

from . import analytic, arch, gatesim, lattice, sim, twirl
from .arch import ARCHITECTURES, US, ArchitectureModel

COMMANDS = ("pta", "analytic", "simulate", "threshold", "gatesim", "graph-dump", "layout-dump")
FORMATS = ("csv", "json")
DECODERS = ("pymatching", "blossom")
RATE_COLUMNS = ("arch", "d", "T1_us", "shots", "n_cycles", "pxl", "pxl_err", "pzl", "pzl_err")
OUTPUT_DIR_ENV = "SURFARCH_OUTPUT_DIR"

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

_TOP_KEYS = {"command", "architecture", "d_list", "T1_grid", "shots", "n_cycles", "seed",
             "output", "format", "threads", "decoder", "gatesim", "pta"}
_GATE_KEYS = {"g_MHz", "t_total_ns", "T1_us", "T2_us"}
_PTA_KEYS = {"t_ns"}


class ConfigError(ValueError):
    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        super().__init__(message)
        self.field = field
        self.line = line

    def to_dict(self) -> dict:
        out = {"error": "config", "message": str(self)}
        if self.field is not None:
            out["field"] = self.field
        if self.line is not None:
            out["line"] = self.line
        return out


@dataclass(frozen=True)
class GateSweepConfig:
    g_MHz: tuple = (55.0,)
    t_total_ns: tuple = (7.0, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0, 14.0, 16.0, 18.0, 20.0)
    T1_us: float = 10.0
    T2_us: float = 10.0


@dataclass(frozen=True)
class RunConfig:
    command: str
    preset: str = "textbook"
    overrides: tuple = ()  # sorted (field, value) pairs applied to the preset
    d_list: tuple = (3, 5)
    T1_grid: tuple = ()  # microseconds; empty means "use the preset range"
    shots: int = 10_000
    n_cycles: int | str | None = None  # int, a multiple of d such as "3d", or None for "10d"
    seed: int = sim.DEFAULT_SEED
    output: str | None = None
    format: str = "csv"
    threads: int | None = None
    decoder: str = "pymatching"
    gatesim: GateSweepConfig = field(default_factory=GateSweepConfig)
    pta_t_ns: float | None = None  # None means the architecture's cycle time

    def model(self) -> ArchitectureModel:
        return arch.preset(self.preset).replace(**dict(self.overrides))

    def t1_grid(self) -> tuple:
        if self.T1_grid:
            return self.T1_grid
        lo, hi = self.model().t1_range_us
        return tuple(float(v) for v in np.round(np.linspace(lo, hi, 10), 6))

    def cycles_for(self, d: int) -> int:
        if self.n_cycles is None:
            return sim.default_n_cycles(d)
        if isinstance(self.n_cycles, str):
            return _cycle_multiple(self.n_cycles) * d
        return self.n_cycles


# -- parsing ------------------------------------------------------------------

_CYCLES_RE = re.compile(r"(\d*)d")


def _cycle_multiple(text: str) -> int:
    m = _CYCLES_RE.fullmatch(text)
    return int(m.group(1) or 1)


def _require(cond, message, path):
    if not cond:
        raise ConfigError(message, path)


def _as_int(v, path, minimum=None):
    _require(isinstance(v, int) and not isinstance(v, bool), "must be an integer", path)
    if minimum is not None:
        _require(v >= minimum, f"must be >= {minimum}", path)
    return v


def _as_float(v, path):
    _require(isinstance(v, (int, float)) and not isinstance(v, bool), "must be a number", path)
    _require(math.isfinite(v), "must be finite", path)
    return float(v)


def _increasing(values, path, cast=_as_float, positive=True):
    _require(isinstance(values, (list, tuple)), "must be a list", path)
    _require(len(values) > 0, "must be non-empty", path)
    out = tuple(cast(v, f"{path}[{i}]") for i, v in enumerate(values))
    if positive:
        _require(all(v > 0 for v in out), "entries must be positive", path)
    _require(all(a < b for a, b in zip(out, out[1:])), "must be strictly increasing", path)
    return out


def _architecture(value) -> tuple[str, tuple]:
    if isinstance(value, str):
        value = {"preset": value}
    _require(isinstance(value, dict), "must be a preset name or a table", "architecture")
    value = dict(value)
    name = value.pop("preset", "textbook")
    _require(isinstance(name, str) and name.lower() in ARCHITECTURES,
             f"unknown preset {name!r}; choose one of {', '.join(ARCHITECTURES)}",
             "architecture.preset")
    name = name.lower()
    allowed = {f.name for f in dataclasses.fields(ArchitectureModel)} - {"name", "T1"}
    for key in value:
        _require(key in allowed, f"unknown key {key!r}", f"architecture.{key}")
    base = arch.preset(name)
    overrides = {}
    for key, v in value.items():
        if isinstance(v, list):
            v = tuple(v)
        overrides[key] = v
    try:
        base.replace(**overrides)
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e), "architecture") from None
    return name, tuple(sorted(overrides.items()))


def config_from_dict(data: dict) -> RunConfig:
    for key in data:
        _require(key in _TOP_KEYS, f"unknown key {key!r}", key)
    _require("command" in data, "missing required key", "command")
    command = data["command"]
    _require(command in COMMANDS, f"unknown command {command!r}", "command")
    kw: dict = {"command": command}
    if "architecture" in data:
        kw["preset"], kw["overrides"] = _architecture(data["architecture"])
    if "d_list" in data:
        kw["d_list"] = _increasing(data["d_list"], "d_list", cast=_as_int)
        for i, d in enumerate(kw["d_list"]):
            _require(d >= 3 and d % 2 == 1, "distances must be odd and >= 3", f"d_list[{i}]")
    if "T1_grid" in data:
        kw["T1_grid"] = _increasing(data["T1_grid"], "T1_grid")
    if "shots" in data:
        kw["shots"] = _as_int(data["shots"], "shots", 1)
    if "n_cycles" in data:
        v = data["n_cycles"]
        if isinstance(v, str):
            _require(_CYCLES_RE.fullmatch(v) and _cycle_multiple(v) >= 1,
                     'must be a positive integer or a multiple of d like "3d"', "n_cycles")
            kw["n_cycles"] = v
        else:
            kw["n_cycles"] = _as_int(v, "n_cycles", 1)
    if "seed" in data:
        kw["seed"] = _as_int(data["seed"], "seed", 0)
    if "output" in data:
        _require(isinstance(data["output"], str) and data["output"], "must be a path", "output")
        kw["output"] = data["output"]
    if "format" in data:
        _require(data["format"] in FORMATS, f"must be one of {', '.join(FORMATS)}", "format")
        kw["format"] = data["format"]
    if "threads" in data:
        kw["threads"] = _as_int(data["threads"], "threads", 1)
    if "decoder" in data:
        _require(data["decoder"] in DECODERS, f"must be one of {', '.join(DECODERS)}", "decoder")
        kw["decoder"] = data["decoder"]
    if "gatesim" in data:
        g = data["gatesim"]
        _require(isinstance(g, dict), "must be a table", "gatesim")
        for key in g:
            _require(key in _GATE_KEYS, f"unknown key {key!r}", f"gatesim.{key}")
        gk = {}
        if "g_MHz" in g:
            gk["g_MHz"] = _increasing(g["g_MHz"], "gatesim.g_MHz")
        if "t_total_ns" in g:
            gk["t_total_ns"] = _increasing(g["t_total_ns"], "gatesim.t_total_ns")
            for i, t in enumerate(gk["t_total_ns"]):
                _require(5.0 <= t <= 50.0, "must lie in [5, 50] ns", f"gatesim.t_total_ns[{i}]")
        for key in ("T1_us", "T2_us"):
            if key in g:
                gk[key] = _as_float(g[key], f"gatesim.{key}")
                _require(gk[key] > 0, "must be positive", f"gatesim.{key}")
        merged = GateSweepConfig(**gk)
        _require(merged.T2_us <= 2 * merged.T1_us, "T2 must not exceed 2*T1", "gatesim.T2_us")
        kw["gatesim"] = merged
    if "pta" in data:
        p = data["pta"]
        _require(isinstance(p, dict), "must be a table", "pta")
        for key in p:
            _require(key in _PTA_KEYS, f"unknown key {key!r}", f"pta.{key}")
        if "t_ns" in p:
            kw["pta_t_ns"] = _as_float(p["t_ns"], "pta.t_ns")
            _require(kw["pta_t_ns"] >= 0, "must be non-negative", "pta.t_ns")
    return RunConfig(**kw)


def parse_config(text: str) -> RunConfig:
    """Validated :class:`RunConfig` from TOML text; unknown keys are errors."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        m = re.search(r"line (\d+)", str(e))
        raise ConfigError(f"syntax error: {e}", line=int(m.group(1)) if m else None) from None
    return config_from_dict(data)


def config_to_dict(c: RunConfig) -> dict:
    out: dict = {"command": c.command}
    a = {"preset": c.preset}
    for k, v in c.overrides:
        a[k] = list(v) if isinstance(v, tuple) else v
    out["architecture"] = a
    out["d_list"] = list(c.d_list)
    if c.T1_grid:
        out["T1_grid"] = list(c.T1_grid)
    out["shots"] = c.shots
    if c.n_cycles is not None:
        out["n_cycles"] = c.n_cycles
    out["seed"] = c.seed
    if c.output is not None:
        out["output"] = c.output
    out["format"] = c.format
    if c.threads is not None:
        out["threads"] = c.threads
    out["decoder"] = c.decoder
    out["gatesim"] = {
        "g_MHz": list(c.gatesim.g_MHz),
        "t_total_ns": list(c.gatesim.t_total_ns),
        "T1_us": c.gatesim.T1_us,
        "T2_us": c.gatesim.T2_us,
    }
    if c.pta_t_ns is not None:
        out["pta"] = {"t_ns": c.pta_t_ns}
    return out


def serialize(c: RunConfig) -> str:
    return tomli_w.dumps(config_to_dict(c))


# -- commands -----------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf"
        return f"{v:.8g}"
    return str(v)


def _table(columns, rows, fmt: str) -> str:
    if fmt == "json":
        return json.dumps([dict(zip(columns, r)) for r in rows], indent=1, allow_nan=True) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _rate_row(p: sim.RatePoint) -> tuple:
    return (p.arch, p.d, round(p.T1 / US, 9), p.shots, p.n_cycles,
            p.p_xl_per_cycle, p.p_xl_err, p.p_zl_per_cycle, p.p_zl_err)


class _Progress:
    def __init__(self, stream, total: int, label: str):
        self.stream, self.total, self.label = stream, total, label
        self.done = 0
        self.t0 = time.monotonic()

    def step(self, what: str) -> None:
        self.done += 1
        if self.stream is not None:
            dt = time.monotonic() - self.t0
            print(f"[{self.label}] {self.done}/{self.total} {what} ({dt:.1f}s)",
                  file=self.stream, flush=True)


def _threads(c: RunConfig) -> int:
    return c.threads or os.cpu_count() or 1


def _simulate_points(c: RunConfig, progress) -> list[sim.RatePoint]:
    from .decoder import Decoder

    m = c.model()
    points = []
    for d in c.d_list:
        layout = lattice.build_layout(d)
        schedule = lattice.build_schedule(layout, m)
        n = c.cycles_for(d)
        for t1 in c.t1_grid():
            T1 = t1 * US
            dec = Decoder.build(layout, schedule, m, T1, n, backend=c.decoder)
            points.append(sim.estimate(layout, schedule, m, T1, c.shots, n, dec,
                                       seed=c.seed, threads=_threads(c)))
            progress.step(f"d={d} T1={t1:g}us")
    return points


def cmd_pta(c: RunConfig, err) -> str:
    m = c.model()
    t_ns = m.t_cycle_ns if c.pta_t_ns is None else c.pta_t_ns
    rows = []
    for t1 in c.t1_grid():
        T1 = t1 * US
        ch = twirl.pta_channel(twirl.DampingParams(t_ns * 1e-9, T1, m.T2_for(T1)))
        r = arch.cycle_error_rates(m, T1)
        rows.append((m.name, t1, t_ns, ch.px, ch.py, ch.pz, r.p_bf, r.q_bf, r.p_pf, r.q_pf))
    cols = ("arch", "T1_us", "t_ns", "px", "py", "pz", "p_bf", "q_bf", "p_pf", "q_pf")
    return _table(cols, rows, c.format)


def cmd_analytic(c: RunConfig, err) -> str:
    m = c.model()
    rows = []
    for d in c.d_list:
        for t1 in c.t1_grid():
            pxl, pzl = analytic.architecture_rates(m, d, t1 * US)
            rows.append((m.name, d, t1, 0, 1, pxl, 0.0, pzl, 0.0))
    return _table(RATE_COLUMNS, rows, c.format)


def cmd_simulate(c: RunConfig, err) -> str:
    grid = c.t1_grid()
    progress = _Progress(err, len(c.d_list) * len(grid), "simulate")
    points = _simulate_points(c, progress)
    return _table(RATE_COLUMNS, [_rate_row(p) for p in points], c.format)


def threshold_report(c: RunConfig, points) -> dict:
    grid = list(c.t1_grid())
    d_small, d_large = c.d_list[0], c.d_list[-1]
    by_d = {d: [p for p in points if p.d == d] for d in (d_small, d_large)}
    m = c.model()
    report = {"arch": m.name, "d": [d_small, d_large], "T1_us": grid, "crossings": {}}
    for etype, attr in (("X", "p_xl_per_cycle"), ("Z", "p_zl_per_cycle")):
        small = [getattr(p, attr) for p in by_d[d_small]]
        large = [getattr(p, attr) for p in by_d[d_large]]
        mc = analytic.find_threshold(grid, small, large)
        idx = 0 if etype == "X" else 1
        an_s = [analytic.architecture_rates(m, d_small, t * US)[idx] for t in grid]
        an_l = [analytic.architecture_rates(m, d_large, t * US)[idx] for t in grid]
        an = analytic.find_threshold(grid, an_s, an_l)
        report["crossings"][etype] = {
            "T1_cross_us": mc.T1_cross,
            "bracket_us": list(mc.bracket) if mc.bracket else None,
            "analytic_T1_cross_us": an.T1_cross,
        }
    report["curves"] = [dict(zip(RATE_COLUMNS, _rate_row(p))) for p in points]
    return report


def cmd_threshold(c: RunConfig, err) -> str:
    if len(c.d_list) != 2:
        raise ConfigError("threshold needs exactly two distances", "d_list")
    grid = c.t1_grid()
    if len(grid) < 2:
        raise ConfigError("threshold needs at least two T1 values", "T1_grid")
    progress = _Progress(err, 2 * len(grid), "threshold")
    points = _simulate_points(c, progress)
    report = threshold_report(c, points)
    if c.format == "json":
        return json.dumps(report, indent=1) + "\n"
    text = _table(RATE_COLUMNS, [_rate_row(p) for p in points], "csv")
    rows = []
    for etype, r in report["crossings"].items():
        lo, hi = r["bracket_us"] or (None, None)
        rows.append((etype, r["T1_cross_us"], lo, hi, r["analytic_T1_cross_us"]))
    cols = ("error_type", "T1_cross_us", "bracket_lo_us", "bracket_hi_us", "analytic_T1_cross_us")
    crossing = _table(cols, [tuple("" if v is None else v for v in r) for r in rows], "csv")
    return text + "\n" + crossing


def cmd_gatesim(c: RunConfig, err) -> str:
    g = c.gatesim
    progress = _Progress(err, len(g.g_MHz), "gatesim")
    rows = []
    for g_mhz in g.g_MHz:
        rows += gatesim.sweep([g_mhz * 1e-3], g.t_total_ns, T1=g.T1_us * 1e3, T2=g.T2_us * 1e3)
        progress.step(f"g={g_mhz:g}MHz")
    if c.format == "json":
        return json.dumps([dataclasses.asdict(r) for r in rows], indent=1) + "\n"
    return gatesim.sweep_csv(rows)


def cmd_graph_dump(c: RunConfig, err) -> str:
    from .decoder import enumerate_faults

    m = c.model()
    d = c.d_list[0]
    t1 = c.t1_grid()[0]
    layout = lattice.build_layout(d)
    schedule = lattice.build_schedule(layout, m)
    graphs = enumerate_faults(layout, schedule, m, t1 * US, c.cycles_for(d))
    body = ",\n".join(f' "{k}": {graphs[k].to_json()}' for k in sorted(graphs))
    header = json.dumps({"arch": m.name, "d": d, "T1_us": t1, "n_cycles": c.cycles_for(d)})
    return '{\n "config": ' + header + ",\n" + body + "\n}\n"


def cmd_layout_dump(c: RunConfig, err) -> str:
    return lattice.build_layout(c.d_list[0]).to_json() + "\n"


_HANDLERS = {
    "pta": cmd_pta,
    "analytic": cmd_analytic,
    "simulate": cmd_simulate,
    "threshold": cmd_threshold,
    "gatesim": cmd_gatesim,
    "graph-dump": cmd_graph_dump,
    "layout-dump": cmd_layout_dump,
}


def output_path(c: RunConfig) -> str | None:
    base = os.environ.get(OUTPUT_DIR_ENV)
    if c.output is None:
        if not base:
            return None
        ext = "json" if c.command.endswith("dump") else c.format
        return os.path.join(base, f"{c.command}.{ext}")
    if base and not os.path.isabs(c.output):
        return os.path.join(base, c.output)
    return c.output


def _report_error(err, payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True), file=err, flush=True)


def run(config: RunConfig, stdout=None, stderr=None, quiet: bool = False) -> int:
    """Execute one command; returns the process exit status."""
    out = stdout if stdout is not None else sys.stdout
    err = stderr if stderr is not None else sys.stderr
    try:
        text = _HANDLERS[config.command](config, None if quiet else err)
        path = output_path(config)
        if path is None:
            out.write(text)
        else:
            os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            if not quiet:
                print(f"wrote {path}", file=err)
    except ConfigError as e:
        _report_error(err, e.to_dict())
        return EXIT_CONFIG
    except Exception as e:  # any module failure becomes a machine-readable error
        _report_error(err, {"error": "runtime", "type": type(e).__name__, "message": str(e)})
        return EXIT_RUNTIME
    return EXIT_OK


# -- argument handling --------------------------------------------------------

def _csv_list(cast):
    def parse(text):
        try:
            return [cast(x) for x in text.split(",") if x.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad list {text!r}") from None
    return parse


def _override(text):
    if "=" not in text:
        raise argparse.ArgumentTypeError("expected KEY=VALUE")
    k, v = text.split("=", 1)
    try:
        value = tomllib.loads(f"v = {v}")["v"]
    except tomllib.TOMLDecodeError:
        value = v
    return k.strip(), value


def _cycles_arg(text):
    return int(text) if text.isdigit() else text


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="surfarch", description=__doc__.split("\n")[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="TOML run configuration")
    ap.add_argument("--arch", help="architecture preset")
    ap.add_argument("--set", dest="overrides", action="append", type=_override, default=[],
                    metavar="KEY=VALUE", help="override one architecture field (repeatable)")
    ap.add_argument("--d", dest="d_list", type=_csv_list(int), help="code distances, e.g. 3,5")
    ap.add_argument("--T1", dest="T1_grid", type=_csv_list(float), help="T1 grid in microseconds")
    ap.add_argument("--shots", type=int)
    ap.add_argument("--n-cycles", dest="n_cycles", type=_cycles_arg,
                    help='cycles per run: an integer or a multiple of d, e.g. "d" or "3d"')
    ap.add_argument("--seed", type=int)
    ap.add_argument("--output", "-o")
    ap.add_argument("--format", choices=FORMATS)
    ap.add_argument("--threads", type=int)
    ap.add_argument("--decoder", choices=DECODERS)
    ap.add_argument("--g", dest="g_MHz", type=_csv_list(float), help="couplings in MHz (gatesim)")
    ap.add_argument("--t-total", dest="t_total_ns", type=_csv_list(float),
                    help="gate durations in ns (gatesim)")
    ap.add_argument("--gate-T1", dest="gate_T1_us", type=float, help="gatesim T1 in microseconds")
    ap.add_argument("--gate-T2", dest="gate_T2_us", type=float, help="gatesim T2 in microseconds")
    ap.add_argument("--quiet", "-q", action="store_true", help="no progress output")
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    data: dict = {}
    if ns.config:
        try:
            with open(ns.config, "rb") as fh:
                text = fh.read().decode("utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config: {e}", "config") from None
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            m = re.search(r"line (\d+)", str(e))
            raise ConfigError(f"syntax error: {e}", line=int(m.group(1)) if m else None) from None
    if "command" in data and data["command"] != ns.command:
        raise ConfigError(f"config is for {data['command']!r}, not {ns.command!r}", "command")
    data["command"] = ns.command
    if ns.arch or ns.overrides:
        a = data.get("architecture", {})
        a = {"preset": a} if isinstance(a, str) else dict(a)
        if ns.arch:
            a["preset"] = ns.arch
        a.update(dict(ns.overrides))
        data["architecture"] = a
    for key in ("d_list", "T1_grid", "shots", "n_cycles", "seed", "output", "format",
                "threads", "decoder"):
        v = getattr(ns, key)
        if v is not None:
            data[key] = v
    g = dict(data.get("gatesim", {}))
    for key, attr in (("g_MHz", "g_MHz"), ("t_total_ns", "t_total_ns"),
                      ("T1_us", "gate_T1_us"), ("T2_us", "gate_T2_us")):
        v = getattr(ns, attr)
        if v is not None:
            g[key] = v
    if g:
        data["gatesim"] = g
    return config_from_dict(data)


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        config = config_from_args(ns)
    except ConfigError as e:
        _report_error(sys.stderr, e.to_dict())
        return EXIT_CONFIG
    return run(config, quiet=ns.quiet)


if __name__ == "__main__":
    sys.exit(main())
