"""Command-line front end: ``diracbands <group> <action> [options]``.

Subcommands::

    potential build   write a potential JSON (cosine, cosine_perturbed, dimer_disk, perturbation)
    potential check   symmetry report for a potential JSON
    bands compute     band CSV along a k path
    cone analyze      cone fit at the Γ quartet plus Dirac diagnostics
    gap scan          Γ gap of V + δW for a list of δ
    shallow scan      quartet/doublet shifts of εV for a list of ε
    plot emit         matplotlib script for a band or scan CSV

A JSON file given with ``--config`` supplies defaults for every option;
explicit flags win.  Relative paths inside the config file are resolved
against the config file's directory.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
64 unknown subcommand, 65 input schema mismatch, 66 missing input file.
Failures print ``{"error": ..., "message": ..., "context": ...}`` on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import re
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import cone_analysis, textio
from .errors import DiracBandsError
from .lattice import LatticeBasis, hexagonal_lattice, k_path
from .potential import (
    DEFAULT_SYMMETRY_RTOL,
    check_honeycomb,
    dimer_disk,
    load_potential,
    perturbation_cosine,
    save_potential,
    superhoneycomb_cosine,
)
from .spectral import SpectralConfig, bands, read_bands_csv, write_bands_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_USAGE = 64
EXIT_SCHEMA = 65
EXIT_NO_INPUT = 66

COMMANDS = {
    ("potential", "build"), ("potential", "check"), ("bands", "compute"), ("cone", "analyze"),
    ("gap", "scan"), ("shallow", "scan"), ("plot", "emit"),
}
POTENTIAL_KINDS = ("cosine", "cosine_perturbed", "dimer_disk", "perturbation")


class CliError(Exception):
    def __init__(self, code: int, kind: str, message: str, **context):
        super().__init__(message)
        self.code = code
        self.kind = kind
        self.context = context


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(EXIT_CONFIG, "ConfigError", message)


# ---------------------------------------------------------------------------
# config handling
# ---------------------------------------------------------------------------

# config keys (flattened) -> argparse destinations
_CONFIG_KEYS = {
    ("lattice", "u1"): "u1", ("lattice", "u2"): "u2",
    ("potential", "kind"): "kind", ("potential", "epsilon"): "epsilon",
    ("potential", "delta"): "delta", ("potential", "r"): "r", ("potential", "n"): "grid",
    ("potential", "radius"): "disk_radius", ("potential", "inside"): "inside",
    ("potential", "outside"): "outside",
    ("potential", "file"): "potential", ("perturbation", "file"): "perturbation",
    ("spectral", "ecut_factor"): "ecut_factor", ("spectral", "n_bands"): "bands",
    ("spectral", "cluster_rtol"): "cluster_rtol", ("spectral", "gap_rtol"): "gap_rtol",
    ("spectral", "symmetry_rtol"): "rtol",
    ("path", "waypoints"): "path", ("path", "samples"): "samples",
    ("scan", "deltas"): "deltas", ("scan", "epsilons"): "epsilons",
    ("scan", "radii"): "radii", ("scan", "directions"): "directions",
    ("scan", "c_sharp"): "c_sharp",
    ("output", "dir"): "output_dir",
}
_PATH_DESTS = {"potential", "perturbation", "output_dir", "input"}


def load_config(path: Path) -> dict:
    """Flatten an experiment config file into argparse destinations."""
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise CliError(EXIT_NO_INPUT, "MissingFile", f"config file {path} not found", path=str(path))
    except json.JSONDecodeError as exc:
        raise CliError(EXIT_CONFIG, "ConfigError", f"config file is not valid JSON: {exc}", path=str(path))
    if not isinstance(data, dict):
        raise CliError(EXIT_CONFIG, "ConfigError", "config root must be an object", path=str(path))
    out = {}
    for (section, key), dest in _CONFIG_KEYS.items():
        sec = data.get(section)
        if isinstance(sec, dict) and key in sec:
            out[dest] = sec[key]
    for key in ("out", "input"):
        if key in data:
            out[key] = data[key]
    for section in data:
        if section not in {s for s, _ in _CONFIG_KEYS} | {"out", "input"}:
            raise CliError(EXIT_CONFIG, "ConfigError", f"unknown config section {section!r}", path=str(path))
    base = path.parent
    # a relative "out" stays relative when an output dir is configured
    dests = _PATH_DESTS if "output_dir" in out else _PATH_DESTS | {"out"}
    for dest in dests:
        if isinstance(out.get(dest), str) and not Path(out[dest]).is_absolute():
            out[dest] = str(base / out[dest])
    # lists may be written natively in JSON; flags use comma/colon strings
    for dest in ("deltas", "epsilons", "radii"):
        if isinstance(out.get(dest), list):
            out[dest] = ",".join(repr(float(v)) for v in out[dest])
    for dest in ("u1", "u2"):
        if isinstance(out.get(dest), list):
            out[dest] = ",".join(repr(float(v)) for v in out[dest])
    if isinstance(out.get("path"), list):
        out["path"] = ":".join(str(w) for w in out["path"])
    return out


# ---------------------------------------------------------------------------
# parsing helpers
# ---------------------------------------------------------------------------


def parse_floats(text: str, name: str) -> list[float]:
    try:
        vals = [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise CliError(EXIT_CONFIG, "ConfigError", f"{name}: expected comma-separated numbers, got {text!r}")
    if not vals or not all(math.isfinite(v) for v in vals):
        raise CliError(EXIT_CONFIG, "ConfigError", f"{name}: need at least one finite number")
    return vals


def parse_vec2(text: str, name: str) -> np.ndarray:
    vals = parse_floats(text, name)
    if len(vals) != 2:
        raise CliError(EXIT_CONFIG, "ConfigError", f"{name}: expected two numbers, got {text!r}")
    return np.array(vals)


_TERM = re.compile(r"([+-]?)\s*(\d*\.?\d*(?:[eE][+-]?\d+)?)\s*\*?\s*(k1|k2)?")


def parse_waypoint(text: str, lattice: LatticeBasis) -> np.ndarray:
    """``"0.5k1"``, ``"-0.25k1+0.5k2"``, ``"0"``, ``"G"`` -> Cartesian vector."""
    s = text.strip().replace(" ", "")
    if s.lower() in {"g", "gamma", "0"}:
        return np.zeros(2)
    out = np.zeros(2)
    pos = 0
    while pos < len(s):
        m = _TERM.match(s, pos)
        if not m or m.end() == pos:
            raise CliError(EXIT_CONFIG, "ConfigError", f"cannot parse k-path waypoint {text!r}")
        sign, num, vec = m.groups()
        if not num and not vec:
            raise CliError(EXIT_CONFIG, "ConfigError", f"cannot parse k-path waypoint {text!r}")
        coef = float(num) if num else 1.0
        coef = -coef if sign == "-" else coef
        if vec is None:
            if coef != 0:
                raise CliError(EXIT_CONFIG, "ConfigError", f"bare number in waypoint {text!r}; use k1/k2 multiples")
        else:
            out += coef * (lattice.k1 if vec == "k1" else lattice.k2)
        pos = m.end()
    return out


def parse_path(text: str, lattice: LatticeBasis) -> list[np.ndarray]:
    pts = [parse_waypoint(w, lattice) for w in str(text).split(":")]
    if len(pts) < 2:
        raise CliError(EXIT_CONFIG, "ConfigError", "a k path needs at least two ':'-separated waypoints")
    return pts


def _lattice(args) -> LatticeBasis:
    if args.u1 is None and args.u2 is None:
        return hexagonal_lattice()
    if args.u1 is None or args.u2 is None:
        raise CliError(EXIT_CONFIG, "ConfigError", "give both --u1 and --u2 or neither")
    return LatticeBasis.from_periods(parse_vec2(args.u1, "u1"), parse_vec2(args.u2, "u2"))


def _spectral(args) -> SpectralConfig:
    cfg = SpectralConfig()
    updates = {}
    if args.ecut_factor is not None:
        if not args.ecut_factor > 0:
            raise CliError(EXIT_CONFIG, "ConfigError", "ecut factor must be positive")
        updates["ecut_factor"] = float(args.ecut_factor)
    if args.cluster_rtol is not None:
        updates["cluster_rtol"] = float(args.cluster_rtol)
    if args.gap_rtol is not None:
        updates["gap_rtol"] = float(args.gap_rtol)
    return replace(cfg, **updates)


def _input_path(value, what: str) -> Path:
    if value is None:
        raise CliError(EXIT_CONFIG, "ConfigError", f"missing {what}")
    p = Path(value)
    if not p.is_file():
        raise CliError(EXIT_NO_INPUT, "MissingFile", f"{what} {p} not found", path=str(p))
    return p


def _output_path(args, default: str | None = None) -> Path | None:
    name = args.out or default
    if name is None:
        return None
    p = Path(name)
    if args.output_dir and not p.is_absolute():
        p = Path(args.output_dir) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _load(value, what: str):
    path = _input_path(value, what)
    try:
        return load_potential(path)
    except (ValueError, KeyError) as exc:
        raise CliError(EXIT_SCHEMA, "SchemaMismatch", f"{what} {path}: {exc}", path=str(path))


def _emit(args, payload: dict, default_name: str | None = None) -> None:
    text = textio.dumps(payload)
    path = _output_path(args, default_name)
    if path is not None:
        path.write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_potential_build(args) -> None:
    lat = _lattice(args)
    kind = args.kind or "cosine"
    if kind not in POTENTIAL_KINDS:
        raise CliError(EXIT_CONFIG, "ConfigError", f"unknown potential kind {kind!r}", kinds=list(POTENTIAL_KINDS))
    eps = 1.0 if args.epsilon is None else float(args.epsilon)
    delta = float(args.delta) if args.delta is not None else (1.0 if kind == "perturbation" else 0.0)
    if kind == "cosine":
        V = superhoneycomb_cosine(lat, eps)
    elif kind == "cosine_perturbed":
        V = superhoneycomb_cosine(lat, eps) + perturbation_cosine(lat, delta)
    elif kind == "perturbation":
        V = perturbation_cosine(lat, delta)
    else:
        r = 1.0 / 3.0 if args.r is None else float(args.r)
        V = dimer_disk(lat, r, n=int(args.grid or 128),
                       radius=0.1 if args.disk_radius is None else float(args.disk_radius),
                       inside=1.0 if args.inside is None else float(args.inside),
                       outside=30.0 if args.outside is None else float(args.outside))
    out = _output_path(args)
    if out is None:
        raise CliError(EXIT_CONFIG, "ConfigError", "potential build needs --out")
    save_potential(V, out)


def cmd_potential_check(args) -> None:
    V = _load(args.input or args.potential, "potential file")
    rtol = DEFAULT_SYMMETRY_RTOL if args.rtol is None else float(args.rtol)
    _emit(args, check_honeycomb(V, rtol).to_json_dict())


def cmd_bands_compute(args) -> None:
    V = _load(args.potential, "potential file")
    cfg = _spectral(args)
    waypoints = parse_path(args.path or "-0.5k1:0.5k1", V.lattice)
    samples = int(args.samples or 201)
    n_bands = int(args.bands or cfg.n_bands)
    if samples < 2 or n_bands < 1:
        raise CliError(EXIT_CONFIG, "ConfigError", "need samples >= 2 and bands >= 1")
    bs = bands(V, k_path(waypoints, samples), cfg.basis(V.lattice), n_bands)
    out = _output_path(args, "bands.csv")
    write_bands_csv(bs, out)


def cmd_cone_analyze(args) -> None:
    V = _load(args.potential, "potential file")
    cfg = _spectral(args)
    k1n = math.sqrt(V.lattice.k1_sq)
    radii = None if args.radii is None else np.array(parse_floats(args.radii, "radii")) * k1n
    ndir = 8 if args.directions is None else int(args.directions)
    if ndir < 1:
        raise CliError(EXIT_CONFIG, "ConfigError", "need at least one direction")
    cone, dirac = cone_analysis.analyze_cone(V, cfg, radii, cone_analysis.default_directions(ndir))
    payload = cone.to_json_dict()
    payload["ecut_factor"] = cfg.ecut_factor
    payload["diagnostics"] = dirac.diagnostics()
    _emit(args, payload)


def cmd_gap_scan(args) -> None:
    V = _load(args.potential, "potential file")
    W = _load(args.perturbation, "perturbation file")
    cfg = _spectral(args)
    deltas = parse_floats(args.deltas or "-0.3,0,0.3", "deltas")
    scan = cone_analysis.gap_scan(V, W, deltas, cfg)
    cone_analysis.write_gap_csv(scan, _output_path(args, "gap.csv"))
    if args.report:
        textio.write_json(_report_path(args), scan.to_json_dict())


def cmd_shallow_scan(args) -> None:
    V = _load(args.potential, "potential file")
    cfg = _spectral(args)
    eps = parse_floats(args.epsilons or "-0.04,-0.02,-0.01,0.01,0.02,0.04", "epsilons")
    rep = cone_analysis.shallow_scan(V, eps, cfg)
    cone_analysis.write_shallow_csv(rep, _output_path(args, "shallow.csv"))
    if args.report:
        textio.write_json(_report_path(args), rep.to_json_dict())


def _report_path(args) -> Path:
    p = Path(args.report)
    if args.output_dir and not p.is_absolute():
        p = Path(args.output_dir) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def cmd_plot_emit(args) -> None:
    src = _input_path(args.input, "CSV file")
    out = _output_path(args, src.with_suffix(".plot.py").name)
    c_sharp = None if args.c_sharp is None else float(args.c_sharp)
    out.write_text(plot_script(src, out.with_suffix(".png").name, c_sharp))


COMMAND_FUNCS = {
    ("potential", "build"): cmd_potential_build,
    ("potential", "check"): cmd_potential_check,
    ("bands", "compute"): cmd_bands_compute,
    ("cone", "analyze"): cmd_cone_analyze,
    ("gap", "scan"): cmd_gap_scan,
    ("shallow", "scan"): cmd_shallow_scan,
    ("plot", "emit"): cmd_plot_emit,
}


# ---------------------------------------------------------------------------
# plot scripts
# ---------------------------------------------------------------------------


def _read_scan_csv(path: Path, header: list[str]) -> np.ndarray:
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != header:
        raise ValueError(f"expected header {header}")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, len(header))
    except ValueError as exc:
        raise ValueError(f"non-numeric row: {exc}") from None
    if not len(data):
        raise ValueError("no data rows")
    return data


def plot_script(src: Path, png_name: str, c_sharp: float | None = None) -> str:
    """Self-contained matplotlib script reproducing the plot of ``src``."""
    text = src.read_text()
    first = text.splitlines()[0] if text.strip() else ""
    try:
        if first.startswith("index,kx,ky,arclen"):
            header, data = read_bands_csv(src)
            body = _bands_body(header, data)
        elif first == "delta,gap":
            body = _gap_body(_read_scan_csv(src, ["delta", "gap"]), c_sharp)
        elif first == "epsilon,quartet_shift,doublet_shift":
            body = _shallow_body(_read_scan_csv(src, ["epsilon", "quartet_shift", "doublet_shift"]))
        else:
            raise ValueError(f"unrecognised CSV header {first!r}")
    except ValueError as exc:
        raise CliError(EXIT_SCHEMA, "SchemaMismatch", f"{src}: {exc}", path=str(src))
    return (
        f'"""Plot generated from {src.name}; run with python3."""\n\n'
        "import matplotlib\n\n"
        'matplotlib.use("Agg")\n'
        "import matplotlib.pyplot as plt\n\n"
        f"{body}\n"
        f'fig.savefig("{png_name}", dpi=150, bbox_inches="tight")\n'
    )


def _literal(values) -> str:
    return "[" + ", ".join(textio.fmt_float(v) for v in values) + "]"


def _bands_body(header: list[str], data: np.ndarray) -> str:
    lines = [f"arclen = {_literal(data[:, 3])}", "bands = ["]
    lines += [f"    {_literal(data[:, j])}," for j in range(4, len(header))]
    lines += [
        "]",
        "fig, ax = plt.subplots(figsize=(5, 6))",
        "for values in bands:",
        '    ax.plot(arclen, values, color="k", lw=1)',
        'ax.set_xlabel("arclength along k path")',
        'ax.set_ylabel("band energy")',
    ]
    return "\n".join(lines)


def _gap_body(data: np.ndarray, c_sharp: float | None) -> str:
    lines = [
        f"delta = {_literal(data[:, 0])}",
        f"gap = {_literal(data[:, 1])}",
        "fig, ax = plt.subplots(figsize=(5, 4))",
        'ax.plot([abs(d) for d in delta], gap, "o", label="computed gap")',
    ]
    if c_sharp is not None:
        lines += [
            f"c_sharp = {textio.fmt_float(c_sharp)}",
            "top = max(abs(d) for d in delta)",
            'ax.plot([0, top], [0, 2 * abs(c_sharp) * top], "--", label="2|c#||delta|")',
        ]
    lines += ['ax.set_xlabel("|delta|")', 'ax.set_ylabel("gap at Gamma")', "ax.legend()"]
    return "\n".join(lines)


def _shallow_body(data: np.ndarray) -> str:
    return "\n".join([
        f"epsilon = {_literal(data[:, 0])}",
        f"quartet = {_literal(data[:, 1])}",
        f"doublet = {_literal(data[:, 2])}",
        "fig, ax = plt.subplots(figsize=(5, 4))",
        'ax.plot(epsilon, quartet, "o-", label="fourfold shift")',
        'ax.plot(epsilon, doublet, "s-", label="twofold shift")',
        'ax.set_xlabel("epsilon")',
        'ax.set_ylabel("shift from |k1|^2")',
        "ax.legend()",
    ])


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="diracbands", add_help=True)
    p.add_argument("input", nargs="?", help="input file (potential check, plot emit)")
    p.add_argument("--config", help="experiment config JSON; flags override its values")
    p.add_argument("--out", help="output file")
    p.add_argument("--output-dir", dest="output_dir", help="directory for relative output names")
    p.add_argument("--report", help="extra JSON report (gap/shallow scans)")
    p.add_argument("--u1", help="lattice period u1 as 'x,y'")
    p.add_argument("--u2", help="lattice period u2 as 'x,y'")
    p.add_argument("--kind", help="|".join(POTENTIAL_KINDS))
    p.add_argument("--epsilon", type=float, help="amplitude of the super honeycomb cosine")
    p.add_argument("--delta", type=float, help="amplitude of the perturbation cosine")
    p.add_argument("--r", type=float, help="dimer ratio")
    p.add_argument("--grid", type=int, help="real-space grid size for dimer_disk")
    p.add_argument("--disk-radius", dest="disk_radius", type=float)
    p.add_argument("--inside", type=float, help="potential value inside the disk")
    p.add_argument("--outside", type=float, help="potential value outside the disk")
    p.add_argument("--potential", help="potential JSON")
    p.add_argument("--perturbation", help="perturbation potential JSON")
    p.add_argument("--rtol", type=float, help="symmetry check tolerance")
    p.add_argument("--ecut-factor", dest="ecut_factor", type=float, help="cutoff in units of |k1|^2")
    p.add_argument("--cluster-rtol", dest="cluster_rtol", type=float)
    p.add_argument("--gap-rtol", dest="gap_rtol", type=float)
    p.add_argument("--path", help="waypoints like '-0.5k1:0:0.5k2'")
    p.add_argument("--samples", type=int, help="samples per path segment, endpoints included")
    p.add_argument("--bands", type=int, help="number of bands")
    p.add_argument("--deltas", help="comma-separated δ values")
    p.add_argument("--epsilons", help="comma-separated ε values")
    p.add_argument("--radii", help="comma-separated cone radii in units of |k1|")
    p.add_argument("--directions", type=int, help="number of ray directions in [0, π)")
    p.add_argument("--c-sharp", dest="c_sharp", type=float, help="c# for the gap reference line")
    return p


def _fail(exc: CliError, command: str) -> int:
    ctx = {"command": command, "exit_code": exc.code, **exc.context}
    sys.stderr.write(json.dumps({"error": exc.kind, "message": str(exc), "context": ctx}, sort_keys=True) + "\n")
    return exc.code


_NEGATIVE_VALUE = re.compile(r"^-[\d.]")


def _glue_negative_values(argv: list[str]) -> list[str]:
    # argparse mistakes "-0.5k1:0.5k1" or "-0.3,0,0.3" for an option
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if (tok.startswith("--") and "=" not in tok and i + 1 < len(argv)
                and _NEGATIVE_VALUE.match(argv[i + 1])):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv and argv[0] in {"-h", "--help"}:
        build_parser().print_help()
        sys.stdout.write(__doc__)
        return EXIT_OK
    argv = _glue_negative_values(argv)
    key = tuple(argv[:2])
    command = " ".join(key)
    if key not in COMMANDS:
        return _fail(CliError(EXIT_USAGE, "UnknownCommand", f"unknown subcommand {command!r}",
                              known=sorted(" ".join(c) for c in COMMANDS)), command)
    try:
        parser = build_parser()
        args = parser.parse_args(argv[2:])
        if args.config:
            cfg_path = Path(args.config)
            defaults = load_config(cfg_path)
            # re-parse so explicit flags override config values
            parser.set_defaults(**defaults)
            args = parser.parse_args(argv[2:])
        COMMAND_FUNCS[key](args)
    except CliError as exc:
        return _fail(exc, command)
    except FileNotFoundError as exc:
        return _fail(CliError(EXIT_NO_INPUT, "MissingFile", str(exc)), command)
    except ArithmeticError as exc:
        ctx = {k: getattr(exc, k) for k in ("residual", "gap") if hasattr(exc, k)}
        return _fail(CliError(EXIT_NUMERICAL, type(exc).__name__, str(exc), **ctx), command)
    except (DiracBandsError, ValueError) as exc:
        return _fail(CliError(EXIT_CONFIG, type(exc).__name__, str(exc)), command)
    return EXIT_OK


def main(argv=None) -> int:
    return run(argv)
