"""Command-line front end.

Configuration files are line oriented::

    # comment
    [model]
    lambda_cut = 9/2
    [condition]
    kind = bag+

Keys may also be written dotted (``condition.kind = bag+``), which is the form
used by ``--set``.  Overrides are applied after the file is parsed.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import os
import re
import sys
import tempfile
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import __version__
from .conditions import (
    ChiralityOperator,
    fredholm_delta_index,
    make_aps,
    make_bag,
    make_local,
    make_maximal,
    make_minimal,
)
from .diagnostics import hardy_verify, untwist_coefficients, weyl_check
from .errors import (
    DimensionMismatch,
    InvalidConfig,
    NotEpsInvariant,
    NotLagrangian,
    ParseError,
    RamifiedDiracError,
    TypeMismatch,
    UnknownKey,
)
from .model_config import (
    ModelConfig,
    Quadrature,
    Tolerances,
    enumerate_modes,
    outer_custom,
    outer_type1,
    outer_type2,
    validate_config,
)
from .spectral import (
    assemble_spectrum,
    calderon_condition,
    calderon_family,
    eigenfunction,
    eigenvalues_in_window,
    graded_spectra,
    heat_supertrace,
)
from .verification import SUITES, run_suite

COMMANDS = ("spectrum", "index", "green", "weyl", "heat", "verify", "hardy", "expand")

CONDITION_KINDS = {
    "aps": "APS",
    "aps+l": "APS+L",
    "bag+": "BagPlus",
    "bag-": "BagMinus",
    "minimal": "Minimal",
    "maximal": "Maximal",
    "local": "LocalSubspace",
    "calderon": "Calderon",
}

OUTER_KINDS = {"typei": "TypeI", "typeii": "TypeII", "custom": "Custom"}


# ---------------------------------------------------------------- value types


def _real(text):
    try:
        if "/" in text:
            return float(Fraction(text))
        return float(text)
    except (ValueError, ZeroDivisionError):
        raise TypeMismatch(f"expected a real number, got {text!r}") from None


def _int(text):
    if not re.fullmatch(r"[+-]?\d+", text):
        raise TypeMismatch(f"expected an integer, got {text!r}")
    return int(text)


def _half_integer(text):
    m = re.fullmatch(r"([+-]?\d+)\s*/\s*2", text)
    if not m or int(m.group(1)) % 2 == 0:
        raise TypeMismatch(f"expected a half-integer literal p/2 with p odd, got {text!r}")
    return int(m.group(1)) / 2.0


def _choice(options):
    def parse(text):
        key = text.strip().lower()
        if key not in options:
            raise TypeMismatch(f"expected one of {', '.join(sorted(options))}, got {text!r}")
        return options[key]

    return parse


def _vector(text):
    """Comma-separated complex entries; several vectors separated by ';'."""
    try:
        cols = [[complex(x.strip().replace("i", "j")) for x in part.split(",")] for part in text.split(";")]
    except ValueError:
        raise TypeMismatch(f"expected comma-separated numbers, got {text!r}") from None
    if len({len(c) for c in cols}) != 1:
        raise TypeMismatch("all vectors must have the same length")
    arr = np.array(cols).T
    return arr.real if np.all(arr.imag == 0) else arr


def _real_list(text):
    return tuple(_real(x.strip()) for x in text.split(",") if x.strip())


def _name(text):
    return text.strip()


# key -> (parser, default); defaults are the documented defaults
SCHEMA = {
    "model": {
        "base_length": (_real, 2.0 * np.pi),
        "holonomy_h0": (_real, 0.0),
        "holonomy_h1": (_real, 0.0),
        "fiber_dim": (_int, 1),
        "lambda_cut": (_half_integer, 4.5),
        "mu_cut": (_real, 8.0),
    },
    "condition": {
        "kind": (_choice(CONDITION_KINDS), "APS"),
        "vector": (_vector, None),
        "kernel": (_vector, None),
    },
    "outer": {
        "kind": (_choice(OUTER_KINDS), "TypeI"),
        "vector": (_vector, None),
    },
    "solver": {
        "kappa_max": (_real, 40.0),
        "r_min": (_real, 1e-12),
        "points_per_panel": (_int, 16),
        "panel_ratio": (_real, 2.0),
        "root_tol": (_real, 1e-12),
        "weyl_k": (_int, 2),
        "heat_times": (_real_list, (0.05, 0.1, 0.5, 1.0)),
        "tail_bound": (_real, 1e-8),
        "hardy_cutoffs": (_real_list, (1.0, 4.0, 16.0, 64.0)),
        "expand_mu_max": (_real, 4.0),
        "expand_count": (_int, 3),
        "heat_sector": (_choice({"all": "all", "residual": "residual"}), "all"),
        "suite": (_name, "all"),
    },
}


@dataclass
class ParsedConfig:
    cfg: ModelConfig
    condition: dict
    outer: dict
    solver: dict
    raw: dict = field(default_factory=dict)

    def canonical(self):
        """Deterministic text form of the resolved settings (used for the config hash)."""
        lines = []
        for section in SCHEMA:
            for key in sorted(SCHEMA[section]):
                val = self.raw.get((section, key))
                lines.append(f"{section}.{key}={val if val is not None else '<default>'}")
        return "\n".join(lines)

    def digest(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


def _assign(raw, section, key, value, line):
    if section not in SCHEMA:
        raise UnknownKey(f"unknown section [{section}]", line)
    if key not in SCHEMA[section]:
        raise UnknownKey(f"unknown key {section}.{key}", line)
    parser = SCHEMA[section][key][0]
    value = value.strip()
    try:
        parser(value)
    except TypeMismatch as exc:
        raise TypeMismatch(f"{section}.{key}: {exc}", line) from None
    raw[(section, key)] = value.strip()


def _split_key(key, section, line):
    if "." in key:
        section, key = key.split(".", 1)
    if section is None:
        raise ParseError(f"key {key!r} outside any section", line)
    return section.strip().lower(), key.strip().lower()


def parse_config(text, overrides=()):
    """Parse configuration text and ``key=value`` overrides into a ParsedConfig."""
    raw = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        m = re.fullmatch(r"\[\s*([A-Za-z_]+)\s*\]", stripped)
        if m:
            section = m.group(1).lower()
            if section not in SCHEMA:
                raise UnknownKey(f"unknown section [{section}]", lineno)
            continue
        if "=" not in stripped:
            raise ParseError(f"expected 'key = value', got {stripped!r}", lineno)
        key, value = stripped.split("=", 1)
        if not key.strip() or not value.strip():
            raise ParseError("empty key or value", lineno)
        sec, k = _split_key(key.strip(), section, lineno)
        _assign(raw, sec, k, value, lineno)
    for item in overrides:
        if "=" not in item:
            raise ParseError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        if "." not in key:
            raise ParseError(f"override key {key!r} must be section.key")
        sec, k = _split_key(key.strip(), None, None)
        _assign(raw, sec, k, value, None)
    return _resolve(raw)


def _get(raw, section, key):
    parser, default = SCHEMA[section][key]
    return parser(raw[(section, key)]) if (section, key) in raw else default


def _resolve(raw):
    model = {k: _get(raw, "model", k) for k in SCHEMA["model"]}
    cond = {k: _get(raw, "condition", k) for k in SCHEMA["condition"]}
    outer = {k: _get(raw, "outer", k) for k in SCHEMA["outer"]}
    solver = {k: _get(raw, "solver", k) for k in SCHEMA["solver"]}
    d = model["fiber_dim"]
    if d < 1:
        raise InvalidConfig("invariant violated: fiber_dim >= 1")
    if outer["kind"] == "TypeI":
        obc = outer_type1(d)
    elif outer["kind"] == "TypeII":
        obc = outer_type2(d)
    else:
        if outer["vector"] is None:
            raise InvalidConfig("outer.kind = custom needs outer.vector")
        obc = outer_custom(outer["vector"])
    cfg = ModelConfig(
        base_length=model["base_length"],
        holonomy_h0=model["holonomy_h0"],
        holonomy_h1=model["holonomy_h1"],
        fiber_dim=d,
        lambda_cut=model["lambda_cut"],
        mu_cut=model["mu_cut"],
        outer_bc=obc,
        quadrature=Quadrature(
            r_min=solver["r_min"], points_per_panel=solver["points_per_panel"], panel_ratio=solver["panel_ratio"]
        ),
        tol=Tolerances(root=solver["root_tol"]),
    )
    validate_config(cfg)
    return ParsedConfig(cfg, cond, outer, solver, dict(raw))


def build_condition(parsed: ParsedConfig):
    cfg, c = parsed.cfg, parsed.condition
    d = cfg.fiber_dim
    kind = c["kind"]
    if kind == "APS":
        return make_aps(cfg)
    if kind == "APS+L":
        if c["kernel"] is None:
            raise InvalidConfig("condition.kind = aps+l needs condition.kernel")
        return make_aps(cfg, kernel=c["kernel"])
    if kind == "BagPlus":
        return make_bag(+1, d)
    if kind == "BagMinus":
        return make_bag(-1, d)
    if kind == "Minimal":
        return make_minimal(d)
    if kind == "Maximal":
        return make_maximal(d)
    if kind == "Calderon":
        return calderon_condition(cfg)
    if c["vector"] is None:
        raise InvalidConfig("condition.kind = local needs condition.vector")
    V = np.asarray(c["vector"])
    if V.shape[0] != 2 * d:
        raise InvalidConfig(f"condition.vector must have {2 * d} entries")
    return make_local(V, d)


# ---------------------------------------------------------------- output


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    if isinstance(x, (complex, np.complexfloating)):
        x = complex(x)
        return f"{x.real:.17g}" if x.imag == 0 else f"{x.real:.17g}{x.imag:+.17g}j"
    return str(x)


def render_csv(parsed, anchor, header, rows):
    buf = io.StringIO()
    buf.write(f"# ramified-dirac {__version__}\n")
    buf.write(f"# config {parsed.digest()}\n")
    buf.write(f"# anchor {anchor}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def write_atomic(path, text):
    """Write through a temporary file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".csv")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------- commands


def _window(parsed):
    k = parsed.solver["kappa_max"]
    return (-k, k)


def cmd_spectrum(parsed, args, emit):
    spec = assemble_spectrum(parsed.cfg, build_condition(parsed), _window(parsed))
    emit("spectrum", "spectrum of the model operator", ("kappa", "lambda", "mu", "mult", "method"), spec.to_rows())
    print(f"{len(spec.entries)} eigenvalues in {spec.window}; {len(spec.skipped)} modes skipped")
    return 0


def cmd_index(parsed, args, emit):
    cfg = parsed.cfg
    R = build_condition(parsed)
    ind = fredholm_delta_index(R, calderon_family(cfg), cfg)
    emit("index", "index from the Calderon pair", ("condition", "index"), [(R.kind, ind)])
    print(ind)
    return 0


def cmd_weyl(parsed, args, emit):
    spec = assemble_spectrum(parsed.cfg, build_condition(parsed), _window(parsed))
    res = weyl_check(spec, parsed.solver["weyl_k"])
    emit("weyl", "Weyl-type counting bound", ("Lambda", "N", "ratio"), res["table"])
    print(f"sup N/<Lambda>^{2 * parsed.solver['weyl_k']} = {res['sup_ratio']:.6g}")
    return 0


def cmd_heat(parsed, args, emit):
    modes = enumerate_modes(parsed.cfg)
    if parsed.solver["heat_sector"] == "residual":
        modes = [m for m in modes if m.lam == -0.5]
    spec = assemble_spectrum(parsed.cfg, build_condition(parsed), _window(parsed), modes)
    plus, minus = graded_spectra(spec, ChiralityOperator.default(parsed.cfg.fiber_dim))
    rows = []
    for t in parsed.solver["heat_times"]:
        val, tail = heat_supertrace(plus, minus, t, parsed.solver["tail_bound"])
        rows.append((t, val, tail))
    emit("heat", "heat supertrace of the graded square", ("t", "supertrace", "tail_bound"), rows)
    return 0


def cmd_hardy(parsed, args, emit):
    rows = []
    for M in parsed.solver["hardy_cutoffs"]:
        for periodic in (False, True):
            h = hardy_verify(int(M), periodic=periodic)
            rows.append((int(M), periodic, h["ratio"], h["best_constant_estimate"], h["bounded"]))
    emit("hardy", "Hardy constant on antiperiodic sections", ("M", "periodic", "ratio", "constant", "bounded"), rows)
    return 0


def cmd_expand(parsed, args, emit):
    cfg = parsed.cfg.with_(mu_cut=min(parsed.cfg.mu_cut, parsed.solver["expand_mu_max"]))
    R = build_condition(parsed)
    rows = []
    for mode in enumerate_modes(cfg):
        R_mode = R.subspace(mode.mu) if mode.lam == -0.5 else None
        if R_mode is not None and R_mode.shape[1] != cfg.fiber_dim:
            continue
        roots = eigenvalues_in_window(mode, R_mode, cfg.outer_bc, _window(parsed), cfg.tol.root)
        for kappa, _ in sorted(roots, key=lambda t: abs(t[0]))[: parsed.solver["expand_count"]]:
            for j, phi in enumerate(eigenfunction(mode, R_mode, cfg.outer_bc, kappa)):
                table, rel = untwist_coefficients(phi)
                for (k, l), vec in sorted(table.coefficients.items()):
                    for i, c in enumerate(np.atleast_1d(vec)):
                        rows.append((mode.lam, mode.mu, kappa, j, k, l, i, c, rel))
    emit(
        "expand",
        "expansion after removing the half-power twist",
        ("lambda", "mu", "kappa", "eigenfunction", "k", "l", "component", "coefficient", "half_power_residual"),
        rows,
    )
    return 0


def _run_suites(names, parsed, emit):
    failed = []
    for name in names:
        res = run_suite(name)
        print(f"[{name}] {res.claim}")
        for c in res.checks:
            print(f"  {c.line()}")
        print(f"  => {'PASS' if res.passed else 'FAIL'} {name}")
        emit(f"verify_{name}", res.claim, res.header, res.rows)
        if not res.passed:
            failed.extend(f"{name}: {c.name}" for c in res.checks if not c.ok)
    if failed:
        print("failed: " + "; ".join(failed))
        return 1
    return 0


def cmd_green(parsed, args, emit):
    return _run_suites(["green"], parsed, emit)


def cmd_verify(parsed, args, emit):
    suite = args.suite or parsed.solver["suite"]
    names = list(SUITES) if suite == "all" else [suite]
    for n in names:
        if n not in SUITES:
            raise InvalidConfig(f"unknown suite {n!r}; choose from all, {', '.join(SUITES)}")
    return _run_suites(names, parsed, emit)


HANDLERS = {
    "spectrum": cmd_spectrum,
    "index": cmd_index,
    "green": cmd_green,
    "weyl": cmd_weyl,
    "heat": cmd_heat,
    "verify": cmd_verify,
    "hardy": cmd_hardy,
    "expand": cmd_expand,
}

CONFIG_ERRORS = (ParseError, InvalidConfig, DimensionMismatch, NotLagrangian, NotEpsInvariant)


def build_parser():
    p = argparse.ArgumentParser(prog="ramified-dirac", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("-c", "--config", help="configuration file (defaults apply when omitted)")
    p.add_argument("-o", "--output", default=".", help="output directory for CSV files")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--suite", help="verify: suite name or 'all'")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return p


def run(argv=None):
    args = build_parser().parse_args(argv)
    try:
        text = ""
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        parsed = parse_config(text, args.overrides)

        def emit(stem, anchor, header, rows):
            write_atomic(os.path.join(args.output, f"{stem}.csv"), render_csv(parsed, anchor, header, rows))

        return HANDLERS[args.command](parsed, args, emit)
    except CONFIG_ERRORS as exc:
        print(f"configuration error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except RamifiedDiracError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
