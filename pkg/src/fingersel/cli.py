"""Command-line front end.

``fingersel sweep`` runs a Monte Carlo sweep and writes ``results.csv`` and
``results.svg``; ``fingersel single`` runs every method on one scenario and
prints the chosen finger sets. Both read a JSON run configuration that is
schema-validated before anything is computed.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import io
import json
import os
import re
import sys

import jsonschema
import numpy as np

from . import __version__
from .ga import GaConfig
from .model import SystemConfig
from .sim import (
    METHODS,
    PROFILES,
    SweepSpec,
    make_scenario,
    profile_energies,
    run_sweep,
    run_trial,
    ga_rng,
)
from .sinr import build_qp_data

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

_POS_INT = {"type": "integer", "minimum": 1}
_NONNEG_NUM = {"type": "number", "minimum": 0}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "fingersel run configuration",
    "type": "object",
    "additionalProperties": False,
    "required": ["system", "sweep"],
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "workers": _POS_INT,
        "exhaustive_budget": _POS_INT,
        "system": {
            "type": "object",
            "additionalProperties": False,
            "required": ["K", "L", "M", "Nc"],
            "properties": {
                "K": _POS_INT,
                "L": _POS_INT,
                "M": _POS_INT,
                "Nc": _POS_INT,
                "NT": _POS_INT,
                "decay": _NONNEG_NUM,
                "shadow_var": _NONNEG_NUM,
                "profile": {"enum": list(PROFILES)},
                "e1": {"type": "number", "exclusiveMinimum": 0},
                "interferer_gain_db": {"type": "number"},
                "energies": {"type": "array", "items": _NONNEG_NUM, "minItems": 1},
                "noise_var": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["axis", "values"],
            "properties": {
                "axis": {"enum": ["ebno_db", "M"]},
                "values": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                "trials": _POS_INT,
                "methods": {
                    "type": "array",
                    "items": {"enum": list(METHODS)},
                    "minItems": 1,
                    "uniqueItems": True,
                },
                "ebno_db": {"type": "number"},
            },
        },
        "ga": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_ipop": _POS_INT,
                "n_pop": _POS_INT,
                "n_good": _POS_INT,
                "n_mut": {"type": "integer", "minimum": 0},
                "n_iter": {"type": "integer", "minimum": 0},
            },
        },
    },
}


class ConfigError(ValueError):
    """A configuration problem, with the offending line when known."""

    def __init__(self, path, message, line=None):
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")
        self.line = line


@dataclasses.dataclass(frozen=True)
class RunConfig:
    spec: SweepSpec
    seed: int
    workers: int
    sha256: str
    path: str


def _locate(text: str, keys) -> int:
    """Best-effort line number of a JSON path given as its object keys."""
    pos = 0
    for key in keys:
        m = re.compile(r'"%s"\s*:' % re.escape(str(key))).search(text, pos)
        if m is None:
            break
        pos = m.start()
    return text.count("\n", 0, pos) + 1


def load_config(path, seed=None, methods=None, trials=None) -> RunConfig:
    """Read, validate and assemble a run configuration.

    ``seed``, ``methods`` and ``trials`` override the file's values.

    Raises
    ------
    ConfigError
        On unreadable files, malformed JSON, schema violations or
        inconsistent parameters.
    """
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as err:
        raise ConfigError(path, f"cannot read config: {err.strerror}") from None
    text = raw.decode("utf-8", errors="replace")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(path, f"invalid JSON: {err.msg} (column {err.colno})", err.lineno) from None
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errs = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errs:
        e = errs[0]
        keys = [k for k in e.absolute_path if isinstance(k, str)]
        if e.validator == "additionalProperties":
            extra = sorted(set(e.instance) - set(e.schema.get("properties", {})))
            keys = keys + extra[:1]
        loc = "/".join(map(str, e.absolute_path)) or "<root>"
        raise ConfigError(path, f"{loc}: {e.message}", _locate(text, keys))

    system = doc["system"]
    try:
        K = system["K"]
        if "energies" in system:
            if "profile" in system or "interferer_gain_db" in system:
                raise ValueError("give either 'energies' or 'profile', not both")
            energies = tuple(system["energies"])
        else:
            energies = profile_energies(
                K,
                system.get("profile", "equal"),
                system.get("e1", 1.0),
                system.get("interferer_gain_db", 10.0),
            )
        base = SystemConfig(
            K=K,
            L=system["L"],
            M=system["M"],
            Nc=system["Nc"],
            energies=energies,
            noise_var=system.get("noise_var", 1.0),
            NT=system.get("NT"),
            decay=system.get("decay", 0.1),
            shadow_var=system.get("shadow_var", 0.5),
        )
    except ValueError as err:
        raise ConfigError(path, f"system: {err}", _locate(text, ["system"])) from None

    sweep = doc["sweep"]
    if methods is None:
        methods = sweep.get("methods", list(METHODS))
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ConfigError(path, f"unknown methods {unknown}; choose from {list(METHODS)}")
    try:
        ga = GaConfig(**doc.get("ga", {}))
    except ValueError as err:
        raise ConfigError(path, f"ga: {err}", _locate(text, ["ga"])) from None
    try:
        spec = SweepSpec(
            base=base,
            axis=sweep["axis"],
            values=tuple(sweep["values"]),
            trials=trials if trials is not None else sweep.get("trials", 500),
            methods=tuple(methods),
            ga=ga,
            ebno_db=sweep.get("ebno_db"),
            exhaustive_budget=doc.get("exhaustive_budget", 2_000_000),
        )
    except ValueError as err:
        raise ConfigError(path, f"sweep: {err}", _locate(text, ["sweep"])) from None
    if spec.axis == "M" and spec.ebno_db is None and "noise_var" not in system:
        raise ConfigError(path, "sweep over M needs sweep.ebno_db or system.noise_var",
                          _locate(text, ["sweep"]))
    if seed is None:
        seed = doc.get("seed", 0)
    return RunConfig(spec, int(seed), int(doc.get("workers", 1)),
                     hashlib.sha256(raw).hexdigest(), str(path))


def metadata_line(run: RunConfig) -> str:
    return (
        f"fingersel {__version__} config_sha256={run.sha256} seed={run.seed} "
        "ebno_convention=noise_var=e1*10^(-ebno_db/10)"
    )


def _fmt(v) -> str:
    return format(float(v), ".12g")


def results_csv(result, run: RunConfig) -> str:
    buf = io.StringIO()
    buf.write(f"# {metadata_line(run)}\n")
    buf.write("axis,method,mean_sinr_db,stderr_db,trials,failures\n")
    for r in result.rows:
        buf.write(f"{_fmt(r.axis)},{r.method},{_fmt(r.mean_sinr_db)},{_fmt(r.stderr_db)},"
                  f"{r.trials},{r.failures}\n")
    return buf.getvalue()


def results_svg(result, run: RunConfig) -> str:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    spec = result.spec
    # fixed ids and no timestamp keep the file byte-stable
    with matplotlib.rc_context({"svg.hashsalt": "fingersel", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4.5))
        for m in spec.methods:
            ax.plot(spec.values, result.mean_db(m), marker="o", label=m)
        ax.set_xlabel("Eb/N0 (dB)" if spec.axis == "ebno_db" else "M (fingers)")
        ax.set_ylabel("average SINR (dB)")
        ax.grid(True, alpha=0.3)
        ax.legend()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    svg = buf.getvalue()
    head, sep, rest = svg.partition("?>\n")
    comment = f"<!-- {metadata_line(run)} -->\n"
    return head + sep + comment + rest if sep else comment + svg


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def cmd_sweep(args) -> int:
    run = load_config(args.config, args.seed, args.methods, args.trials)
    os.makedirs(args.out, exist_ok=True)
    workers = args.workers if args.workers is not None else run.workers
    result = run_sweep(run.spec, run.seed, workers=workers)
    _write(os.path.join(args.out, "results.csv"), results_csv(result, run))
    _write(os.path.join(args.out, "results.svg"), results_svg(result, run))
    methods = run.spec.methods
    width = max(len(m) for m in methods)
    print(f"{run.spec.axis:>8}  " + "  ".join(f"{m:>{max(width, 9)}}" for m in methods))
    for v in run.spec.values:
        cells = [f"{result.row(v, m).mean_sinr_db:>{max(width, 9)}.3f}" for m in methods]
        print(f"{v:>8g}  " + "  ".join(cells))
    failed = [r for r in result.rows if r.failures]
    for r in failed:
        print(f"warning: {r.method} failed on {r.failures} of {run.spec.trials} trials "
              f"at {run.spec.axis}={r.axis:g}", file=sys.stderr)
    print(f"wrote {args.out}/results.csv and results.svg ({result.elapsed:.1f} s)")
    return EXIT_OK


def _dump_matrix(path, a, header):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    np.savetxt(path, a, delimiter=",", fmt="%.17g", header=header)


def cmd_single(args) -> int:
    run = load_config(args.config, args.seed, args.methods)
    spec = run.spec
    if not 0 <= args.point < len(spec.values):
        raise ConfigError(args.config, f"--point must be in [0, {len(spec.values)})")
    cfg = spec.point_config(spec.values[args.point])
    scen = make_scenario(spec.base, run.seed, args.trial)
    scen = dataclasses.replace(scen, cfg=cfg)
    res = run_trial(scen, spec.methods, spec.ga, ga_rng(run.seed, args.trial, args.point),
                    spec.exhaustive_budget)
    print(f"trial {args.trial}, {spec.axis}={spec.values[args.point]:g} "
          f"(K={cfg.K}, L={cfg.L}, M={cfg.M}, noise_var={cfg.noise_var:.6g})")
    for m in spec.methods:
        if m in res.failures:
            print(f"{m:>12}  FAILED  {res.failures[m]}")
            continue
        s = res.sinr[m]
        print(f"{m:>12}  {str(res.fingers[m]):<24} sinr={s:.12g}  ({10 * np.log10(s):.4f} dB)")
    if args.dump_matrices:
        os.makedirs(args.out, exist_ok=True)
        data = build_qp_data(scen.sig, cfg.e1, cfg.noise_var)
        meta = metadata_line(run) + f" trial={args.trial} point={args.point}"
        _dump_matrix(os.path.join(args.out, "q.csv"), data.q, meta)
        _dump_matrix(os.path.join(args.out, "P.csv"), data.P, meta)
        smai = scen.sig.smai if scen.sig.smai.size else np.zeros((cfg.L, 0))
        with open(os.path.join(args.out, "smai.csv"), "w") as fh:
            fh.write(f"# {meta}\n")
            for row in smai:
                fh.write(",".join(format(v, ".17g") for v in row) + "\n")
        print(f"wrote q.csv, P.csv, smai.csv to {args.out}")
    for m, msg in res.failures.items():
        print(f"warning: {m} failed: {msg}", file=sys.stderr)
    return EXIT_OK


def _method_list(text):
    return [m.strip() for m in text.split(",") if m.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fingersel", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--seed", type=int, help="master seed (overrides the config)")
        sp.add_argument("--methods", type=_method_list,
                        help="comma-separated subset of: " + ",".join(METHODS))

    sw = sub.add_parser("sweep", help="run a Monte Carlo sweep")
    common(sw)
    sw.add_argument("--out", default="out", help="output directory")
    sw.add_argument("--trials", type=int, help="trials per grid point")
    sw.add_argument("--workers", type=int, help="worker processes")
    sw.set_defaults(func=cmd_sweep)

    si = sub.add_parser("single", help="run every method on one scenario")
    common(si)
    si.add_argument("--trial", type=int, default=0, help="trial index")
    si.add_argument("--point", type=int, default=0, help="grid point index")
    si.add_argument("--out", default=".", help="directory for --dump-matrices")
    si.add_argument("--dump-matrices", action="store_true", help="write q, P and S_MAI as CSV")
    si.set_defaults(func=cmd_single)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "seed", None) is not None and args.seed < 0:
        print("error: --seed must be nonnegative", file=sys.stderr)
        return EXIT_CONFIG
    if getattr(args, "trials", None) is not None and args.trials < 1:
        print("error: --trials must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as err:
        print(f"runtime failure: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
