"""Command-line driver: ``grushin <command> [--config FILE] [overrides]``.

Exit codes: 0 every check passed, 1 a check failed, 2 bad configuration,
3 a required field artifact is missing.
"""

from __future__ import annotations

import argparse
import filecmp
import os
import shutil
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__, checks
from .config import ConfigError, build_config, parse_config
from .errors import PreconditionError
from .fields import catalog
from .functionals import dumps, kappa_normalize, monotonicity_check, trace
from .grid import GridField

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_MISSING = 0, 1, 2, 3

TIMING_SUFFIX = ".timing.json"


class MissingArtifact(Exception):
    pass


def write_atomic(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(rep: checks.RunReport, out: Path, seconds: float):
    write_atomic(out / f"{rep.command}.json", dumps(rep.as_dict()))
    for name, content in sorted(rep.files.items()):
        write_atomic(out / name, content if isinstance(content, str) else dumps(content))
    # wall time lives beside the report so the report itself stays reproducible
    write_atomic(out / f"{rep.command}{TIMING_SUFFIX}", dumps({"command": rep.command,
                                                               "wall_time_s": seconds}))


def _summary(rep: checks.RunReport, stream=sys.stdout):
    for v in rep.verdicts:
        print(f"{rep.command:13s} {v.status}  {v.name}: {v.reason}", file=stream)


def _run_check(name, cfg, out: Path, quiet=False) -> checks.RunReport:
    t0 = time.perf_counter()
    rep = checks.CHECKS[name](cfg)
    _emit(rep, out, time.perf_counter() - t0)
    if not quiet:
        _summary(rep)
    return rep


# ----------------------------------------------------------------------------
# tool commands


def cmd_solve(cfg, out: Path) -> checks.RunReport:
    f = checks.solved_field(cfg, 1, normalized=False)
    write_atomic(out / "field.csv", f.to_csv())
    rep = checks.RunReport("solve", checks._echo(cfg))
    rep.check("solve", bool(np.all(np.isfinite(f.values))), "Dirichlet solve finished; wrote field.csv",
              shape=list(f.values.shape), resolution=[cfg.nt, cfg.nphi], grading=cfg.phi_grading)
    return rep


def _load_field(cfg):
    if cfg.field_file:
        path = Path(cfg.field_file)
        if not path.is_file():
            raise MissingArtifact(f"field file {str(path)!r} not found")
        return GridField.from_csv(path)
    if cfg.field == "solve":
        return checks.solved_field(cfg, 1, normalized=False)
    fields = catalog(cfg.params, cfg.kappa)
    if cfg.field not in fields:
        raise ConfigError(f"unknown field {cfg.field!r}; choose 'solve' or one of {sorted(fields)}")
    return fields[cfg.field]


def cmd_functionals(cfg, out: Path) -> checks.RunReport:
    f = _load_field(cfg)
    rep = checks.RunReport("functionals", checks._echo(cfg))
    solution = f.kappa is not None and f.kappa > 0
    if solution and f.kappa != 1.0:
        f = kappa_normalize(f, f.kappa)
    q = f.params.q
    if isinstance(f, GridField):
        t = f.grid.t_nodes
        ts = t[1:-1][:: max(1, (t.size - 2) // 64)]
        eps = 1e-2
    else:
        ts = np.linspace(cfg.t_min, cfg.t_max, 65)
        eps = 1e-3
    ells = list(cfg.ell) if cfg.ell else [(q - 1) / 2, q, q + 3]
    traces = [trace(f, "F", ts, ell) for ell in ells]
    try:
        traces.append(trace(f, "G", ts))
        has_g = True
    except PreconditionError:
        has_g = False
    traces += [trace(f, "flux", ts), trace(f, "surface", ts)]
    rep.files["traces.csv"] = checks._join_csv([tr.to_csv() for tr in traces])
    if not has_g:
        rep.skip("G", "Q < 3")
    if not solution:
        rep.skip("monotonicity", "field is not a Helmholtz solution")
        return rep
    for tr in traces:
        if tr.kind == "F":
            v = monotonicity_check(tr, 3 - q, eps)
            rep.check(f"F ell={tr.ell_or_p:g}", v.passed, f"worst drop {v.worst:.2e}", **v.as_dict())
        elif tr.kind == "G":
            v = monotonicity_check(tr, 1 - q, eps)
            rep.check("G", v.passed, f"worst drop {v.worst:.2e}", **v.as_dict())
    return rep


# ----------------------------------------------------------------------------
# suite and determinism


def run_suite(cfg, out: Path, quiet=False) -> checks.RunReport:
    rep = checks.RunReport("suite", checks._echo(cfg))
    for name in checks.CHECKS:
        sub = _run_check(name, cfg, out, quiet)
        failed = [v.name for v in sub.verdicts if v.status == checks.FAIL]
        rep.check(name, not failed, "all checks passed" if not failed else f"failed: {failed}")
    return rep


def _clear_caches():
    checks._solve.cache_clear()


def _output_files(root: Path):
    return sorted(p.relative_to(root).as_posix() for p in root.rglob("*")
                  if p.is_file() and not p.name.endswith(TIMING_SUFFIX))


def cmd_determinism(cfg, out: Path) -> checks.RunReport:
    rep = checks.RunReport("determinism", checks._echo(cfg))
    runs = [out / "determinism" / "run_a", out / "determinism" / "run_b"]
    for d in runs:
        if d.exists():
            shutil.rmtree(d)
        _clear_caches()
        run_suite(cfg, d, quiet=True)
    a, b = (_output_files(d) for d in runs)
    if a != b:
        rep.check("determinism", False, "the two runs wrote different file sets",
                  only_a=sorted(set(a) - set(b)), only_b=sorted(set(b) - set(a)))
        return rep
    differ = [name for name in a if not filecmp.cmp(runs[0] / name, runs[1] / name, shallow=False)]
    rep.check("determinism", not differ,
              f"{len(a)} files compared byte for byte (timing files excluded)",
              files=a, differing=differ)
    return rep


TOOLS = {"solve": cmd_solve, "functionals": cmd_functionals, "determinism": cmd_determinism,
         "suite": run_suite}


# ----------------------------------------------------------------------------
# argument handling


def _float_list(text):
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got {text!r}") from None


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--alpha", type=float)
    common.add_argument("--m", type=int)
    common.add_argument("--k", type=int)
    common.add_argument("--kappa", type=float)
    common.add_argument("--t-min", dest="t_min", type=float)
    common.add_argument("--t-max", dest="t_max", type=float)
    common.add_argument("--nt", type=int)
    common.add_argument("--nphi", type=int)
    common.add_argument("--ell", type=_float_list)
    common.add_argument("--p", type=_float_list)
    common.add_argument("--s-exponent", dest="s_exponent", type=_float_list)
    common.add_argument("--field", help="catalog field name or 'solve'")
    common.add_argument("--field-file", dest="field_file", help="GridField CSV from 'solve'")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int)

    parser = argparse.ArgumentParser(prog="grushin", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in list(checks.CHECKS) + list(TOOLS):
        sub.add_parser(name, parents=[common])
    return parser


def load_config(args):
    values = {}
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config!r}: {exc.strerror}") from None
        values = parse_config(text, args.config)
    keys = ("alpha", "m", "k", "kappa", "t_min", "t_max", "nt", "nphi", "ell", "p", "s_exponent",
            "field", "field_file", "out", "seed")
    return build_config(values, {k: getattr(args, k) for k in keys})


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage, which matches the config-error code
        return int(exc.code or 0)
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(cfg.out)
    t0 = time.perf_counter()
    try:
        if args.command in checks.CHECKS:
            rep = _run_check(args.command, cfg, out)
            return EXIT_OK if rep.passed else EXIT_FAIL
        rep = TOOLS[args.command](cfg, out)
    except MissingArtifact as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _emit(rep, out, time.perf_counter() - t0)
    _summary(rep)
    return EXIT_OK if rep.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
