"""Command line front end.

Every subcommand accepts ``--config FILE`` holding flat ``key=value`` lines;
keys are the long flag names with dashes or underscores.  Flags given on the
command line win over the file, the file wins over built-in defaults.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from contextlib import nullcontext
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .flatcore import GridFn, GridSpec, read_gridfn, read_probes, write_gridfn, write_probe_csv
from .geometry import Point
from .starprod import CalibrationError, CalibrationRecord, DeformParams, star_kernel, star_transport, \
    star_unitary, theta_expand
from .transforms import MultiplierSpec

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    seed: int = 0
    n_a: int = 256
    n_ell: int = 256
    box_a: float = 4.0
    box_ell: float = 4.0
    theta: float = 0.5
    thetas: tuple = (0.02, 0.04, 0.06, 0.08, 0.1)
    multiplier: str = "one"
    path: str = "transport"
    instance: str = "regular"
    suite: str = "all"
    samples: int = 100
    u: str | None = None
    v: str | None = None
    probes: str | None = None
    calib: str | None = None
    out: str | None = None
    tol: dict = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        if self.n_a < 16 or self.n_ell < 16:
            raise UsageError("grid sizes must be at least 16")
        if self.n_ell & (self.n_ell - 1):
            raise UsageError("n_ell must be a power of two")
        if self.box_a <= 0 or self.box_ell <= 0:
            raise UsageError("box half-widths must be positive")
        if not self.theta > 0 or any(t <= 0 for t in self.thetas):
            raise UsageError("theta values must be positive")
        if self.samples < 1:
            raise UsageError("samples must be positive")
        if self.path not in ("transport", "kernel", "unitary"):
            raise UsageError(f"unknown product path {self.path!r}")
        if self.instance not in ("trivial", "regular"):
            raise UsageError(f"unknown udf instance {self.instance!r}")
        parse_multiplier(self.multiplier)
        return self

    @property
    def grid(self) -> GridSpec:
        return GridSpec(-self.box_a, self.box_a, self.n_a, -self.box_ell, self.box_ell, self.n_ell)

    def header(self) -> list[str]:
        return [f"curvestar {__version__}", f"seed={self.seed}"]


def parse_multiplier(text: str) -> MultiplierSpec:
    try:
        return MultiplierSpec.parse(text)
    except ValueError as e:
        raise UsageError(f"{e}; use one, unitary or power_cosh:P") from None


def _coerce(name: str, raw: str):
    kinds = {f.name: f.default for f in fields(RunConfig) if f.name != "tol"}
    if name.startswith("tol."):
        return float(raw)
    if name not in kinds:
        raise UsageError(f"unknown config key {name!r}")
    d = kinds[name]
    try:
        if isinstance(d, bool):
            return raw.lower() in ("1", "true", "yes")
        if isinstance(d, int):
            return int(raw)
        if isinstance(d, float):
            return float(raw)
        if isinstance(d, tuple):
            return tuple(float(x) for x in raw.split(",") if x.strip())
    except ValueError:
        raise UsageError(f"bad value for {name}: {raw!r}") from None
    return raw


def read_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read config {path}: {e.strerror}") from None
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        k = k.replace("-", "_")
        out[k] = _coerce(k, v)
    return out


def build_config(ns: argparse.Namespace) -> RunConfig:
    vals = read_config(ns.config) if ns.config else {}
    for f in fields(RunConfig):
        flag = getattr(ns, f.name, None)
        if flag is not None:
            vals[f.name] = flag
    tol = {k[4:]: v for k, v in vals.items() if k.startswith("tol.")}
    for t in getattr(ns, "tol", None) or ():
        k, _, v = t.partition("=")
        tol[k] = _coerce("tol." + k, v)
    vals = {k: v for k, v in vals.items() if not k.startswith("tol.")}
    vals["tol"] = tol
    return RunConfig(**vals).validate()


# -- argument parsing --------------------------------------------------------------

def _floats(s: str) -> tuple:
    try:
        return tuple(float(x) for x in s.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from None


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value file")
    common.add_argument("--seed", type=int)
    common.add_argument("--n-a", dest="n_a", type=int)
    common.add_argument("--n-ell", dest="n_ell", type=int)
    common.add_argument("--box-a", dest="box_a", type=float, help="half-width of the a range")
    common.add_argument("--box-ell", dest="box_ell", type=float, help="half-width of the ell range")
    common.add_argument("--calib", help="calibration record for kernel paths")
    common.add_argument("--out")

    ap = argparse.ArgumentParser(prog="curvestar", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"curvestar {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sub.add_parser("calibrate", parents=[common], help="write the calibration record")

    p = sub.add_parser("verify", parents=[common], help="run acceptance suites")
    p.add_argument("--suite", help="'all', suite names or criterion numbers, comma-separated")
    p.add_argument("--samples", type=int)
    p.add_argument("--tol", action="append", metavar="NAME=VALUE",
                   help="override the tolerance of a check (suite.name or name)")

    inputs = argparse.ArgumentParser(add_help=False)
    inputs.add_argument("--theta", type=float)
    inputs.add_argument("--multiplier", help="one, unitary or power_cosh:P")
    inputs.add_argument("--u", help="GridFn file; default is a Gaussian bump")
    inputs.add_argument("--v", help="GridFn file; default is a Gaussian bump")

    p = sub.add_parser("product", parents=[common, inputs], help="star product at probe points")
    p.add_argument("--probes", help="CSV with probe_a,probe_ell columns")
    p.add_argument("--path", help="transport, kernel or unitary")

    p = sub.add_parser("expand", parents=[common, inputs], help="theta expansion coefficients c0, c1")
    p.add_argument("--thetas", type=_floats)

    p = sub.add_parser("laplacian-check", parents=[common], help="bi-Laplacian symbol table")
    p.add_argument("--samples", type=int)

    p = sub.add_parser("udf", parents=[common, inputs], help="deformed product in an algebra instance")
    p.add_argument("--instance", help="trivial or regular")
    p.add_argument("--probes", help="CSV with probe_a,probe_ell columns")
    return ap


# -- helpers ----------------------------------------------------------------------

def _inputs(cfg: RunConfig) -> tuple[GridFn, GridFn]:
    from .verify import bump_pair
    du, dv = bump_pair(cfg.grid)
    u = _read_grid(cfg.u) if cfg.u else du
    v = _read_grid(cfg.v) if cfg.v else dv
    if u.spec != v.spec:
        raise UsageError("u and v live on different grids")
    return u, v


def _read_grid(path) -> GridFn:
    try:
        return read_gridfn(path)
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def _probes(cfg: RunConfig, spec: GridSpec) -> list[Point]:
    from .verify import probe_set
    if cfg.probes is None:
        return probe_set(spec)
    try:
        return read_probes(cfg.probes)
    except OSError as e:
        raise UsageError(f"cannot read {cfg.probes}: {e.strerror}") from None


def _record(cfg: RunConfig) -> CalibrationRecord:
    if cfg.calib is None:
        from .calibration import calibrate
        print("no --calib given, calibrating in-process", file=sys.stderr)
        return calibrate(cfg.seed)
    try:
        return CalibrationRecord.read(cfg.calib)
    except OSError as e:
        raise UsageError(f"cannot read {cfg.calib}: {e.strerror}") from None


def _write_table(path, header: list[str], rows, comments: list[str]) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _thread_limit():
    raw = os.environ.get("CURVESTAR_THREADS")
    if not raw:
        return nullcontext()
    try:
        n = int(raw)
    except ValueError:
        n = 0
    if n < 1:
        raise UsageError(f"CURVESTAR_THREADS must be a positive integer, got {raw!r}")
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return nullcontext()
    return threadpool_limits(limits=n)


# -- subcommands ------------------------------------------------------------------

def cmd_calibrate(cfg: RunConfig) -> int:
    from .calibration import calibrate
    rec = calibrate(cfg.seed)
    out = Path(cfg.out or "calib.txt")
    out.parent.mkdir(parents=True, exist_ok=True)
    rec.write(out)
    print(f"wrote {out} ({rec.status})")
    return EXIT_OK if rec.status == "calibrated" else EXIT_FAIL


def _suite_names(sel: str) -> list[str]:
    from .verify import CRITERIA, SUITES
    if sel.strip() == "all":
        return list(SUITES)
    names = []
    for tok in (t.strip() for t in sel.split(",") if t.strip()):
        if tok.isdigit() and int(tok) in CRITERIA:
            names.append(CRITERIA[int(tok)])
        elif tok in SUITES:
            names.append(tok)
        else:
            raise UsageError(f"unknown suite {tok!r}; choose from {', '.join(SUITES)} or 1-{len(CRITERIA)}")
    return names


def cmd_verify(cfg: RunConfig) -> int:
    from .verify import ASSERTED, VerifyConfig, run
    names = _suite_names(cfg.suite)
    out = Path(cfg.out or "report")
    vc = VerifyConfig(seed=cfg.seed, samples=cfg.samples, grid=cfg.grid,
                      calib=_record(cfg) if cfg.calib else None)
    timings: dict = {}
    checks = run(names, vc, timings)
    for c in checks:
        key = f"{c.suite}.{c.name}"
        if key in cfg.tol or c.name in cfg.tol:
            c.tol = cfg.tol.get(key, cfg.tol.get(c.name))
    head = ["suite", "check", "kind", "value", "tol", "status", "note"]
    comments = cfg.header() + [f"samples={cfg.samples}", f"grid={cfg.n_a}x{cfg.n_ell}"]
    for n in names:
        _write_table(out / f"{n}.csv", head, [c.row() for c in checks if c.suite == n], comments)
    rows = []
    for n in names:
        mine = [c for c in checks if c.suite == n and c.kind == ASSERTED]
        bad = sum(not c.passed for c in mine)
        rows.append([n, len(mine), len(mine) - bad, bad,
                     sum(c.suite == n and c.kind != ASSERTED for c in checks), f"{timings[n]:.1f}"])
        print(f"{n:12s} {'pass' if not bad else 'FAIL'}  asserted {len(mine) - bad}/{len(mine)}"
              f"  ({timings[n]:.1f} s)")
    _write_table(out / "summary.csv", ["suite", "asserted", "passed", "failed", "reported", "seconds"],
                 rows, comments)
    failed = [c for c in checks if not c.passed]
    for c in failed:
        print(f"  FAIL {c.suite}.{c.name}: {c.value:.3e} > {c.tol:.1e}", file=sys.stderr)
    return EXIT_FAIL if failed else EXIT_OK


def cmd_product(cfg: RunConfig) -> int:
    u, v = _inputs(cfg)
    probes = _probes(cfg, u.spec)
    m = parse_multiplier(cfg.multiplier)
    calib = _record(cfg) if cfg.path != "transport" else None
    p = DeformParams(cfg.theta, m, u.spec, tuple(probes), calib)
    if cfg.path == "transport":
        w = star_transport(u, v, p)
        vals = [w.at(q) for q in probes]
    elif cfg.path == "kernel":
        vals = star_kernel(u, v, p)
    else:
        vals = star_unitary(u, v, p)
    out = cfg.out or "product.csv"
    write_probe_csv(out, probes, vals, cfg.header() + [
        f"path={cfg.path}", f"theta={cfg.theta!r}", f"multiplier={cfg.multiplier}"])
    print(f"wrote {out}")
    return EXIT_OK


def cmd_expand(cfg: RunConfig) -> int:
    u, v = _inputs(cfg)
    ex = theta_expand(u, v, u.spec, parse_multiplier(cfg.multiplier), cfg.thetas)
    out = Path(cfg.out or "expand")
    out.mkdir(parents=True, exist_ok=True)
    meta = {"seed": str(cfg.seed), "multiplier": cfg.multiplier}
    write_gridfn(out / "c0.grid", ex.c0, {**meta, "coefficient": "c0"})
    write_gridfn(out / "c1.grid", ex.c1, {**meta, "coefficient": "c1"})
    _write_table(out / "expand.csv", ["thetas", "degree", "fit_residual", "condition"],
                 [[";".join(repr(float(t)) for t in ex.thetas), ex.degree, f"{ex.fit_residual:.6e}",
                   f"{ex.condition:.6e}"]], cfg.header() + [f"multiplier={cfg.multiplier}"])
    print(f"wrote {out}/c0.grid, c1.grid, expand.csv")
    return EXIT_OK


def cmd_laplacian(cfg: RunConfig) -> int:
    from .geometry import random_points
    from .oscillator import exact_eval, laplacian_identity_check, q_forms_eval
    rng = np.random.default_rng(cfg.seed)
    g1, g2 = random_points(rng, cfg.samples), random_points(rng, cfg.samples)
    ex = exact_eval(g1, g2, 1.0)
    pr = q_forms_eval(g1, g2)
    rows = []
    for i in range(cfg.samples):
        row = [g1.a[i], g1.ell[i], g2.a[i], g2.ell[i]]
        for name in ("Q4", "Q2", "Q3", "c"):
            row += [ex[name][i].real, np.real(pr[name][i])]
        rows.append([f"{x!r}" for x in map(float, row)])
    pairs = [(Point(g1.a[i], g1.ell[i]), Point(g2.a[i], g2.ell[i])) for i in range(cfg.samples)]
    rep = laplacian_identity_check(pairs)
    notes = [f"{k}={v:.6e}" if isinstance(v, float) else f"{k}={v}" for k, v in rep.items()]
    head = ["a1", "l1", "a2", "l2"] + [f"{n}_{w}" for n in ("Q4", "Q2", "Q3", "c") for w in ("exact", "printed")]
    out = cfg.out or "laplacian.csv"
    _write_table(out, head, rows, cfg.header() + notes)
    print(f"wrote {out}; fd_vs_exact={rep['fd_vs_exact']:.2e}")
    return EXIT_OK


def cmd_udf(cfg: RunConfig) -> int:
    from .udf import LeftRegularInstance, TrivialScalarInstance, udf_product
    calib = _record(cfg)
    m = parse_multiplier(cfg.multiplier)
    if cfg.instance == "trivial":
        inst = TrivialScalarInstance(box=cfg.box_a)
        p = DeformParams(cfg.theta, m, cfg.grid, (), calib)
        lam = complex(udf_product(1.0 + 0j, 1.0 + 0j, inst, p))
        out = cfg.out or "udf.csv"
        _write_table(out, ["theta", "re", "im"], [[f"{cfg.theta!r}", f"{lam.real!r}", f"{lam.imag!r}"]],
                     cfg.header() + ["instance=trivial", f"multiplier={cfg.multiplier}"])
        print(f"wrote {out}")
        return EXIT_OK
    u, v = _inputs(cfg)
    inst = LeftRegularInstance(u.spec, calib.udf_orientation)
    p = DeformParams(cfg.theta, m, u.spec, (), calib)
    if cfg.probes is not None:
        probes = _probes(cfg, u.spec)
        vals = udf_product(u, v, inst, p, probes)
        out = cfg.out or "udf.csv"
        write_probe_csv(out, probes, vals, cfg.header() + ["instance=regular"])
    else:
        w = udf_product(u, v, inst, p)
        out = cfg.out or "udf.grid"
        write_gridfn(out, w, {"seed": str(cfg.seed), "instance": "regular"})
    print(f"wrote {out}")
    return EXIT_OK


COMMANDS = {
    "calibrate": cmd_calibrate,
    "verify": cmd_verify,
    "product": cmd_product,
    "expand": cmd_expand,
    "laplacian-check": cmd_laplacian,
    "udf": cmd_udf,
}


def main(argv=None) -> int:
    ap = make_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    try:
        cfg = build_config(ns)
        t0 = time.perf_counter()
        with _thread_limit():
            code = COMMANDS[ns.command](cfg)
        print(f"{ns.command} finished in {time.perf_counter() - t0:.1f} s", file=sys.stderr)
        return code
    except (UsageError, CalibrationError, ValueError) as e:
        print(f"curvestar: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
