"""Command-line driver: read a problem file, sweep the relaxation order, report bounds.

Problem files are YAML::

    vars: [x, y, z]
    objective: "x"
    constraints:            # each entry means g(x) >= 0
      - "x - y^2 - z^2"
    options:                # all optional
      mode: critical        # or gradient (unconstrained problems only)
      dmin: 1
      dmax: 3
      tolerances: {feas: 1e-8, gap: 1e-8, eig: 1e-7, cert: 1e-5, conv: 1e-6}
      minimizers: [[0, 0, 0]]

Settings are resolved as command-line flag, then ``CRITSOS_*`` environment
variable, then the file's ``options`` block, then the built-in default.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .certify import (
    EIG_CUT, BhcTolerances, Certificate, check_bhc, dump_certificate, extract_certificate,
    verify_certificate,
)
from .critical import ConstraintCapError, Problem, generators_for, is_critical_point
from .parsing import PolySyntaxError, parse_poly
from .sdpsolve import UNBOUNDED_DIAGNOSTIC, SolverSettings, Status, export_sdpa, solve
from .sosrelax import assemble_relaxation

log = logging.getLogger(__name__)

ENV_PREFIX = "CRITSOS_"
CONV_TOL = 1e-6
CERT_TOL = 1e-5

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_ALL_FAILED = 2
EXIT_UNBOUNDED = 3

MODES = ("critical", "gradient")


# -- problem files ---------------------------------------------------------------

class ProblemFileError(ValueError):
    """Input error; ``line`` and ``column`` are 1-based when known."""

    def __init__(self, message: str, path: str = "<input>", line: int | None = None,
                 column: int | None = None):
        self.message = message
        self.path = path
        self.line = line
        self.column = column
        where = path if line is None else f"{path}:{line}:{column}"
        super().__init__(f"{where}: {message}")


@dataclass
class ProblemFile:
    problem: Problem
    options: dict = field(default_factory=dict)


def _mark(node) -> tuple[int, int]:
    return node.start_mark.line + 1, node.start_mark.column + 1


def _mapping(node, path, what) -> dict:
    if not isinstance(node, yaml.MappingNode):
        raise ProblemFileError(f"{what} must be a mapping", path, *_mark(node))
    out = {}
    for k, v in node.value:
        if not isinstance(k, yaml.ScalarNode):
            raise ProblemFileError("mapping keys must be plain strings", path, *_mark(k))
        if k.value in out:
            raise ProblemFileError(f"duplicate key {k.value!r}", path, *_mark(k))
        out[k.value] = v
    return out


def _sequence(node, path, what) -> list:
    if not isinstance(node, yaml.SequenceNode):
        raise ProblemFileError(f"{what} must be a list", path, *_mark(node))
    return list(node.value)


def _scalar(node, path, what) -> str:
    if not isinstance(node, yaml.ScalarNode):
        raise ProblemFileError(f"{what} must be a single value", path, *_mark(node))
    return node.value


def _poly(node, names, path, what):
    text = _scalar(node, path, what)
    try:
        return parse_poly(text, names)
    except PolySyntaxError as exc:
        line, col = _mark(node)
        # quoted scalars start one column before their content
        offset = 1 if node.style in ("'", '"') else 0
        raise ProblemFileError(f"{what}: {exc.message}", path, line, col + offset + exc.pos) from exc


def _number(node, path, what, kind=float):
    text = _scalar(node, path, what)
    try:
        value = kind(text)
    except ValueError:
        raise ProblemFileError(f"{what} must be a number, got {text!r}", path, *_mark(node)) from None
    if kind is float and not math.isfinite(value):
        raise ProblemFileError(f"{what} must be finite", path, *_mark(node))
    return value


_OPTION_KEYS = {"mode", "dmin", "dmax", "tolerances", "minimizers", "max_iterations"}
TOLERANCE_KEYS = ("feas", "gap", "eig", "eig_cut", "cert", "conv",
                  "bhc_f", "bhc_act", "bhc_rank", "bhc_res", "bhc_pos", "bhc_pd")


def parse_problem_text(text: str, path: str = "<input>") -> ProblemFile:
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line, col = (mark.line + 1, mark.column + 1) if mark else (None, None)
        raise ProblemFileError(f"YAML syntax error: {getattr(exc, 'problem', exc)}", path, line, col) from exc
    if root is None:
        raise ProblemFileError("empty problem file", path)
    top = _mapping(root, path, "problem file")
    for key, node in top.items():
        if key not in {"vars", "objective", "constraints", "options"}:
            raise ProblemFileError(f"unknown key {key!r}", path, *_mark(node))
    for key in ("vars", "objective"):
        if key not in top:
            raise ProblemFileError(f"missing required key {key!r}", path, *_mark(root))

    names = []
    for v in _sequence(top["vars"], path, "vars"):
        name = _scalar(v, path, "variable name")
        if name in names:
            raise ProblemFileError(f"duplicate variable name {name!r}", path, *_mark(v))
        if not name.isidentifier():
            raise ProblemFileError(f"invalid variable name {name!r}", path, *_mark(v))
        names.append(name)
    if not names:
        raise ProblemFileError("vars must list at least one variable", path, *_mark(top["vars"]))
    f = _poly(top["objective"], names, path, "objective")
    gs = []
    if "constraints" in top and not (isinstance(top["constraints"], yaml.ScalarNode)
                                     and top["constraints"].tag.endswith(":null")):
        for i, g in enumerate(_sequence(top["constraints"], path, "constraints"), 1):
            gs.append(_poly(g, names, path, f"constraint {i}"))
    try:
        problem = Problem(tuple(names), f, tuple(gs))
    except ConstraintCapError as exc:
        raise ProblemFileError(str(exc), path, *_mark(top["constraints"])) from exc

    options: dict = {}
    if "options" in top:
        opts = _mapping(top["options"], path, "options")
        for key, node in opts.items():
            if key not in _OPTION_KEYS:
                raise ProblemFileError(f"unknown option {key!r}", path, *_mark(node))
        if "mode" in opts:
            mode = _scalar(opts["mode"], path, "mode")
            if mode not in MODES:
                raise ProblemFileError(f"mode must be one of {MODES}, got {mode!r}", path, *_mark(opts["mode"]))
            options["mode"] = mode
        for key in ("dmin", "dmax", "max_iterations"):
            if key in opts:
                options[key] = _number(opts[key], path, key, int)
        if "tolerances" in opts:
            tol = {}
            for key, node in _mapping(opts["tolerances"], path, "tolerances").items():
                if key not in TOLERANCE_KEYS:
                    raise ProblemFileError(f"unknown tolerance {key!r}", path, *_mark(node))
                tol[key] = _number(node, path, f"tolerance {key}")
            options["tolerances"] = tol
        if "minimizers" in opts:
            pts = []
            for pnode in _sequence(opts["minimizers"], path, "minimizers"):
                coords = [_number(c, path, "minimizer coordinate") for c in _sequence(pnode, path, "minimizer")]
                if len(coords) != problem.n:
                    raise ProblemFileError(
                        f"minimizer has {len(coords)} coordinates, expected {problem.n}", path, *_mark(pnode))
                pts.append(coords)
            options["minimizers"] = pts
    return ProblemFile(problem, options)


def load_problem(path) -> ProblemFile:
    path = str(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ProblemFileError(f"cannot read file: {exc.strerror or exc}", path) from exc
    return parse_problem_text(text, path)


# -- hierarchy --------------------------------------------------------------------

@dataclass
class HierarchyRow:
    d: int
    status: str
    bound: float | None
    solve_time: float
    block_dims: list
    num_free: int
    num_rows: int
    iterations: int = 0
    message: str = ""
    certificate: Certificate | None = None
    certificate_residual: float | None = None
    certificate_passed: bool | None = None
    sdpa_path: str | None = None


@dataclass
class HierarchyResult:
    mode: str
    rows: list
    conv_tol: float
    stabilized: bool = False
    stabilized_at: int | None = None
    monotone: bool = True
    diagnostics: list = field(default_factory=list)

    @property
    def bounds(self) -> list:
        return [(r.d, r.bound) for r in self.rows if r.status == Status.OPTIMAL.value]

    @property
    def best(self) -> HierarchyRow | None:
        ok = [r for r in self.rows if r.status == Status.OPTIMAL.value]
        return ok[-1] if ok else None


def default_dmin(problem: Problem) -> int:
    return max(1, math.ceil(problem.f.degree() / 2))


def run_hierarchy(problem: Problem, mode: str = "critical", d_min: int | None = None,
                  d_max: int | None = None, settings: SolverSettings | None = None,
                  conv_tol: float = CONV_TOL, cert_tol: float = CERT_TOL, eig_cut: float = EIG_CUT,
                  export_dir: str | os.PathLike | None = None, stop_early: bool = True) -> HierarchyResult:
    """Solve the relaxations for ``d = d_min .. d_max`` and collect bounds and certificates.

    Stops after two consecutive optimal bounds agree within ``conv_tol``
    when ``stop_early`` is set.  Solver trouble is recorded per row and never
    ends the sweep.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    settings = settings or SolverSettings()
    lo = default_dmin(problem)
    d_min = lo if d_min is None else d_min
    d_max = d_min + 4 if d_max is None else d_max
    if d_min < lo:
        raise ValueError(f"d_min = {d_min} is below ceil(deg f / 2) = {lo}")
    if d_max < d_min:
        raise ValueError("d_max must be at least d_min")
    generators = generators_for(problem, mode)
    if export_dir is not None:
        Path(export_dir).mkdir(parents=True, exist_ok=True)

    result = HierarchyResult(mode, [], conv_tol)
    prev = None
    for d in range(d_min, d_max + 1):
        t0 = time.perf_counter()
        relax = assemble_relaxation(problem, generators, d)
        sdp = relax.sdp
        row = HierarchyRow(d, "", None, 0.0, list(sdp.block_dims), sdp.num_free, sdp.num_rows)
        if export_dir is not None:
            target = Path(export_dir) / f"relaxation_d{d}.dat-s"
            target.write_text(export_sdpa(sdp))
            row.sdpa_path = str(target)
        sol = solve(sdp, settings)
        row.solve_time = time.perf_counter() - t0
        row.status = sol.status.value
        row.iterations = sol.iterations
        row.message = sol.message
        if sol.status is Status.OPTIMAL:
            row.bound = float(sol.objective)
            cert = extract_certificate(sol, relax, eig_cut)
            check = verify_certificate(problem, cert, cert_tol)
            row.certificate = cert
            row.certificate_residual = check.max_residual
            row.certificate_passed = check.passed
        elif sol.status is Status.UNBOUNDED:
            result.diagnostics.append(
                f"d={d}: {UNBOUNDED_DIAGNOSTIC}; the infimum of f on K is probably not attained"
            )
        result.rows.append(row)
        log.info("d=%d status=%s bound=%s (%.2fs)", d, row.status, row.bound, row.solve_time)

        if row.bound is not None:
            if prev is not None and abs(row.bound - prev.bound) <= conv_tol and not result.stabilized:
                result.stabilized = True
                result.stabilized_at = prev.d
            prev = row
            if result.stabilized and stop_early:
                break

    bounds = [b for _, b in result.bounds]
    result.monotone = all(b2 >= b1 - 10 * settings.gap_tol for b1, b2 in zip(bounds, bounds[1:]))
    return result


# -- reporting --------------------------------------------------------------------

def _fmt_bound(b) -> str:
    return "-" if b is None else f"{b:.10g}"


def report(result: HierarchyResult, format: str = "table", bhc: list | None = None) -> str:
    """Render ``result`` as a text table or as JSON (``format="structured"``)."""
    bhc = bhc or []
    if format == "structured":
        doc = {
            "mode": result.mode,
            "conv_tol": result.conv_tol,
            "stabilized": result.stabilized,
            "stabilized_at": result.stabilized_at,
            "stabilization_is_heuristic": True,
            "monotone": result.monotone,
            "diagnostics": list(result.diagnostics),
            "rows": [
                {
                    "d": r.d,
                    "status": r.status,
                    "bound": r.bound,
                    "solve_time": r.solve_time,
                    "block_dims": r.block_dims,
                    "num_free": r.num_free,
                    "num_rows": r.num_rows,
                    "iterations": r.iterations,
                    "message": r.message,
                    "certificate_residual": r.certificate_residual,
                    "certificate_passed": r.certificate_passed,
                    "sdpa_path": r.sdpa_path,
                    "certificate": dump_certificate(r.certificate) if r.certificate else None,
                }
                for r in result.rows
            ],
            "bhc": bhc,
        }
        return json.dumps(doc, indent=2)
    if format != "table":
        raise ValueError("format must be 'table' or 'structured'")

    header = ["d", "status", "f*_d", "time[s]", "blocks", "free", "rows", "cert"]
    lines = []
    for r in result.rows:
        cert = "-" if r.certificate_passed is None else (
            f"{'ok' if r.certificate_passed else 'FAIL'} {r.certificate_residual:.1e}")
        lines.append([str(r.d), r.status, _fmt_bound(r.bound), f"{r.solve_time:.2f}",
                      "x".join(map(str, r.block_dims)) or "-", str(r.num_free), str(r.num_rows), cert])
    widths = [max(len(h), *(len(ln[i]) for ln in lines)) if lines else len(h) for i, h in enumerate(header)]
    out = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    out.append("  ".join("-" * w for w in widths))
    out.extend("  ".join(c.ljust(w) for c, w in zip(ln, widths)) for ln in lines)
    out.append("")
    out.append(f"mode: {result.mode}")
    if result.stabilized:
        out.append(f"stabilized at d={result.stabilized_at} (|f*_(d+1) - f*_d| <= {result.conv_tol:g}; heuristic)")
    else:
        out.append("not stabilized within the requested range")
    out.append(f"monotone: {'yes' if result.monotone else 'NO'}")
    for diag in result.diagnostics:
        out.append(f"diagnostic: {diag}")
    for entry in bhc:
        line = f"BHC at ({', '.join(f'{v:g}' for v in entry['point'])}): {entry['verdict']}"
        if entry.get("reason"):
            line += f" ({entry['reason']})"
        out.append(line)
    return "\n".join(out) + "\n"


def exit_code(result: HierarchyResult) -> int:
    if any(r.status == Status.UNBOUNDED.value for r in result.rows):
        return EXIT_UNBOUNDED
    if not any(r.status == Status.OPTIMAL.value for r in result.rows):
        return EXIT_ALL_FAILED
    return EXIT_OK


# -- argument handling ------------------------------------------------------------

_TOL_FLAGS = {
    "feas": "primal/dual feasibility tolerance of the SDP solver",
    "gap": "relative duality gap tolerance",
    "eig": "eigenvalue tolerance for PSD blocks",
    "eig_cut": "eigenvalue cutoff when extracting SOS terms",
    "cert": "certificate verification tolerance (relative to ||f||)",
    "conv": "stabilization tolerance on successive bounds",
    "bhc_f": "BHC: tolerance on f(point) - bound",
    "bhc_act": "BHC: active-constraint tolerance",
    "bhc_rank": "BHC: smallest singular value for regularity",
    "bhc_res": "BHC: stationarity residual tolerance",
    "bhc_pos": "BHC: positivity threshold for multipliers",
    "bhc_pd": "BHC: positive-definiteness threshold for the reduced Hessian",
}

_DEFAULT_TOLS = {
    "feas": 1e-8, "gap": 1e-8, "eig": 1e-7, "eig_cut": EIG_CUT, "cert": CERT_TOL, "conv": CONV_TOL,
    "bhc_f": 1e-6, "bhc_act": 1e-8, "bhc_rank": 1e-8, "bhc_res": 1e-6, "bhc_pos": 1e-8, "bhc_pd": 1e-8,
}


def _point(text: str) -> list:
    try:
        return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="critsos",
        description="Lower bounds for polynomial minimisation from SOS relaxations "
                    "modulo the critical ideal.",
        epilog=f"Every option can also be set through an environment variable: "
               f"{ENV_PREFIX}MODE, {ENV_PREFIX}DMIN, {ENV_PREFIX}TOL_FEAS, and so on.",
    )
    p.add_argument("problem", help="YAML problem file")
    p.add_argument("--mode", choices=MODES, default=None)
    p.add_argument("--dmin", type=int, default=None, help="first relaxation order (default ceil(deg f / 2))")
    p.add_argument("--dmax", type=int, default=None, help="last relaxation order (default dmin + 4)")
    p.add_argument("--max-iterations", type=int, default=None)
    for key, text in _TOL_FLAGS.items():
        p.add_argument(f"--tol-{key.replace('_', '-')}", dest=f"tol_{key}", type=float, default=None, help=text)
    p.add_argument("--export-sdpa", metavar="DIR", default=None, help="write one .dat-s file per level")
    p.add_argument("--certificate", metavar="PATH", default=None,
                   help="write the certificate of the last optimal level")
    p.add_argument("--check-bhc", metavar="X1,...,XN", type=_point, action="append", default=None,
                   help="check the boundary Hessian conditions at this point (repeatable)")
    p.add_argument("--format", choices=("table", "structured"), default=None)
    p.add_argument("--no-early-stop", action="store_true", help="solve every level in the range")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def _env(name: str):
    return os.environ.get(ENV_PREFIX + name.upper())


def _resolve(args, pf: ProblemFile) -> dict:
    """Merge flag > environment > problem-file option > default."""
    opts = pf.options
    file_tols = opts.get("tolerances", {})

    def pick(flag_value, env_name, file_value, default, kind):
        if flag_value is not None:
            return flag_value
        raw = _env(env_name)
        if raw is not None:
            try:
                return kind(raw)
            except ValueError:
                raise ProblemFileError(f"environment variable {ENV_PREFIX}{env_name.upper()} "
                                       f"has invalid value {raw!r}") from None
        return file_value if file_value is not None else default

    mode = pick(args.mode, "mode", opts.get("mode"), "critical", str)
    if mode not in MODES:
        raise ProblemFileError(f"mode must be one of {MODES}, got {mode!r}")
    cfg = {
        "mode": mode,
        "dmin": pick(args.dmin, "dmin", opts.get("dmin"), None, int),
        "dmax": pick(args.dmax, "dmax", opts.get("dmax"), None, int),
        "max_iterations": pick(args.max_iterations, "max_iterations", opts.get("max_iterations"), 200, int),
        "export_sdpa": pick(args.export_sdpa, "export_sdpa", None, None, str),
        "certificate": pick(args.certificate, "certificate", None, None, str),
        "format": pick(args.format, "format", None, "table", str),
        "tol": {k: pick(getattr(args, f"tol_{k}"), f"tol_{k}", file_tols.get(k), v, float)
                for k, v in _DEFAULT_TOLS.items()},
    }
    if cfg["format"] not in ("table", "structured"):
        raise ProblemFileError(f"format must be table or structured, got {cfg['format']!r}")
    points = list(args.check_bhc or [])
    env_pts = _env("check_bhc")
    if not points and env_pts:
        points = [_point(t) for t in env_pts.split("|")]
    cfg["bhc_points"] = points + list(opts.get("minimizers", []))
    return cfg


def _bhc_entries(problem: Problem, points, level, tol: dict) -> list:
    tols = BhcTolerances(tol["bhc_f"], tol["bhc_act"], tol["bhc_rank"], tol["bhc_res"],
                         tol["bhc_pos"], tol["bhc_pd"])
    out = []
    for pt in points:
        if len(pt) != problem.n:
            raise ProblemFileError(f"BHC point {pt} has {len(pt)} coordinates, expected {problem.n}")
        rep = check_bhc(problem, pt, tols, level=level)
        crit = is_critical_point(problem, pt, tol=max(tol["bhc_res"], 1e-8))
        out.append({
            "point": [float(v) for v in pt],
            "level": level,
            "verdict": rep.verdict,
            "reason": rep.reason,
            "active": list(rep.active),
            "regular": rep.regular,
            "multipliers": [float(v) for v in rep.multipliers],
            "reduced_hessian_min_eig": rep.reduced_hessian_min_eig,
            "critical_point": bool(crit),
        })
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(message)s")
    try:
        pf = load_problem(args.problem)
        cfg = _resolve(args, pf)
        tol = cfg["tol"]
        settings = SolverSettings(feas_tol=tol["feas"], gap_tol=tol["gap"], eig_tol=tol["eig"],
                                  max_iterations=cfg["max_iterations"], verbosity=max(0, args.verbose - 1))
        if cfg["mode"] == "gradient" and pf.problem.s:
            raise ProblemFileError("gradient mode needs an unconstrained problem")
        result = run_hierarchy(pf.problem, cfg["mode"], cfg["dmin"], cfg["dmax"], settings,
                               conv_tol=tol["conv"], cert_tol=tol["cert"], eig_cut=tol["eig_cut"],
                               export_dir=cfg["export_sdpa"], stop_early=not args.no_early_stop)
    except (ProblemFileError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    best = result.best
    try:
        bhc = []
        for pt in cfg["bhc_points"]:
            level = best.bound if best is not None else float(pf.problem.f(pt))
            bhc.extend(_bhc_entries(pf.problem, [pt], level, tol))
    except ProblemFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print(report(result, cfg["format"], bhc), end="")

    if cfg["certificate"]:
        if best is None or best.certificate is None:
            print("warning: no optimal level, certificate not written", file=sys.stderr)
        else:
            Path(cfg["certificate"]).write_text(dump_certificate(best.certificate))
    return exit_code(result)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
