"""Command-line front end.

Every command reads a :class:`Config`, writes its artifacts into ``--out`` and
a ``<command>.manifest.json`` next to them.  Artifacts hold no timestamps, so
reruns with the same configuration reproduce them byte for byte.  Exit codes
are 0 on success, 2 for invalid input and 3 for numerical failures; on failure
an error record is printed to stderr as JSON and written to ``error.json``.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import platform
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from .config import Config
from .errors import ConfigError, MissingArtifact, RenormError

SCHEMA_VERSION = 1
MAX_LEVEL = 12
EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3
RUN_KEYS = ("nu", "nu1", "nu2", "level", "out", "fp", "dim")


def _cpx(z) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def _write_json(path: Path, data: dict) -> None:
    data = {"schema_version": SCHEMA_VERSION, **data}
    path.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")


def _versions() -> dict:
    import mpmath

    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"python": platform.python_version(), "numpy": np.__version__,
            "mpmath": mpmath.__version__, "goldenrenorm": pkg}


def _check_run(args) -> None:
    for name in ("nu", "nu1", "nu2"):
        v = getattr(args, name, None)
        if v is not None and not abs(v) < 1:
            raise ConfigError(f"|{name}| must be below 1")
    level = getattr(args, "level", None)
    if level is not None and not 0 <= level <= MAX_LEVEL:
        raise ConfigError(f"level must be between 0 and {MAX_LEVEL}")


def _double_only(cfg: Config) -> None:
    if cfg.extended:
        raise ConfigError("two-variable commands run in double precision only")


def build_config(args) -> Config:
    """Config from flags; a ``--config`` file overrides flags, including run keys."""
    over = {}
    if args.degree is not None:
        over["degree"] = args.degree
    if args.precision is not None:
        over["precision"] = args.precision
    base = {}
    if args.config:
        try:
            base = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(base, dict):
            raise ConfigError("config file must hold a JSON object")
        for k in RUN_KEYS:
            if k in base:
                setattr(args, k, base.pop(k))
    cfg = Config.from_dict({**over, **base})
    env = os.environ.get("RENORM_THREADS")
    if env:
        try:
            cap = int(env)
        except ValueError as exc:
            raise ConfigError("RENORM_THREADS must be an integer") from exc
        if cap < 1:
            raise ConfigError("RENORM_THREADS must be at least 1")
        cfg = cfg.with_(threads=min(cfg.threads, cap))
    _check_run(args)
    return cfg


def _load_fp(args, cfg: Config):
    from .renorm1d import load_fixed_point

    path = Path(args.fp) if args.fp else Path(args.out) / "fixedpoint.json"
    if not path.exists():
        raise MissingArtifact(f"fixed point file {path} not found; run fixed-point first")
    try:
        return load_fixed_point(path, cfg.extended)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"invalid fixed point file {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# commands


def cmd_fixed_point(args, cfg: Config, out: Path) -> list[str]:
    from .renorm1d import C_STAR, fixed_point_residual, newton_fixed_point, quad_renormalized, \
        renormalize1d, save_fixed_point

    seed = quad_renormalized(C_STAR, 6, cfg)
    zstar, lam, res = newton_fixed_point(seed, cfg)
    save_fixed_point(out / "fixedpoint.json", zstar, res)
    raw = renormalize1d(zstar, cfg).distance(zstar)
    g1 = complex(lam) / complex(zstar.eta.deriv()(np.array([1.0 + 0j]))[0])
    _write_json(out / "fixedpoint_check.json", {
        "degree": cfg.degree, "lambda": _cpx(lam), "residual": res,
        "raw_residual": float(raw), "gstar_prime_1": _cpx(g1),
        "gstar_prime_1_minus_lambda_sq": abs(g1 - complex(lam) ** 2),
        "projected_residual_recheck": float(fixed_point_residual(zstar, cfg)),
    })
    return ["fixedpoint.json", "fixedpoint_check.json"]


def cmd_spectrum(args, cfg: Config, out: Path) -> list[str]:
    from .renorm1d import differential_spectrum

    zstar, _, _ = _load_fp(args, cfg)
    rep = differential_spectrum(zstar, args.dim, cfg.with_(precision="double"))
    _write_json(out / "spectrum.json", rep.to_json())
    return ["spectrum.json"]


def _orbit(nu: float, level: int, cfg: Config):
    from .arclab import compute_orbit
    from .renorm1d import MU_STAR
    from .renorm2d import henon_pair

    S = henon_pair(MU_STAR, nu, cfg)
    return S, compute_orbit(S, level, cfg)


def cmd_henon(args, cfg: Config, out: Path) -> list[str]:
    from .renorm2d import trace_json

    _double_only(cfg)
    S, orbit = _orbit(args.nu, args.level, cfg)
    data = trace_json(orbit.records)
    data["nu"] = args.nu
    data["norm_y"] = [float(P.norm_y()) for P in orbit.pairs]
    _write_json(out / "trace.json", data)
    return ["trace.json"]


def cmd_arc(args, cfg: Config, out: Path) -> list[str]:
    from .arclab import arc, average_jacobian, boundary_from_arc
    from .renorm1d import MU_STAR
    from .renorm2d import HenonMap

    _double_only(cfg)
    S, orbit = _orbit(args.nu, args.level, cfg)
    a = arc(S, args.level, cfg, orbit)
    a.to_csv(out / "arc.csv")
    hm = HenonMap.from_multipliers(MU_STAR, args.nu)
    cloud = boundary_from_arc(hm, a)
    with open(out / "boundary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x_re", "x_im", "y_re", "y_im"])
        for x, y in cloud:
            w.writerow([repr(float(v)) for v in (x.real, x.imag, y.real, y.imag)])
    files = ["arc.csv", "boundary.csv"]
    if args.nu != 0:
        _write_json(out / "jacobian.json", average_jacobian(S, args.level, cfg, orbit, a).to_json())
        files.append("jacobian.json")
    return files


def cmd_universality(args, cfg: Config, out: Path) -> list[str]:
    from .arclab import universality_json, universality_report

    _double_only(cfg)
    zstar, _, _ = _load_fp(args, cfg)
    S, orbit = _orbit(args.nu, args.level, cfg)
    rep = universality_report(S, range(1, args.level + 1), zstar, cfg, orbit)
    data = universality_json(rep)
    data["nu"] = args.nu
    _write_json(out / "universality.json", data)
    return ["universality.json"]


def cmd_holder(args, cfg: Config, out: Path) -> list[str]:
    from .arclab import holder_bound, holder_empirical
    from .goldenrot import THETA
    from .renorm1d import MU_STAR

    _double_only(cfg)
    S1, o1 = _orbit(args.nu1, args.level, cfg)
    S2, o2 = _orbit(args.nu2, args.level, cfg)
    rep = holder_empirical(S1, S2, args.level, cfg, (o1, o2))
    closed = [(MU_STAR * v) ** (1 + THETA) for v in (args.nu1, args.nu2)]
    rep.update({"nu1": args.nu1, "nu2": args.nu2, "level": args.level,
                "bound_closed_form": holder_bound(*closed)})
    _write_json(out / "holder.json", rep)
    return ["holder.json"]


def cmd_rotation(args, cfg: Config, out: Path) -> list[str]:
    from .goldenrot import I_KIND, J_KIND, equidist_average, fibonacci_q, refine_check, word_array

    rows = []
    for n in range(args.level + 1):
        rows.append([n, len(word_array(n, J_KIND)), fibonacci_q(2 * n + 1),
                     len(word_array(n, I_KIND)), fibonacci_q(2 * n),
                     int(refine_check(n)) if n < args.level else ""])
    with open(out / "rotation.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "j_count", "q_2n+1", "i_count", "q_2n", "refines"])
        w.writerows(rows)
    tests = {"x": (lambda x: x, 1.0), "sin5x": (lambda x: np.sin(5 * x), 5.0)}
    sweep = []
    for name, (f, M) in tests.items():
        for n in range(2, min(args.level, 10) + 1):
            qavg, favg, bound = equidist_average(f, M, n)
            sweep.append({"f": name, "n": n, "q_average": _cpx(qavg), "full_average": _cpx(favg),
                          "error": abs(qavg - favg), "bound": bound})
    _write_json(out / "equidist.json", {"levels": sweep})
    return ["rotation.csv", "equidist.json"]


COMMANDS = {
    "fixed-point": cmd_fixed_point,
    "spectrum": cmd_spectrum,
    "henon": cmd_henon,
    "arc": cmd_arc,
    "universality": cmd_universality,
    "holder": cmd_holder,
    "rotation": cmd_rotation,
}


def parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--degree", type=int, help="one-variable series degree")
    common.add_argument("--precision", choices=("double", "extended"))
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--fp", help="fixed point file (default OUT/fixedpoint.json)")
    common.add_argument("--config", help="JSON file; its keys override flags")
    p = argparse.ArgumentParser(prog="goldenrenorm", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("fixed-point", parents=[common], help="solve for the one-variable fixed point")
    s = sub.add_parser("spectrum", parents=[common], help="spectrum of the differential")
    s.add_argument("--dim", type=int, default=50)
    for name, default, text in (("henon", 4, "renormalize a Henon pair"),
                                ("arc", 6, "renormalization arc and Siegel boundary"),
                                ("universality", 4, "universality report")):
        s = sub.add_parser(name, parents=[common], help=text)
        s.add_argument("--nu", type=float, default=0.2)
        s.add_argument("--level", type=int, default=default)
    s = sub.add_parser("holder", parents=[common], help="Holder exponent of the arc conjugacy")
    s.add_argument("--nu1", type=float, default=0.3)
    s.add_argument("--nu2", type=float, default=0.1)
    s.add_argument("--level", type=int, default=5)
    s = sub.add_parser("rotation", parents=[common], help="golden rotation combinatorics")
    s.add_argument("--level", type=int, default=12)
    return p


def _fail(out: Path | None, exc: BaseException, code: int) -> int:
    rec = {"schema_version": SCHEMA_VERSION, "error": type(exc).__name__,
           "message": str(exc), "exit_code": code}
    print(json.dumps(rec), file=sys.stderr)
    if out is not None and out.is_dir():
        (out / "error.json").write_text(json.dumps(rec, indent=1, sort_keys=True) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    try:
        args = parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    out = None
    try:
        cfg = build_config(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        start = time.perf_counter()
        files = COMMANDS[args.command](args, cfg, out)
        wall = time.perf_counter() - start
    except (ConfigError, MissingArtifact) as exc:
        return _fail(out, exc, EXIT_INVALID)
    except (RenormError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return _fail(out, exc, EXIT_NUMERIC)
    except (ValueError, TypeError) as exc:
        return _fail(out, exc, EXIT_INVALID)
    (out / "error.json").unlink(missing_ok=True)
    run = {k: getattr(args, k) for k in RUN_KEYS if getattr(args, k, None) is not None}
    _write_json(out / f"{args.command}.manifest.json", {
        "command": args.command, "config_hash": cfg.digest(), "config": cfg.to_dict(),
        "run": run, "versions": _versions(), "wall_time": wall, "outputs": files,
    })
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
