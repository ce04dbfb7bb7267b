"""Command-line entry point: ``demosys <command> [options]``.

Exit codes: 0 ok, 1 verify failure, 2 malformed input, 3 numeric-domain
violation, 4 unwritable output.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import mpmath

from . import __version__
from .acceptance import run_all
from .artifacts import render
from .fundamental import (
    DUAL,
    PRIMAL,
    SearchConfig,
    democracy_ratio,
    parity_partition,
    partition_sandwich,
    phi_table,
    residue_partition,
    witness_sequence,
)
from .rademacher import DEFAULT_BUDGET, DEFAULT_GRID_POINTS, DEFAULT_MC_SAMPLES, DEFAULT_SEED, SumOptions
from .regimes import DEFAULT_M_GRID, REGIME_COLUMNS, classify, derived_constants, regime_map, row_dict
from .system import PRECISION_ENV, DomainError, SystemParams, combination_from_json, combination_norm, single_norm

EXIT_OK, EXIT_FAIL, EXIT_MALFORMED, EXIT_DOMAIN, EXIT_OUTPUT = 0, 1, 2, 3, 4


class MalformedInput(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    parameters: dict[str, Any]
    precision_bits: int
    level_cap_delta: int
    budget: int
    merge_tol: float | None
    grid_points: int
    seed: int
    mc_samples: int
    search: str
    out: str | None
    format: str
    version: str = field(default=__version__)

    def sum_options(self) -> SumOptions:
        return SumOptions(budget=self.budget, merge_tol=self.merge_tol, grid_points=self.grid_points,
                          mc_samples=self.mc_samples, seed=self.seed)

    def search_config(self) -> SearchConfig:
        return SearchConfig(method=self.search, level_cap_delta=self.level_cap_delta,
                            sums=self.sum_options())

    def params(self, l: float) -> SystemParams:
        return SystemParams(l, self.precision_bits)


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return v


def _common() -> argparse.ArgumentParser:
    c = argparse.ArgumentParser(add_help=False)
    g = c.add_argument_group("run configuration")
    g.add_argument("--precision-bits", type=_positive_int, default=None,
                   help=f"working precision in bits (default: ${PRECISION_ENV} or 53)")
    g.add_argument("--level-cap-delta", type=_positive_int, default=4,
                   help="candidate search levels up to ceil(log2 m) + delta")
    g.add_argument("--budget", type=_positive_int, default=DEFAULT_BUDGET,
                   help="max atoms on the exact convolution path")
    g.add_argument("--merge-tol", type=_positive_float, default=None,
                   help="atom-merging tolerance (default: adaptive lattice)")
    g.add_argument("--grid-points", type=_positive_int, default=DEFAULT_GRID_POINTS)
    g.add_argument("--seed", type=int, default=DEFAULT_SEED)
    g.add_argument("--mc-samples", type=_positive_int, default=DEFAULT_MC_SAMPLES)
    g.add_argument("--search", choices=("auto", "exhaustive", "candidates"), default="auto")
    g.add_argument("--out", default=None, help="artifact path (default: stdout)")
    g.add_argument("--format", choices=("csv", "json"), default="csv")
    return c


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    ap = argparse.ArgumentParser(prog="demosys", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("norm", parents=[common], help="norm of one element or a combination")
    s.add_argument("--n", type=int, help="level of a single element")
    s.add_argument("--l", type=float)
    s.add_argument("--p", type=float)
    s.add_argument("--spec", help="combination JSON file")

    s = sub.add_parser("phi", parents=[common], help="fundamental function table")
    s.add_argument("--l", type=float, required=True)
    s.add_argument("--p", type=float, required=True)
    s.add_argument("--m", type=_positive_int, nargs="+", default=list(DEFAULT_M_GRID))
    s.add_argument("--kind", choices=(PRIMAL, DUAL), default=PRIMAL)

    s = sub.add_parser("democracy", parents=[common], help="max/min norm ratio at fixed size")
    s.add_argument("--l", type=float, required=True)
    s.add_argument("--p", type=float, required=True)
    s.add_argument("--m", type=_positive_int, nargs="+", default=list(DEFAULT_M_GRID))

    s = sub.add_parser("witness", parents=[common], help="whole-level vs deep-level ratio sequence")
    s.add_argument("--l", type=float, required=True)
    s.add_argument("--r", type=float, required=True)
    s.add_argument("--n-min", type=_positive_int, default=2)
    s.add_argument("--n-max", type=_positive_int, default=12)

    s = sub.add_parser("sandwich", parents=[common], help="level-partition sandwich check")
    s.add_argument("--l", type=float, required=True)
    s.add_argument("--p", type=float, required=True)
    s.add_argument("--m", type=_positive_int, nargs="+", default=[2 ** s for s in range(9)])
    s.add_argument("--classes", type=_positive_int, default=2, help="number of residue classes")

    s = sub.add_parser("classify", parents=[common], help="regime label and derived constants")
    s.add_argument("--l", type=float, required=True)
    s.add_argument("--p", type=float, required=True)

    s = sub.add_parser("regime-map", parents=[common], help="empirical vs predicted regime grid")
    s.add_argument("--l-grid", type=float, nargs="+", default=[0.5, 1.0, 2.0, 4.0])
    s.add_argument("--p-grid", type=float, nargs="+", default=[3.0, 4.0])
    s.add_argument("--m-grid", type=_positive_int, nargs="+", default=list(DEFAULT_M_GRID))
    s.add_argument("--workers", type=_positive_int, default=1)

    sub.add_parser("verify", parents=[common], help="run the acceptance criteria")
    return ap


_CONFIG_KEYS = {"command", "precision_bits", "level_cap_delta", "budget", "merge_tol", "grid_points",
                "seed", "mc_samples", "search", "out", "format"}


def make_config(ns: argparse.Namespace) -> RunConfig:
    bits = ns.precision_bits
    if bits is None:
        env = os.environ.get(PRECISION_ENV)
        try:
            bits = int(env) if env else 53
        except ValueError:
            raise MalformedInput(f"{PRECISION_ENV}={env!r} is not an integer")
    params = {k: v for k, v in vars(ns).items() if k not in _CONFIG_KEYS}
    return RunConfig(command=ns.command, parameters=params, precision_bits=bits,
                     level_cap_delta=ns.level_cap_delta, budget=ns.budget, merge_tol=ns.merge_tol,
                     grid_points=ns.grid_points, seed=ns.seed, mc_samples=ns.mc_samples,
                     search=ns.search, out=ns.out, format=ns.format)


def emit(cfg: RunConfig, columns: Sequence[str], rows: Sequence[dict]) -> None:
    text = render(cfg.format, columns, rows, asdict(cfg))
    if cfg.out is None:
        sys.stdout.write(text)
        return
    try:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OutputError(f"cannot write {cfg.out}: {exc.strerror or exc}") from exc


class OutputError(Exception):
    pass


def _fmt(v) -> str:
    if isinstance(v, mpmath.mpf):
        return mpmath.nstr(v, max(17, int(mpmath.mp.prec * 0.30103)))
    return repr(float(v))


def cmd_norm(cfg: RunConfig) -> int:
    a = cfg.parameters
    if a["spec"] is not None:
        if a["n"] is not None:
            raise MalformedInput("give --spec or --n, not both")
        try:
            with open(a["spec"], encoding="utf-8") as fh:
                obj = json.load(fh)
        except OSError as exc:
            raise MalformedInput(f"cannot read spec {a['spec']}: {exc.strerror or exc}")
        except json.JSONDecodeError as exc:
            raise MalformedInput(f"spec {a['spec']} is not valid JSON: {exc}")
        try:
            comb, l, p = combination_from_json(obj)
        except DomainError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedInput(f"malformed combination spec: {exc}")
        res = combination_norm(comb, cfg.params(l), p, cfg.sum_options())
        bits = cfg.precision_bits
        with mpmath.workprec(bits):
            value = _fmt(res.value)
        line = f"{value} method={res.method} error_bound={res.error_bound!r}"
        if res.seed is not None:
            line += f" seed={res.seed} std_error={res.std_error!r}"
        print(line)
        return EXIT_OK
    if a["n"] is None or a["l"] is None or a["p"] is None:
        raise MalformedInput("norm needs --n, --l and --p, or --spec")
    with mpmath.workprec(cfg.precision_bits):
        value = _fmt(single_norm(a["n"], cfg.params(a["l"]), a["p"]))
    print(f"{value} method=closed-form error_bound=0.0")
    return EXIT_OK


PHI_COLUMNS = ("m", "phi", "log2_phi", "profile", "method", "level_cap", "error_bound")


def cmd_phi(cfg: RunConfig) -> int:
    a = cfg.parameters
    table = phi_table(a["m"], cfg.params(a["l"]), a["p"], a["kind"], cfg.search_config())
    rows = [{"m": e.m, "phi": float(e.value), "log2_phi": float(e.log2), "profile": str(e.profile),
             "method": e.method, "level_cap": e.level_cap, "error_bound": float(e.error_bound)}
            for e in table]
    emit(cfg, PHI_COLUMNS, rows)
    return EXIT_OK


DEMOCRACY_COLUMNS = ("m", "max_norm", "min_norm", "ratio", "max_profile", "min_profile", "method")


def cmd_democracy(cfg: RunConfig) -> int:
    a = cfg.parameters
    params, search = cfg.params(a["l"]), cfg.search_config()
    rows = []
    for m in sorted(a["m"]):
        e = democracy_ratio(m, params, a["p"], search)
        rows.append({"m": m, "max_norm": float(e.max_norm), "min_norm": float(e.min_norm),
                     "ratio": float(e.ratio), "max_profile": str(e.max_profile),
                     "min_profile": str(e.min_profile), "method": e.method})
    emit(cfg, DEMOCRACY_COLUMNS, rows)
    return EXIT_OK


WITNESS_COLUMNS = ("n", "bn", "bstar", "ratio")


def cmd_witness(cfg: RunConfig) -> int:
    a = cfg.parameters
    if a["n_min"] > a["n_max"]:
        raise MalformedInput("--n-min exceeds --n-max")
    seq = witness_sequence(cfg.params(a["l"]), a["r"], range(a["n_min"], a["n_max"] + 1),
                           cfg.sum_options())
    rows = [{"n": w.n, "bn": float(w.bn), "bstar": float(w.bstar), "ratio": float(w.ratio)} for w in seq]
    emit(cfg, WITNESS_COLUMNS, rows)
    return EXIT_OK


SANDWICH_COLUMNS = ("m", "classes", "phi", "phi_classes_max", "lower_ok", "upper_ok")


def cmd_sandwich(cfg: RunConfig) -> int:
    a = cfg.parameters
    classes = parity_partition() if a["classes"] == 2 else residue_partition(a["classes"])
    params, search = cfg.params(a["l"]), cfg.search_config()
    rows = []
    for m in sorted(a["m"]):
        rep = partition_sandwich(classes, m, params, a["p"], search)
        rows.append({"m": m, "classes": rep.nu, "phi": float(rep.phi),
                     "phi_classes_max": float(rep.phi_tilde),
                     "lower_ok": rep.lower_ok, "upper_ok": rep.upper_ok})
    emit(cfg, SANDWICH_COLUMNS, rows)
    return EXIT_OK if all(r["lower_ok"] and r["upper_ok"] for r in rows) else EXIT_FAIL


CLASSIFY_COLUMNS = ("l", "p", "r", "label", "b1", "b2", "kappa", "omega", "omega1", "n0", "n1")


def cmd_classify(cfg: RunConfig) -> int:
    a = cfg.parameters
    params = cfg.params(a["l"])
    c = derived_constants(params, a["p"])
    row = {"l": c.l, "p": c.p, "r": c.r, "label": classify(params, a["p"]), "b1": c.b1, "b2": c.b2,
           "kappa": c.kappa, "omega": c.omega, "omega1": c.omega1, "n0": c.n0,
           "n1": "" if c.n1 is None else c.n1}
    emit(cfg, CLASSIFY_COLUMNS, [row])
    return EXIT_OK


def cmd_regime_map(cfg: RunConfig) -> int:
    a = cfg.parameters
    rows = regime_map(a["l_grid"], a["p_grid"], a["m_grid"], cfg.search_config(), a["workers"])
    emit(cfg, REGIME_COLUMNS, [row_dict(r) for r in rows])
    for r in rows:
        if r.note:
            print(f"note (l={r.l}, p={r.p}): {r.note}", file=sys.stderr)
    return EXIT_OK


VERIFY_COLUMNS = ("criterion", "title", "passed", "detail")


def cmd_verify(cfg: RunConfig) -> int:
    results = run_all(echo=lambda line: print(line, file=sys.stderr if cfg.out is None else sys.stdout))
    rows = [{"criterion": r.number, "title": r.title, "passed": r.passed, "detail": r.detail}
            for r in results]
    emit(cfg, VERIFY_COLUMNS, rows)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


COMMANDS = {
    "norm": cmd_norm, "phi": cmd_phi, "democracy": cmd_democracy, "witness": cmd_witness,
    "sandwich": cmd_sandwich, "classify": cmd_classify, "regime-map": cmd_regime_map,
    "verify": cmd_verify,
}


def main(argv: Sequence[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = make_config(ns)
        return COMMANDS[cfg.command](cfg)
    except MalformedInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OutputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OUTPUT


if __name__ == "__main__":
    sys.exit(main())
