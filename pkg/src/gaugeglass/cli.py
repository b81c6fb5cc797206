"""Command-line entry point and JSON run reports.

    gaugeglass <suite> --model FILE [--method quad|mc] [--nodes N] [--samples N]
               [--seed S] [--tol T] [--out FILE] [--csv FILE] [--bias-factor F]
               [--t-grid a,b,c] [--m-max M] [--beta B] [--deterministic]

Exit status: 0 when every check passes, 1 when any check fails (expected
violations of off-line controls do not count), 2 on configuration errors.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import __version__
from .documents import ModelDocument, load_model, validate_report
from .errors import CapacityError, ConfigurationError, GaugeGlassError
from .identities import default_slot_pairs, off_line_control, run_identities
from .model import Slot
from .quench import MonteCarlo, Quadrature, QuenchMethod
from .theorems import hessian_agreement, hessian_psd, thm1_checks, thm2_checks, ASSEMBLIES
from .variational import (
    DEFAULT_M_MAX,
    TrialField,
    check_interpolation,
    gb_bound,
    rs_meanfield_bound,
)

SUITES = ("identities", "thm1", "thm2", "hessian", "gb", "interp", "meanfield")
DEFAULT_SAMPLES = 100_000
DEFAULT_T_GRID = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)
DEFAULT_SCAN_POINTS = 201
DEFAULT_TRIAL_X = 0.5
MAX_HESSIAN_SLOTS = 12


@dataclass
class RunConfig:
    suite: str
    model: str
    method: str = "quad"
    nodes: int | None = None
    rule: str = "trapezoid"
    samples: int = DEFAULT_SAMPLES
    seed: int | None = None
    tol: float | None = None
    out: str | None = None
    csv: str | None = None
    bias_factor: float | None = None
    t_grid: tuple[float, ...] = DEFAULT_T_GRID
    m_max: float = DEFAULT_M_MAX
    beta: float | None = None
    scan_points: int = DEFAULT_SCAN_POINTS
    deterministic: bool = False

    def __post_init__(self) -> None:
        if self.suite not in SUITES + ("all",):
            raise ConfigurationError(f"--suite: unknown suite {self.suite!r}")
        if self.method not in ("quad", "mc"):
            raise ConfigurationError(f"--method: expected quad or mc, got {self.method!r}")
        if self.tol is not None and not self.tol > 0:
            raise ConfigurationError("--tol: must be positive")
        if self.bias_factor is not None and not self.bias_factor > 0:
            raise ConfigurationError("--bias-factor: must be positive")
        if not self.m_max > 0:
            raise ConfigurationError("--m-max: must be positive")
        if self.scan_points < 0:
            raise ConfigurationError("--scan-points: must be >= 0")


@dataclass
class RunReport:
    config: dict
    records: list[dict] = field(default_factory=list)
    timing: dict | None = None

    @property
    def summary(self) -> dict:
        checks = [r for r in self.records if not r.get("control") and r["verdict"] != "skipped"]
        controls = [r for r in self.records if r.get("control")]
        failed = sum(r["verdict"] == "fail" for r in checks)
        return {
            "total": len(checks),
            "passed": len(checks) - failed,
            "failed": failed,
            "controls": len(controls),
            "controls_violated": sum(r["verdict"] == "fail" for r in controls),
            "skipped": sum(r["verdict"] == "skipped" for r in self.records),
            "ok": failed == 0,
        }

    @property
    def exit_code(self) -> int:
        return 0 if self.summary["ok"] else 1

    def to_dict(self) -> dict:
        out = {
            "tool": "gaugeglass",
            "version": __version__,
            "config": self.config,
            "records": self.records,
            "summary": self.summary,
        }
        if self.timing is not None:
            out["timing"] = self.timing
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _method(cfg: RunConfig, seed: int) -> QuenchMethod:
    if cfg.method == "mc":
        return MonteCarlo(cfg.samples, seed)
    return Quadrature(cfg.nodes, cfg.rule)


def _tagged(suite: str, record: dict, **extra) -> dict:
    return {"suite": suite, **record, **extra}


def _default_trial(doc: ModelDocument) -> TrialField:
    if doc.trial is not None:
        return doc.trial
    taken = set(doc.model.slots)
    sites = [i for i in range(doc.model.n_sites) if Slot.site(i, 1) not in taken]
    return TrialField.uniform(sites, DEFAULT_TRIAL_X)


def _suite_identities(cfg, doc, method):
    records = [_tagged("identities", c.to_dict()) for c in run_identities(doc.model, doc.params, method, tol=cfg.tol)]
    if cfg.bias_factor is not None and cfg.bias_factor != 1.0:
        firsts = dict.fromkeys(a for a, _ in default_slot_pairs(doc.model, doc.params))
        for a in firsts:
            case = off_line_control(doc.model, doc.params, "I1", (a,), cfg.bias_factor, method, tol=cfg.tol)
            records.append(_tagged("identities", case.to_dict(), expected_violation=True))
    return records, {}


def _suite_thm1(cfg, doc, method):
    kw = {} if cfg.tol is None else {"tol": cfg.tol}
    reps = thm1_checks(doc.model, doc.params, doc.model.slots, method, **kw)
    return [_tagged("thm1", r.to_dict()) for r in reps], {}


def _suite_thm2(cfg, doc, method):
    kw = {} if cfg.tol is None else {"tol": cfg.tol}
    slots = doc.model.slots
    pairs = [(a, b) for n, a in enumerate(slots) for b in slots[n:]][:20]
    reps = thm2_checks(doc.model, doc.params, pairs, method, **kw)
    return [_tagged("thm2", r.to_dict()) for r in reps], {}


def _suite_hessian(cfg, doc, method):
    if len(doc.model.slots) > MAX_HESSIAN_SLOTS:
        raise ConfigurationError(f"hessian: {len(doc.model.slots)} slots exceeds {MAX_HESSIAN_SLOTS}")
    reps = [hessian_psd(doc.model, doc.params, method, a) for a in ASSEMBLIES]
    records = [_tagged("hessian", r.to_dict()) for r in reps]
    for row in hessian_agreement(reps):
        records.append(_tagged("hessian", {"kind": "hessian_agreement", **row}))
    return records, {}


def _suite_gb(cfg, doc, method):
    kw = {} if cfg.tol is None else {"tol": cfg.tol}
    rep = gb_bound(doc.model, doc.params, _default_trial(doc), method, **kw)
    return [_tagged("gb", rep.to_dict())], {}


def _suite_interp(cfg, doc, method):
    kw = {} if cfg.tol is None else {"tol": cfg.tol}
    rep = check_interpolation(doc.model, doc.params, _default_trial(doc), cfg.t_grid, method, **kw)
    rows = [{"t": t, "value": e.value, "std_error": e.std_error} for t, e in rep.curve]
    return [_tagged("interp", rep.to_dict())], {"t_curve": rows}


def _suite_meanfield(cfg, doc, method):
    beta = cfg.beta if cfg.beta is not None else doc.beta
    if beta is None:
        raise ConfigurationError("meanfield: no beta given (use --beta or a 'beta' entry in the model)")
    res = rs_meanfield_bound(doc.model, beta, None, cfg.m_max, method, scan_points=cfg.scan_points)
    rows = [{"M": m, "rhs": v} for m, v in (res.scan or [])]
    return [_tagged("meanfield", res.to_dict())], {"m_scan": rows}


_RUNNERS = {
    "identities": _suite_identities,
    "thm1": _suite_thm1,
    "thm2": _suite_thm2,
    "hessian": _suite_hessian,
    "gb": _suite_gb,
    "interp": _suite_interp,
    "meanfield": _suite_meanfield,
}


def _write_curves(path: str, curves: dict) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["curve", "abscissa", "value", "std_error"])
        for row in curves.get("t_curve", []):
            writer.writerow(["t_curve", repr(row["t"]), repr(row["value"]), repr(row["std_error"])])
        for row in curves.get("m_scan", []):
            writer.writerow(["m_scan", repr(row["M"]), repr(row["rhs"]), "0.0"])


def run(cfg: RunConfig) -> RunReport:
    """Run the selected suite(s); configuration problems raise ConfigurationError."""
    start = time.perf_counter()
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    doc = load_model(cfg.model)
    seed = cfg.seed if cfg.seed is not None else (doc.seed if doc.seed is not None else 0)
    method = _method(cfg, seed)
    config = {
        "suite": cfg.suite,
        "model_path": cfg.model,
        "model": doc.source,
        "method": method.describe(),
        "seed": int(seed),
        "tol": cfg.tol,
        "bias_factor": cfg.bias_factor,
        "t_grid": list(cfg.t_grid),
        "m_max": cfg.m_max,
        "beta": cfg.beta,
        "scan_points": cfg.scan_points,
    }
    report = RunReport(config)
    curves: dict = {}
    suites = SUITES if cfg.suite == "all" else (cfg.suite,)
    for suite in suites:
        try:
            records, extra = _RUNNERS[suite](cfg, doc, method)
        except (ConfigurationError, CapacityError) as exc:
            if cfg.suite != "all":
                raise
            records, extra = [{"suite": suite, "kind": suite, "verdict": "skipped", "reason": str(exc)}], {}
        report.records.extend(records)
        for key, rows in extra.items():
            curves.setdefault(key, []).extend(rows)
    if not cfg.deterministic:
        report.timing = {"wall_clock_seconds": time.perf_counter() - start, "started": started}
    validate_report(report.to_dict())
    if cfg.csv:
        _write_curves(cfg.csv, curves)
    if cfg.out:
        Path(cfg.out).write_text(report.to_json())
    return report


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors are configuration errors
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gaugeglass", description="Numerical checks of gauge-glass identities and bounds.")
    p.add_argument("suite", choices=SUITES + ("all",))
    p.add_argument("--model", required=True, help="model JSON file or bundled instance name")
    p.add_argument("--method", choices=("quad", "mc"), default="quad")
    p.add_argument("--nodes", type=int, default=None, help="quadrature nodes per active dimension")
    p.add_argument("--rule", choices=("trapezoid", "hermite"), default="trapezoid")
    p.add_argument("--samples", type=int, default=DEFAULT_SAMPLES, help="Monte Carlo disorder samples")
    p.add_argument("--seed", type=int, default=None, help="overrides the model document seed")
    p.add_argument("--tol", type=float, default=None, help="override the suite tolerance floor")
    p.add_argument("--out", default=None, help="JSON report path (default: stdout)")
    p.add_argument("--csv", default=None, help="CSV path for t-curves and M-scans")
    p.add_argument("--bias-factor", type=float, default=None, help="off-line control D/sigma^2 = F beta")
    p.add_argument("--t-grid", type=_float_list, default=DEFAULT_T_GRID)
    p.add_argument("--m-max", type=float, default=DEFAULT_M_MAX)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--scan-points", type=int, default=DEFAULT_SCAN_POINTS)
    p.add_argument("--deterministic", action="store_true", help="omit the timing block")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(
            suite=args.suite,
            model=args.model,
            method=args.method,
            nodes=args.nodes,
            rule=args.rule,
            samples=args.samples,
            seed=args.seed,
            tol=args.tol,
            out=args.out,
            csv=args.csv,
            bias_factor=args.bias_factor,
            t_grid=args.t_grid,
            m_max=args.m_max,
            beta=args.beta,
            scan_points=args.scan_points,
            deterministic=args.deterministic,
        )
        report = run(cfg)
    except (ConfigurationError, CapacityError) as exc:
        print(f"gaugeglass: configuration error: {exc}", file=sys.stderr)
        return 2
    except GaugeGlassError as exc:
        print(f"gaugeglass: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if cfg.out is None:
        sys.stdout.write(report.to_json())
    s = report.summary
    print(
        f"gaugeglass {cfg.suite}: {s['passed']}/{s['total']} passed, {s['failed']} failed, "
        f"{s['controls']} controls ({s['controls_violated']} violated as expected), {s['skipped']} skipped",
        file=sys.stderr,
    )
    return report.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
