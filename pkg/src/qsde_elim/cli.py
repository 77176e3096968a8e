"""Batch front end: ``qsde-elim <eliminate|verify|sweep|diagrams> --config FILE``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from . import __version__, convergence, suites
from .config import Config, parse_config
from .elimination import eliminate, evans_matrix, evans_residuals, hp_unitarity_residuals, validate_prelim
from .errors import ConfigError, ParameterError, QSDEError
from .reports import emit_report

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("qsde_elim")


def _checks_payload(command: str, checks: list) -> dict:
    return {
        "command": command,
        "metadata": {"version": __version__},
        "checks": checks,
        "verdict": "PASS" if all(c.passed for c in checks) else "FAIL",
    }


def run_eliminate(cfg: Config, tol: float) -> tuple:
    m = cfg.model.build()
    rep = validate_prelim(m)
    payload = {"command": "eliminate", "metadata": {"version": __version__}, "validation": rep.as_dict()}
    if not rep.valid:
        payload["verdict"] = "FAIL"
        return payload, {}
    lm = eliminate(m)
    hp = hp_unitarity_residuals(lm)
    ev = evans_residuals(m, lm)
    payload.update(
        limit_model={"S": lm.S, "L": lm.L, "H": lm.H},
        evans_matrix=evans_matrix(m),
        hp_unitarity_residuals=dict(zip(("S_dag_S", "S_S_dag", "H_hermitian", "L00_unitarity"), hp)),
        evans_residuals=ev,
    )
    ok = all(r < tol for r in hp) and all(r < tol for r in ev.values())
    payload["verdict"] = "PASS" if ok else "FAIL"
    return payload, {}


def run_verify(cfg: Config, tol: float) -> tuple:
    return _checks_payload("verify", suites.verify_suite(cfg.model.build(), tol)), {}


def run_diagrams(cfg: Config, tol: float | None) -> tuple:
    d = cfg.diagrams
    checks = suites.diagrams_suite(
        gamma=d.gamma,
        t_grid=d.t_grid,
        eps_grid=d.eps_grid,
        max_vertices=d.max_vertices,
        limit_sweep=d.limit_sweep,
        omega=(d.omega_C, d.omega_C11, d.omega_t, d.omega_cutoff),
        limit_tol=tol if tol is not None else 0.01,
    )
    return _checks_payload("diagrams", checks), {}


def run_sweep(cfg: Config, rel_tol: float, jobs: int) -> tuple:
    reports, tables = [], {}
    for k, block in enumerate(cfg.scenarios):
        try:
            scenario = cfg.build_scenario(k)
        except ParameterError as exc:
            raise ConfigError(f"scenarios.{k}: {exc}") from exc
        rep = convergence.sweep_epsilon(scenario, block.mode, jobs=jobs, cross_check=block.cross_check)
        verdict = "PASS" if rep.monotone and rep.final_rel_err < rel_tol else "FAIL"
        if rep.cross_checks and not all(c.passed for c in rep.cross_checks):
            verdict = "FAIL"
        rep = replace(rep, verdict=verdict)
        log.info("scenario %s (%s): %s, final rel_err %.3g", rep.scenario, rep.mode, verdict, rep.final_rel_err)
        reports.append(rep)
        tables[block.name] = rep.rows
    payload = {
        "command": "sweep",
        "metadata": {"version": __version__},
        "reports": reports,
        "verdict": "PASS" if all(r.verdict == "PASS" for r in reports) else "FAIL",
    }
    return payload, tables


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qsde-elim", description="Adiabatic elimination engine and verification harness.")
    p.add_argument("command", choices=("eliminate", "verify", "sweep", "diagrams"))
    p.add_argument("--config", required=True, help="JSON configuration file")
    p.add_argument("--out", help="output directory (overrides config)")
    p.add_argument("--format", choices=("json", "csv", "both"), help="report format (overrides config)")
    p.add_argument("--tol", type=float, help="verdict tolerance override")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers for epsilon sweeps")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.jobs < 1 or (args.tol is not None and not args.tol > 0):
        print("error: --jobs must be >= 1 and --tol > 0", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = parse_config(args.config)
        tol = cfg.tolerances
        if args.command == "eliminate":
            payload, tables = run_eliminate(cfg, args.tol or tol.identity)
        elif args.command == "verify":
            payload, tables = run_verify(cfg, args.tol or tol.identity)
        elif args.command == "diagrams":
            payload, tables = run_diagrams(cfg, args.tol)
        else:
            payload, tables = run_sweep(cfg, args.tol or tol.sweep_rel_err, args.jobs)
        out = args.out or cfg.output.dir
        fmt = args.format or cfg.output.format
        for path in emit_report(payload, out, args.command, fmt, tables):
            log.info("wrote %s", path)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except QSDEError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"{args.command}: {payload['verdict']}")
    return EXIT_PASS if payload["verdict"] == "PASS" else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
