#!/usr/bin/env python
"""``rmode-sim`` command line: run, validate and report on scenarios.

Exit codes: 0 success, 2 validation failure, 3 I/O failure,
4 verification tolerance breach.
"""
from __future__ import annotations

import argparse
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

from rich.console import Console
from rich.markup import escape
from rich.table import Table

from rmode_sim import __version__
from rmode_sim.config.settings import settings as _settings
from rmode_sim.errors import OutputError, RModeError, ScenarioValidationError, Violation
from rmode_sim.pipeline import RunReport, load_report, run_scenario
from rmode_sim.scenario import ScenarioConfig, load_scenario, validate_scenario
from rmode_sim.utils.convert_reports import report_to_markdown
from rmode_sim.utils.logging import setup_logging
from rmode_sim.utils.paths import data_dir, get_report_markdown_file

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_TOLERANCE = 4

log = logging.getLogger(__name__)
console = Console()


def _fmt(value: float, spec: str = ".6g") -> str:
    return "inf" if math.isinf(value) else format(value, spec)


def violations_table(source: str, violations: Sequence[Violation]) -> Table:
    table = Table(title=f"{source}: {len(violations)} violation(s)")
    table.add_column("field")
    table.add_column("value")
    table.add_column("constraint")
    for v in violations:
        table.add_row(escape(v.field), escape(repr(v.value)), escape(v.constraint))
    return table


def report_table(report: RunReport) -> Table:
    table = Table(title=f"{report.run_id}: t_d = {report.t_d_us:.3f} µs, alpha = {report.attenuation_alpha:g}")
    table.add_column("check")
    table.add_column("expected", justify="right")
    table.add_column("measured", justify="right")
    table.add_column("ok", justify="center")
    for tone in report.tones:
        mark = "✓" if tone.passed else "✗"
        table.add_row(f"{tone.name} eta", _fmt(tone.eta_closed_form), _fmt(tone.eta_measured), mark)
        table.add_row(f"{tone.name} beta [rad]", _fmt(tone.beta_closed_form_rad), _fmt(tone.beta_measured_rad), mark)
    if report.envelope.msk is not None:
        table.add_row(
            "msk envelope max dev",
            f"<= {_settings.envelope_rel_tolerance:g}",
            _fmt(report.envelope.msk["max_rel_deviation"]),
            "✓" if report.envelope.msk_constant else "✗",
        )
    table.add_row("composite peak-to-trough", "", _fmt(report.envelope.composite["peak_to_trough"]), "")
    if report.spectrum is not None:
        for line in report.spectrum.lines:
            table.add_row(
                f"{line.name} line @ {line.freq_hz:.0f} Hz",
                ">= 10 dB",
                f"{line.margin_db:.1f} dB",
                "✓" if line.passed else "✗",
            )
    table.add_row("SNR [dB]", _fmt(report.snr.configured_db, ".2f"), _fmt(report.snr.measured_db, ".2f"),
                  "✓" if report.snr.passed else "✗")
    return table


def _first_code(codes: set[int]) -> int:
    for code in (EXIT_VALIDATION, EXIT_IO, EXIT_TOLERANCE):
        if code in codes:
            return code
    return EXIT_OK


def _load_all(paths: Sequence[Path], seed_override: int | None) -> tuple[list[tuple[Path, ScenarioConfig]], int]:
    loaded: list[tuple[Path, ScenarioConfig]] = []
    codes: set[int] = set()
    for path in paths:
        try:
            cfg = load_scenario(path)
        except ScenarioValidationError as exc:
            console.print(violations_table(str(path), exc.violations))
            codes.add(EXIT_VALIDATION)
            continue
        except OutputError as exc:
            console.print(f"[red]✗ {escape(str(exc))}[/red]")
            codes.add(EXIT_IO)
            continue
        if seed_override is not None:
            cfg = cfg.with_seed_override(seed_override)
        problems = validate_scenario(cfg)
        if problems:
            console.print(violations_table(str(path), problems))
            codes.add(EXIT_VALIDATION)
            continue
        loaded.append((path, cfg))
    return loaded, _first_code(codes)


def _run_dir_for(cfg: ScenarioConfig, out_dir: Path | None) -> Path:
    if out_dir is not None:
        return data_dir(cfg.name, out_dir)
    if cfg.outputs.directory is not None:
        root = Path(cfg.outputs.directory)
        if not root.is_absolute() and cfg.source_dir is not None:
            root = cfg.source_dir / root
        return data_dir(cfg.name, root)
    return data_dir(cfg.name)


def cmd_run(args: argparse.Namespace) -> int:
    loaded, status = _load_all(args.scenarios, args.seed_override)
    if status != EXIT_OK:
        return status

    jobs = []
    seen: dict[Path, Path] = {}
    for path, cfg in loaded:
        run_dir = _run_dir_for(cfg, args.out_dir)
        if run_dir in seen:
            console.print(f"[red]✗ {path} and {seen[run_dir]} both write to {run_dir} (rename a scenario)[/red]")
            return EXIT_VALIDATION
        seen[run_dir] = path
        jobs.append((path, cfg, run_dir))

    def _one(job: tuple[Path, ScenarioConfig, Path]) -> tuple[Path, Path, RunReport | None, int]:
        path, cfg, run_dir = job
        try:
            return path, run_dir, run_scenario(cfg, run_dir, args.format), EXIT_OK
        except OutputError as exc:
            log.error("✗ %s: %s", path, exc)
            return path, run_dir, None, EXIT_IO
        except ScenarioValidationError as exc:
            console.print(violations_table(str(path), exc.violations))
            return path, run_dir, None, EXIT_VALIDATION
        except RModeError as exc:
            log.error("✗ %s: %s", path, exc)
            return path, run_dir, None, EXIT_VALIDATION

    workers = max(1, min(args.jobs, len(jobs)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(_one, jobs))

    codes: set[int] = set()
    for path, run_dir, report, code in results:
        if report is None:
            codes.add(code)
            continue
        console.print(report_table(report))
        if report.passed:
            console.print(f"✓ {path} → {run_dir}")
        else:
            console.print(f"[yellow]✗ {path}: {escape('; '.join(report.failures))}[/yellow]")
            codes.add(EXIT_TOLERANCE)
    return _first_code(codes)


def cmd_validate(args: argparse.Namespace) -> int:
    loaded, status = _load_all(args.scenarios, None)
    for path, _ in loaded:
        console.print(f"✓ {path}: valid")
    return status


def cmd_report(args: argparse.Namespace) -> int:
    try:
        report = load_report(args.run_dir)
    except OutputError as exc:
        console.print(f"[red]✗ {escape(str(exc))}[/red]")
        return EXIT_IO
    console.print(report_table(report))
    if args.markdown:
        md_path = get_report_markdown_file(Path(args.run_dir))
        try:
            md_path.write_text(report_to_markdown(report), encoding="utf-8")
        except OSError as exc:
            console.print(f"[red]✗ {escape(str(OutputError(md_path, exc)))}[/red]")
            return EXIT_IO
        console.print(f"✓ {md_path}")
    return EXIT_OK if report.passed else EXIT_TOLERANCE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rmode-sim", description="MF DGNSS R-Mode signal simulator.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="Logging level (defaults to settings.log_level)")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Synthesise, propagate and verify one or more scenarios")
    run.add_argument("scenarios", nargs="+", type=Path, help="Scenario JSON file(s)")
    run.add_argument("--seed-override", type=int, default=None,
                     help="Replace the payload seed with N and the noise seed with N+1")
    run.add_argument("--out-dir", type=Path, default=None,
                     help="Output root; each scenario writes to <out-dir>/<name>_data")
    run.add_argument("--format", choices=("raw", "wav", "both"), default=None,
                     help="Sample file format (defaults to the scenario, then settings)")
    run.add_argument("--jobs", type=int, default=_settings.max_parallel_runs,
                     help="Scenarios processed concurrently")
    run.set_defaults(func=cmd_run)

    validate = sub.add_parser("validate", help="Check scenario files without running them")
    validate.add_argument("scenarios", nargs="+", type=Path)
    validate.set_defaults(func=cmd_validate)

    report = sub.add_parser("report", help="Show the verification report of a finished run")
    report.add_argument("run_dir", type=Path)
    report.add_argument("--markdown", action="store_true", help="Also write report.md into the run directory")
    report.set_defaults(func=cmd_report)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    return args.func(args)


__all__ = ["EXIT_OK", "EXIT_VALIDATION", "EXIT_IO", "EXIT_TOLERANCE", "build_parser", "main"]


if __name__ == "__main__":
    raise SystemExit(main())
