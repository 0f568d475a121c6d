#!/usr/bin/env python
"""Convert run verification reports (report.json) into Markdown."""
from __future__ import annotations

import argparse
import logging
import math
import pathlib

from rmode_sim.config.settings import settings as _settings
from rmode_sim.errors import OutputError
from rmode_sim.utils.paths import get_report_file, get_report_markdown_file

log = logging.getLogger(__name__)


def _num(value: float, spec: str = ".6g") -> str:
    return "inf" if math.isinf(value) else format(value, spec)


def report_to_markdown(report) -> str:
    """Markdown rendering of a :class:`rmode_sim.pipeline.RunReport`."""
    mark = lambda ok: "✓" if ok else "✗"  # noqa: E731
    lines = [
        f"# R-Mode run `{report.run_id}`",
        "",
        f"- scenario: {report.scenario} (rmode-sim {report.version})",
        f"- {report.samples} samples at {report.sample_rate_hz:g} Hz ({report.duration_s:g} s)",
        f"- skywave: h = {report.ionosphere_height_m:g} m, d = {report.ground_distance_m:g} m, "
        f"alpha = {report.attenuation_alpha:g}",
        f"- t_d = {report.t_d_us:.3f} µs",
        f"- result: {'PASS' if report.passed else 'FAIL'}",
        "",
        "## CW tone distortion",
        "",
        "Measured columns fit each CW tone passed alone through the channel (`measured_on: cw_only`).",
        "",
        "| tone | freq [Hz] | eta (closed) | eta (measured) | beta (closed) | beta (measured) | eta (literal) | beta (literal) | ok |",
        "|---|---|---|---|---|---|---|---|---|",
    ]
    for t in report.tones:
        lines.append(
            f"| {t.name} | {t.freq_hz:.0f} | {_num(t.eta_closed_form)} | {_num(t.eta_measured)} "
            f"| {_num(t.beta_closed_form_rad)} | {_num(t.beta_measured_rad)} "
            f"| {_num(t.eta_literal)} | {_num(t.beta_literal_rad)} | {mark(t.passed)} |"
        )
    lines += ["", "## Envelope", ""]
    if report.envelope.msk is not None:
        lines.append(
            f"- MSK only: max relative deviation {_num(report.envelope.msk['max_rel_deviation'])} "
            f"(limit {_settings.envelope_rel_tolerance:g}) {mark(report.envelope.msk_constant)}"
        )
    lines.append(f"- composite: peak-to-trough {_num(report.envelope.composite['peak_to_trough'])}")
    if report.spectrum is not None:
        lines += ["", f"## Spectrum (Welch, {report.spectrum.segment_len}-sample segments)", ""]
        for line in report.spectrum.lines:
            lines.append(
                f"- {line.name} at {line.freq_hz:.0f} Hz: {line.power_db:.1f} dB/Hz, "
                f"{line.margin_db:.1f} dB above MSK {mark(line.passed)}"
            )
    lines += [
        "",
        "## Noise",
        "",
        f"- configured SNR {_num(report.snr.configured_db, '.2f')} dB, "
        f"measured {_num(report.snr.measured_db, '.2f')} dB {mark(report.snr.passed)}",
        "",
        "## Payload",
        "",
        f"- {report.payload.bits} bits (seed {report.payload.seed}), {report.payload.ones} ones, "
        f"{report.payload.i_symbols} I / {report.payload.q_symbols} Q symbols",
    ]
    if report.failures:
        lines += ["", "## Failures", ""] + [f"- {f}" for f in report.failures]
    return "\n".join(lines) + "\n"


def convert(src: pathlib.Path) -> int:
    """Write report.md next to every report.json under ``src``."""
    from rmode_sim.pipeline import load_report

    count = 0
    for f in sorted(src.rglob(get_report_file(pathlib.Path()).name)):
        run_dir = f.parent
        try:
            md_path = get_report_markdown_file(run_dir)
            md_path.write_text(report_to_markdown(load_report(run_dir)), encoding="utf-8")
            log.info("✓ %s", md_path)
            count += 1
        except (OutputError, OSError, ValueError) as exc:
            log.warning("Skipped %s - %s", f, exc)
    log.info("✔ Converted %d report(s) under %s", count, src)
    return count


if __name__ == "__main__":
    from rmode_sim.utils.logging import setup_logging

    parser = argparse.ArgumentParser(description="Convert JSON run reports into Markdown files.")
    parser.add_argument("--src", type=pathlib.Path, default=_settings.output_root, help="Directory containing run directories")
    args = parser.parse_args()
    setup_logging()
    convert(args.src)
