from __future__ import annotations

import re
from pathlib import Path

from rmode_sim.config.settings import settings

_UNSAFE_RE = re.compile(r"[^A-Za-z0-9._-]+")

RECEIVED_STEM = "received"
GROUNDWAVE_STEM = "groundwave"
RAW_SUFFIX = ".f32"
WAV_SUFFIX = ".wav"


def run_id_for(name: str) -> str:
    """File-system safe run id derived from a scenario name."""
    slug = _UNSAFE_RE.sub("_", name.strip()).strip("._")
    return slug or "scenario"


def ensure_parent_dir(path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)


def data_dir(run_id: str, output_root: str | Path | None = None) -> Path:
    """Run directory for ``run_id``: ``<output_root>/<run_id>_data``."""
    root = Path(output_root if output_root is not None else settings.output_root)
    return root / f"{run_id_for(run_id)}_data"


def get_received_file(run_dir: Path, suffix: str = RAW_SUFFIX) -> Path:
    return run_dir / f"{RECEIVED_STEM}{suffix}"


def get_groundwave_file(run_dir: Path, suffix: str = RAW_SUFFIX) -> Path:
    return run_dir / f"{GROUNDWAVE_STEM}{suffix}"


def get_traces_file(run_dir: Path) -> Path:
    return run_dir / "traces.csv"


def get_metadata_file(run_dir: Path) -> Path:
    return run_dir / "metadata.json"


def get_report_file(run_dir: Path) -> Path:
    return run_dir / "report.json"


def get_report_markdown_file(run_dir: Path) -> Path:
    return run_dir / "report.md"


__all__ = [
    "run_id_for",
    "ensure_parent_dir",
    "data_dir",
    "get_received_file",
    "get_groundwave_file",
    "get_traces_file",
    "get_metadata_file",
    "get_report_file",
    "get_report_markdown_file",
]
