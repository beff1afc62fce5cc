"""
Plot data
One tidy CSV per table in a report, written atomically with CRLF line endings.
"""

import logging
import os
import tempfile
from pathlib import Path
from typing import Iterable, List

import pandas as pd

from core.report import ExperimentReport

logger = logging.getLogger(__name__)


def write_csv(frame: pd.DataFrame, path) -> Path:
    """Write frame to a temporary sibling file, then rename it over path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            frame.to_csv(handle, index=False, lineterminator="\r\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def emit_plotdata(reports: Iterable[ExperimentReport], output_dir) -> List[Path]:
    """<table>.csv for every table of every report, in report then name order."""
    written = []
    for report in reports:
        for name, frame in sorted(report.tables.items()):
            written.append(write_csv(frame, Path(output_dir) / f"{name}.csv"))
            logger.debug(f"wrote {name}.csv ({len(frame)} rows)")
    logger.info(f"wrote {len(written)} CSV files to {output_dir}")
    return written
