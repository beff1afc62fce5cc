"""
report.json writer
Validates the payload against the shipped schema and writes it atomically; wall time
goes to timing.json so report.json stays byte-identical across reruns.
"""

import json
import logging
import os
import tempfile
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Mapping, Sequence

import jsonschema

from core.errors import FurthlabError
from core.report import SCHEMA_VERSION, ExperimentReport

logger = logging.getLogger(__name__)

SCHEMA_PATH = Path(__file__).resolve().parent.parent / "schemas" / "report.schema.json"


@lru_cache(maxsize=1)
def load_schema() -> Dict[str, Any]:
    with open(SCHEMA_PATH, "r", encoding="utf-8") as f:
        return json.load(f)


def build_payload(verb: str, config: Mapping[str, Any], reports: Sequence[ExperimentReport]) -> Dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "verb": verb,
        "config": dict(config),
        "experiments": {report.name: report.to_dict() for report in reports},
        "passed": all(report.passed for report in reports),
    }


def validate_payload(payload: Mapping[str, Any]) -> None:
    try:
        jsonschema.validate(instance=payload, schema=load_schema())
    except jsonschema.ValidationError as e:
        logger.error(f"report fails schema validation at {list(e.absolute_path)}: {e.message}")
        raise FurthlabError(f"report does not match {SCHEMA_PATH.name}: {e.message}") from e


def write_json_atomic(payload: Any, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False) + "\n"
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_report(payload: Mapping[str, Any], output_dir) -> Path:
    """Validate, then write report.json."""
    validate_payload(payload)
    path = write_json_atomic(payload, Path(output_dir) / "report.json")
    logger.info(f"report written to {path}")
    return path


def write_timing(reports: Sequence[ExperimentReport], output_dir) -> Path:
    timing = {report.name: round(report.wall_time_s, 3) for report in reports}
    timing["total"] = round(sum(report.wall_time_s for report in reports), 3)
    return write_json_atomic(timing, Path(output_dir) / "timing.json")
