#!/usr/bin/env python3
"""
Experiment reports
Named estimates with standard errors, source-text claims, residuals and acceptance gates.
"""

import math
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import pandas as pd

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1.0"
SIGMA_GATE = 3.0


def _clean(value: Any) -> Any:
    """JSON-safe copy: numpy scalars to python, non-finite floats to None."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


@dataclass
class EstimatorReport:
    """One estimate with its standard error and optional claimed value."""
    name: str
    estimate: float
    stderr: float = 0.0
    n_samples: int = 0
    paper_claim: Optional[float] = None
    notes: Dict[str, float] = field(default_factory=dict)

    @property
    def discrepancy_sigma(self) -> Optional[float]:
        if self.paper_claim is None:
            return None
        diff = abs(self.estimate - self.paper_claim)
        if self.stderr > 0:
            return diff / self.stderr
        return 0.0 if diff == 0 else math.inf

    def within(self, target: float, n_sigma: float = SIGMA_GATE) -> bool:
        """|estimate - target| <= n_sigma * stderr."""
        return abs(self.estimate - target) <= n_sigma * self.stderr

    def to_dict(self) -> Dict[str, Any]:
        return _clean({
            "name": self.name,
            "estimate": float(self.estimate),
            "stderr": float(self.stderr),
            "n_samples": int(self.n_samples),
            "paper_claim": None if self.paper_claim is None else float(self.paper_claim),
            "discrepancy_sigma": self.discrepancy_sigma,
            "notes": {k: float(v) for k, v in sorted(self.notes.items())},
        })


@dataclass
class Gate:
    """Acceptance check: what was measured, against what, and the verdict."""
    name: str
    measured: float
    tolerance: float
    comparison: str
    passed: bool
    target: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return _clean({
            "name": self.name,
            "measured": float(self.measured),
            "tolerance": float(self.tolerance),
            "comparison": self.comparison,
            "target": None if self.target is None else float(self.target),
            "passed": bool(self.passed),
        })


@dataclass
class ExperimentReport:
    """Structured record of one experiment run."""
    name: str
    config: Dict[str, Any] = field(default_factory=dict)
    results: Dict[str, EstimatorReport] = field(default_factory=dict)
    residuals: Dict[str, float] = field(default_factory=dict)
    gates: List[Gate] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)
    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    wall_time_s: float = 0.0

    def record(self, estimator: EstimatorReport) -> EstimatorReport:
        self.results[estimator.name] = estimator
        return estimator

    def record_value(self, name: str, value: float, stderr: float = 0.0, n_samples: int = 0,
                     paper_claim: Optional[float] = None, **notes: float) -> EstimatorReport:
        return self.record(EstimatorReport(name, float(value), float(stderr), n_samples, paper_claim, dict(notes)))

    def record_residual(self, name: str, value: float) -> None:
        self.residuals[name] = float(value)

    def warn(self, message: str) -> None:
        logger.warning(f"[{self.name}] {message}")
        self.warnings.append(message)

    def add_table(self, name: str, frame: pd.DataFrame) -> None:
        self.tables[name] = frame

    # Gates
    def _gate(self, name: str, measured: float, tolerance: float, comparison: str,
              passed: bool, target: Optional[float] = None) -> Gate:
        gate = Gate(name, float(measured), float(tolerance), comparison, bool(passed), target)
        self.gates.append(gate)
        if not gate.passed:
            logger.info(f"[{self.name}] gate '{name}' failed: measured={measured:.6g} {comparison} {tolerance:.6g}")
        return gate

    def check_below(self, name: str, measured: float, tolerance: float) -> Gate:
        return self._gate(name, measured, tolerance, "<", measured < tolerance)

    def check_above(self, name: str, measured: float, threshold: float) -> Gate:
        return self._gate(name, measured, threshold, ">", measured > threshold)

    def check_close(self, name: str, measured: float, target: float, tolerance: float) -> Gate:
        return self._gate(name, measured, tolerance, "|measured-target|<=",
                          abs(measured - target) <= tolerance, target)

    def check_sigma(self, name: str, estimator: EstimatorReport, target: float,
                    n_sigma: float = SIGMA_GATE) -> Gate:
        return self._gate(name, estimator.estimate, n_sigma * estimator.stderr, "|measured-target|<=",
                          estimator.within(target, n_sigma), target)

    def check_flag(self, name: str, measured: float, passed: bool) -> Gate:
        return self._gate(name, measured, 0.0, "flag", passed)

    @property
    def passed(self) -> bool:
        return all(g.passed for g in self.gates)

    def to_dict(self) -> Dict[str, Any]:
        """Deterministic dictionary; tables and wall time are left out."""
        return _clean({
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "config": self.config,
            "results": {k: v.to_dict() for k, v in sorted(self.results.items())},
            "residuals": dict(sorted(self.residuals.items())),
            "gates": [g.to_dict() for g in self.gates],
            "warnings": list(self.warnings),
            "passed": self.passed,
        })

    def get_stats(self) -> Dict[str, Any]:
        """Short summary for logs."""
        n_passed = sum(g.passed for g in self.gates)
        return {
            "experiment": self.name,
            "gates_passed": n_passed,
            "gates_total": len(self.gates),
            "warnings": len(self.warnings),
            "wall_time_s": round(self.wall_time_s, 2),
        }
