#!/usr/bin/env python3
"""
Diagnostics Reporter

Collects, categorizes, and reports on noteworthy events encountered during
terrain queries, rollouts, online learning and closed-loop runs, providing a
compact summary with suggested follow-ups.
"""

import json
import threading
from collections import Counter, defaultdict
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from loguru import logger


class DiagnosticSeverity(Enum):
    """Event severity levels"""

    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    CRITICAL = "critical"


class DiagnosticCategory(Enum):
    """Event categories for classification"""

    TERRAIN = "terrain"
    DYNAMICS = "dynamics"
    LEARNING = "learning"
    CONTROL = "control"
    SIMULATION = "simulation"
    CONFIGURATION = "configuration"
    SYSTEM = "system"


@dataclass
class DiagnosticRecord:
    """Individual event record"""

    timestamp: str
    category: DiagnosticCategory
    severity: DiagnosticSeverity
    event_type: str
    message: str
    count: int
    context: Dict[str, Any]


@dataclass
class DiagnosticSummary:
    """Summary of events by type"""

    event_type: str
    count: int
    severity: DiagnosticSeverity
    category: DiagnosticCategory
    first_seen: Optional[str]
    last_seen: Optional[str]
    suggested_fixes: List[str]


EVENT_MAPPINGS: Dict[str, Dict[str, Any]] = {
    "terrain_fringe_query": {
        "category": DiagnosticCategory.TERRAIN,
        "severity": DiagnosticSeverity.LOW,
        "fixes": [
            "Queries landed in cells filled by nearest-point extrapolation",
            "Extend the point cloud beyond the driven area",
        ],
    },
    "outlier_rejected": {
        "category": DiagnosticCategory.LEARNING,
        "severity": DiagnosticSeverity.MEDIUM,
        "fixes": [
            "Residual target exceeded the outlier gate",
            "Check plant noise levels or widen gp.outlier_gate",
        ],
    },
    "gain_breakdown_reset": {
        "category": DiagnosticCategory.LEARNING,
        "severity": DiagnosticSeverity.HIGH,
        "fixes": [
            "RLS gain became non-positive and the head was reset to its prior",
            "Raise the forgetting factor towards 1 or increase kernel jitter",
        ],
    },
    "rollout_failure": {
        "category": DiagnosticCategory.CONTROL,
        "severity": DiagnosticSeverity.LOW,
        "fixes": [
            "Sampled rollouts left the terrain grid",
            "Enlarge the terrain margin around the track",
        ],
    },
    "all_rollouts_failed": {
        "category": DiagnosticCategory.CONTROL,
        "severity": DiagnosticSeverity.CRITICAL,
        "fixes": [
            "Every rollout left the map; the controller braked",
            "Reduce sampling covariance or enlarge the map",
        ],
    },
    "track_departure": {
        "category": DiagnosticCategory.SIMULATION,
        "severity": DiagnosticSeverity.HIGH,
        "fixes": [
            "Vehicle left the drivable corridor or the map",
            "Compare against the gp_recursive controller or lower the speed cap",
        ],
    },
}


class DiagnosticsReporter:
    """Thread-safe event counting and reporting."""

    def __init__(self, report_file: Optional[str] = None, max_records: int = 1000):
        """
        Initialize the diagnostics reporter.

        Args:
            report_file: Path to save reports (default: diagnostics.json)
            max_records: Individual records kept in memory; counters are unbounded
        """
        self.report_file = Path(report_file) if report_file else Path("diagnostics.json")
        self.max_records = max_records
        self.records: List[DiagnosticRecord] = []
        self.counts: Counter = Counter()
        self.session_start = datetime.now(timezone.utc).isoformat()
        self._lock = threading.Lock()

    def record(
        self,
        event_type: str,
        message: str = "",
        count: int = 1,
        context: Optional[Dict[str, Any]] = None,
        severity: Optional[DiagnosticSeverity] = None,
    ) -> None:
        """
        Record an event with automatic categorization.

        Args:
            event_type: Key into the event mappings
            message: Human readable description
            count: Number of occurrences represented by this call
            context: Additional context information
            severity: Override default severity
        """
        if count <= 0:
            return
        mapping = EVENT_MAPPINGS.get(
            event_type,
            {
                "category": DiagnosticCategory.SYSTEM,
                "severity": DiagnosticSeverity.MEDIUM,
                "fixes": ["Unknown event type - investigate manually"],
            },
        )
        entry = DiagnosticRecord(
            timestamp=datetime.now(timezone.utc).isoformat(),
            category=mapping["category"],
            severity=severity or mapping["severity"],
            event_type=event_type,
            message=message,
            count=count,
            context=context or {},
        )
        with self._lock:
            self.counts[event_type] += count
            if len(self.records) < self.max_records:
                self.records.append(entry)

    def count(self, event_type: str) -> int:
        with self._lock:
            return self.counts[event_type]

    def reset(self) -> None:
        with self._lock:
            self.records.clear()
            self.counts.clear()
            self.session_start = datetime.now(timezone.utc).isoformat()

    def generate_summary(self) -> Dict[str, Any]:
        """Generate an event summary with statistics and recommendations."""
        with self._lock:
            counts = dict(self.counts)
            records = list(self.records)

        if not counts:
            return {
                "session_start": self.session_start,
                "generated_at": datetime.now(timezone.utc).isoformat(),
                "total_events": 0,
                "summary": "No events recorded",
                "category_breakdown": {},
                "event_summaries": [],
                "recommendations": [],
            }

        grouped = defaultdict(list)
        for entry in records:
            grouped[entry.event_type].append(entry)

        summaries = []
        for event_type, total in counts.items():
            mapping = EVENT_MAPPINGS.get(event_type, {})
            entries = grouped.get(event_type, [])
            summaries.append(
                DiagnosticSummary(
                    event_type=event_type,
                    count=total,
                    severity=mapping.get("severity", DiagnosticSeverity.MEDIUM),
                    category=mapping.get("category", DiagnosticCategory.SYSTEM),
                    first_seen=entries[0].timestamp if entries else None,
                    last_seen=entries[-1].timestamp if entries else None,
                    suggested_fixes=mapping.get("fixes", []),
                )
            )

        severity_order = {
            DiagnosticSeverity.CRITICAL: 0,
            DiagnosticSeverity.HIGH: 1,
            DiagnosticSeverity.MEDIUM: 2,
            DiagnosticSeverity.LOW: 3,
        }
        summaries.sort(key=lambda s: (severity_order[s.severity], -s.count))

        category_counts: Counter = Counter()
        for s in summaries:
            category_counts[s.category.value] += s.count

        recommendations = [
            f"{s.event_type}: {s.suggested_fixes[-1]}"
            for s in summaries
            if s.severity in (DiagnosticSeverity.CRITICAL, DiagnosticSeverity.HIGH)
            and s.suggested_fixes
        ]

        return {
            "session_start": self.session_start,
            "generated_at": datetime.now(timezone.utc).isoformat(),
            "total_events": sum(counts.values()),
            "category_breakdown": dict(category_counts),
            "event_summaries": [_summary_to_dict(s) for s in summaries],
            "recommendations": recommendations,
        }

    def save_report(self, filename: Optional[Union[str, Path]] = None) -> Path:
        """Save the summary as JSON."""
        report_file = Path(filename) if filename else self.report_file
        report_file.parent.mkdir(parents=True, exist_ok=True)
        with open(report_file, "w", encoding="utf-8") as f:
            json.dump(self.generate_summary(), f, indent=2)
        logger.debug(f"Diagnostics report saved to {report_file}")
        return report_file

    def print_summary(self, max_events: int = 10) -> None:
        """Log a formatted summary."""
        summary = self.generate_summary()
        if summary["total_events"] == 0:
            logger.info("Diagnostics: no events recorded")
            return
        logger.info(f"Diagnostics: {summary['total_events']} events")
        for item in summary["event_summaries"][:max_events]:
            logger.info(f"  {item['event_type']}: {item['count']} ({item['severity']})")
        for recommendation in summary["recommendations"]:
            logger.warning(f"  {recommendation}")


def _summary_to_dict(summary: DiagnosticSummary) -> Dict[str, Any]:
    data = asdict(summary)
    data["severity"] = summary.severity.value
    data["category"] = summary.category.value
    return data


# Global instance for easy access
diagnostics = DiagnosticsReporter()


def log_event(event_type: str, message: str = "", count: int = 1, **kwargs) -> None:
    """Convenience function to record events on the global reporter."""
    diagnostics.record(event_type, message, count=count, **kwargs)
