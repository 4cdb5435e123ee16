from __future__ import annotations

from collections import Counter
from dataclasses import asdict, dataclass, field
from threading import RLock
from typing import Any, Dict


@dataclass(frozen=True)
class MetricsSnapshot:
    runs_started: int
    runs_converged: int
    runs_failed: int
    newton_accepted: int
    newton_rejected: int
    method_counts: Dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


class MetricsProvider:
    """Thread-safe suite counters shared by concurrent bench runs."""

    def __init__(self) -> None:
        self._lock = RLock()
        self._runs_started = 0
        self._runs_converged = 0
        self._runs_failed = 0
        self._newton_accepted = 0
        self._newton_rejected = 0
        self._method_counts: Counter[str] = Counter()

    # --- mutation helpers ---
    def note_run_started(self, method: str) -> None:
        with self._lock:
            self._runs_started += 1
            self._method_counts[method] += 1

    def note_run_finished(self, *, converged: bool) -> None:
        with self._lock:
            if converged:
                self._runs_converged += 1
            else:
                self._runs_failed += 1

    def note_run_failed(self) -> None:
        with self._lock:
            self._runs_failed += 1

    def note_newton(self, *, accepted: int, rejected: int) -> None:
        with self._lock:
            self._newton_accepted += accepted
            self._newton_rejected += rejected

    # --- observation helpers ---
    def snapshot(self) -> MetricsSnapshot:
        with self._lock:
            return MetricsSnapshot(
                runs_started=self._runs_started,
                runs_converged=self._runs_converged,
                runs_failed=self._runs_failed,
                newton_accepted=self._newton_accepted,
                newton_rejected=self._newton_rejected,
                method_counts=dict(self._method_counts),
            )

    # --- lifecycle helpers ---
    def restore(self, snapshot: MetricsSnapshot) -> None:
        with self._lock:
            self._runs_started = snapshot.runs_started
            self._runs_converged = snapshot.runs_converged
            self._runs_failed = snapshot.runs_failed
            self._newton_accepted = snapshot.newton_accepted
            self._newton_rejected = snapshot.newton_rejected
            self._method_counts = Counter(snapshot.method_counts)

    def reset(self) -> None:
        self.restore(MetricsSnapshot(0, 0, 0, 0, 0, {}))


metrics = MetricsProvider()


__all__ = ["MetricsProvider", "MetricsSnapshot", "metrics"]
