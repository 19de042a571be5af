"""Event records shared by the engine and the attack injectors."""

from __future__ import annotations

from dataclasses import dataclass

AUTH_FAIL = "auth_fail"
EVICTION = "eviction"
TAMPER_DETECTED = "tamper_detected"
DROP = "drop"
DEATH = "death"
REFUSAL = "refusal"
WARNING = "warning"
FLOOD = "flood"

# categories with their own column in the metrics CSV
COUNTED = (AUTH_FAIL, EVICTION, TAMPER_DETECTED, DROP)


@dataclass(frozen=True)
class Event:
    round: int
    category: str
    node_id: int
    detail: str = ""
    count: int = 1
