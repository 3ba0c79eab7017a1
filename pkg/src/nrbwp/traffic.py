"""Deterministic downlink traffic sources."""
from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class TrafficSource:
    """Per-UE arrivals, one batch per slot.

    ``constant`` delivers ``bytes_per_slot`` every slot; ``onoff`` alternates
    ``on_slots`` busy slots with ``off_slots`` idle ones, starting at a phase
    drawn from the seeded stream. Arrivals stop at ``stop_slot`` when given.
    """
    ue_id: int
    model: str = "constant"
    bytes_per_slot: int = 0
    on_slots: int = 0
    off_slots: int = 0
    seed: int = 0
    stop_slot: Optional[int] = None

    def __post_init__(self):
        if self.model not in ("constant", "onoff"):
            raise ValueError(f"unknown traffic model {self.model!r}")
        if self.bytes_per_slot < 0:
            raise ValueError("bytes_per_slot must be non-negative")
        if self.model == "onoff" and (self.on_slots < 1 or self.off_slots < 0):
            raise ValueError("onoff needs on_slots >= 1 and off_slots >= 0")
        if self.stop_slot is not None and self.stop_slot < 0:
            raise ValueError("stop_slot must be non-negative")

    def schedule(self, duration_slots, rng: np.random.Generator):
        """Yield ``(slot, bytes)`` for every slot with a non-zero arrival."""
        if self.bytes_per_slot == 0:
            return
        if self.stop_slot is not None:
            duration_slots = min(duration_slots, self.stop_slot)
        if self.model == "constant":
            for slot in range(duration_slots):
                yield slot, self.bytes_per_slot
            return
        period = self.on_slots + self.off_slots
        phase = int(rng.integers(period))
        for slot in range(duration_slots):
            if (slot + phase) % period < self.on_slots:
                yield slot, self.bytes_per_slot

    def total_bytes(self, duration_slots, rng):
        return sum(b for _, b in self.schedule(duration_slots, rng))
