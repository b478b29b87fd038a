from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass


@dataclass
class StageTimings:
    """Wall-clock seconds per pipeline stage.

    load: parsing inputs and building folds; compute: enumeration, pair
    scoring and ranking; save: writing results.
    """

    load_seconds: float = 0.0
    compute_seconds: float = 0.0
    save_seconds: float = 0.0

    @property
    def total_seconds(self) -> float:
        return self.load_seconds + self.compute_seconds + self.save_seconds

    def to_dict(self) -> dict[str, float]:
        return {
            "load_seconds": self.load_seconds,
            "compute_seconds": self.compute_seconds,
            "save_seconds": self.save_seconds,
            "total_seconds": self.total_seconds,
        }


@contextmanager
def stage(timings: StageTimings, name: str):
    start = time.perf_counter()
    try:
        yield
    finally:
        attr = f"{name}_seconds"
        setattr(timings, attr, getattr(timings, attr) + time.perf_counter() - start)
