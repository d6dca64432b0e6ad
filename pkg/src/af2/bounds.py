"""Search and reduction bounds shared by every bounded operation."""

from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Bounds:
    max_steps: int = 10000
    max_term_size: int = 5000
    max_inst_depth: int = 3
    max_congr_depth: int = 6

    def __post_init__(self) -> None:
        for name in ("max_steps", "max_term_size", "max_inst_depth", "max_congr_depth"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")

    def override(self, **kwargs: int) -> "Bounds":
        return replace(self, **kwargs)


DEFAULT_BOUNDS = Bounds()
