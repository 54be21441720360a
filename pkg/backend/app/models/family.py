"""
FamilySpec: defining functions f of Schmidt-coefficient families p_x = f(x) / F_n.
"""

from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from app.core.exceptions import DomainError, ValidationError

FamilyKind = Literal[
    "vdh", "power", "logcorrected", "oscillating", "exponential", "constant", "custom", "regularized"
]
Direction = Literal["decreasing", "increasing"]


class FamilySpec(BaseModel):
    """Immutable description of a defining function f on x >= 1."""

    model_config = ConfigDict(frozen=True)

    kind: FamilyKind
    alpha: Optional[float] = None
    k: Optional[float] = None
    level: Optional[float] = None
    table_x: Optional[Tuple[float, ...]] = None
    table_f: Optional[Tuple[float, ...]] = None
    source: Optional[str] = None
    base: Optional["FamilySpec"] = None
    cutoff: Optional[int] = None
    direction: Optional[Direction] = None

    @model_validator(mode="after")
    def _check_parameters(self) -> "FamilySpec":
        required = {
            "power": ("alpha",),
            "logcorrected": ("k",),
            "exponential": ("k",),
            "constant": ("level",),
            "custom": ("table_x", "table_f"),
            "regularized": ("base", "cutoff", "level", "direction"),
        }.get(self.kind, ())
        for name in required:
            if getattr(self, name) is None:
                raise ValueError(f"family kind '{self.kind}' requires '{name}'")
        if self.kind == "constant" and not self.level > 0:
            raise ValueError(f"constant family level must be positive, got {self.level!r}")
        if self.kind == "custom":
            xs = np.asarray(self.table_x, dtype=float)
            fs = np.asarray(self.table_f, dtype=float)
            if xs.size != fs.size or xs.size < 2:
                raise ValueError("custom table needs at least two (x, f(x)) rows of equal length")
            if np.any(np.diff(xs) <= 0):
                raise ValueError("custom table x values must be strictly increasing")
            if xs[0] > 1.0:
                raise ValueError(f"custom table must start at x <= 1, starts at {xs[0]!r}")
            bad = np.flatnonzero(~(fs > 0))
            if bad.size:
                raise ValueError(f"f must be positive; row {int(bad[0])} has f({xs[bad[0]]!r}) = {fs[bad[0]]!r}")
        if self.kind == "regularized" and self.cutoff < 1:
            raise ValueError(f"cutoff must be at least 1, got {self.cutoff}")
        return self

    # constructors

    @classmethod
    def vdh(cls) -> "FamilySpec":
        return cls(kind="vdh")

    @classmethod
    def power(cls, alpha: float) -> "FamilySpec":
        return cls(kind="power", alpha=float(alpha))

    @classmethod
    def logcorrected(cls, k: float) -> "FamilySpec":
        return cls(kind="logcorrected", k=float(k))

    @classmethod
    def oscillating(cls) -> "FamilySpec":
        return cls(kind="oscillating")

    @classmethod
    def exponential(cls, k: float) -> "FamilySpec":
        return cls(kind="exponential", k=float(k))

    @classmethod
    def constant(cls, level: float) -> "FamilySpec":
        return cls(kind="constant", level=float(level))

    @classmethod
    def custom(cls, xs, fs, source: Optional[str] = None) -> "FamilySpec":
        return cls(kind="custom", table_x=tuple(float(x) for x in xs),
                   table_f=tuple(float(f) for f in fs), source=source)

    # evaluation

    @property
    def label(self) -> str:
        if self.kind == "vdh":
            return "vdh"
        if self.kind == "power":
            return f"power:{self.alpha!r}"
        if self.kind == "logcorrected":
            return f"log:{self.k!r}"
        if self.kind == "oscillating":
            return "osc"
        if self.kind == "exponential":
            return f"exp:{self.k!r}"
        if self.kind == "constant":
            return f"const:{self.level!r}"
        if self.kind == "custom":
            return f"custom:{self.source or 'table'}"
        return f"regularized({self.base.label},M={self.cutoff})"

    @property
    def domain_max(self) -> float:
        if self.kind == "custom":
            return self.table_x[-1]
        if self.kind == "regularized":
            return self.base.domain_max
        return float("inf")

    @property
    def breakpoints(self) -> Tuple[float, ...]:
        """Points where f is not smooth: table rows and the plateau cutoff."""
        if self.kind == "custom":
            return self.table_x
        if self.kind == "regularized":
            return tuple(sorted({float(self.cutoff), *self.base.breakpoints}))
        return ()

    @property
    def monotonicity(self) -> Optional[Direction]:
        """Declared direction of f on the integers, or None when f is not monotone."""
        if self.kind in ("vdh", "constant"):
            return "decreasing"
        if self.kind == "power":
            return "decreasing" if self.alpha <= 0 else "increasing"
        if self.kind == "logcorrected":
            return "decreasing" if self.k >= 0 else None
        if self.kind == "exponential":
            return "decreasing" if self.k <= 0 else "increasing"
        if self.kind == "custom":
            steps = np.diff(np.asarray(self.table_f))
            if np.all(steps <= 0):
                return "decreasing"
            if np.all(steps >= 0):
                return "increasing"
            return None
        if self.kind == "regularized":
            return self.direction
        return None

    def log_f(self, x) -> np.ndarray:
        """Natural log of f at real points x >= 1."""
        x = np.asarray(x, dtype=np.float64)
        if np.any(x > self.domain_max):
            raise DomainError(f"{self.label} is defined only up to x = {self.domain_max!r}")
        if self.kind == "vdh":
            return -np.log(x)
        if self.kind == "power":
            return self.alpha * np.log(x)
        if self.kind == "logcorrected":
            lx = np.log(x)
            return -lx - self.k * np.log1p(lx)
        if self.kind == "oscillating":
            lx = np.log(x)
            safe = np.where(lx > 0, lx, 1.0)
            # f(1) = 1: the (1 + sin ln ln x) ln x term vanishes at x = 1
            numerator = np.where(lx > 0, 1.0 + (1.0 + np.sin(np.log(safe))) * lx, 1.0)
            return np.log(numerator) - lx
        if self.kind == "exponential":
            return self.k * x
        if self.kind == "constant":
            return np.full_like(x, np.log(self.level))
        if self.kind == "custom":
            return np.log(np.interp(x, self.table_x, self.table_f))
        plateau = float(np.log(self.level))
        return np.where(x <= self.cutoff, plateau, self.base.log_f(np.maximum(x, self.cutoff)))

    def f(self, x) -> np.ndarray:
        return np.exp(self.log_f(x))

    def sorted_weights(self, n: int, lo: int, hi: int) -> np.ndarray:
        """Unnormalized non-increasing weights at sorted positions lo+1..hi of the size-n member.

        Decreasing f gives f(x)/f(1); increasing f gives f(n+1-x)/f(n).
        """
        direction = self.monotonicity
        if direction is None:
            raise ValidationError(f"{self.label} is not monotone; materialize and sort instead")
        if n > self.domain_max:
            raise DomainError(f"n = {n} exceeds the domain of {self.label} (x <= {self.domain_max!r})")
        positions = np.arange(lo + 1, hi + 1, dtype=np.float64)
        if direction == "decreasing":
            return np.exp(self.log_f(positions) - self.log_f(1.0))
        return np.exp(self.log_f(n + 1.0 - positions) - self.log_f(float(n)))


FamilySpec.model_rebuild()
