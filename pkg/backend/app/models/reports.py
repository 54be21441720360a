"""
Pydantic models for reports, wire schemas and run manifests.
"""

from datetime import datetime, timezone
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, Field

from app import __version__


class ConversionReport(BaseModel):
    d_star: float
    argmax_k: int
    sandwich_lo: float
    sandwich_hi: float
    discrimination_bound: float
    discrimination_input: str = "d_star"
    d_star_purified: Optional[float] = None
    purified_method: Optional[str] = None
    oracle: Optional[str] = None
    d_star_oracle: Optional[float] = None
    dim: int
    rank_psi: int


class EnsembleCheckResult(BaseModel):
    convertible: bool
    worst_k: int
    margin: float


class EmbezzleEvaluation(BaseModel):
    n: int
    m: Optional[int] = None
    d_star_value: Optional[float] = None
    criterion_value: Optional[float] = None
    p1: Optional[float] = None
    argmax_k: Optional[int] = None
    argmax_l: Optional[int] = None
    bound: Optional[float] = None
    streamed: bool = False
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


class IntegralPoint(BaseModel):
    y: float
    M: Optional[float] = None
    maximizer: Optional[float] = None
    derivative_M: Optional[float] = None
    grid_M: Optional[float] = None
    grid_maximizer: Optional[float] = None
    error: Optional[str] = None


class AsymptoticsReport(BaseModel):
    family: str
    m: int
    analytic_limit: Optional[float] = None
    analytic_lower: Optional[float] = None
    analytic_upper: Optional[float] = None
    numeric_M: List[Tuple[float, float]] = Field(default_factory=list)
    points: List[IntegralPoint] = Field(default_factory=list)
    tail_inf: Optional[float] = None
    tail_sup: Optional[float] = None
    divergence_warning: bool = False
    finite_n_tail: List[Tuple[int, float]] = Field(default_factory=list)
    tolerance_note: Optional[str] = None


class EnsembleMemberSchema(BaseModel):
    weight: float
    state: List[float]


class EnsembleSchema(BaseModel):
    members: List[EnsembleMemberSchema]


class RunManifest(BaseModel):
    command: str
    parameters: Dict[str, Any] = Field(default_factory=dict)
    tool_version: str = __version__
    timestamp: str = Field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    input_digests: Dict[str, str] = Field(default_factory=dict)
