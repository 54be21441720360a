from fastapi import APIRouter, HTTPException
from typing import List, Optional
import logging

from pydantic import BaseModel, Field
import pydantic

from app.core.exceptions import ConvergenceError, EmbezzleMeterError, InternalError, ValidationError
from app.core.majorization import make_prob_vec
from app.models.reports import AsymptoticsReport, ConversionReport, EmbezzleEvaluation, EnsembleCheckResult, \
    EnsembleSchema
from app.services.asymptotics_service import asymptotics_service
from app.services.conversion_service import Ensemble, conversion_service, nielsen_convertible, pure_to_mixed_check
from app.services.embezzlement_service import embezzlement_service, parse_schedule
from app.services.family_service import parse_family

logger = logging.getLogger(__name__)

router = APIRouter()


class PairRequest(BaseModel):
    psi: List[float]
    phi: List[float]
    renormalize: bool = False


class DStarRequest(PairRequest):
    purified: bool = False
    method: str = "cvxpy"
    oracle: Optional[str] = None
    discrimination_input: str = "d_star"


class EnsembleRequest(BaseModel):
    psi: List[float]
    ensemble: EnsembleSchema
    pure_to_mixed: bool = False


class ScanRequest(BaseModel):
    family: str
    m: int = Field(ge=2)
    schedule: str


class FamilyLimitRequest(BaseModel):
    family: str
    m: int = Field(ge=2)
    numeric: bool = False
    schedule: Optional[str] = None
    finite_n: Optional[str] = None
    cross_check: bool = False


class EnsembleCheckResponse(EnsembleCheckResult):
    pure_to_mixed: Optional[bool] = None


def _http_error(action: str, e: Exception) -> HTTPException:
    if isinstance(e, (ConvergenceError, InternalError)):
        logger.error(f"Failed to {action}: {str(e)}")
        return HTTPException(status_code=500, detail=f"Error trying to {action}: {str(e)}")
    if isinstance(e, pydantic.ValidationError):
        return HTTPException(status_code=400, detail=e.errors()[0]["msg"])
    return HTTPException(status_code=400, detail=str(e))


def _policy(renormalize: bool) -> str:
    return "renormalize" if renormalize else "strict"


def _family(text: str):
    # custom tables name server-side files
    if text.strip().startswith("custom:"):
        raise ValidationError("custom families are available from the command line only")
    return parse_family(text)


@router.post("/dstar", response_model=ConversionReport)
def compute_dstar(request: DStarRequest):
    """Star conversion distance with optional purified value and oracle cross-check"""
    try:
        psi = make_prob_vec(request.psi, policy=_policy(request.renormalize))
        phi = make_prob_vec(request.phi, policy=_policy(request.renormalize))
        return conversion_service.report(psi, phi, purified=request.purified, method=request.method,
                                         oracle=request.oracle, discrimination_input=request.discrimination_input)
    except EmbezzleMeterError as e:
        raise _http_error("compute the star distance", e)


@router.post("/nielsen")
def check_nielsen(request: PairRequest):
    """Exact LOCC convertibility of psi into phi"""
    try:
        psi = make_prob_vec(request.psi, policy=_policy(request.renormalize))
        phi = make_prob_vec(request.phi, policy=_policy(request.renormalize))
        return {"convertible": nielsen_convertible(psi, phi), "dim": max(psi.dim, phi.dim)}
    except EmbezzleMeterError as e:
        raise _http_error("check convertibility", e)


@router.post("/ensemble-check", response_model=EnsembleCheckResponse)
def check_ensemble(request: EnsembleRequest):
    """Convertibility of psi into an ensemble of pure states"""
    try:
        psi = make_prob_vec(request.psi)
        ens = Ensemble.from_schema(request.ensemble)
        result = conversion_service.check_ensemble(psi, ens)
        extra = pure_to_mixed_check(psi, ens) if request.pure_to_mixed else None
        return EnsembleCheckResponse(**result.model_dump(), pure_to_mixed=extra)
    except EmbezzleMeterError as e:
        raise _http_error("check the ensemble", e)


@router.post("/embezzle-scan", response_model=List[EmbezzleEvaluation])
def run_embezzle_scan(request: ScanRequest):
    """Embezzlement distance of a family over a schedule of n"""
    try:
        spec = _family(request.family)
        return embezzlement_service.embezzle_scan(spec, request.m, parse_schedule(request.schedule))
    except (EmbezzleMeterError, pydantic.ValidationError) as e:
        raise _http_error("scan the family", e)


@router.post("/family-limit", response_model=AsymptoticsReport)
def compute_family_limit(request: FamilyLimitRequest):
    """Analytic and numeric asymptotics of a family"""
    try:
        spec = _family(request.family)
        y_schedule = parse_schedule(request.schedule, integer=False) if request.schedule else None
        n_schedule = parse_schedule(request.finite_n) if request.finite_n else None
        return asymptotics_service.family_limit(spec, request.m, numeric=request.numeric or bool(y_schedule),
                                                y_schedule=y_schedule, finite_n_schedule=n_schedule,
                                                cross_check=request.cross_check)
    except (EmbezzleMeterError, pydantic.ValidationError) as e:
        raise _http_error("compute the family limit", e)
