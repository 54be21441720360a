"""
File I/O: probability vectors, ensembles and tables in; CSV/JSON reports and manifests out.
"""

import hashlib
import io
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
import pydantic

from app.core.exceptions import ValidationError
from app.core.majorization import Policy, ProbVec, make_prob_vec
from app.models.reports import EmbezzleEvaluation, EnsembleSchema, RunManifest
from app.services.conversion_service import Ensemble

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SCAN_COLUMNS = ["n", "d_star", "criterion", "p1", "bound", "error"]


def format_float(value: Any) -> str:
    """Shortest round-trip text for floats; empty for missing values."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return ""
        return repr(value)
    return str(value)


class FileRepository:
    """Readers and writers for every file format the command line touches."""

    def _read_text(self, path: PathLike) -> str:
        try:
            return Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise ValidationError(f"cannot read {path}: {e.strerror or str(e)}")

    def digest(self, path: PathLike) -> str:
        """sha256 hex digest of a file's bytes."""
        try:
            return hashlib.sha256(Path(path).read_bytes()).hexdigest()
        except OSError as e:
            raise ValidationError(f"cannot read {path}: {e.strerror or str(e)}")

    # readers

    def read_prob_vec(self, path: PathLike, policy: Policy = "strict") -> ProbVec:
        """A JSON array of numbers, or a single-column CSV (header optional)."""
        text = self._read_text(path).strip()
        if not text:
            raise ValidationError(f"{path} is empty")
        if text.startswith("["):
            try:
                raw = json.loads(text)
            except json.JSONDecodeError as e:
                raise ValidationError(f"{path}: invalid JSON at line {e.lineno}, column {e.colno}")
            if not isinstance(raw, list):
                raise ValidationError(f"{path}: expected a JSON array of numbers")
        else:
            raw = self._read_column(text, path)
        for i, value in enumerate(raw):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValidationError(f"{path}: entry {i} is not a number ({value!r})")
        try:
            return make_prob_vec(raw, policy=policy)
        except ValidationError as e:
            raise ValidationError(f"{path}: {str(e)}")

    def _read_column(self, text: str, path: PathLike) -> List[Any]:
        first = text.splitlines()[0].strip()
        has_header = not _is_number(first)
        frame = pd.read_csv(io.StringIO(text), header=0 if has_header else None, dtype=str,
                            skip_blank_lines=True)
        if frame.shape[1] != 1:
            raise ValidationError(f"{path}: expected one column, found {frame.shape[1]}")
        values = []
        for i, cell in enumerate(frame.iloc[:, 0].tolist()):
            try:
                values.append(float(cell))
            except (TypeError, ValueError):
                raise ValidationError(f"{path}: entry {i} is not a number ({cell!r})")
        return values

    def read_ensemble(self, path: PathLike, policy: Policy = "strict") -> Ensemble:
        """{"members": [{"weight": w, "state": [...]}, ...]}"""
        text = self._read_text(path)
        try:
            schema = EnsembleSchema.model_validate_json(text)
        except pydantic.ValidationError as e:
            error = e.errors()[0]
            location = ".".join(str(part) for part in error["loc"])
            raise ValidationError(f"{path}: {location or 'document'}: {error['msg']}")
        return Ensemble.from_schema(schema, policy=policy)

    def read_table(self, path: PathLike) -> Tuple[List[float], List[float]]:
        """Two-column CSV (x, f) of a custom defining function."""
        text = self._read_text(path)
        try:
            frame = pd.read_csv(io.StringIO(text))
        except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise ValidationError(f"{path}: {str(e)}")
        if list(frame.columns) != ["x", "f"]:
            raise ValidationError(f"{path}: expected columns x,f, found {','.join(map(str, frame.columns))}")
        for column in ("x", "f"):
            numbers = pd.to_numeric(frame[column], errors="coerce")
            bad = np.flatnonzero(numbers.isna().to_numpy())
            if bad.size:
                raise ValidationError(f"{path}: row {int(bad[0])} column {column} is not a number")
        return frame["x"].astype(float).tolist(), frame["f"].astype(float).tolist()

    def read_json_output(self, path: PathLike) -> Dict[str, Any]:
        return json.loads(self._read_text(path))

    def read_scan_csv(self, path: PathLike) -> List[EmbezzleEvaluation]:
        """Scan rows; m comes from the <path>.manifest.json sidecar and stays unset without one."""
        missing = {column: [""] for column in ("d_star", "criterion", "p1", "bound")}
        frame = pd.read_csv(path, dtype={"error": str}, keep_default_na=False, na_values=missing,
                            float_precision="round_trip")
        m = None
        sidecar = Path(f"{path}.manifest.json")
        if sidecar.exists():
            m = json.loads(self._read_text(sidecar)).get("parameters", {}).get("m")
        rows = []
        for record in frame.to_dict(orient="records"):
            rows.append(EmbezzleEvaluation(
                n=int(record["n"]),
                m=m,
                d_star_value=_or_none(record["d_star"]),
                criterion_value=_or_none(record["criterion"]),
                p1=_or_none(record["p1"]),
                bound=_or_none(record["bound"]),
                error=record["error"] or None,
            ))
        return rows

    def read_figure1_csv(self, path: PathLike) -> pd.DataFrame:
        return pd.read_csv(path, float_precision="round_trip")

    # writers

    def manifest(self, command: str, parameters: Dict[str, Any],
                 inputs: Optional[Dict[str, PathLike]] = None) -> RunManifest:
        digests = {name: self.digest(p) for name, p in (inputs or {}).items()}
        return RunManifest(command=command, parameters=parameters, input_digests=digests)

    def render_json(self, payload: Dict[str, Any], manifest: RunManifest) -> str:
        document = dict(payload)
        document["manifest"] = manifest.model_dump(mode="json")
        return json.dumps(document, sort_keys=True, indent=2, default=_json_default) + "\n"

    def write_json_output(self, payload: Dict[str, Any], manifest: RunManifest,
                          out: Optional[PathLike] = None) -> str:
        """Rendered JSON document; written to out when given."""
        text = self.render_json(payload, manifest)
        if out is not None:
            Path(out).write_text(text, encoding="utf-8")
            logger.info(f"Wrote {out}")
        return text

    def render_csv(self, frame: pd.DataFrame) -> str:
        formatted = frame.apply(lambda column: column.map(format_float))
        return formatted.to_csv(index=False, lineterminator="\n")

    def write_csv(self, frame: pd.DataFrame, manifest: RunManifest,
                  out: Optional[PathLike] = None) -> Tuple[str, str]:
        """(csv, manifest) texts; with out, written to out and <out>.manifest.json."""
        text = self.render_csv(frame)
        manifest_text = json.dumps(manifest.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"
        if out is not None:
            Path(out).write_text(text, encoding="utf-8")
            Path(f"{out}.manifest.json").write_text(manifest_text, encoding="utf-8")
            logger.info(f"Wrote {out} and {out}.manifest.json")
        return text, manifest_text

    def scan_frame(self, evaluations: List[EmbezzleEvaluation]) -> pd.DataFrame:
        rows = [{
            "n": e.n,
            "d_star": e.d_star_value,
            "criterion": e.criterion_value,
            "p1": e.p1,
            "bound": e.bound,
            "error": e.error or "",
        } for e in evaluations]
        return pd.DataFrame(rows, columns=SCAN_COLUMNS).astype(object)


def _is_number(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def _or_none(value: Any) -> Optional[float]:
    if value is None or value == "":
        return None
    value = float(value)
    return None if math.isnan(value) else value


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


file_repository = FileRepository()
