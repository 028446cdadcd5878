"""
Generator files (JSON schema and Matrix Market), reports and run manifests
"""
import json
import logging
import os
import platform
from datetime import datetime
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pytz
import scipy
from pydantic import BaseModel, Field, ValidationError, model_validator

from .. import __version__
from ..config import settings
from ..models.errors import GeneratorFormatError, MatrixError, SchemaError
from ..models.schemas import GeneratorSpec, RunManifest

logger = logging.getLogger(__name__)

MM_BANNER = "%%MatrixMarket"


class GeneratorFile(BaseModel):
    """On-disk JSON schema of a generator"""
    name: str
    dim: int = Field(ge=1)
    matrix: List[List[Tuple[float, float]]]
    description: str = ""

    @model_validator(mode="after")
    def _shape(self):
        if len(self.matrix) != self.dim:
            raise ValueError(f"matrix has {len(self.matrix)} rows, dim is {self.dim}")
        for k, row in enumerate(self.matrix):
            if len(row) != self.dim:
                raise ValueError(f"matrix row {k} has {len(row)} entries, dim is {self.dim}")
        return self


class StorageService:
    def __init__(self, out_dir: str = settings.OUT_DIR):
        self.out_dir = out_dir

    def resolve(self, filename: str) -> str:
        if os.path.isabs(filename):
            return filename
        return os.path.join(self.out_dir, filename)

    @staticmethod
    def _ensure_parent(path: str):
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)

    def load_generator(self, path: str) -> GeneratorSpec:
        """JSON generator file or Matrix Market coordinate file"""
        try:
            with open(path, "r") as handle:
                text = handle.read()
        except OSError as e:
            logger.error(f"Cannot read generator file {path}: {str(e)}")
            raise GeneratorFormatError(f"cannot read {path}: {str(e)}")

        if text.lstrip().startswith(MM_BANNER):
            spec = self._parse_matrix_market(text, path)
        else:
            spec = self._parse_json(text, path)
        logger.info(f"Loaded generator {spec.name} ({spec.dim}x{spec.dim}) from {path}")
        return spec

    def _parse_json(self, text: str, path: str) -> GeneratorSpec:
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as e:
            raise GeneratorFormatError(f"{path}: line {e.lineno}: {e.msg}")

        try:
            doc = GeneratorFile.model_validate(payload)
        except ValidationError as e:
            error = e.errors()[0]
            field = ".".join(str(part) for part in error["loc"]) or "<root>"
            message = error["msg"].removeprefix("Value error, ")
            raise SchemaError(f"{path}: field '{field}': {message}")

        A = np.array([[complex(re, im) for re, im in row] for row in doc.matrix], dtype=complex)
        try:
            return GeneratorSpec(name=doc.name, A=A, description=doc.description)
        except (MatrixError, ValidationError) as e:
            raise SchemaError(f"{path}: field 'matrix': {str(e)}")

    def _parse_matrix_market(self, text: str, path: str) -> GeneratorSpec:
        lines = text.splitlines()
        header = lines[0].split()
        if len(header) != 5 or header[1].lower() != "matrix" or header[2].lower() != "coordinate":
            raise GeneratorFormatError(f"{path}: line 1: expected '{MM_BANNER} matrix coordinate <field> general'")
        field, symmetry = header[3].lower(), header[4].lower()
        if field not in ("complex", "real", "integer") or symmetry != "general":
            raise GeneratorFormatError(f"{path}: line 1: unsupported field/symmetry {field} {symmetry}")
        width = 4 if field == "complex" else 3

        A: Optional[np.ndarray] = None
        expected = seen = 0
        for lineno, line in enumerate(lines[1:], start=2):
            stripped = line.strip()
            if not stripped or stripped.startswith("%"):
                continue
            parts = stripped.split()
            try:
                if A is None:
                    if len(parts) != 3:
                        raise ValueError("size line needs 'rows cols entries'")
                    rows, cols, expected = (int(p) for p in parts)
                    if rows != cols or rows < 1:
                        raise ValueError(f"generator must be square, got {rows}x{cols}")
                    A = np.zeros((rows, cols), dtype=complex)
                    continue
                if len(parts) != width:
                    raise ValueError(f"expected {width} fields, got {len(parts)}")
                i, j = int(parts[0]), int(parts[1])
                value = complex(float(parts[2]), float(parts[3]) if width == 4 else 0.0)
                if not (1 <= i <= A.shape[0] and 1 <= j <= A.shape[1]):
                    raise ValueError(f"index ({i}, {j}) out of range")
                A[i - 1, j - 1] += value
                seen += 1
            except ValueError as e:
                raise GeneratorFormatError(f"{path}: line {lineno}: {str(e)}")

        if A is None:
            raise GeneratorFormatError(f"{path}: missing size line")
        if seen != expected:
            raise GeneratorFormatError(f"{path}: declared {expected} entries, found {seen}")
        name = os.path.splitext(os.path.basename(path))[0]
        return GeneratorSpec(name=name, A=A, description=f"Matrix Market file {os.path.basename(path)}")

    def save_generator(self, path: str, spec: GeneratorSpec) -> str:
        """Inverse of load_generator for the JSON schema; floats keep their shortest repr"""
        doc = {
            "name": spec.name,
            "dim": spec.dim,
            "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in spec.A],
            "description": spec.description,
        }
        self._ensure_parent(path)
        with open(path, "w") as handle:
            json.dump(doc, handle, indent=2)
            handle.write("\n")
        logger.info(f"Saved generator {spec.name} to {path}")
        return path

    def save_report(self, path: str, report: BaseModel) -> str:
        self._ensure_parent(path)
        try:
            with open(path, "w") as handle:
                handle.write(report.model_dump_json(by_alias=True, indent=2))
                handle.write("\n")
        except OSError as e:
            logger.error(f"Error writing report {path}: {str(e)}")
            raise
        logger.info(f"Wrote report: {path}")
        return path

    def build_manifest(self, command: str, seed: int, tolerances: Dict[str, float],
                       config: Optional[Dict[str, Any]] = None) -> RunManifest:
        return RunManifest(
            command=command,
            seed=seed,
            rng=settings.RNG_ALGORITHM,
            tolerances=dict(tolerances),
            versions={
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "semispec": __version__,
            },
            config=config or {},
            created_at=datetime.now(pytz.utc).isoformat(),
        )

    def write_manifest(self, path: str, manifest: RunManifest) -> str:
        return self.save_report(path, manifest)
