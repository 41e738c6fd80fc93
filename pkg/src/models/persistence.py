import hashlib
import json
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ValidationError

from src.data.encoding import InputEncoder
from src.errors import ModelFileError, ShapeError
from src.models.mlp import MlpModel

MODEL_FORMAT_VERSION = "1"


class ModelFile(BaseModel):
    layer_sizes: List[int]
    weights: List[List[List[float]]]
    biases: List[List[float]]
    hidden_activation: Literal["relu"] = "relu"
    head: Literal["softmax", "linear"]
    # categorical feature -> one-hot category order; must agree with ``encoder``, which also
    # carries the numeric scales and is the one used to encode inputs
    encoding: Dict[str, List[str]] = {}
    encoder: Optional[InputEncoder] = None
    class_labels: List[str] = []
    format_version: str = MODEL_FORMAT_VERSION


def model_to_dict(model: MlpModel) -> dict:
    return ModelFile(
        layer_sizes=model.layer_sizes,
        weights=[w.tolist() for w in model.weights],
        biases=[b.tolist() for b in model.biases],
        hidden_activation=model.hidden_activation,
        head=model.head,
        encoding=model.encoder.category_map if model.encoder else {},
        encoder=model.encoder,
        class_labels=model.class_labels,
    ).model_dump(mode="json")


def save_model(model: MlpModel, path: Union[str, Path]) -> Path:
    """Human-readable JSON; floats keep full round-trip precision."""
    out = Path(path)
    out.write_text(json.dumps(model_to_dict(model), indent=1), encoding="utf-8")
    return out


def _as_matrix(rows, layer: int, what: str) -> np.ndarray:
    try:
        return np.array(rows, dtype=float)
    except ValueError:
        raise ShapeError(f"layer {layer}: ragged {what}") from None


def load_model(
    path: Union[str, Path], expected_layer_sizes: Optional[Sequence[int]] = None
) -> MlpModel:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"malformed model file {path}: {exc}") from None
    try:
        parsed = ModelFile.model_validate(raw)
    except ValidationError as exc:
        raise ModelFileError(f"malformed model file {path}: {exc}") from None
    if parsed.encoding and parsed.encoder is None:
        raise ModelFileError(f"model file {path} has a categorical encoding but no input encoder")
    if parsed.encoder is not None and parsed.encoding and parsed.encoding != parsed.encoder.category_map:
        raise ModelFileError(f"model file {path}: encoding disagrees with the input encoder's categories")

    if expected_layer_sizes is not None and list(expected_layer_sizes) != parsed.layer_sizes:
        raise ShapeError(
            f"model file has layer_sizes {parsed.layer_sizes}, expected {list(expected_layer_sizes)}"
        )
    weights = [_as_matrix(w, l, "weight matrix") for l, w in enumerate(parsed.weights)]
    biases = [_as_matrix(b, l, "bias vector") for l, b in enumerate(parsed.biases)]
    # MlpModel validates every shape and names the offending layer
    return MlpModel(
        layer_sizes=parsed.layer_sizes,
        weights=weights,
        biases=biases,
        head=parsed.head,
        hidden_activation=parsed.hidden_activation,
        encoder=parsed.encoder,
        class_labels=parsed.class_labels,
    )


def model_fingerprint(model: MlpModel) -> str:
    canonical = json.dumps(model_to_dict(model), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
