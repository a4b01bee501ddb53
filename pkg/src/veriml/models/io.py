"""Model files: JSON with raw fixed-point parameters and the packed model hash."""

from __future__ import annotations

import json
from pathlib import Path

from .base import ModelState


def model_to_json(state: ModelState) -> dict:
    from ..protocol.prediction import model_hash

    try:
        mh = model_hash(state.params).hex()
    except ValueError:  # parameters wider than the 64-bit packing
        mh = None
    return {"kind": state.kind, "frac_bits": state.frac_bits, "iteration": state.iteration,
            "shape": state.shape, "params": [str(v) for v in state.params], "model_hash": mh}


def model_from_json(obj: dict) -> ModelState:
    try:
        return ModelState(obj["kind"], [int(v) for v in obj["params"]], int(obj["frac_bits"]),
                          int(obj.get("iteration", 0)), obj.get("shape"))
    except (KeyError, TypeError, ValueError) as e:
        raise ValueError(f"malformed model file: {e}") from None


def save_model(state: ModelState, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_json(state), indent=1))


def load_model(path: str | Path) -> ModelState:
    return model_from_json(json.loads(Path(path).read_text()))
