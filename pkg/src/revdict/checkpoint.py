"""Versioned checkpoint container for feed-forward stacks.

A checkpoint is a single JSON document: format version, an architecture
tag, per-layer dims/activation plus base64-encoded row-major little-endian
float64 arrays, free-form metadata, and the training history. Weights
round-trip losslessly; serialization is byte-deterministic (sorted keys).
"""

from __future__ import annotations

import base64
import binascii
import json

import numpy as np

from .nnet import DenseLayer, FeedForwardStack

FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    """Unreadable, corrupt, or version-incompatible checkpoint file."""


def _encode_array(arr: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(arr, dtype="<f8").tobytes()).decode(
        "ascii"
    )


def _decode_array(text: str, shape: tuple[int, ...], where: str) -> np.ndarray:
    try:
        raw = base64.b64decode(text.encode("ascii"), validate=True)
    except (binascii.Error, UnicodeEncodeError) as exc:
        raise CheckpointError(f"{where}: invalid base64 payload") from exc
    expected = int(np.prod(shape)) * 8
    if len(raw) != expected:
        raise CheckpointError(
            f"{where}: payload holds {len(raw)} bytes, expected {expected}"
        )
    arr = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)
    if not np.isfinite(arr).all():
        raise CheckpointError(f"{where}: non-finite values")
    return arr


def save_stack(path, stack: FeedForwardStack, architecture: str, metadata: dict, history: list) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "architecture": architecture,
        "layers": [
            {
                "d_in": layer.d_in,
                "d_out": layer.d_out,
                "activation": layer.activation,
                "weights": _encode_array(layer.weights),
                "bias": _encode_array(layer.bias),
            }
            for layer in stack.layers
        ],
        "metadata": metadata,
        "history": history,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_stack(path):
    """Read a checkpoint; returns (stack, architecture, metadata, history)."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: corrupt checkpoint ({exc})") from exc
    if not isinstance(doc, dict):
        raise CheckpointError(f"{path}: corrupt checkpoint (not an object)")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: format version {version!r}, this build reads {FORMAT_VERSION}"
        )
    try:
        layer_docs = doc["layers"]
        architecture = doc["architecture"]
        metadata = doc["metadata"]
        history = doc["history"]
    except KeyError as exc:
        raise CheckpointError(f"{path}: missing section {exc}") from exc
    layers = []
    for i, ld in enumerate(layer_docs):
        try:
            d_in, d_out, activation = ld["d_in"], ld["d_out"], ld["activation"]
            weights = _decode_array(ld["weights"], (d_out, d_in), f"{path} layer {i} weights")
            bias = _decode_array(ld["bias"], (d_out,), f"{path} layer {i} bias")
        except KeyError as exc:
            raise CheckpointError(f"{path}: layer {i} missing field {exc}") from exc
        try:
            layers.append(DenseLayer(weights, bias, activation))
        except ValueError as exc:
            raise CheckpointError(f"{path}: layer {i}: {exc}") from exc
    try:
        stack = FeedForwardStack(layers)
    except ValueError as exc:
        raise CheckpointError(f"{path}: {exc}") from exc
    return stack, architecture, metadata, history
