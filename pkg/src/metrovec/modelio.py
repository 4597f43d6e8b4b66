"""Line-based text format for models.

::

    ising-model v1
    spins <n>
    layers <L> <P>
    h <i> <hex-float>
    edge <i> <j> <hex-float> <space|tau>

Couplings and fields are written as hexadecimal float literals so a save/load
round trip is bit-exact.  Blank lines and ``#`` comments are ignored; any
other unrecognised line is an error.  Per-spin slot order is not part of the
format: loaded models come back in canonical order.
"""

from __future__ import annotations

import io
import os
from typing import TextIO

import numpy as np

from .model import DTYPE, ModelError, SpinModel, infer_layered_meta, with_layered_meta

HEADER = "ising-model v1"


class ModelFormatError(ModelError):
    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


def _hex(value) -> str:
    return float(np.float32(value)).hex()


def write_model(model: SpinModel, out: TextIO) -> None:
    out.write(f"{HEADER}\n")
    out.write(f"spins {model.n_spins}\n")
    meta = model.layered
    if meta is not None and meta.ordering != "custom":
        out.write(f"layers {meta.n_layers} {meta.per_layer}\n")
    bits = model.h.view(np.uint32)
    for i in np.flatnonzero(bits):
        out.write(f"h {i} {_hex(model.h[i])}\n")
    for i, j, J, tau in zip(*model.undirected()):
        out.write(f"edge {i} {j} {_hex(J)} {'tau' if tau else 'space'}\n")


def dumps(model: SpinModel) -> str:
    buf = io.StringIO()
    write_model(model, buf)
    return buf.getvalue()


def save_model(model: SpinModel, path: str | os.PathLike) -> None:
    try:
        with open(path, "w", encoding="utf-8") as f:
            write_model(model, f)
    except OSError as exc:
        raise OSError(f"cannot write model to {path}: {exc}") from exc


def _parse_float(tok: str, line: int) -> np.float32:
    try:
        value = float.fromhex(tok) if "x" in tok.lower() else float(tok)
    except ValueError:
        raise ModelFormatError(line, f"bad number {tok!r}") from None
    v32 = np.float32(value)
    if float(v32) != value and np.isfinite(value):
        raise ModelFormatError(line, f"{tok} is not exactly representable in single precision")
    return v32


def _parse_index(tok: str, n: int | None, line: int) -> int:
    try:
        v = int(tok)
    except ValueError:
        raise ModelFormatError(line, f"bad index {tok!r}") from None
    if v < 0 or (n is not None and v >= n):
        raise ModelFormatError(line, f"spin index {v} out of range")
    return v


def read_model(src: TextIO) -> SpinModel:
    n = None
    layers = None
    h = None
    edges: dict[tuple[int, int], tuple[np.float32, bool, int]] = {}
    mirrors: list[tuple[int, int, np.float32, bool, int]] = []
    seen_header = False
    for lineno, raw in enumerate(src, 1):
        text = raw.split("#", 1)[0].strip()
        if not text:
            continue
        if not seen_header:
            if text != HEADER:
                raise ModelFormatError(lineno, f"expected header {HEADER!r}, got {text!r}")
            seen_header = True
            continue
        tok = text.split()
        kw = tok[0]
        if kw == "spins":
            if n is not None or len(tok) != 2:
                raise ModelFormatError(lineno, "malformed or repeated 'spins' line")
            n = _parse_index(tok[1], None, lineno)
            h = np.zeros(n, DTYPE)
            continue
        if n is None:
            raise ModelFormatError(lineno, "'spins' must precede other records")
        if kw == "layers":
            if layers is not None or len(tok) != 3:
                raise ModelFormatError(lineno, "malformed or repeated 'layers' line")
            layers = (_parse_index(tok[1], None, lineno), _parse_index(tok[2], None, lineno), lineno)
        elif kw == "h":
            if len(tok) != 3:
                raise ModelFormatError(lineno, "expected 'h <i> <value>'")
            h[_parse_index(tok[1], n, lineno)] = _parse_float(tok[2], lineno)
        elif kw == "edge":
            if len(tok) != 5 or tok[4] not in ("space", "tau"):
                raise ModelFormatError(lineno, "expected 'edge <i> <j> <value> <space|tau>'")
            i = _parse_index(tok[1], n, lineno)
            j = _parse_index(tok[2], n, lineno)
            if i == j:
                raise ModelFormatError(lineno, f"self-edge on spin {i}")
            J = _parse_float(tok[3], lineno)
            tau = tok[4] == "tau"
            if i > j:
                mirrors.append((j, i, J, tau, lineno))
                continue
            if (i, j) in edges:
                raise ModelFormatError(lineno, f"duplicate edge {i} {j}")
            edges[(i, j)] = (J, tau, lineno)
        else:
            raise ModelFormatError(lineno, f"unknown record {kw!r}")
    if not seen_header:
        raise ModelFormatError(1, "empty document")
    if n is None:
        raise ModelFormatError(1, "missing 'spins' line")
    for i, j, J, tau, lineno in mirrors:
        fwd = edges.get((i, j))
        if fwd is None or fwd[0].view(np.uint32) != J.view(np.uint32) or fwd[1] != tau:
            raise ModelFormatError(lineno, f"asymmetric edge {j} {i}")
    keys = sorted(edges)
    ei = np.array([k[0] for k in keys], np.int64)
    ej = np.array([k[1] for k in keys], np.int64)
    eJ = np.array([edges[k][0] for k in keys], DTYPE)
    et = np.array([edges[k][1] for k in keys], bool)
    model = SpinModel.from_undirected(n, h, ei, ej, eJ, et)
    if layers is not None:
        L, P, lineno = layers
        try:
            model = with_layered_meta(model, infer_layered_meta(model, L, P))
        except ModelError as exc:
            raise ModelFormatError(lineno, str(exc)) from None
    return model


def loads(text: str) -> SpinModel:
    return read_model(io.StringIO(text))


def load_model(path: str | os.PathLike) -> SpinModel:
    with open(path, encoding="utf-8") as f:
        return read_model(f)
