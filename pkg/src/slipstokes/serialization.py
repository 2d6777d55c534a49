"""Versioned JSON container for spectra, operators, fields and trajectories.

Layout::

    {"format": "slipstokes", "version": 1, "kind": "...",
     "meta": {...scalars...},
     "arrays": {"name": {"dtype": "<f8", "shape": [...], "data": "<base64>"}}}

Bulk data is stored flat, little-endian, base64-encoded.  Output is key-sorted
so that identical objects serialise to identical bytes.
"""

from __future__ import annotations

import base64
import json
from typing import Any

import numpy as np

from .operator_core import (
    GeneralSectorialOperator,
    GridField,
    ModalField,
    Sector,
    SlipStokesSpectrum,
)

FORMAT = "slipstokes"
VERSION = 1


class ContainerError(ValueError):
    pass


def encode_array(a) -> dict:
    a = np.asarray(a)
    if a.dtype.kind == "c":
        dt = np.dtype("<c16")
    elif a.dtype.kind in "iub":
        dt = np.dtype("<i8")
    else:
        dt = np.dtype("<f8")
    raw = np.ascontiguousarray(a, dtype=dt).tobytes()
    return {"dtype": dt.str, "shape": list(a.shape), "data": base64.b64encode(raw).decode("ascii")}


def decode_array(obj: dict) -> np.ndarray:
    dt = np.dtype(obj["dtype"])
    if dt.str not in ("<c16", "<i8", "<f8"):
        raise ContainerError(f"unsupported dtype {obj['dtype']!r}")
    flat = np.frombuffer(base64.b64decode(obj["data"]), dtype=dt)
    shape = tuple(obj["shape"])
    if flat.size != int(np.prod(shape, dtype=np.int64)):
        raise ContainerError("array payload does not match its shape")
    return flat.reshape(shape).astype(dt.newbyteorder("="))


def _container(kind: str, meta: dict, arrays: dict) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "kind": kind,
        "meta": meta,
        "arrays": {k: encode_array(v) for k, v in arrays.items()},
    }


def _spectrum_parts(s: SlipStokesSpectrum):
    meta = {"d": int(s.d), "K": int(s.K), "M": int(s.M), "L": float(s.L)}
    arrays = {"wavevectors": s.wavevectors, "amplitudes": s.amplitudes, "eigenvalues": s.eigenvalues}
    return meta, arrays


def _operator_parts(A: GeneralSectorialOperator):
    meta = {
        "theta0": A.sector.theta0,
        "kappa": A.sector.kappa,
        "zero_mode": bool(A.zero_mode),
        "conditioning": float(A.conditioning),
        "reconstruction_error": float(A.reconstruction_error),
    }
    arrays = {"matrix": A.matrix, "eigenvalues": A.eigenvalues, "V": A.V, "V_inv": A.V_inv}
    return meta, arrays


def to_container(obj) -> dict:
    """Container dict for a supported object."""
    if isinstance(obj, SlipStokesSpectrum):
        meta, arrays = _spectrum_parts(obj)
        return _container("spectrum", meta, arrays)
    if isinstance(obj, GeneralSectorialOperator):
        meta, arrays = _operator_parts(obj)
        return _container("sectorial_operator", meta, arrays)
    if isinstance(obj, GridField):
        return _container("grid_field", {"L": float(obj.L)}, {"values": obj.values})
    if isinstance(obj, ModalField):
        meta, arrays = _spectrum_parts(obj.spectrum)
        arrays = {f"spectrum.{k}": v for k, v in arrays.items()}
        arrays["coefficients"] = obj.coefficients
        return _container("modal_field", meta, arrays)
    # trajectories are imported lazily to keep this module at the operator layer
    from .maxreg import Trajectory

    if isinstance(obj, Trajectory):
        meta = {"scheme": obj.scheme, "steps": int(obj.steps), "shift": float(obj.shift),
                "forcing_kind": obj.forcing.kind, "T": float(obj.forcing.T)}
        arrays = {"times": obj.times, "u": obj.u, "du": obj.du, "Au": obj.Au,
                  "forcing_modal": obj.forcing_modal}
        pc = obj.pressure_coefficients
        if pc is not None:
            arrays["pressure_coefficients"] = pc
        return _container("trajectory", meta, arrays)
    raise ContainerError(f"cannot serialise {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(to_container(obj), sort_keys=True, separators=(",", ":"))


def _check(doc: dict):
    if doc.get("format") != FORMAT:
        raise ContainerError("not a slipstokes container")
    if doc.get("version") != VERSION:
        raise ContainerError(f"unsupported container version {doc.get('version')!r}")


def from_container(doc: dict) -> Any:
    """Rebuild the object.  Trajectories come back as a plain dict of arrays and metadata."""
    _check(doc)
    kind, meta = doc["kind"], doc["meta"]
    arr = {k: decode_array(v) for k, v in doc["arrays"].items()}
    if kind == "spectrum":
        return SlipStokesSpectrum(meta["d"], meta["K"], meta["M"], meta["L"],
                                  arr["wavevectors"], arr["amplitudes"], arr["eigenvalues"])
    if kind == "sectorial_operator":
        return GeneralSectorialOperator(
            arr["matrix"], arr["eigenvalues"], arr["V"], arr["V_inv"],
            Sector(meta["theta0"], meta["kappa"]), meta["zero_mode"],
            meta["conditioning"], meta["reconstruction_error"],
        )
    if kind == "grid_field":
        return GridField(arr["values"], meta["L"])
    if kind == "modal_field":
        spec = SlipStokesSpectrum(meta["d"], meta["K"], meta["M"], meta["L"],
                                  arr["spectrum.wavevectors"], arr["spectrum.amplitudes"],
                                  arr["spectrum.eigenvalues"])
        return ModalField(arr["coefficients"], spec)
    if kind == "trajectory":
        return {"meta": dict(meta), **arr}
    raise ContainerError(f"unknown container kind {kind!r}")


def loads(text: str) -> Any:
    return from_container(json.loads(text))


def save(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj))


def load(path) -> Any:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
