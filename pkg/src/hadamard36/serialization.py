"""JSON matrix files and verification certificates.

Matrix files hold a header and a row-major payload in one of three
representations:

* ``complex``      -- ``[re, im]`` pairs
* ``butson``       -- integer exponents ``m`` in ``[0, q)``, entry ``exp(2πi m/q)``
* ``phase-sixths`` -- real phases ``v``, entry ``exp(iπ v/3)``

Certificates are JSON Lines files; each verification appends one record.
"""
from __future__ import annotations

import hashlib
import json
import os
import platform
import tempfile
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .hadamard_tools import to_butson

FORMAT = "hadamard36-matrix"
CERT_FORMAT = "hadamard36-certificate"
VERSION = 1
REPRESENTATIONS = ("complex", "butson", "phase-sixths")


class MatrixFileError(ValueError):
    code = "E_MATRIX"


class MalformedHeaderError(MatrixFileError):
    code = "E_HEADER"


class PayloadLengthError(MatrixFileError):
    code = "E_LENGTH"


class PayloadValueError(MatrixFileError):
    code = "E_PAYLOAD"


class ExponentRangeError(MatrixFileError):
    code = "E_RANGE"


def atomic_write(path, data: bytes):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dumps(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n").encode()


def encode_matrix(H, representation: str = "auto", q: int | None = None, phases=None,
                  label: str | None = None, metadata: dict | None = None) -> dict:
    """Build the JSON document for ``H``.

    ``auto`` picks ``butson`` when the entries are roots of unity, then
    ``phase-sixths`` if ``phases`` were supplied, else ``complex``.
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {H.shape}")
    n = H.shape[0]
    doc = {"format": FORMAT, "version": VERSION, "n": n}
    if label is not None:
        doc["label"] = label
    if metadata:
        doc["metadata"] = metadata

    if representation == "auto":
        bm = to_butson(H) if q is None else None
        if bm is not None or q is not None:
            representation = "butson"
        elif phases is not None:
            representation = "phase-sixths"
        else:
            representation = "complex"

    if representation == "butson":
        if q is None:
            bm = to_butson(H)
            if bm is None:
                raise ValueError("matrix is not a Butson matrix")
            q, m = bm.q, bm.exponents
        else:
            x = np.angle(H) / (2 * np.pi) * q
            if np.abs(x - np.rint(x)).max() > 1e-8 or np.abs(np.abs(H) - 1).max() > 1e-8:
                raise ValueError(f"matrix entries are not {q}-th roots of unity")
            m = np.rint(x).astype(np.int64) % q
        doc["q"] = int(q)
        doc["payload"] = [int(v) for v in m.ravel()]
    elif representation == "phase-sixths":
        if phases is None:
            if np.abs(np.abs(H) - 1).max() > 1e-12:
                raise ValueError("phase-sixths needs unimodular entries")
            phases = np.angle(H) * 3 / np.pi
        phases = np.asarray(phases, dtype=float)
        if phases.shape != H.shape:
            raise ValueError("phases must match the matrix shape")
        doc["payload"] = [float(v) for v in phases.ravel()]
    elif representation == "complex":
        doc["payload"] = [[float(z.real), float(z.imag)] for z in H.ravel()]
    else:
        raise ValueError(f"unknown representation {representation!r}")
    doc["representation"] = representation
    return doc


def write_matrix(path, H, representation: str = "auto", **kwargs) -> dict:
    doc = encode_matrix(H, representation, **kwargs)
    atomic_write(path, _dumps(doc))
    return doc


def decode_matrix(doc) -> tuple[np.ndarray, dict]:
    if not isinstance(doc, dict):
        raise MalformedHeaderError("matrix file must hold a JSON object")
    if doc.get("format") != FORMAT:
        raise MalformedHeaderError(f"format field must be {FORMAT!r}")
    if doc.get("version") != VERSION:
        raise MalformedHeaderError(f"unsupported version {doc.get('version')!r}")
    n = doc.get("n")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise MalformedHeaderError("n must be a positive integer")
    rep = doc.get("representation")
    if rep not in REPRESENTATIONS:
        raise MalformedHeaderError(f"representation must be one of {REPRESENTATIONS}")
    payload = doc.get("payload")
    if not isinstance(payload, list):
        raise MalformedHeaderError("payload must be a list")
    if len(payload) != n * n:
        raise PayloadLengthError(f"payload has {len(payload)} entries, expected {n * n}")

    header = {k: v for k, v in doc.items() if k != "payload"}
    try:
        if rep == "butson":
            q = doc.get("q")
            if not isinstance(q, int) or isinstance(q, bool) or q < 2:
                raise MalformedHeaderError("butson representation needs an integer q >= 2")
            if not all(isinstance(v, int) and not isinstance(v, bool) for v in payload):
                raise PayloadValueError("butson payload must hold integers")
            m = np.array(payload, dtype=np.int64).reshape(n, n)
            if m.min() < 0 or m.max() >= q:
                raise ExponentRangeError(f"butson exponents must lie in [0, {q})")
            header["exponents"] = m
            H = np.exp(2j * np.pi * m / q)
        elif rep == "phase-sixths":
            v = np.array(payload, dtype=float).reshape(n, n)
            header["phases"] = v
            H = np.exp(1j * np.pi * v / 3)
        else:
            arr = np.array(payload, dtype=float)
            if arr.shape != (n * n, 2):
                raise PayloadValueError("complex payload must hold [re, im] pairs")
            H = (arr[:, 0] + 1j * arr[:, 1]).reshape(n, n)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, MatrixFileError):
            raise
        raise PayloadValueError(str(exc)) from exc
    if not np.all(np.isfinite(H)):
        raise PayloadValueError("payload has non-finite entries")
    return H, header


def read_matrix(path) -> tuple[np.ndarray, dict]:
    """Load a matrix file; returns the matrix and its header.

    For ``butson`` and ``phase-sixths`` files the header also carries the
    exact ``exponents`` / ``phases`` arrays.
    """
    raw = Path(path).read_bytes()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedHeaderError(f"not valid JSON: {exc}") from exc
    H, header = decode_matrix(doc)
    header["sha256"] = hashlib.sha256(raw).hexdigest()
    return H, header


# --- certificates -------------------------------------------------------------

def file_sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def environment(rng_seed=None) -> dict:
    env = {"package": "hadamard36", "version": __version__,
           "python": platform.python_version(), "numpy": np.__version__}
    if rng_seed is not None:
        env["rng_seed"] = rng_seed
    return env


def make_certificate(subject: dict, checks: list[dict], rng_seed=None, timestamp=None) -> dict:
    return {
        "format": CERT_FORMAT,
        "version": VERSION,
        "subject": subject,
        "checks": checks,
        "environment": environment(rng_seed),
        "timestamp": timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def append_certificate(path, cert: dict):
    """Append one record; earlier records are never rewritten."""
    path = Path(path)
    old = path.read_bytes() if path.exists() else b""
    if old and not old.endswith(b"\n"):
        old += b"\n"
    atomic_write(path, old + _dumps(cert))


def read_certificates(path) -> list[dict]:
    out = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            rec = json.loads(line)
            if rec.get("format") == CERT_FORMAT:
                out.append(rec)
    return out
