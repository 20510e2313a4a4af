"""Dense 2-D image containers, error metrics, and file I/O.

Images are plain ``numpy.ndarray`` objects of shape ``(m, n)``.  The helpers
below validate the invariants the rest of the package relies on: finite
values everywhere, nonnegativity for arrays that play the role of a signal,
and nonnegative integers for observed counts.

Two interchange formats are supported:

* float CSV -- first line ``m,n``, then ``m`` lines of ``n`` comma-separated
  decimal reals.  Values are written with shortest round-trip formatting, so
  a write/read cycle is bit-exact for finite doubles.
* 16-bit binary PGM (P5, maxval 65535) -- a viewing format.  Values are
  linearly quantized to ``0..65535``; the physical value of one gray level
  is recorded in a sidecar ``<path>.meta`` text file so the scale survives a
  round trip.
"""

from __future__ import annotations

import os
import re

import numpy as np

from .errors import DegenerateInputError, DomainError, ParseError, ShapeError

PGM_MAXVAL = 65535


def as_image(values, name: str = "image") -> np.ndarray:
    """Validate and return a 2-D float64 array with all entries finite."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"{name} must be a 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    return arr


def as_signal(values, name: str = "signal") -> np.ndarray:
    """Validate an image that plays a signal role: finite and >= 0."""
    arr = as_image(values, name=name)
    if arr.min() < 0:
        raise DomainError(f"{name} must be nonnegative, min is {arr.min()}")
    return arr


def as_counts(values, name: str = "counts") -> np.ndarray:
    """Validate observed counts: a 2-D array of nonnegative integers.

    Returns a float64 array (counts enter likelihood arithmetic as reals).
    """
    arr = np.asarray(values)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ShapeError(f"{name} must be a 2-D array, got shape {arr.shape}")
    flt = np.asarray(arr, dtype=np.float64)
    if not np.all(np.isfinite(flt)):
        raise DomainError(f"{name} contains non-finite values")
    if flt.min() < 0:
        raise DomainError(f"{name} must be nonnegative, min is {flt.min()}")
    if not np.all(flt == np.round(flt)):
        raise DomainError(f"{name} must be integer-valued")
    return flt


def require_same_shape(a: np.ndarray, b: np.ndarray, what: str = "images") -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{what} have mismatched shapes {a.shape} vs {b.shape}")


def rmse(estimate, truth) -> float:
    """Relative l2 reconstruction error ||estimate - truth||_2 / ||truth||_2.

    Reported as a fraction; multiply by 100 for a percentage.  The truth
    must have a nonzero norm.
    """
    est = as_image(estimate, name="estimate")
    tru = as_image(truth, name="truth")
    require_same_shape(est, tru)
    denom = float(np.linalg.norm(tru))
    if denom == 0.0:
        raise DegenerateInputError("truth image has zero norm")
    return float(np.linalg.norm(est - tru) / denom)


# ---------------------------------------------------------------------------
# Float CSV format
# ---------------------------------------------------------------------------


def write_image_csv(path, image) -> None:
    """Write ``image`` in the float CSV format (lossless for finite doubles)."""
    arr = as_image(image)
    m, n = arr.shape
    lines = [f"{m},{n}"]
    for row in arr:
        lines.append(",".join(repr(float(v)) for v in row))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_image_csv(path) -> np.ndarray:
    """Read an image written by :func:`write_image_csv`."""
    with open(path, "r", encoding="ascii") as fh:
        raw = fh.read().splitlines()
    if not raw:
        raise ParseError(f"{path}: line 1: empty file")
    header = raw[0].split(",")
    if len(header) != 2:
        raise ParseError(f"{path}: line 1: expected header 'm,n', got {raw[0]!r}")
    try:
        m, n = int(header[0]), int(header[1])
    except ValueError as exc:
        raise ParseError(f"{path}: line 1: non-integer dimensions {raw[0]!r}") from exc
    if m < 1 or n < 1:
        raise ParseError(f"{path}: line 1: dimensions must be positive, got {m},{n}")
    if len(raw) < 1 + m:
        raise ShapeError(f"{path}: header promises {m} rows, file has {len(raw) - 1}")
    values = np.empty((m, n), dtype=np.float64)
    for i in range(m):
        fields = raw[1 + i].split(",")
        if len(fields) != n:
            raise ParseError(
                f"{path}: line {i + 2}: expected {n} columns, got {len(fields)}"
            )
        try:
            values[i] = [float(tok) for tok in fields]
        except ValueError as exc:
            raise ParseError(f"{path}: line {i + 2}: non-numeric value") from exc
    return as_image(values, name=f"{path}")


# ---------------------------------------------------------------------------
# 16-bit PGM (P5) with sidecar scale
# ---------------------------------------------------------------------------


def _meta_path(path) -> str:
    return f"{os.fspath(path)}.meta"


def write_image_pgm(path, image) -> None:
    """Write ``image`` as binary 16-bit PGM plus a ``.meta`` scale sidecar.

    Quantization: gray = round(value / scale) with scale = max(image)/65535,
    so the largest pixel maps to 65535.  A zero image uses scale 1.0.
    """
    arr = as_signal(image, name="pgm image")
    m, n = arr.shape
    vmax = float(arr.max())
    scale = vmax / PGM_MAXVAL if vmax > 0 else 1.0
    gray = np.round(arr / scale).astype(np.uint16)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{n} {m}\n{PGM_MAXVAL}\n".encode("ascii"))
        fh.write(gray.astype(">u2").tobytes())
    with open(_meta_path(path), "w", encoding="ascii") as fh:
        fh.write(f"scale = {scale!r}\n")


def _read_pgm_scale(path) -> float:
    meta = _meta_path(path)
    if not os.path.exists(meta):
        return 1.0
    with open(meta, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            match = re.match(r"scale\s*=\s*(\S+)", line)
            if match:
                try:
                    return float(match.group(1))
                except ValueError as exc:
                    raise ParseError(f"{meta}: line {lineno}: bad scale value") from exc
    raise ParseError(f"{meta}: no 'scale = <float>' line found")


def read_image_pgm(path) -> np.ndarray:
    """Read a 16-bit PGM written by :func:`write_image_pgm`.

    The sidecar ``.meta`` scale is applied when present (scale 1.0 otherwise),
    reproducing the original values up to the documented quantization.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    pos = 0
    # P5 header: magic, width, height, maxval; '#' starts a comment.
    while len(tokens) < 4 and pos < len(data):
        if data[pos : pos + 1].isspace():
            pos += 1
        elif data[pos : pos + 1] == b"#":
            nl = data.find(b"\n", pos)
            pos = len(data) if nl < 0 else nl + 1
        else:
            end = pos
            while end < len(data) and not data[end : end + 1].isspace():
                end += 1
            tokens.append(data[pos:end])
            pos = end
    if len(tokens) < 4:
        raise ParseError(f"{path}: byte {pos}: truncated PGM header")
    if tokens[0] != b"P5":
        raise ParseError(f"{path}: byte 0: expected magic 'P5', got {tokens[0]!r}")
    try:
        n, m, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError as exc:
        raise ParseError(f"{path}: malformed PGM header dimensions") from exc
    if maxval != PGM_MAXVAL:
        raise ParseError(f"{path}: expected maxval {PGM_MAXVAL}, got {maxval}")
    pos += 1  # single whitespace byte after maxval
    expected = m * n * 2
    body = data[pos : pos + expected]
    if len(body) != expected:
        raise ParseError(
            f"{path}: byte {pos}: expected {expected} data bytes, got {len(body)}"
        )
    gray = np.frombuffer(body, dtype=">u2").reshape(m, n)
    return gray.astype(np.float64) * _read_pgm_scale(path)
