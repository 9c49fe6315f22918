"""Plain-text dataset files.

A dataset file starts with one JSON header line (params, seed, variant and,
for reduced data, shift / permutation metadata) followed by one row per
sample: the entries of ``a`` then ``b``, as space separated decimal integers.
Secrets live in a ``.secret`` sidecar; reduced datasets add a
``.profile.json`` sidecar (rho, per-column std, loop timings) and, for ring
and module data, a ``.prov`` sidecar holding each row's full b-polynomial.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import InvalidSpec

__all__ = [
    "load_samples",
    "read_rows",
    "read_secret",
    "read_sidecar_json",
    "save_samples",
    "sidecar",
    "write_rows",
    "write_secret",
    "write_sidecar_json",
]

MAGIC = "lwe-bench-dataset/1"


def sidecar(path, suffix: str) -> Path:
    path = Path(path)
    return path.with_name(path.name + suffix)


def _fmt_rows(M) -> list[str]:
    return [" ".join(str(int(v)) for v in row) for row in M]


def write_rows(path, header: dict, A, b) -> None:
    """Write ``header`` and rows ``(A[i], b[i])``."""
    A = np.asarray(A)
    b = np.asarray(b).reshape(-1, 1)
    if A.shape[0] != b.shape[0]:
        raise InvalidSpec("row count of A and b differ")
    head = dict(header)
    head["format"] = MAGIC
    head["rows"] = int(A.shape[0])
    head["cols"] = int(A.shape[1])
    lines = [json.dumps(head, sort_keys=True)]
    lines += _fmt_rows(np.hstack([A.astype(object), b.astype(object)]))
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_matrix(lines, cols):
    if not lines:
        return np.zeros((0, cols), dtype=np.int64)
    vals = [[int(t) for t in ln.split()] for ln in lines]
    big = any(abs(v) >= 2**62 for row in vals for v in row)
    return np.array(vals, dtype=object if big else np.int64)


def read_rows(path):
    """Return ``(header, A, b)``."""
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise InvalidSpec(f"{path}: empty dataset file")
    header = json.loads(lines[0])
    if header.get("format") != MAGIC:
        raise InvalidSpec(f"{path}: not a dataset file")
    body = [ln for ln in lines[1:] if ln.strip()]
    M = _parse_matrix(body, header["cols"] + 1)
    if M.shape[0] != header["rows"]:
        raise InvalidSpec(f"{path}: header says {header['rows']} rows, found {M.shape[0]}")
    return header, M[:, :-1], M[:, -1]


def write_secret(path, s) -> None:
    sidecar(path, ".secret").write_text(" ".join(str(int(v)) for v in np.asarray(s)) + "\n")


def read_secret(path):
    p = sidecar(path, ".secret")
    if not p.exists():
        return None
    text = p.read_text().split()
    return np.array([int(t) for t in text], dtype=np.int64)


def write_sidecar_json(path, suffix: str, payload: dict) -> None:
    sidecar(path, suffix).write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")


def read_sidecar_json(path, suffix: str):
    p = sidecar(path, suffix)
    if not p.exists():
        return None
    return json.loads(p.read_text())


def save_samples(path, samples, **extra) -> None:
    """Write a :class:`SampleSet` with its params in the header and the secret (if known) in a sidecar."""
    header = {"kind": "samples", "params": samples.params.to_dict(), **extra}
    write_rows(path, header, samples.A, samples.b)
    if samples.secret is not None:
        write_secret(path, samples.secret)


def load_samples(path, with_secret: bool = True):
    """Inverse of :func:`save_samples`. Ring/module polynomials are rebuilt from the expanded rows."""
    from .sampling import LweParams, SampleSet

    header, A, b = read_rows(path)
    if header.get("kind") != "samples":
        raise InvalidSpec(f"{path}: not a sample file")
    params = LweParams.from_dict(header["params"])
    q = params.q
    A = np.mod(A, q)
    b = np.mod(b, q)
    secret = read_secret(path) if with_secret else None
    if params.variant == "plain":
        return SampleSet(A, b, params, secret), header
    n, k = params.n, params.k
    if A.shape[0] % n:
        raise InvalidSpec(f"{path}: row count is not a multiple of n={n}")
    num = A.shape[0] // n
    # column 0 of each component block is the polynomial's coefficient vector
    polys = np.stack([A[t * n : (t + 1) * n, [i * n for i in range(k)]].T for t in range(num)])
    return SampleSet(A, b, params, secret, polys=polys, b_poly=b.reshape(num, n)), header
