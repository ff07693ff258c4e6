"""CMX matrix files: JSON {"rows","cols","data"} or binary "CMX1" + u64 dims + f64 pairs."""
import json
import struct

import numpy as np

from .errors import ContractError

MAGIC = b"CMX1"


def round15(x):
    return float(f"{x:.15g}")


def to_dict(A):
    A = np.asarray(A, dtype=complex)
    flat = np.empty(2 * A.size)
    flat[0::2], flat[1::2] = A.real.ravel(), A.imag.ravel()
    return {"rows": int(A.shape[0]), "cols": int(A.shape[1]), "data": [round15(x) for x in flat]}


def from_dict(d):
    data = np.asarray(d["data"], dtype=float)
    r, c = int(d["rows"]), int(d["cols"])
    if data.size != 2 * r * c:
        raise ContractError(f"CMX data length {data.size} does not match {r}x{c}")
    return (data[0::2] + 1j * data[1::2]).reshape(r, c)


def write_cmx(path, A, binary=False):
    A = np.asarray(A, dtype=complex)
    if binary:
        with open(path, "wb") as fh:
            fh.write(MAGIC + struct.pack("<QQ", *A.shape))
            fh.write(np.ascontiguousarray(A).astype("<c16").tobytes())
    else:
        with open(path, "w") as fh:
            json.dump(to_dict(A), fh)


def read_cmx(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] == MAGIC:
        r, c = struct.unpack("<QQ", raw[4:20])
        body = np.frombuffer(raw[20:], dtype="<c16")
        if body.size != r * c:
            raise ContractError("truncated binary CMX file")
        return body.reshape(r, c).astype(complex)
    return from_dict(json.loads(raw.decode()))
