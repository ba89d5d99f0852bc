"""Snapshot files, checkpoints and CSV logs.

Snapshot byte layout (all little-endian)::

    offset  size  field
         0     8  magic  b"SHBDF3SN"
         8     4  uint32 format version (1)
        12     4  uint32 dim
        16     4  uint32 M (nodes per axis)
        20     4  uint32 reserved (0)
        24     8  float64 L
        32     8  float64 tau
        40     8  int64   level n
        48     8  float64 time t
        56     8  float64 g
        64     8  float64 eps
        72   8*M^dim  float64 payload, C (row-major) order

Checkpoints are uncompressed ``.npz`` archives holding the stored history
levels, the startup data when needed, and a JSON metadata record.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .bdf import TimeHistory
from .energy import EnergyRecord
from .grid import GridField, GridSpec

MAGIC = b"SHBDF3SN"
VERSION = 1
_HEADER = struct.Struct("<8sIIII dd q ddd")
HEADER_SIZE = _HEADER.size  # 72


class SnapshotError(ValueError):
    pass


@dataclass(frozen=True)
class SnapshotHeader:
    dim: int
    M: int
    L: float
    tau: float
    level: int
    time: float
    g: float
    eps: float
    version: int = VERSION

    @property
    def spec(self) -> GridSpec:
        return GridSpec(self.dim, self.L, self.M)


def encode_snapshot(field: GridField, header: SnapshotHeader) -> bytes:
    if field.spec != header.spec:
        raise SnapshotError("header grid does not match the field")
    head = _HEADER.pack(MAGIC, VERSION, header.dim, header.M, 0, header.L,
                        header.tau, header.level, header.time, header.g, header.eps)
    return head + field.values.astype("<f8", copy=False).tobytes(order="C")


def decode_snapshot(data: bytes) -> tuple[GridField, SnapshotHeader]:
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise SnapshotError("not a snapshot file")
    if len(data) < HEADER_SIZE:
        raise SnapshotError("truncated header")
    magic, version, dim, M, _, L, tau, level, t, g, eps = _HEADER.unpack_from(data)
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    header = SnapshotHeader(dim, M, L, tau, level, t, g, eps, version)
    try:
        spec = header.spec
    except ValueError as exc:
        raise SnapshotError(f"invalid header: {exc}") from None
    payload = memoryview(data)[HEADER_SIZE:]
    if len(payload) != 8 * M**dim:
        raise SnapshotError(
            f"payload size mismatch: header implies {8 * M**dim} bytes, found {len(payload)}"
        )
    values = np.frombuffer(payload, dtype="<f8").reshape(spec.shape).astype(np.float64)
    return GridField(spec, values), header


def write_snapshot(path, field: GridField, header: SnapshotHeader) -> None:
    Path(path).write_bytes(encode_snapshot(field, header))


def read_snapshot(path) -> tuple[GridField, SnapshotHeader]:
    return decode_snapshot(Path(path).read_bytes())


def export_text(path, field: GridField, header: SnapshotHeader | None = None) -> None:
    """Plain-text export: one line per node with coordinates then the value."""
    coords = [c.ravel() for c in field.spec.coordinates()]
    table = np.column_stack(coords + [field.values.ravel()])
    names = ["x", "y", "z"][: field.spec.dim] + ["u"]
    comment = ""
    if header is not None:
        comment = f"level={header.level} time={header.time!r} g={header.g!r} eps={header.eps!r}\n"
    np.savetxt(path, table, fmt="%.17g", header=comment + " ".join(names))


# -- CSV ----------------------------------------------------------------------

ENERGY_COLUMNS = [f.name for f in fields(EnergyRecord)]


def _num(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):.16e}"


def format_energy_csv(records) -> str:
    lines = [",".join(ENERGY_COLUMNS)]
    for rec in records:
        lines.append(",".join(_num(getattr(rec, c)) for c in ENERGY_COLUMNS))
    return "\n".join(lines) + "\n"


def write_energy_csv(path, records) -> None:
    Path(path).write_text(format_energy_csv(records))


def read_energy_csv(path) -> list[EnergyRecord]:
    rows = Path(path).read_text().strip().splitlines()
    if not rows or rows[0].split(",") != ENERGY_COLUMNS:
        raise ValueError("not an energy log")
    out = []
    for row in rows[1:]:
        parts = row.split(",")
        kw = {}
        for name, raw in zip(ENERGY_COLUMNS, parts):
            kw[name] = int(raw) if name in ("level", "newton_iters") else float(raw)
        out.append(EnergyRecord(**kw))
    return out


# -- checkpoints --------------------------------------------------------------

class CheckpointError(ValueError):
    pass


@dataclass
class Checkpoint:
    history: TimeHistory
    digest: str
    E0: float
    records: list[EnergyRecord]
    rng_state: dict | None = None


def write_checkpoint(path, ckpt: Checkpoint) -> None:
    hist = ckpt.history
    arrays = {f"level{i}": lv.values for i, lv in enumerate(hist.levels)}
    if hist.n == 0:
        arrays["phi0"] = hist.phi0.values
        arrays["phi1"] = hist.phi1.values
    spec = hist.spec
    meta = {
        "format": "shbdf3-checkpoint", "version": 1,
        "dim": spec.dim, "L": spec.L, "M": spec.M,
        "tau": hist.tau, "n": hist.n, "digest": ckpt.digest, "E0": ckpt.E0,
        "rng_state": ckpt.rng_state,
        "records": [asdict(r) for r in ckpt.records],
    }
    # floats go through repr in json, which round-trips float64 exactly
    arrays["meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        np.savez(fh, **arrays)
    os.replace(tmp, path)


def read_checkpoint(path) -> Checkpoint:
    with np.load(path, allow_pickle=False) as data:
        if "meta" not in data:
            raise CheckpointError("not a checkpoint file")
        meta = json.loads(data["meta"].tobytes().decode())
        if meta.get("format") != "shbdf3-checkpoint":
            raise CheckpointError("not a checkpoint file")
        spec = GridSpec(meta["dim"], meta["L"], meta["M"])
        n = meta["n"]
        levels = [GridField(spec, data[f"level{i}"]) for i in range(min(n + 1, 3))]
        phi0 = GridField(spec, data["phi0"]) if "phi0" in data else None
        phi1 = GridField(spec, data["phi1"]) if "phi1" in data else None
    hist = TimeHistory(meta["tau"], n, levels, phi0, phi1)
    records = [EnergyRecord(**r) for r in meta["records"]]
    return Checkpoint(hist, meta["digest"], meta["E0"], records, meta.get("rng_state"))


def write_convergence_csv(path, rows) -> None:
    Path(path).write_text(format_convergence_csv(rows))


def read_convergence_rows(path):
    from .harness import ConvergenceRow

    lines = Path(path).read_text().strip().splitlines()
    if not lines or lines[0] != "N,tau,M,error_l2,order":
        raise ValueError("not a convergence table")
    rows = []
    for line in lines[1:]:
        N, tau, M, err, order = line.split(",")
        rows.append(ConvergenceRow(int(N), float(tau), int(M), float(err),
                                   float(order) if order else None))
    return rows


def format_convergence_csv(rows) -> str:
    lines = ["N,tau,M,error_l2,order"]
    for r in rows:
        order = "" if r.order is None else f"{r.order:.16e}"
        lines.append(f"{r.N},{r.tau:.16e},{r.M},{r.error_l2:.16e},{order}")
    return "\n".join(lines) + "\n"
