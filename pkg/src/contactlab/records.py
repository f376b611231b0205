"""File formats: JSON-lines records, ``t,value,stderr`` curve tables and
trajectory exports. Every write goes through a temp file and a rename."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

CURVE_HEADER = ("t", "value", "stderr")


def _plain(obj):
    """JSON-ready copy: numpy scalars and arrays become Python types."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        if hasattr(obj, "to_dict"):
            return _plain(obj.to_dict())
        return _plain(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, no whitespace variation."""
    return json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def config_hash(obj) -> str:
    return hashlib.sha256(dumps(obj).encode()).hexdigest()[:16]


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def atomic_write(path, data: str | bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    raw = data.encode("utf-8") if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(raw)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _fmt(x) -> str:
    return repr(float(x))


def curve_csv(t, value, stderr) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_HEADER)
    for a, b, c in zip(t, value, stderr):
        w.writerow([_fmt(a), _fmt(b), _fmt(c)])
    return buf.getvalue()


def write_curve(path, t, value, stderr) -> Path:
    if not (len(t) == len(value) == len(stderr)):
        raise ValueError("curve columns differ in length")
    return atomic_write(path, curve_csv(t, value, stderr))


def read_curve(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(h.strip() for h in rows[0]) != CURVE_HEADER:
        raise ValueError(f"{path}: expected header {','.join(CURVE_HEADER)}")
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric entry") from exc
    if data.size == 0:
        return np.empty(0), np.empty(0), np.empty(0)
    if data.shape[1] != 3:
        raise ValueError(f"{path}: rows must have three columns")
    return data[:, 0], data[:, 1], data[:, 2]


def write_records(path, records) -> Path:
    return atomic_write(path, "".join(dumps(r) + "\n" for r in records))


def read_records(path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_trajectory(path, trajectory, labels=None, manifest: dict | None = None) -> tuple[Path, Path]:
    """Trajectory as ``time,vertex,state`` rows plus a ``.json`` sidecar.

    The first rows (at the window start) give the initial state on delta.
    """
    labels = labels if labels is not None else [int(v) for v in trajectory.delta]
    lookup = {int(v): lab for v, lab in zip(trajectory.delta, labels)}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("time", "vertex", "state"))
    t0 = trajectory.window[0]
    for v, s in zip(trajectory.delta, trajectory.initial):
        w.writerow([_fmt(t0), lookup[int(v)], int(s)])
    for t, v, s in zip(trajectory.times, trajectory.vertices, trajectory.states):
        w.writerow([_fmt(t), lookup[int(v)], int(s)])
    path = Path(path)
    side = path.with_suffix(".json")
    meta = {"window": list(trajectory.window), "delta": list(labels),
            "meta": trajectory.meta}
    if manifest:
        meta.update(manifest)
    meta["config_hash"] = meta.get("config_hash") or config_hash(meta)
    atomic_write(path, buf.getvalue())
    atomic_write(side, dumps(meta) + "\n")
    return path, side
