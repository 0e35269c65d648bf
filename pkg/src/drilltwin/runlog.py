"""Per-tick run logs: binary format, CSV round-trip, replay support.

Layout of the binary file (all little-endian):

    magic   b"DTRL\\x01"
    u32     header length
    bytes   UTF-8 JSON header (format_version, scenario, seed, rates, dof,
            structures table, config_hash)
    u64     row count
    bytes   packed rows (see record_dtype)
    u32     events length
    bytes   UTF-8 JSON event list

Nothing time-of-day dependent is stored, so identical runs produce identical
files byte for byte.
"""

from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

RUNLOG_MAGIC = b"DTRL\x01"
CSV_TAG = "# drilltwin-runlog-csv 1 "

FLAG_OOB = 0x01              # distance query clamped at the grid boundary
FLAG_STALE_EST = 0x02        # force estimate older than two sensor periods
FLAG_CARVED = 0x04           # voxels removed this tick
FLAG_BREACH = 0x08           # carve request touched only critical labels
FLAG_FALLBACK = 0x10         # operating structure chosen outside proximity bands
FLAG_DEGENERATE_NORMAL = 0x20
FLAG_JOINT_LIMIT = 0x40
FLAG_DRILL_ON = 0x80


def record_dtype(dof: int, n_structures: int) -> np.dtype:
    return np.dtype([
        ("t", "<f8"),
        ("q", "<f8", (dof,)),
        ("tip", "<f8", (3,)),
        ("f_hand", "<f8", (3,)),
        ("f_tip", "<f8", (3,)),
        ("f_tip_mag", "<f8"),
        ("f_est_mag", "<f8"),
        ("d", "<f8", (n_structures,)),
        ("gain", "<f8"),
        ("regime", "u1"),
        ("structure", "i1"),
        ("flags", "u1"),
        ("carved", "<u4"),
    ])


@dataclass
class RunLog:
    header: dict
    records: np.ndarray
    events: list[dict] = field(default_factory=list)

    @property
    def dof(self) -> int:
        return int(self.header["dof"])

    @property
    def n_structures(self) -> int:
        return len(self.header["structures"])

    @property
    def sim_hz(self) -> int:
        return int(self.header["rates"]["sim_hz"])

    def save(self, path: str | Path) -> None:
        blob = json.dumps(self.header, sort_keys=True, separators=(",", ":")).encode("utf-8")
        ev = json.dumps(self.events, sort_keys=True, separators=(",", ":")).encode("utf-8")
        with open(path, "wb") as f:
            f.write(RUNLOG_MAGIC)
            f.write(struct.pack("<I", len(blob)))
            f.write(blob)
            f.write(struct.pack("<Q", len(self.records)))
            f.write(self.records.tobytes())
            f.write(struct.pack("<I", len(ev)))
            f.write(ev)

    @staticmethod
    def load(path: str | Path) -> "RunLog":
        with open(path, "rb") as f:
            magic = f.read(len(RUNLOG_MAGIC))
            if magic != RUNLOG_MAGIC:
                raise ValueError(f"{path} is not a run log")
            (hlen,) = struct.unpack("<I", f.read(4))
            header = json.loads(f.read(hlen).decode("utf-8"))
            (n,) = struct.unpack("<Q", f.read(8))
            dt = record_dtype(int(header["dof"]), len(header["structures"]))
            records = np.frombuffer(f.read(n * dt.itemsize), dtype=dt).copy()
            (elen,) = struct.unpack("<I", f.read(4))
            events = json.loads(f.read(elen).decode("utf-8")) if elen else []
        return RunLog(header, records, events)

    # column order used by the CSV form
    def _csv_columns(self) -> list[str]:
        labels = [s["index"] for s in self.header["structures"]]
        cols = ["t"]
        cols += [f"q{i}" for i in range(self.dof)]
        cols += ["tip_x", "tip_y", "tip_z"]
        cols += ["fh_x", "fh_y", "fh_z"]
        cols += ["ft_x", "ft_y", "ft_z"]
        cols += ["f_tip_mag", "f_est_mag"]
        cols += [f"d{lab}" for lab in labels]
        cols += ["gain", "regime", "structure", "flags", "carved"]
        return cols

    def to_csv(self, path: str | Path) -> None:
        """CSV export; the first line carries the JSON header so the file can be
        read back losslessly (floats printed with round-trip repr)."""
        r = self.records
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(CSV_TAG + json.dumps({"header": self.header, "events": self.events},
                                         sort_keys=True, separators=(",", ":")) + "\n")
            f.write(",".join(self._csv_columns()) + "\n")
            for row in r:
                vals = [repr(float(row["t"]))]
                vals += [repr(float(v)) for v in row["q"]]
                vals += [repr(float(v)) for v in row["tip"]]
                vals += [repr(float(v)) for v in row["f_hand"]]
                vals += [repr(float(v)) for v in row["f_tip"]]
                vals += [repr(float(row["f_tip_mag"])), repr(float(row["f_est_mag"]))]
                vals += [repr(float(v)) for v in row["d"]]
                vals += [repr(float(row["gain"])), str(int(row["regime"])),
                         str(int(row["structure"])), str(int(row["flags"])),
                         str(int(row["carved"]))]
                f.write(",".join(vals) + "\n")

    @staticmethod
    def from_csv(path: str | Path) -> "RunLog":
        with open(path, "r", encoding="utf-8") as f:
            tag = f.readline()
            if not tag.startswith(CSV_TAG):
                raise ValueError(f"{path} is not a run log CSV")
            meta = json.loads(tag[len(CSV_TAG):])
            header, events = meta["header"], meta["events"]
            f.readline()  # column names
            dof = int(header["dof"])
            ns = len(header["structures"])
            dt = record_dtype(dof, ns)
            rows = []
            for line in f:
                line = line.strip()
                if not line:
                    continue
                parts = line.split(",")
                rows.append(parts)
        records = np.zeros(len(rows), dtype=dt)
        for i, parts in enumerate(rows):
            it = iter(parts)
            records[i]["t"] = float(next(it))
            records[i]["q"] = [float(next(it)) for _ in range(dof)]
            records[i]["tip"] = [float(next(it)) for _ in range(3)]
            records[i]["f_hand"] = [float(next(it)) for _ in range(3)]
            records[i]["f_tip"] = [float(next(it)) for _ in range(3)]
            records[i]["f_tip_mag"] = float(next(it))
            records[i]["f_est_mag"] = float(next(it))
            records[i]["d"] = [float(next(it)) for _ in range(ns)]
            records[i]["gain"] = float(next(it))
            records[i]["regime"] = int(next(it))
            records[i]["structure"] = int(next(it))
            records[i]["flags"] = int(next(it))
            records[i]["carved"] = int(next(it))
        return RunLog(header, records, events)


def load_any(path: str | Path) -> RunLog:
    """Load a run log whether it is the binary or the CSV form."""
    p = Path(path)
    with open(p, "rb") as f:
        head = f.read(len(RUNLOG_MAGIC))
    if head == RUNLOG_MAGIC:
        return RunLog.load(p)
    return RunLog.from_csv(p)
