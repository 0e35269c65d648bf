"""Reference run logs with pinned per-structure safety proportions.

These traces are synthetic: each structure gets one contact episode whose
above-bound tick count encodes a fixed target proportion exactly, which makes
them a precise regression anchor for the metrics pipeline (proportions must
come out equal to the constants below at three decimals). Two variants ship,
one shaped like an unassisted run and one shaped like an assisted run.
"""

from __future__ import annotations

import os
from importlib import resources
from pathlib import Path

import numpy as np

from .anatomy import DEFAULT_STRUCTURES
from .controller import ControllerParams
from .runlog import RunLog, record_dtype
from .scenario import Rates

FIXTURE_DIR_ENV = "DRILLTWIN_FIXTURE_DIR"

# proportion of contact time above the hard force bound, per structure label
REFERENCE_PROPORTIONS: dict[bool, dict[int, float]] = {
    False: {1: 0.726, 2: 0.549, 3: 0.567, 4: 0.372, 5: 0.209},
    True: {1: 0.322, 2: 0.370, 3: 0.382, 4: 0.243, 5: 0.042},
}

_EPISODE_TICKS = 1000
_GAP_TICKS = 50


def packaged_fixture_dir() -> Path:
    """Directory of the reference fixture CSVs shipped inside the package."""
    return Path(str(resources.files("drilltwin").joinpath("fixtures")))


def reference_fixture_dir() -> Path:
    """Fixture directory: $DRILLTWIN_FIXTURE_DIR, or the packaged fixtures."""
    env = os.environ.get(FIXTURE_DIR_ENV)
    return Path(env) if env else packaged_fixture_dir()


def fixture_name(assist: bool) -> str:
    return "reference_assisted.csv" if assist else "reference_unassisted.csv"


def build_reference_log(assist: bool) -> RunLog:
    """Synthesize the reference trace for one assist arm."""
    params = ControllerParams()
    rates = Rates()
    structures = DEFAULT_STRUCTURES
    props = REFERENCE_PROPORTIONS[assist]
    ns = len(structures)
    dof = 6
    dt = 1.0 / rates.sim_hz

    n_rows = (len(structures) + 1) * _GAP_TICKS + len(structures) * _EPISODE_TICKS
    rows = np.zeros(n_rows, dtype=record_dtype(dof, ns))

    k = 0

    def free_gap(k: int) -> int:
        for _ in range(_GAP_TICKS):
            r = rows[k]
            r["t"] = k * dt
            r["structure"] = -1
            r["regime"] = 0
            r["gain"] = params.free_gain if assist else 1.0
            r["d"] = 5.0
            k += 1
        return k

    k = free_gap(k)
    for slot, s in enumerate(structures):
        hard = s.force_limit_n + params.activation_margin_n
        above = int(round(props[s.index] * _EPISODE_TICKS))
        quiet_force = 0.5 * (params.contact_threshold_n + s.force_limit_n)
        loud_force = hard + 0.3
        for i in range(_EPISODE_TICKS):
            r = rows[k]
            r["t"] = k * dt
            r["structure"] = s.index
            d = np.full(ns, 4.0)
            d[slot] = -0.2
            r["d"] = d
            if i < above:
                r["f_tip_mag"] = loud_force
                r["regime"] = 2
                r["gain"] = params.floor_gain if assist else 1.0
            else:
                r["f_tip_mag"] = quiet_force
                r["regime"] = 1
                r["gain"] = params.contact_gain if assist else 1.0
            r["f_est_mag"] = r["f_tip_mag"]
            r["f_tip"] = [0.0, 0.0, float(r["f_tip_mag"])]
            r["f_hand"] = [0.0, 0.0, -2.0]
            k += 1
        k = free_gap(k)

    scenario = {
        "name": "reference_assisted" if assist else "reference_unassisted",
        "seed": 0,
        "assist_enabled": assist,
        "controller": params.to_dict(),
        "duration_s": n_rows * dt,
    }
    header = {
        "format_version": 1,
        "scenario": scenario,
        "seed": 0,
        "dof": dof,
        "rates": rates.to_dict(),
        "structures": [s.to_dict() for s in structures],
    }
    return RunLog(header, rows, events=[])


def write_reference_fixtures(out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for assist in (False, True):
        log = build_reference_log(assist)
        path = out / fixture_name(assist)
        log.to_csv(path)
        written.append(path)
    return written


if __name__ == "__main__":
    for p in write_reference_fixtures(reference_fixture_dir()):
        print(p)
