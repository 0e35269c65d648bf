"""Fixed-timestep multi-rate simulation loop.

One SimSession owns the whole coupled system: anatomy fields, robot state,
contact, sensors, controller and input source. The loop runs at the simulation
rate; sensors sample and the controller acts on their own divisors of it, so
every run is an exact integer schedule and re-running a scenario with the same
seed reproduces the log byte for byte.

Per tick, in order: contact forces from the current tip pose, drill ablation,
sensor sampling (sensor ticks), control update (control ticks: force estimate,
distance query, gain schedule, admittance solve), row recording, integration.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Optional

import numpy as np

from . import runlog as rl
from .anatomy import LabeledVolume, build_sdf, query_distances
from .contact import AblationParams, ContactModel, DrillAblation, MaterialContact
from .controller import ControllerState, Regime, step_controller
from .geometry import RigidTransform, Wrench
from .phantom import PhantomSpec, make_phantom
from .robot import (AdmittanceGains, KinematicChain, RobotState, default_chain,
                    forward_kinematics, integrate_step, jacobian, solve_admittance)
from .runlog import RunLog, record_dtype
from .scenario import (InputProvider, LiveInput, Scenario, SimContext,
                       make_input_provider)
from .sensors import SensorSim, default_drill_sensor, default_wrist_sensor, estimate_tip_force


def _axis_angle(axis: np.ndarray, angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    x, y, z = axis
    omc = 1.0 - c
    return np.array([
        [c + x * x * omc, x * y * omc - z * s, x * z * omc + y * s],
        [y * x * omc + z * s, c + y * y * omc, y * z * omc - x * s],
        [z * x * omc - y * s, z * y * omc + x * s, c + z * z * omc],
    ])


class FastChain:
    """Array-flattened kinematics for the hot loop; agrees with the reference
    robot.forward_kinematics / robot.jacobian (cross-checked in tests)."""

    def __init__(self, chain: KinematicChain):
        from .geometry import rpy_matrix
        self.chain = chain
        self.dof = chain.dof
        self.prismatic = [j.joint_type == "prismatic" for j in chain.joints]
        self.axes = [np.asarray(j.axis, dtype=float) for j in chain.joints]
        self.origin_r = [rpy_matrix(*j.origin_rpy) for j in chain.joints]
        self.origin_t = [np.asarray(j.origin_xyz, dtype=float) for j in chain.joints]
        self.tip_r = rpy_matrix(*chain.tip_rpy)
        self.tip_t = np.asarray(chain.tip_xyz, dtype=float)

    def tip_pose(self, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        r = np.eye(3)
        t = np.zeros(3)
        for i in range(self.dof):
            t = t + r @ self.origin_t[i]
            r = r @ self.origin_r[i]
            if self.prismatic[i]:
                t = t + r @ (self.axes[i] * q[i])
            else:
                r = r @ _axis_angle(self.axes[i], q[i])
        return r @ self.tip_r, t + r @ self.tip_t

    def tip_and_jacobian(self, q: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        r = np.eye(3)
        t = np.zeros(3)
        axes_w = []
        pos_w = []
        for i in range(self.dof):
            t = t + r @ self.origin_t[i]
            r = r @ self.origin_r[i]
            axes_w.append(r @ self.axes[i])
            pos_w.append(t)
            if self.prismatic[i]:
                t = t + r @ (self.axes[i] * q[i])
            else:
                r = r @ _axis_angle(self.axes[i], q[i])
        tip_r = r @ self.tip_r
        tip_p = t + r @ self.tip_t
        jac = np.zeros((6, self.dof))
        for i in range(self.dof):
            if self.prismatic[i]:
                jac[0:3, i] = axes_w[i]
            else:
                ax, ay, az = axes_w[i]
                dx = tip_p[0] - pos_w[i][0]
                dy = tip_p[1] - pos_w[i][1]
                dz = tip_p[2] - pos_w[i][2]
                jac[0, i] = ay * dz - az * dy
                jac[1, i] = az * dx - ax * dz
                jac[2, i] = ax * dy - ay * dx
                jac[3:6, i] = axes_w[i]
        return tip_r, tip_p, jac


def build_anatomy(scenario: Scenario) -> LabeledVolume:
    spec = scenario.anatomy
    if "phantom" in spec:
        return make_phantom(PhantomSpec.from_dict(spec["phantom"]))
    if "file" in spec:
        return LabeledVolume.load(spec["file"])
    raise ValueError("anatomy must give either a phantom spec or a volume file")


class SimSession:
    """One deterministic run, steppable one simulation tick at a time."""

    def __init__(self, scenario: Scenario, provider: Optional[InputProvider] = None):
        self.scenario = scenario
        self.volume = build_anatomy(scenario)
        self.sdfs = build_sdf(self.volume)
        self.structures = self.volume.structures
        chain = (KinematicChain.load(scenario.chain_file) if scenario.chain_file
                 else default_chain())
        self.chain = chain
        self.fast = FastChain(chain)
        self.gains = scenario.gains

        seeds = np.random.SeedSequence(scenario.seed).spawn(3)
        self._rng_tremor = np.random.default_rng(seeds[0])
        self._rng_drill = np.random.default_rng(seeds[1])
        self._rng_wrist = np.random.default_rng(seeds[2])

        self.provider = provider if provider is not None else make_input_provider(
            scenario, self._rng_tremor)

        inter = scenario.interaction
        self.contact = ContactModel(MaterialContact(
            damping_n_s_per_mm=float(inter.get("damping_n_s_per_mm", 0.02))))
        self.ablation = DrillAblation(AblationParams(
            burr_radius_mm=float(inter.get("burr_radius_mm", 0.9)),
            cut_threshold_n=float(inter.get("cut_threshold_n", 0.4)),
            carve_quantum_n_s=float(inter.get("carve_quantum_n_s", 0.08)),
            bite_fraction=float(inter.get("bite_fraction", 0.6)),
        ))

        rate = scenario.rates
        self.drill_model = replace(default_drill_sensor(scenario.sensor_noise_std_n),
                                   rate_hz=float(rate.sensor_hz))
        self.wrist_model = replace(default_wrist_sensor(scenario.sensor_noise_std_n),
                                   rate_hz=float(rate.sensor_hz))
        self.drill_sensor = SensorSim(self.drill_model, self._rng_drill)
        self.wrist_sensor = SensorSim(self.wrist_model, self._rng_wrist)

        self.reg = scenario.registration_transform()
        self.reg_rot = self.reg.rotation

        q0 = (np.asarray(scenario.initial_q, dtype=float)
              if scenario.initial_q is not None else np.zeros(chain.dof))
        self.robot = RobotState(q0)
        self.ctrl_state = ControllerState(gain=scenario.controller.free_gain)
        self.ctx = SimContext()
        self.ctx.sdfs = self.sdfs
        self.ctx.anatomy_from_world_rot = self.reg_rot

        self.dt = 1.0 / rate.sim_hz
        self.every_ctrl = rate.sim_hz // rate.control_hz
        self.every_sensor = rate.sim_hz // rate.sensor_hz
        self.n_ticks = int(round(scenario.duration_s * rate.sim_hz))

        self.tick = 0
        self.carve_total = 0
        self.events: list[dict] = []
        self._rows = np.zeros(self.n_ticks, dtype=record_dtype(chain.dof, len(self.structures)))
        self._dq = np.zeros(chain.dof)
        self._hand_force = np.zeros(3)
        self._applied_gain = (scenario.controller.free_gain if scenario.assist_enabled else 1.0)
        self._est_mag = 0.0
        self._est_stale = False
        self._struct_fallback = False
        self._oob = False
        self._prev_tip_world: Optional[np.ndarray] = None
        self._drill_on = scenario.drill_power

    @property
    def done(self) -> bool:
        return self.tick >= self.n_ticks

    @property
    def time_s(self) -> float:
        return self.tick * self.dt

    def snapshot_state(self) -> dict:
        """Cheap view of the latest recorded tick for live session streaming."""
        if self.n_ticks == 0:
            return {"t": 0.0, "tip_mm": [0.0, 0.0, 0.0],
                    "distances_mm": [float("inf")] * len(self.structures),
                    "force_n": 0.0, "gain": 1.0, "regime": 0,
                    "structure_index": None, "carved_voxels": 0}
        k = max(self.tick - 1, 0)
        row = self._rows[k]
        return {
            "t": float(row["t"]),
            "tip_mm": [float(v) for v in row["tip"]],
            "distances_mm": [float(v) for v in row["d"]],
            "force_n": float(row["f_tip_mag"]),
            "gain": float(row["gain"]),
            "regime": int(row["regime"]),
            "structure_index": (None if int(row["structure"]) < 0 else int(row["structure"])),
            "carved_voxels": int(row["carved"]),
        }

    def step_tick(self) -> None:
        if self.done:
            raise RuntimeError("session already finished")
        k = self.tick
        t = k * self.dt
        scenario = self.scenario

        tip_r, tip_world = self.fast.tip_pose(self.robot.q)
        tip_anat = self.reg.apply(tip_world)
        if self._prev_tip_world is None:
            vel_world = np.zeros(3)
        else:
            vel_world = (tip_world - self._prev_tip_world) / self.dt
        vel_anat = self.reg_rot @ vel_world

        dquery = query_distances(self.sdfs, tip_anat)
        res = self.contact.compute(self.sdfs, tip_anat, vel_anat,
                                   dists=dquery.distances_mm)
        f_anat = res.force_n
        f_world = self.reg_rot.T @ f_anat
        f_mag = float(np.linalg.norm(f_world))

        flags = 0
        if res.degenerate_normal:
            flags |= rl.FLAG_DEGENERATE_NORMAL

        if self._drill_on:
            carve = self.ablation.update(self.dt, f_mag, tip_anat, f_anat,
                                         self.volume, self.sdfs)
            if carve is not None:
                if carve.removed_voxels:
                    self.carve_total += carve.removed_voxels
                    flags |= rl.FLAG_CARVED
                    # fields changed under the tip; refresh the logged query
                    dquery = query_distances(self.sdfs, tip_anat)
                if carve.breach:
                    flags |= rl.FLAG_BREACH
                    self.events.append({
                        "time_s": t, "kind": "breach", "source": "carve",
                        "tip_mm": [float(v) for v in tip_anat],
                        "force_n": f_mag,
                    })

        if k % self.every_sensor == 0:
            tip_wrench = Wrench(tip_r.T @ f_world, np.zeros(3), "tip")
            self.drill_sensor.sample(t, tip_wrench)
            tool_total = Wrench(tip_r.T @ (self._hand_force - f_world), np.zeros(3), "tip")
            self.wrist_sensor.sample(t, tool_total)

        if k % self.every_ctrl == 0:
            reading = self.drill_sensor.held()
            est = estimate_tip_force(reading, self.drill_model, t)
            self._est_mag = est.magnitude
            self._est_stale = est.stale

            self.ctx.tip_anatomy_mm = tip_anat
            self.ctx.true_force_mag_n = f_mag
            dt_ctrl = self.every_ctrl * self.dt
            self._drill_on = self.provider.drill_power(t, scenario.drill_power)
            hand = self.provider.force(t, dt_ctrl, self.ctx)
            mag = float(np.linalg.norm(hand))
            if mag > scenario.max_hand_force_n:
                hand = hand * (scenario.max_hand_force_n / mag)
            self._hand_force = hand

            self.ctrl_state, ctrl_events = step_controller(
                self.ctrl_state, t, self._est_mag, dquery.distances_mm,
                scenario.controller, self.structures)
            for ev in ctrl_events:
                d = ev.to_dict()
                d["source"] = "controller"
                self.events.append(d)
            self._struct_fallback = self.ctrl_state.structure_fallback
            self._applied_gain = self.ctrl_state.gain if scenario.assist_enabled else 1.0

            _, _, jac = self.fast.tip_and_jacobian(self.robot.q)
            wrench6 = np.concatenate([self._hand_force, np.zeros(3)])
            self._dq = solve_admittance(jac, self.gains, self._applied_gain, wrench6,
                                        scenario.admittance_damping)

        if dquery.out_of_bounds:
            flags |= rl.FLAG_OOB
        if self._est_stale:
            flags |= rl.FLAG_STALE_EST
        if self._struct_fallback:
            flags |= rl.FLAG_FALLBACK
        if self._drill_on:
            flags |= rl.FLAG_DRILL_ON

        row = self._rows[k]
        row["t"] = t
        row["q"] = self.robot.q
        row["tip"] = tip_anat
        row["f_hand"] = self._hand_force
        row["f_tip"] = f_world
        row["f_tip_mag"] = f_mag
        row["f_est_mag"] = self._est_mag
        row["d"] = dquery.distances_mm
        row["gain"] = self._applied_gain
        row["regime"] = int(self.ctrl_state.regime)
        slot = self.ctrl_state.structure_slot
        row["structure"] = -1 if slot is None else self.structures[slot].index
        row["carved"] = self.carve_total

        self.robot = integrate_step(self.chain, self.robot, self._dq, self.dt)
        if self.robot.at_limit.any():
            flags |= rl.FLAG_JOINT_LIMIT
        row["flags"] = flags

        self._prev_tip_world = tip_world
        self.tick += 1

    def run(self) -> RunLog:
        while not self.done:
            self.step_tick()
        return self.finish()

    def finish(self) -> RunLog:
        header = {
            "format_version": 1,
            "scenario": self.scenario.to_dict(),
            "config_hash": self.scenario.config_hash(),
            "seed": self.scenario.seed,
            "dof": self.chain.dof,
            "rates": self.scenario.rates.to_dict(),
            "structures": [s.to_dict() for s in self.structures],
        }
        return RunLog(header, self._rows[:self.tick].copy(), list(self.events))


def run_simulation(scenario: Scenario, provider: Optional[InputProvider] = None) -> RunLog:
    """Run a scenario start to finish and return its log."""
    return SimSession(scenario, provider).run()
