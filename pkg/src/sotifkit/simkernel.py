"""Longitudinal ego-with-AEB vs. lead-vehicle simulation and safety indicators.

The ego cruises at its set speed until the lead vehicle is inside the
detection range, waits ``reaction_time`` and then brakes at
``max_decel_at_mu1 * friction``.  Integration is explicit Euler with a
fixed step.  The perception model is deliberately synthetic: detection range
is the sensor range capped by visibility, scaled by an affine illuminance
factor.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import List, Mapping, NamedTuple, Optional

from .errors import DegenerateFriction, NonFiniteState, NotSimulatable
from .scenario import FunctionUnderTest, Scenario

VISIBILITY = "environment/ambient/visibility"
ILLUMINANCE = "environment/ambient/illuminance"
FRICTION = "environment/road/asphalt_friction"
EGO_SPEED = "traffic/ego/speed"
LEAD_SPEED = "traffic/lead/speed"
LEAD_GAP = "traffic/lead/initial_gap"

TRACE_HEADER = ("t", "ego_pos", "ego_vel", "lead_pos", "lead_vel", "gap", "ttc", "safe_distance", "detected", "brake_active")


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.01
    horizon: float = 30.0
    g: float = 9.81

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.horizon >= self.dt:
            raise ValueError("horizon must be at least one step")

    @property
    def steps(self):
        return int(round(self.horizon / self.dt))


class TraceRow(NamedTuple):
    t: float
    ego_pos: float
    ego_vel: float
    lead_pos: float
    lead_vel: float
    gap: float
    ttc: Optional[float]
    safe_distance: float
    detected: bool
    brake_active: bool


@dataclass
class SimTrace:
    rows: List[TraceRow] = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for r in self.rows:
            writer.writerow(
                [
                    repr(r.t), repr(r.ego_pos), repr(r.ego_vel), repr(r.lead_pos), repr(r.lead_vel),
                    repr(r.gap), "" if r.ttc is None else repr(r.ttc), repr(r.safe_distance),
                    int(r.detected), int(r.brake_active),
                ]
            )
        return buf.getvalue()


@dataclass(frozen=True)
class SpiReport:
    min_ttc: Optional[float]  # None: never on a collision course
    min_gap: float
    msdv_duration: float
    collision: bool
    initial_gap: float = 0.0
    detection_range: float = 0.0
    stop_time: Optional[float] = None

    @property
    def values(self):
        return {
            "min_ttc": self.min_ttc,
            "min_gap": self.min_gap,
            "msdv_duration": self.msdv_duration,
            "collision": self.collision,
        }

    def to_dict(self):
        return {
            **self.values,
            "initial_gap": self.initial_gap,
            "detection_range": self.detection_range,
            "stop_time": self.stop_time,
        }

    @classmethod
    def from_dict(cls, raw):
        return cls(
            None if raw.get("min_ttc") is None else float(raw["min_ttc"]),
            float(raw["min_gap"]),
            float(raw["msdv_duration"]),
            bool(raw["collision"]),
            float(raw.get("initial_gap", 0.0)),
            float(raw.get("detection_range", 0.0)),
            None if raw.get("stop_time") is None else float(raw["stop_time"]),
        )


def detection_range(fut: FunctionUnderTest, visibility: float, illuminance: float) -> float:
    if illuminance >= fut.illum_full:
        factor = 1.0
    else:
        factor = fut.illum_floor_factor + (1.0 - fut.illum_floor_factor) * (illuminance / fut.illum_full)
    return min(fut.sensor_max_range, visibility) * factor


def compute_ttc(gap: float, closing_speed: float) -> Optional[float]:
    if closing_speed > 0:
        return gap / closing_speed
    return None


def compute_safe_distance(v_ego: float, v_lead: float, fut: FunctionUnderTest, mu_eff: float) -> float:
    """RSS-style longitudinal safe distance with equal braking capability for both vehicles."""
    if not mu_eff > 0:
        raise DegenerateFriction(f"effective friction must be positive, got {mu_eff}")
    a = fut.max_decel_at_mu1 * mu_eff
    d = v_ego * fut.reaction_time + (v_ego * v_ego - v_lead * v_lead) / (2.0 * a)
    return max(d, 0.0)


def stopping_distance(v: float, reaction_time: float, decel: float) -> float:
    """Closed-form reaction plus braking distance from speed ``v``."""
    return v * reaction_time + v * v / (2.0 * decel)


@dataclass(frozen=True)
class LeadProfile:
    kind: str = "constant_speed"
    speed: float = 0.0
    decel: float = 0.0
    decel_start: float = 0.0

    def accel(self, t, vel):
        if self.kind == "scripted_decel" and t >= self.decel_start and vel > 0:
            return -self.decel
        return 0.0


@dataclass(frozen=True)
class SimInputs:
    """Everything ``simulate`` needs, resolved from scenario + test case."""

    ego_speed: float
    lead: LeadProfile
    initial_gap: float
    visibility: float
    illuminance: float
    friction: float


def _value(assignment, scenario, path, default):
    if path in assignment:
        return float(assignment[path])
    p = scenario.param(path)
    if p is not None:
        lo, hi = p.interval
        return 0.5 * (lo + hi)
    return default


def resolve_inputs(assignment: Mapping[str, float], s: Scenario, fut: FunctionUnderTest) -> SimInputs:
    egos = s.find("ego")
    leads = s.find("lead_vehicle")
    if len(egos) != 1 or len(leads) != 1:
        raise NotSimulatable(f"{s.id}: needs exactly one ego and one lead_vehicle (found {len(egos)}, {len(leads)})")
    ego, lead = egos[0], leads[0]
    profile = str(lead.attrs.get("profile", "constant_speed"))
    lead_speed = _value(assignment, s, LEAD_SPEED, float(lead.attrs.get("speed", 0.0)))
    if profile == "stopped":
        lead_speed = 0.0
    gap = _value(assignment, s, LEAD_GAP, lead.attrs.get("initial_gap"))
    if gap is None or not gap > 0:
        raise NotSimulatable(f"{s.id}: initial gap must be positive")
    return SimInputs(
        ego_speed=_value(assignment, s, EGO_SPEED, float(ego.attrs.get("speed", 0.0))),
        lead=LeadProfile(profile, lead_speed, float(lead.attrs.get("decel", 0.0)), float(lead.attrs.get("decel_start", 0.0))),
        initial_gap=float(gap),
        visibility=_value(assignment, s, VISIBILITY, math.inf),
        illuminance=_value(assignment, s, ILLUMINANCE, fut.illum_full),
        friction=_value(assignment, s, FRICTION, 1.0),
    )


def run(inputs: SimInputs, fut: FunctionUnderTest, cfg: SimConfig = SimConfig(), record: bool = False):
    """Integrate one run; returns ``(SimTrace | None, SpiReport)``."""
    mu = inputs.friction
    if not mu > 0:
        raise DegenerateFriction(f"effective friction must be positive, got {mu}")
    decel = fut.max_decel_at_mu1 * mu
    det_range = detection_range(fut, inputs.visibility, inputs.illuminance)
    reaction_steps = max(0, math.ceil(fut.reaction_time / cfg.dt - 1e-9))
    dt = cfg.dt
    n = cfg.steps
    lead = inputs.lead

    ego_pos, ego_vel = 0.0, inputs.ego_speed
    lead_pos, lead_vel = inputs.initial_gap, inputs.lead.speed
    detect_step = None
    collision = False
    stop_time = None
    min_ttc = None
    min_gap = math.inf
    msdv_steps = 0
    trace = SimTrace() if record else None

    k = 0
    while True:
        t = k * dt
        gap = lead_pos - ego_pos
        if detect_step is None and gap <= det_range:
            detect_step = k
        braking = detect_step is not None and k - detect_step >= reaction_steps

        if collision:
            ttc = None
        else:
            ttc = compute_ttc(max(gap, 0.0), ego_vel - lead_vel)
        if ttc is not None and (min_ttc is None or ttc < min_ttc):
            min_ttc = ttc
        if gap < min_gap:
            min_gap = gap
        d_safe = compute_safe_distance(ego_vel, lead_vel, fut, mu)
        violating = gap < d_safe
        if record:
            trace.rows.append(TraceRow(t, ego_pos, ego_vel, lead_pos, lead_vel, gap, ttc, d_safe, detect_step is not None, braking))
        if k >= n:
            break

        stationary = collision or (ego_vel == 0.0 and lead_vel == 0.0)
        if stationary:
            # nothing changes any more; account for the remaining steps at once
            if violating:
                msdv_steps += n - k
            break
        if violating:
            msdv_steps += 1

        a_ego = -decel if braking else 0.0
        a_lead = lead.accel(t, lead_vel)
        ego_pos += ego_vel * dt
        lead_pos += lead_vel * dt
        ego_vel = max(ego_vel + a_ego * dt, 0.0)
        lead_vel = max(lead_vel + a_lead * dt, 0.0)
        k += 1
        if stop_time is None and braking and ego_vel == 0.0:
            stop_time = k * dt
        if not (math.isfinite(ego_pos) and math.isfinite(lead_pos) and math.isfinite(ego_vel) and math.isfinite(lead_vel)):
            raise NonFiniteState(f"non-finite state at t={k * dt:g}")
        if lead_pos - ego_pos <= 0.0 and not collision:
            # freeze at contact
            collision = True
            min_ttc = 0.0
            ego_pos = lead_pos
            ego_vel = lead_vel = 0.0

    report = SpiReport(
        min_ttc=min_ttc,
        min_gap=min_gap,
        msdv_duration=msdv_steps * dt,
        collision=collision,
        initial_gap=inputs.initial_gap,
        detection_range=det_range,
        stop_time=stop_time,
    )
    return trace, report


def simulate(tc, s: Scenario, fut: Optional[FunctionUnderTest] = None, cfg: SimConfig = SimConfig(), record: bool = True):
    """Simulate one test case on its scenario; returns ``(SimTrace, SpiReport)``."""
    fut = fut or s.function_under_test()
    assignment = tc.assignment if hasattr(tc, "assignment") else tc
    return run(resolve_inputs(assignment, s, fut), fut, cfg, record=record)
