"""Verdicts on SPI reports, triggering-condition classification and threshold search."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Tuple

from . import _json
from .errors import EmptyMatrix, NotBracketed
from .scenario import FunctionUnderTest, Scenario
from .simkernel import SimConfig, SpiReport, simulate

PASS = "PASS"
HAZARDOUS = "HAZARDOUS"

CONFIRMED = "CONFIRMED_TRIGGERING_CONDITION"
NOT_RELEVANT = "NOT_RELEVANT"
INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class TolerableWindow:
    min_ttc: float = 1.5
    msdv_duration: float = 0.0
    forbid_collision: bool = True

    def __post_init__(self):
        for name in ("min_ttc", "msdv_duration"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"window threshold {name} must be finite and non-negative")

    def to_dict(self):
        return {"min_ttc": self.min_ttc, "msdv_duration": self.msdv_duration, "collision": self.forbid_collision}

    @classmethod
    def from_dict(cls, raw):
        _json.check_keys(raw, ("min_ttc", "msdv_duration", "collision"), what="windows")
        defaults = cls()
        return cls(
            _json.number(raw.get("min_ttc", defaults.min_ttc), "windows", "min_ttc"),
            _json.number(raw.get("msdv_duration", defaults.msdv_duration), "windows", "msdv_duration"),
            bool(raw.get("collision", defaults.forbid_collision)),
        )

    @classmethod
    def loads(cls, text):
        return cls.from_dict(_json.parse(text, "windows document"))


COLLISION_ONLY = TolerableWindow(min_ttc=0.0, msdv_duration=1e9)


@dataclass(frozen=True)
class Verdict:
    status: str
    violated: Tuple[str, ...] = ()

    @property
    def hazardous(self):
        return self.status == HAZARDOUS


def verdict(r: SpiReport, w: TolerableWindow = TolerableWindow()) -> Verdict:
    violated = []
    if r.min_ttc is not None and r.min_ttc < w.min_ttc:
        violated.append("min_ttc")
    if r.msdv_duration > w.msdv_duration:
        violated.append("msdv_duration")
    if w.forbid_collision and r.collision:
        violated.append("collision")
    return Verdict(HAZARDOUS if violated else PASS, tuple(violated))


@dataclass(frozen=True)
class Threshold:
    param: str
    value: Optional[float]
    tol: float
    diagnostic: Optional[str] = None
    evaluations: int = 0

    def to_dict(self):
        out = {"param": self.param, "value": self.value, "tol": self.tol}
        if self.diagnostic:
            out["diagnostic"] = self.diagnostic
        return out


@dataclass(frozen=True)
class TcClassification:
    tc_id: str
    status: str
    nominal_hazard_rate: float
    tc_hazard_rate: float
    thresholds: Tuple[Threshold, ...] = ()
    window: TolerableWindow = field(default_factory=TolerableWindow)
    nominal_cases: int = 0
    tc_cases: int = 0

    def to_dict(self):
        return {
            "tc_id": self.tc_id,
            "status": self.status,
            "nominal_hazard_rate": self.nominal_hazard_rate,
            "tc_hazard_rate": self.tc_hazard_rate,
            "thresholds": [t.to_dict() for t in self.thresholds],
            "windows": self.window.to_dict(),
        }

    def to_markdown(self):
        lines = [
            f"# Triggering condition `{self.tc_id}`",
            "",
            f"**Status:** {self.status}",
            "",
            "| matrix | cases | hazard rate |",
            "|---|---:|---:|",
            f"| nominal | {self.nominal_cases} | {self.nominal_hazard_rate:.3f} |",
            f"| {self.tc_id} | {self.tc_cases} | {self.tc_hazard_rate:.3f} |",
            "",
            f"Windows: min_ttc >= {self.window.min_ttc:g} s, msdv_duration <= {self.window.msdv_duration:g} s, "
            f"collision {'forbidden' if self.window.forbid_collision else 'allowed'}.",
        ]
        if self.thresholds:
            lines += ["", "| param | threshold | tol |", "|---|---:|---:|"]
            for t in self.thresholds:
                value = "n/a" if t.value is None else f"{t.value:.3f}"
                lines.append(f"| {t.param} | {value} | {t.tol:g} |")
        return "\n".join(lines) + "\n"


def hazard_rate(runs: Sequence[Tuple[object, SpiReport]], w: TolerableWindow) -> float:
    return sum(verdict(r, w).hazardous for _, r in runs) / len(runs)


def status_from_rates(nominal_rate: float, tc_rate: float) -> str:
    if nominal_rate == 1.0 and tc_rate == 1.0:
        return INCONCLUSIVE
    if tc_rate > nominal_rate and tc_rate > 0:
        return CONFIRMED
    return NOT_RELEVANT


def classify_tc(nominal, tc_runs, w: TolerableWindow = TolerableWindow(), tc_id: Optional[str] = None, thresholds=()) -> TcClassification:
    """Compare hazard rates of a triggering-condition matrix against the nominal matrix."""
    if not nominal or not tc_runs:
        raise EmptyMatrix("both the nominal and the triggering-condition runs must be non-empty")
    scenarios = {getattr(tc, "scenario_id", None) for tc, _ in list(nominal) + list(tc_runs)}
    if len(scenarios) > 1:
        raise ValueError(f"runs come from different scenarios: {sorted(map(str, scenarios))}")
    if tc_id is None:
        labels = sorted({tc.provenance.label for tc, _ in tc_runs})
        tc_id = "+".join(labels)
    n_rate = hazard_rate(nominal, w)
    t_rate = hazard_rate(tc_runs, w)
    return TcClassification(
        tc_id, status_from_rates(n_rate, t_rate), n_rate, t_rate, tuple(thresholds), w, len(nominal), len(tc_runs)
    )


def bisect_threshold(hazardous: Callable[[float], bool], lo: float, hi: float, tol: float, sweep_points: int = 8):
    """Locate where ``hazardous`` flips on ``[lo, hi]``.

    Returns ``(value, diagnostic, evaluations)``; ``value`` is ``None`` with a
    ``NonMonotone`` diagnostic when the pre-check sweep sees more than one flip.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if lo > hi:
        raise ValueError("lo must not exceed hi")
    if tol >= hi - lo:
        return 0.5 * (lo + hi), None, 0

    step = (hi - lo) / (sweep_points - 1)
    xs = [lo + i * step for i in range(sweep_points - 1)] + [hi]
    flags = [hazardous(x) for x in xs]
    evaluations = len(flags)
    if flags[0] == flags[-1]:
        state = HAZARDOUS if flags[0] else PASS
        if any(f != flags[0] for f in flags):
            return None, f"NonMonotone: verdict returns to {state} at both ends with changes in between", evaluations
        raise NotBracketed(f"verdict is {state} at both ends of [{lo:g}, {hi:g}]")
    flips = sum(1 for a, b in zip(flags, flags[1:]) if a != b)
    if flips > 1:
        return None, f"NonMonotone: verdict changes {flips} times over an {sweep_points}-point sweep", evaluations

    # narrow to the flipping sweep cell, then bisect
    i = next(i for i in range(len(flags) - 1) if flags[i] != flags[i + 1])
    a, b = xs[i], xs[i + 1]
    flag_a = flags[i]
    while b - a > tol:
        mid = 0.5 * (a + b)
        evaluations += 1
        if hazardous(mid) == flag_a:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b), None, evaluations


def find_threshold(
    param: str,
    interval: Tuple[float, float],
    fixed: Mapping[str, float],
    s: Scenario,
    fut: Optional[FunctionUnderTest] = None,
    w: TolerableWindow = TolerableWindow(),
    tol: float = 0.5,
    cfg: SimConfig = SimConfig(),
) -> Threshold:
    """One-factor-at-a-time hazard boundary of ``param`` with every other parameter held at ``fixed``."""
    fut = fut or s.function_under_test()

    def hazardous(x):
        assignment = dict(fixed)
        assignment[param] = x
        _, report = simulate(assignment, s, fut, cfg, record=False)
        return verdict(report, w).hazardous

    lo, hi = interval
    value, diagnostic, n = bisect_threshold(hazardous, lo, hi, tol)
    return Threshold(param, value, tol, diagnostic, n)
