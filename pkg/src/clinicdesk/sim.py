"""Discrete-event clinic-day simulator: walk-in FIFO versus booked slots.

Quantifies the waiting-time benefit of appointments at desk scale. Pure
computation over the clinic constants; it never touches the store. All
times are minutes from midnight; given a seed, a run is bit-reproducible.
"""

from __future__ import annotations

import enum
import math
import random
import statistics
from dataclasses import dataclass, replace
from typing import Optional

from .domain import ClinicConfig, Shift, slot_grid
from .errors import InvalidScenario, MismatchedScenarios

Z_95 = 1.959963984540054  # two-sided 95% normal quantile


class SimMode(str, enum.Enum):
    WALK_IN = "WALK_IN"
    APPOINTMENTS = "APPOINTMENTS"


@dataclass(frozen=True)
class WalkInArrivals:
    """Clustered-morning arrival model: a ``peak_share`` fraction of patients
    arrives within the ``spread_minutes`` window opening at ``peak_hour``;
    the rest spread uniformly over the remaining clinic day. Zero spread
    collapses the cluster to a point (everyone at the peak instant)."""

    peak_hour: float = 8.0
    peak_share: float = 0.7
    spread_minutes: float = 60.0


@dataclass(frozen=True)
class PunctualityJitter:
    mean_minutes: float = 0.0
    sd_minutes: float = 5.0


@dataclass(frozen=True)
class SimScenario:
    mode: SimMode
    n_patients: int
    seed: int
    walk_in: WalkInArrivals = WalkInArrivals()
    jitter: PunctualityJitter = PunctualityJitter()
    no_show_rate: float = 0.05
    service_minutes: int = 15


@dataclass(frozen=True)
class SimReport:
    mode: SimMode
    n_patients: int
    seed: int
    served: int
    no_shows: int
    waits_minutes: tuple[float, ...]  # per served patient, service order
    mean_wait: float
    median_wait: float
    p90_wait: float
    doctor_idle_minutes: float


@dataclass(frozen=True)
class CompareReport:
    mode_a: SimMode
    mode_b: SimMode
    n_patients: int
    n_replications: int
    mean_wait_a: float
    mean_wait_b: float
    wait_ratio: float  # mean_wait_a / mean_wait_b
    ci_low: Optional[float]
    ci_high: Optional[float]
    degenerate_ci: bool


def _minutes(t) -> float:
    return t.hour * 60.0 + t.minute


def _windows(config: ClinicConfig) -> list[tuple[float, float]]:
    return [
        (_minutes(config.morning_window[0]), _minutes(config.morning_window[1])),
        (_minutes(config.afternoon_window[0]), _minutes(config.afternoon_window[1])),
    ]


def _day_capacity(config: ClinicConfig) -> int:
    return sum(
        len(slot_grid(config.window_for(shift), config.slot_minutes))
        for shift in (Shift.MORNING, Shift.AFTERNOON)
    )


def validate_scenario(scenario: SimScenario, config: ClinicConfig = ClinicConfig()) -> None:
    if scenario.n_patients < 0:
        raise InvalidScenario("n_patients must be non-negative")
    if not (0.0 <= scenario.no_show_rate <= 1.0):
        raise InvalidScenario("no_show_rate must lie in [0, 1]")
    if not (0.0 <= scenario.walk_in.peak_share <= 1.0):
        raise InvalidScenario("peak_share must lie in [0, 1]")
    if scenario.jitter.sd_minutes < 0:
        raise InvalidScenario("jitter sd must be non-negative")
    if scenario.service_minutes != config.slot_minutes:
        raise InvalidScenario(
            f"service time must match the {config.slot_minutes}-minute consultation slot"
        )
    if scenario.walk_in.spread_minutes < 0:
        raise InvalidScenario("spread_minutes must be non-negative")
    windows = _windows(config)
    open_m, close_m = windows[0][0], windows[-1][1]
    peak_start = scenario.walk_in.peak_hour * 60.0
    if not (open_m <= peak_start <= close_m - scenario.walk_in.spread_minutes):
        raise InvalidScenario("the arrival peak must lie within the clinic day")
    if scenario.mode is SimMode.APPOINTMENTS and scenario.n_patients > _day_capacity(config):
        raise InvalidScenario(
            f"appointments mode holds at most {_day_capacity(config)} patients per day"
        )


def _closures(windows: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Periods when nobody is served: before opening and the lunch break."""
    closed = [(-1e18, windows[0][0])]
    for (_, w_end), (next_start, _) in zip(windows, windows[1:]):
        closed.append((w_end, next_start))
    return closed


def _waiting_minutes(
    arrival: float, start: float, closures: list[tuple[float, float]]
) -> float:
    """Queue wait from arrival to service start, not counting time the
    clinic is closed (a patient in front of shut doors is not queueing)."""
    wait = start - arrival
    for c_start, c_end in closures:
        wait -= max(0.0, min(start, c_end) - max(arrival, c_start))
    return wait


def _fit_service_start(
    earliest: float, windows: list[tuple[float, float]], service: float, open_ended_last: bool
) -> Optional[float]:
    """Earliest start >= ``earliest`` such that the service fits a staffed
    window; with ``open_ended_last`` the final window never closes (the
    doctor finishes the day's booked list)."""
    for index, (w_start, w_end) in enumerate(windows):
        start = max(earliest, w_start)
        if open_ended_last and index == len(windows) - 1:
            return start
        if start + service <= w_end:
            return start
    return None


def _idle_minutes(busy: list[tuple[float, float]], windows: list[tuple[float, float]]) -> float:
    staffed = sum(w_end - w_start for w_start, w_end in windows)
    in_window = 0.0
    for b_start, b_end in busy:
        for w_start, w_end in windows:
            in_window += max(0.0, min(b_end, w_end) - max(b_start, w_start))
    return staffed - in_window


def _percentile_90(waits: list[float]) -> float:
    if not waits:
        return 0.0
    ordered = sorted(waits)
    rank = max(1, math.ceil(0.9 * len(ordered)))  # nearest-rank
    return ordered[rank - 1]


def _report(
    scenario: SimScenario,
    waits: list[float],
    no_shows: int,
    busy: list[tuple[float, float]],
    windows: list[tuple[float, float]],
) -> SimReport:
    return SimReport(
        mode=scenario.mode,
        n_patients=scenario.n_patients,
        seed=scenario.seed,
        served=len(waits),
        no_shows=no_shows,
        waits_minutes=tuple(waits),
        mean_wait=statistics.fmean(waits) if waits else 0.0,
        median_wait=statistics.median(waits) if waits else 0.0,
        p90_wait=_percentile_90(waits),
        doctor_idle_minutes=_idle_minutes(busy, windows),
    )


def walk_in_arrival_minutes(
    scenario: SimScenario, config: ClinicConfig = ClinicConfig()
) -> list[float]:
    """Sorted arrival times (minutes from midnight) for a WALK_IN day."""
    windows = _windows(config)
    close_m = windows[-1][1]
    peak_start = scenario.walk_in.peak_hour * 60.0
    peak_end = peak_start + scenario.walk_in.spread_minutes
    rng = random.Random(scenario.seed)

    arrivals: list[float] = []
    for _ in range(scenario.n_patients):
        in_peak = rng.random() < scenario.walk_in.peak_share
        if in_peak or peak_end >= close_m:
            arrivals.append(rng.uniform(peak_start, min(peak_end, close_m)))
        else:
            arrivals.append(rng.uniform(peak_end, close_m))
    arrivals.sort()
    return arrivals


def _simulate_walk_in(scenario: SimScenario, config: ClinicConfig) -> SimReport:
    windows = _windows(config)
    closures = _closures(windows)
    arrivals = walk_in_arrival_minutes(scenario, config)
    service = float(scenario.service_minutes)
    free = windows[0][0]
    waits: list[float] = []
    busy: list[tuple[float, float]] = []
    for arrival in arrivals:
        start = _fit_service_start(max(arrival, free), windows, service, open_ended_last=False)
        if start is None:
            break  # day over; everyone behind in the FIFO queue goes unserved too
        waits.append(_waiting_minutes(arrival, start, closures))
        busy.append((start, start + service))
        free = start + service
    return _report(scenario, waits, 0, busy, windows)


def _simulate_appointments(scenario: SimScenario, config: ClinicConfig) -> SimReport:
    windows = _windows(config)
    slot_starts = [
        _minutes(s)
        for shift in (Shift.MORNING, Shift.AFTERNOON)
        for s in slot_grid(config.window_for(shift), config.slot_minutes)
    ][: scenario.n_patients]
    rng = random.Random(scenario.seed)
    # one (no-show, jitter) draw per patient regardless of attendance, so
    # raising no_show_rate only converts attendees (common random numbers)
    draws = [(rng.random(), rng.gauss(scenario.jitter.mean_minutes, scenario.jitter.sd_minutes))
             for _ in slot_starts]

    service = float(scenario.service_minutes)
    closures = _closures(windows)
    free = windows[0][0]
    waits: list[float] = []
    busy: list[tuple[float, float]] = []
    no_shows = 0
    for slot, (u, jitter) in zip(slot_starts, draws):
        if u < scenario.no_show_rate:
            no_shows += 1
            continue
        arrival = slot + jitter
        start = _fit_service_start(
            max(arrival, slot, free), windows, service, open_ended_last=True
        )
        waits.append(_waiting_minutes(arrival, start, closures))
        busy.append((start, start + service))
        free = start + service
    return _report(scenario, waits, no_shows, busy, windows)


def simulate(scenario: SimScenario, config: ClinicConfig = ClinicConfig()) -> SimReport:
    """Run one clinic day. WALK_IN: single-server FIFO over both shift
    windows with service suspended during lunch. APPOINTMENTS: patients own
    fixed slots, arrive with punctuality jitter, no-shows consume nothing
    and the doctor serves at max(slot start, arrival, previous finish).
    Waits count queueing time only while the clinic is open (time spent in
    front of shut doors, before opening or over lunch, is excluded)."""
    validate_scenario(scenario, config)
    if scenario.mode is SimMode.WALK_IN:
        return _simulate_walk_in(scenario, config)
    return _simulate_appointments(scenario, config)


def compare(
    scenario_a: SimScenario,
    scenario_b: SimScenario,
    n_replications: int,
    config: ClinicConfig = ClinicConfig(),
) -> CompareReport:
    """Paired replications (matched seeds) of two scenarios; reports the
    ratio of mean waits a/b with a normal-approximation 95% interval over
    per-replication ratios. A single replication degenerates to a flagged
    point estimate."""
    if n_replications < 1:
        raise InvalidScenario("n_replications must be at least 1")
    if scenario_a.n_patients != scenario_b.n_patients:
        raise MismatchedScenarios("scenarios must share n_patients")
    if scenario_a.service_minutes != scenario_b.service_minutes:
        raise MismatchedScenarios("scenarios must share the service time")
    validate_scenario(scenario_a, config)
    validate_scenario(scenario_b, config)

    means_a: list[float] = []
    means_b: list[float] = []
    for rep in range(n_replications):
        report_a = simulate(replace(scenario_a, seed=scenario_a.seed + rep), config)
        report_b = simulate(replace(scenario_b, seed=scenario_b.seed + rep), config)
        means_a.append(report_a.mean_wait)
        means_b.append(report_b.mean_wait)

    mean_a = statistics.fmean(means_a)
    mean_b = statistics.fmean(means_b)
    if mean_b == 0.0:
        ratio = 1.0 if mean_a == 0.0 else math.inf
    else:
        ratio = mean_a / mean_b

    ratios = [
        (1.0 if a == 0.0 else math.inf) if b == 0.0 else a / b
        for a, b in zip(means_a, means_b)
    ]
    degenerate = n_replications == 1 or any(math.isinf(r) for r in ratios)
    if degenerate:
        ci_low = ci_high = None if math.isinf(ratio) else ratio
    else:
        sd = statistics.stdev(ratios)
        half = Z_95 * sd / math.sqrt(n_replications)
        ci_low, ci_high = statistics.fmean(ratios) - half, statistics.fmean(ratios) + half
    return CompareReport(
        mode_a=scenario_a.mode,
        mode_b=scenario_b.mode,
        n_patients=scenario_a.n_patients,
        n_replications=n_replications,
        mean_wait_a=mean_a,
        mean_wait_b=mean_b,
        wait_ratio=ratio,
        ci_low=ci_low,
        ci_high=ci_high,
        degenerate_ci=degenerate,
    )


def default_scenario(mode: SimMode, n_patients: int, seed: int) -> SimScenario:
    return SimScenario(mode=mode, n_patients=n_patients, seed=seed)
