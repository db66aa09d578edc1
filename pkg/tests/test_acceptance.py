"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with -s to watch them stream).

    pytest tests/test_acceptance.py -v -s
"""

import functools
import random
import sqlite3
import time as time_mod
from concurrent.futures import ThreadPoolExecutor
from datetime import date, datetime, time, timedelta

import pytest
from fastapi.testclient import TestClient

from clinicdesk.api import create_app
from clinicdesk.clock import ManualClock
from clinicdesk.config import ServiceConfig
from clinicdesk.domain import (
    AppointmentStatus,
    ClinicConfig,
    PatientRecord,
    Practitioner,
    ReminderKind,
    Role,
    Shift,
    ShiftAssignment,
    slot_grid,
)
from clinicdesk.errors import RejectTooFar, RejectTooSoon, SlotTaken
from clinicdesk.reminders import FileSmsGateway, ReminderService
from clinicdesk.scheduling import Scheduler
from clinicdesk.sim import SimMode, SimScenario, WalkInArrivals, compare, simulate
from clinicdesk.store import Store

from conftest import (
    DOCTOR_PASSWORD,
    FIXED_NOW,
    PATIENT_PASSWORD,
    TODAY,
    TOMORROW,
    staff_day,
)
from test_api import authorization_matrix_failures
from test_api import login as api_login
from test_api_golden import GoldenSession, golden_mismatches, run_script


def criterion(name):
    def decorate(fn):
        @functools.wraps(fn)
        def wrapper(*args, **kwargs):
            started = time_mod.perf_counter()
            try:
                fn(*args, **kwargs)
            except BaseException:
                print(f"\nACCEPTANCE {name}: FAIL", flush=True)
                raise
            elapsed = time_mod.perf_counter() - started
            print(f"\nACCEPTANCE {name}: PASS ({elapsed:.2f}s)", flush=True)

        return wrapper

    return decorate


@criterion("slot-arithmetic")
def test_slot_arithmetic(scheduler):
    started = time_mod.perf_counter()
    slots = scheduler.day_slots(TOMORROW)
    elapsed = time_mod.perf_counter() - started
    assert len(slots) == 32
    by_shift = {shift: [s for s in slots if s.shift is shift] for shift in Shift}
    assert len(by_shift[Shift.MORNING]) == 16
    assert len(by_shift[Shift.AFTERNOON]) == 16
    lunch_start, lunch_end = time(12, 0), time(13, 0)
    for slot in slots:
        assert not (slot.start < lunch_end and slot.end > lunch_start), "slot intersects lunch"
    assert elapsed < 1.0


@criterion("horizon-property")
def test_horizon_property(tmp_path):
    store = Store(str(tmp_path / "horizon.db"))
    store.migrate()
    store.add_patient(PatientRecord("P1", "Sera K", "+679123", None, FIXED_NOW))
    store.add_practitioner(Practitioner("D1", "Lal", Role.DOCTOR, "+679456", None))
    for offset in range(-55, 56):
        on = TODAY + timedelta(days=offset)
        store.set_shift(ShiftAssignment(on, Shift.MORNING, "D1"))
    scheduler = Scheduler(store)

    rng = random.Random(20260302)
    violations = []
    for _ in range(1000):
        today = TODAY + timedelta(days=rng.randint(-10, 10))
        requested = today + timedelta(days=rng.randint(-40, 40))
        should_accept = today + timedelta(days=1) <= requested <= today + timedelta(days=30)
        now = datetime.combine(today, time(7, 0))
        try:
            booked = scheduler.book("P1", requested, time(8, 0), now)
        except (RejectTooSoon, RejectTooFar):
            accepted = False
        else:
            accepted = True
            scheduler.cancel(booked.appointment_id, now)  # free the slot again
        if accepted != should_accept:
            violations.append((today, requested, accepted))
    assert violations == [], f"{len(violations)} horizon violations, e.g. {violations[:3]}"
    store.close()


@criterion("double-booking-stress")
def test_double_booking_stress(tmp_path):
    store = Store(str(tmp_path / "stress.db"))
    store.migrate()
    store.add_practitioner(Practitioner("D1", "Lal", Role.DOCTOR, "+679456", None))
    for i in range(50):
        store.add_patient(PatientRecord(f"P{i}", f"Patient {i}", "+679000", None, FIXED_NOW))
    grid = [
        start
        for window in (ClinicConfig().morning_window, ClinicConfig().afternoon_window)
        for start in slot_grid(window, 15)
    ]
    # 100 contended slots across four staffed days
    targets = []
    for day_offset in range(4):
        on = TOMORROW + timedelta(days=day_offset)
        for start in grid:
            targets.append((on, start))
    targets = targets[:100]

    started = time_mod.perf_counter()
    with ThreadPoolExecutor(max_workers=50) as pool:
        for on, start in targets:
            def attempt(worker):
                try:
                    store.claim_slot(f"P{worker}", "D1", on, start, FIXED_NOW)
                    return "WON"
                except SlotTaken:
                    return "TAKEN"

            outcomes = list(pool.map(attempt, range(50)))
            assert outcomes.count("WON") == 1, f"{on} {start}: {outcomes.count('WON')} winners"
            assert outcomes.count("TAKEN") == 49
    elapsed = time_mod.perf_counter() - started

    booked = store.list_appointments(statuses=[AppointmentStatus.BOOKED])
    assert len(booked) == 100
    assert len({(a.practitioner_id, a.date, a.start) for a in booked}) == 100
    assert elapsed < 30.0, f"stress run took {elapsed:.1f}s"
    store.close()


@criterion("reminder-exactness")
def test_reminder_exactness(seeded, scheduler, tmp_path):
    starts = [time(8 + i // 4, (i % 4) * 15) for i in range(16)] + [
        time(13 + i // 4, (i % 4) * 15) for i in range(4)
    ]
    assert len(starts) == 20
    for index, start in enumerate(starts):
        scheduler.book("P1" if index % 2 else "P2", TOMORROW, start, FIXED_NOW)

    clock = ManualClock(datetime.combine(TOMORROW, time(7, 0)))
    gateway = FileSmsGateway(str(tmp_path / "sms_sink.log"), clock)
    service = ReminderService(seeded, ClinicConfig())

    outage = (
        datetime.combine(TOMORROW, time(9, 0)),
        datetime.combine(TOMORROW, time(9, 10)),
    )
    while clock.now() <= datetime.combine(TOMORROW, time(17, 0)):
        if not (outage[0] <= clock.now() < outage[1]):  # dispatcher down for 10 min
            service.reminder_tick(clock.now(), gateway)
        clock.advance(seconds=60)

    entries = seeded.list_reminders(kind=ReminderKind.AUTO_T30)
    assert len(entries) == 20
    by_id = {a.appointment_id: a for a in seeded.list_appointments()}
    for entry in entries:
        start_dt = by_id[entry.appointment_id].start_datetime()
        assert start_dt - timedelta(minutes=30) <= entry.sent_at < start_dt
    sink_lines = (tmp_path / "sms_sink.log").read_text().splitlines()
    assert len(sink_lines) == 20


@criterion("idempotent-bulk")
def test_idempotent_bulk(seeded, scheduler, tmp_path):
    qualifying = [time(9, 0), time(10, 15), time(11, 30)]
    for start in qualifying:
        scheduler.book("P1", TOMORROW, start, FIXED_NOW)
    elapsed = scheduler.book("P2", TOMORROW, time(8, 0), FIXED_NOW)  # start < now: not qualifying

    clock = ManualClock(datetime.combine(TOMORROW, time(8, 30)))
    gateway = FileSmsGateway(str(tmp_path / "bulk_sink.log"), clock)
    service = ReminderService(seeded, ClinicConfig())

    for _ in range(3):
        service.bulk_today("D1", clock.now(), gateway)

    entries = seeded.list_reminders(kind=ReminderKind.BULK_MORNING)
    assert len(entries) == len(qualifying)
    assert elapsed.appointment_id not in {e.appointment_id for e in entries}
    sink_lines = (tmp_path / "bulk_sink.log").read_text().splitlines()
    assert len(sink_lines) == len(qualifying)


@criterion("history-retention")
def test_history_retention(seeded, scheduler):
    completed = scheduler.book("P1", TOMORROW, time(8, 0), FIXED_NOW)
    cancelled = scheduler.book("P1", TOMORROW, time(8, 15), FIXED_NOW)
    kept = scheduler.book("P1", TOMORROW, time(8, 30), FIXED_NOW)
    scheduler.complete(completed.appointment_id, FIXED_NOW)
    scheduler.cancel(cancelled.appointment_id, FIXED_NOW)

    tomorrow_morning = datetime.combine(TOMORROW, time(7, 0))
    history = scheduler.patient_appointments("P1", include_past=True, now=tomorrow_morning)
    queue = scheduler.doctor_queue("D1", tomorrow_morning, scope="today")
    available = {s.start for s in scheduler.available_slots(TOMORROW, TODAY)}

    # independent oracle: full-table scan over a raw connection
    conn = sqlite3.connect(seeded.path)
    raw = list(conn.execute("SELECT appointment_id, status, start FROM appointments"))
    conn.close()
    assert {r[0] for r in raw} == {a.appointment_id for a in history}, "history must scan-match"
    expected_queue = {r[0] for r in raw if r[1] == "BOOKED"}
    assert {a.appointment_id for a in queue.appointments} == expected_queue
    booked_starts = {r[2] for r in raw if r[1] == "BOOKED"}
    full_grid = {s.strftime("%H:%M") for w in (ClinicConfig().morning_window,
                 ClinicConfig().afternoon_window) for s in slot_grid(w, 15)}
    assert {s.strftime("%H:%M") for s in available} == full_grid - booked_starts

    assert sorted(a.status.value for a in history) == ["BOOKED", "CANCELLED", "COMPLETED"]
    assert [a.appointment_id for a in queue.appointments] == [kept.appointment_id]
    assert time(8, 0) in available and time(8, 15) in available  # freed by terminal states
    assert time(8, 30) not in available  # still booked


@criterion("sorting-property")
def test_sorting_property(tmp_path):
    store = Store(str(tmp_path / "sorting.db"))
    store.migrate()
    rng = random.Random(500500)
    base = TODAY
    grid = [
        start
        for window in (ClinicConfig().morning_window, ClinicConfig().afternoon_window)
        for start in slot_grid(window, 15)
    ]
    scheduler = Scheduler(store)
    for case in range(500):
        patient_id, doctor_id = f"P{case}", f"D{case}"
        store.add_patient(PatientRecord(patient_id, f"Patient {case}", "+679", None, FIXED_NOW))
        store.add_practitioner(Practitioner(doctor_id, f"Doc {case}", Role.DOCTOR, "+679", None))
        queue_day = base + timedelta(days=rng.randint(-365, 365))
        n = rng.randint(2, 8)
        claimed = set()
        for _ in range(n):
            while True:
                if rng.random() < 0.5:
                    on, start = queue_day, rng.choice(grid)  # contributes to the day queue
                else:
                    on, start = base + timedelta(days=rng.randint(-365, 365)), rng.choice(grid)
                if (on, start) not in claimed:
                    claimed.add((on, start))
                    break
            store.claim_slot(patient_id, doctor_id, on, start, FIXED_NOW)

        listed = scheduler.patient_appointments(patient_id, include_past=True, now=FIXED_NOW)
        keys = [(a.date, a.start) for a in listed]
        assert keys == sorted(keys), f"case {case}: patient listing out of order"
        assert len(keys) == n

        queue = scheduler.doctor_queue(
            doctor_id, datetime.combine(queue_day, time(0, 0)), scope="today"
        )
        queue_keys = [a.start for a in queue.appointments]
        assert queue_keys == sorted(queue_keys), f"case {case}: queue out of order"
    store.close()


@criterion("simulator-plausibility")
def test_simulator_plausibility():
    everyone_at_opening = SimScenario(
        mode=SimMode.WALK_IN,
        n_patients=32,
        seed=7,
        walk_in=WalkInArrivals(peak_hour=8.0, peak_share=1.0, spread_minutes=0.0),
    )
    report = simulate(everyone_at_opening)
    # hand-computed FIFO oracle: waits are 15*i for i in 0..31, max 465
    assert report.waits_minutes == tuple(15.0 * i for i in range(32))
    assert max(report.waits_minutes) == 465.0
    assert 4 * 60 <= max(report.waits_minutes) <= 8 * 60  # the reported waiting-time band

    paired = compare(
        SimScenario(mode=SimMode.WALK_IN, n_patients=32, seed=1),
        SimScenario(mode=SimMode.APPOINTMENTS, n_patients=32, seed=1),
        n_replications=100,
    )
    assert paired.wait_ratio >= 4.0, f"appointments only {paired.wait_ratio:.1f}x better"


@criterion("api-contract")
def test_api_contract(seeded, clock, tmp_path):
    service_config = ServiceConfig(
        store_path=str(tmp_path / "clinic.db"), sms_sink_path=str(tmp_path / "sms.log")
    )
    gateway = FileSmsGateway(service_config.sms_sink_path, clock)
    app = create_app(seeded, service_config, clock, gateway)
    with TestClient(app, raise_server_exceptions=False) as client:
        golden = GoldenSession(client)
        run_script(golden, clock)
        mismatches = golden_mismatches(golden.captured)
        assert not mismatches, "\n".join(mismatches)

    # fresh world for the authorization matrix
    matrix_store = Store(str(tmp_path / "matrix.db"))
    matrix_store.migrate()
    matrix_clock = ManualClock(FIXED_NOW)
    from clinicdesk.auth import hash_password  # local: only needed here

    matrix_store.add_patient(
        PatientRecord("P1", "Sera K", "+6791234001", hash_password(PATIENT_PASSWORD, 1000), FIXED_NOW)
    )
    matrix_store.add_patient(
        PatientRecord("P2", "Tomasi V", "+6791234002", hash_password(PATIENT_PASSWORD, 1000), FIXED_NOW)
    )
    matrix_store.add_practitioner(
        Practitioner("D1", "Lal", Role.DOCTOR, "+6791230001", hash_password(DOCTOR_PASSWORD, 1000))
    )
    matrix_store.add_practitioner(
        Practitioner("D2", "Maya Prasad", Role.DOCTOR, "+6791230002", hash_password(DOCTOR_PASSWORD, 1000))
    )
    matrix_store.add_practitioner(
        Practitioner("PH1", "Ana Wati", Role.PHARMACIST, "+6791230009", None)
    )
    staff_day(matrix_store, TOMORROW)
    matrix_config = ServiceConfig(
        store_path=str(tmp_path / "matrix.db"), sms_sink_path=str(tmp_path / "matrix_sms.log")
    )
    matrix_app = create_app(
        matrix_store, matrix_config, matrix_clock,
        FileSmsGateway(matrix_config.sms_sink_path, matrix_clock),
    )
    with TestClient(matrix_app, raise_server_exceptions=False) as client:
        tokens = {
            "P1": api_login(client, "PATIENT", "P1", PATIENT_PASSWORD),
            "P2": api_login(client, "PATIENT", "P2", PATIENT_PASSWORD),
            "D1": api_login(client, "DOCTOR", "D1", DOCTOR_PASSWORD),
            "D2": api_login(client, "DOCTOR", "D2", DOCTOR_PASSWORD),
        }
        failures = authorization_matrix_failures(client, tokens, matrix_store, matrix_clock)
        assert not failures, "\n".join(failures)
    matrix_store.close()
