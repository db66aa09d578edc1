"""Shared fixtures: a migrated temp store, a seeded clinic (two patients,
two doctors, a pharmacist, tomorrow fully staffed) and a manual clock
pinned to a fixed Monday morning."""

from __future__ import annotations

from datetime import date, datetime, time, timedelta

import pytest

from clinicdesk.auth import hash_password
from clinicdesk.clock import ManualClock
from clinicdesk.domain import (
    ClinicConfig,
    PatientRecord,
    Practitioner,
    Role,
    Shift,
    ShiftAssignment,
)
from clinicdesk.reminders import ReminderService, SendResult, SmsGateway
from clinicdesk.scheduling import Scheduler
from clinicdesk.store import Store

FIXED_NOW = datetime(2026, 3, 2, 7, 45)  # Monday before opening
TODAY = FIXED_NOW.date()
TOMORROW = TODAY + timedelta(days=1)

PATIENT_PASSWORD = "patient-pass-1"
DOCTOR_PASSWORD = "doctor-pass-1"

# hash once per session; PBKDF2 at full cost is deliberate but not per-test
PATIENT_CREDENTIAL = hash_password(PATIENT_PASSWORD)
DOCTOR_CREDENTIAL = hash_password(DOCTOR_PASSWORD)


class RecordingGateway(SmsGateway):
    """Test double capturing (mobile, body) pairs; optionally fails some."""

    def __init__(self, fail_mobiles: set[str] | None = None):
        self.messages: list[tuple[str, str]] = []
        self.fail_mobiles = fail_mobiles or set()

    def send(self, mobile_number: str, message_body: str) -> SendResult:
        if mobile_number in self.fail_mobiles:
            return SendResult(ok=False, reason="simulated outage")
        self.messages.append((mobile_number, message_body))
        return SendResult(ok=True)


@pytest.fixture
def clock() -> ManualClock:
    return ManualClock(FIXED_NOW)


@pytest.fixture
def store(tmp_path):
    s = Store(str(tmp_path / "clinic.db"))
    s.migrate()
    yield s
    s.close()


@pytest.fixture
def seeded(store, clock):
    """Store with P1/P2, doctors D1/D2, pharmacist PH1, and tomorrow staffed
    (D1 morning, D2 afternoon)."""
    now = clock.now()
    store.add_patient(PatientRecord("P1", "Sera K", "+6791234001", PATIENT_CREDENTIAL, now))
    store.add_patient(PatientRecord("P2", "Tomasi V", "+6791234002", PATIENT_CREDENTIAL, now))
    store.add_practitioner(Practitioner("D1", "Lal", Role.DOCTOR, "+6791230001", DOCTOR_CREDENTIAL))
    store.add_practitioner(Practitioner("D2", "Maya Prasad", Role.DOCTOR, "+6791230002", DOCTOR_CREDENTIAL))
    store.add_practitioner(Practitioner("PH1", "Ana Wati", Role.PHARMACIST, "+6791230009", None))
    store.set_shift(ShiftAssignment(TOMORROW, Shift.MORNING, "D1"))
    store.set_shift(ShiftAssignment(TOMORROW, Shift.AFTERNOON, "D2"))
    return store


@pytest.fixture
def scheduler(seeded) -> Scheduler:
    return Scheduler(seeded, ClinicConfig())


@pytest.fixture
def reminder_service(seeded) -> ReminderService:
    return ReminderService(seeded, ClinicConfig())


@pytest.fixture
def gateway() -> RecordingGateway:
    return RecordingGateway()


def staff_day(store, on: date, morning: str = "D1", afternoon: str = "D2") -> None:
    store.set_shift(ShiftAssignment(on, Shift.MORNING, morning))
    store.set_shift(ShiftAssignment(on, Shift.AFTERNOON, afternoon))
