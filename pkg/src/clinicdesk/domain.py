"""Core domain: clinic constants, value types and the pure scheduling rules.

Everything here is framework-free and side-effect-free. All times are
clinic-local wall clock (naive); the deployment is a single-site clinic.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, replace
from datetime import date, datetime, time, timedelta

from .errors import MisalignedWindow, NotEditable

MOBILE_RE = re.compile(r"^\+?\d+$")


class Shift(str, enum.Enum):
    MORNING = "MORNING"
    AFTERNOON = "AFTERNOON"


class Role(str, enum.Enum):
    DOCTOR = "DOCTOR"
    PHARMACIST = "PHARMACIST"
    ADMIN = "ADMIN"


class AppointmentStatus(str, enum.Enum):
    BOOKED = "BOOKED"
    COMPLETED = "COMPLETED"
    CANCELLED = "CANCELLED"


class ReminderKind(str, enum.Enum):
    AUTO_T30 = "AUTO_T30"
    BULK_MORNING = "BULK_MORNING"


class DateVerdict(str, enum.Enum):
    """Outcome of booking-date validation. Every date lands in exactly one."""

    ACCEPT = "ACCEPT"
    REJECT_TOO_SOON = "REJECT_TOO_SOON"
    REJECT_TOO_FAR = "REJECT_TOO_FAR"


# Legal status transitions; terminal states have no outgoing edges.
_TRANSITIONS = {
    AppointmentStatus.BOOKED: {AppointmentStatus.COMPLETED, AppointmentStatus.CANCELLED},
    AppointmentStatus.COMPLETED: set(),
    AppointmentStatus.CANCELLED: set(),
}


def _window_minutes(start: time, end: time) -> int:
    return (end.hour * 60 + end.minute) - (start.hour * 60 + start.minute)


def add_minutes(t: time, minutes: int) -> time:
    return (datetime.combine(date(2000, 1, 1), t) + timedelta(minutes=minutes)).time()


def valid_mobile(mobile: str) -> bool:
    return bool(MOBILE_RE.match(mobile))


@dataclass(frozen=True)
class ClinicConfig:
    """Clinic operating constants.

    Two staffed windows separated by a one-hour lunch; consultations are a
    fixed 15 minutes; bookings run from the next day up to 30 days ahead.
    """

    morning_window: tuple[time, time] = (time(8, 0), time(12, 0))
    afternoon_window: tuple[time, time] = (time(13, 0), time(17, 0))
    slot_minutes: int = 15
    min_lead_days: int = 1
    max_horizon_days: int = 30
    reminder_lead_minutes: int = 30

    def __post_init__(self):
        m_start, m_end = self.morning_window
        a_start, a_end = self.afternoon_window
        if not (m_start < m_end <= a_start < a_end):
            raise ValueError("shift windows must be ordered and non-overlapping")
        for start, end in (self.morning_window, self.afternoon_window):
            if _window_minutes(start, end) % self.slot_minutes != 0:
                raise ValueError("window length must be a multiple of slot_minutes")
        if _window_minutes(m_end, a_start) != 60:
            raise ValueError("gap between shifts must be the one-hour lunch")
        if self.min_lead_days < 1:
            raise ValueError("min_lead_days must be at least 1")
        if self.max_horizon_days < self.min_lead_days:
            raise ValueError("max_horizon_days must be >= min_lead_days")

    def window_for(self, shift: Shift) -> tuple[time, time]:
        return self.morning_window if shift is Shift.MORNING else self.afternoon_window

    def shift_covering(self, start: time) -> Shift | None:
        """Shift whose window contains ``start``, or None (e.g. lunch)."""
        for shift in (Shift.MORNING, Shift.AFTERNOON):
            w_start, w_end = self.window_for(shift)
            if w_start <= start < w_end:
                return shift
        return None


DEFAULT_CONFIG = ClinicConfig()


@dataclass(frozen=True)
class PatientRecord:
    patient_id: str
    full_name: str
    mobile_number: str
    credential: str | None  # salted hash, never the raw password
    created_at: datetime


@dataclass(frozen=True)
class Practitioner:
    practitioner_id: str
    full_name: str
    role: Role
    mobile_number: str
    credential: str | None


@dataclass(frozen=True)
class ShiftAssignment:
    date: date
    shift: Shift
    practitioner_id: str


@dataclass(frozen=True)
class TimeSlot:
    date: date
    start: time
    end: time
    shift: Shift
    practitioner_id: str
    free: bool = True


@dataclass(frozen=True)
class Appointment:
    appointment_id: str
    patient_id: str
    practitioner_id: str
    date: date
    start: time
    status: AppointmentStatus
    created_at: datetime
    updated_at: datetime

    def end(self, config: ClinicConfig = DEFAULT_CONFIG) -> time:
        """Derived, never stored: the 15-minute rule stays single-sourced."""
        return add_minutes(self.start, config.slot_minutes)

    def start_datetime(self) -> datetime:
        return datetime.combine(self.date, self.start)

    def with_status(self, new_status: AppointmentStatus, now: datetime) -> "Appointment":
        """Apply a transition; terminal states are immutable."""
        if new_status not in _TRANSITIONS[self.status]:
            raise NotEditable(f"cannot move {self.status.value} appointment to {new_status.value}")
        return replace(self, status=new_status, updated_at=now)


@dataclass(frozen=True)
class ReminderLogEntry:
    entry_id: int
    appointment_id: str
    kind: ReminderKind
    sent_at: datetime
    recipient_mobile: str
    message_body: str


def validate_booking_date(requested: date, today: date, config: ClinicConfig = DEFAULT_CONFIG) -> DateVerdict:
    """Classify a requested booking date against the horizon rules.

    ACCEPT iff today + min_lead_days <= requested <= today + max_horizon_days;
    same-day or earlier is rejected as too soon.
    """
    if requested < today + timedelta(days=config.min_lead_days):
        return DateVerdict.REJECT_TOO_SOON
    if requested > today + timedelta(days=config.max_horizon_days):
        return DateVerdict.REJECT_TOO_FAR
    return DateVerdict.ACCEPT


def slot_grid(window: tuple[time, time], slot_minutes: int) -> list[time]:
    """Consecutive slot start times covering ``window`` exactly.

    Raises MISALIGNED_WINDOW when the window length is not a multiple of
    the slot size.
    """
    start, end = window
    length = _window_minutes(start, end)
    if length < 0 or length % slot_minutes != 0:
        raise MisalignedWindow(f"window {start}-{end} is not a multiple of {slot_minutes} minutes")
    return [add_minutes(start, i * slot_minutes) for i in range(length // slot_minutes)]
