"""Request/response models for the JSON wire contract.

Every response is the envelope {"ok", "data", "error"} with exactly one of
data/error populated; dates travel as YYYY-MM-DD, times as HH:MM and
timestamps as ISO 8601 clinic-local strings. Field names are documented in
docs/api.md and are wire-stable.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

from ..domain import Appointment, Practitioner, TimeSlot
from ..scheduling import PatientSummary


class LoginRequest(BaseModel):
    role: Literal["PATIENT", "DOCTOR"]
    id: str = Field(min_length=1)
    password: str


class PasswordResetRequest(BaseModel):
    role: Literal["PATIENT", "DOCTOR"]
    id: str = Field(min_length=1)
    old_password: str
    new_password: str


class BookRequest(BaseModel):
    patient_id: str = Field(min_length=1)
    date: str
    start: str


class EditRequest(BaseModel):
    date: str
    start: str


class LoginOut(BaseModel):
    token: str
    expires_at: str
    display_name: str


class PatientOut(BaseModel):
    patient_id: str
    full_name: str
    mobile_number: str
    created_at: str


class DoctorOut(BaseModel):
    practitioner_id: str
    full_name: str


class AppointmentOut(BaseModel):
    appointment_id: str
    patient_id: str
    practitioner_id: str
    date: str
    start: str
    end: str
    status: str
    created_at: str
    updated_at: str


class SlotOut(BaseModel):
    date: str
    start: str
    end: str
    shift: str
    practitioner_id: str
    practitioner_name: str


class OnDutyOut(BaseModel):
    morning: Optional[DoctorOut] = None
    afternoon: Optional[DoctorOut] = None


class SlotsOut(BaseModel):
    date: str
    on_duty: OnDutyOut
    slots: list[SlotOut]


class AppointmentListOut(BaseModel):
    appointments: list[AppointmentOut]


class NextAppointmentOut(BaseModel):
    appointment: Optional[AppointmentOut] = None


class QueueItemOut(BaseModel):
    appointment: AppointmentOut
    patient_name: str


class QueueFirstOut(BaseModel):
    appointment: AppointmentOut
    patient: PatientOut


class QueueOut(BaseModel):
    scope: str
    date: Optional[str] = None
    first: Optional[QueueFirstOut] = None
    appointments: list[QueueItemOut]


class BulkFailureOut(BaseModel):
    appointment_id: str
    reason: str


class BulkOut(BaseModel):
    sent: int
    skipped_duplicates: int
    failed: list[BulkFailureOut]


class ContactOut(BaseModel):
    practitioner_id: str
    full_name: str
    mobile_number: str


class ResetOut(BaseModel):
    reset: bool


class HealthOut(BaseModel):
    status: str


def appointment_out(appointment: Appointment) -> AppointmentOut:
    return AppointmentOut(
        appointment_id=appointment.appointment_id,
        patient_id=appointment.patient_id,
        practitioner_id=appointment.practitioner_id,
        date=appointment.date.isoformat(),
        start=appointment.start.strftime("%H:%M"),
        end=appointment.end().strftime("%H:%M"),
        status=appointment.status.value,
        created_at=appointment.created_at.isoformat(timespec="seconds"),
        updated_at=appointment.updated_at.isoformat(timespec="seconds"),
    )


def patient_out(summary: PatientSummary) -> PatientOut:
    return PatientOut(
        patient_id=summary.patient_id,
        full_name=summary.full_name,
        mobile_number=summary.mobile_number,
        created_at=summary.created_at.isoformat(timespec="seconds"),
    )


def doctor_out(practitioner: Practitioner) -> DoctorOut:
    return DoctorOut(
        practitioner_id=practitioner.practitioner_id, full_name=practitioner.full_name
    )


def slot_out(slot: TimeSlot, practitioner_name: str) -> SlotOut:
    return SlotOut(
        date=slot.date.isoformat(),
        start=slot.start.strftime("%H:%M"),
        end=slot.end.strftime("%H:%M"),
        shift=slot.shift.value,
        practitioner_id=slot.practitioner_id,
        practitioner_name=practitioner_name,
    )
