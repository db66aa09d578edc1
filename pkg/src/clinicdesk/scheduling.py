"""Slot generation, availability and the appointment lifecycle.

Stateless over the store: any number of concurrent callers is fine, with
contended writes delegated to the store's transactional slot claiming.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime
from typing import Optional

from .domain import (
    Appointment,
    AppointmentStatus,
    ClinicConfig,
    DateVerdict,
    PatientRecord,
    Practitioner,
    Role,
    Shift,
    TimeSlot,
    add_minutes,
    slot_grid,
    validate_booking_date,
)
from .errors import (
    Forbidden,
    MisalignedStart,
    NoPractitionerScheduled,
    NotFound,
    RejectTooFar,
    RejectTooSoon,
    UnknownPatient,
    UnknownPractitioner,
)
from .store import Store


@dataclass(frozen=True)
class PatientSummary:
    """Patient record with credential material stripped."""

    patient_id: str
    full_name: str
    mobile_number: str
    created_at: datetime


@dataclass(frozen=True)
class QueueView:
    """A doctor's queue; ``first`` is the alert target (next patient to see)."""

    appointments: list[Appointment]
    first: Optional[Appointment]


def summarize(patient: PatientRecord) -> PatientSummary:
    return PatientSummary(
        patient_id=patient.patient_id,
        full_name=patient.full_name,
        mobile_number=patient.mobile_number,
        created_at=patient.created_at,
    )


class Scheduler:
    def __init__(self, store: Store, config: ClinicConfig = ClinicConfig()):
        self.store = store
        self.config = config

    # -- slots -------------------------------------------------------------

    def day_slots(self, on: date) -> list[TimeSlot]:
        """Every slot of the day's staffed shifts; ``free`` reflects BOOKED
        appointments. Unstaffed shifts contribute no slots."""
        assignments = self.store.get_shift_assignments(on)
        slots: list[TimeSlot] = []
        for shift in (Shift.MORNING, Shift.AFTERNOON):
            practitioner_id = assignments.get(shift)
            if practitioner_id is None:
                continue
            booked = {
                a.start
                for a in self.store.list_appointments(
                    practitioner_id=practitioner_id, on=on, statuses=[AppointmentStatus.BOOKED]
                )
            }
            for start in slot_grid(self.config.window_for(shift), self.config.slot_minutes):
                slots.append(
                    TimeSlot(
                        date=on,
                        start=start,
                        end=add_minutes(start, self.config.slot_minutes),
                        shift=shift,
                        practitioner_id=practitioner_id,
                        free=start not in booked,
                    )
                )
        return slots

    def available_slots(self, on: date, today: date) -> list[TimeSlot]:
        """Free slots of a bookable day, ascending by start."""
        _check_horizon(on, today, self.config)
        return [slot for slot in self.day_slots(on) if slot.free]

    def on_duty(self, on: date) -> dict[Shift, Optional[Practitioner]]:
        assignments = self.store.get_shift_assignments(on)
        return {
            shift: (
                self.store.get_practitioner(assignments[shift])
                if shift in assignments
                else None
            )
            for shift in (Shift.MORNING, Shift.AFTERNOON)
        }

    # -- lifecycle -----------------------------------------------------------

    def book(self, patient_id: str, on: date, start, now: datetime) -> Appointment:
        """Book a slot; the booking horizon, grid alignment and staffing are
        all checked before the store claim arbitrates contention."""
        _check_horizon(on, now.date(), self.config)
        practitioner_id = self._resolve_slot(on, start)
        return self.store.claim_slot(patient_id, practitioner_id, on, start, now)

    def edit(self, appointment_id: str, new_date: date, new_start, now: datetime) -> Appointment:
        """Move a BOOKED appointment; on failure the original is untouched."""
        current = self.store.get_appointment(appointment_id)
        if current is None:
            raise NotFound(f"appointment {appointment_id} not found")
        _check_horizon(new_date, now.date(), self.config)
        practitioner_id = self._resolve_slot(new_date, new_start)
        return self.store.move_appointment(
            appointment_id, practitioner_id, new_date, new_start, now
        )

    def cancel(self, appointment_id: str, now: datetime) -> Appointment:
        return self.store.update_status(appointment_id, AppointmentStatus.CANCELLED, now)

    def complete(self, appointment_id: str, now: datetime) -> Appointment:
        return self.store.update_status(appointment_id, AppointmentStatus.COMPLETED, now)

    # -- views ----------------------------------------------------------------

    def patient_appointments(
        self, patient_id: str, include_past: bool, now: datetime
    ) -> list[Appointment]:
        """Nearest-first listing: upcoming BOOKED only, or full history."""
        if self.store.get_patient(patient_id) is None:
            raise UnknownPatient(f"patient {patient_id} not found")
        if include_past:
            return self.store.list_appointments(patient_id=patient_id)
        return self.store.list_appointments(
            patient_id=patient_id, statuses=[AppointmentStatus.BOOKED], start_from=now
        )

    def next_appointment(self, patient_id: str, now: datetime) -> Optional[Appointment]:
        upcoming = self.patient_appointments(patient_id, include_past=False, now=now)
        return upcoming[0] if upcoming else None

    def doctor_queue(self, practitioner_id: str, now: datetime, scope: str = "today") -> QueueView:
        """BOOKED appointments for the doctor, ascending by start; scope is
        'today' (the alert view) or 'future' (dates after today, grouped by
        date ascending)."""
        practitioner = self.store.get_practitioner(practitioner_id)
        if practitioner is None or practitioner.role is not Role.DOCTOR:
            raise UnknownPractitioner(f"doctor {practitioner_id} not found")
        if scope == "future":
            appointments = self.store.list_appointments(
                practitioner_id=practitioner_id,
                after_date=now.date(),
                statuses=[AppointmentStatus.BOOKED],
            )
        else:
            appointments = self.store.list_appointments(
                practitioner_id=practitioner_id,
                on=now.date(),
                statuses=[AppointmentStatus.BOOKED],
            )
        return QueueView(appointments=appointments, first=appointments[0] if appointments else None)

    def find_patient(
        self, patient_id: str, requester_role: str, requester_id: str
    ) -> PatientSummary:
        """Read-only lookup: a doctor may read any patient, a patient only
        themself. No mutation path exists here."""
        if requester_role != "DOCTOR" and requester_id != patient_id:
            raise Forbidden("patients may only view their own record")
        patient = self.store.get_patient(patient_id)
        if patient is None:
            raise NotFound(f"patient {patient_id} not found")
        return summarize(patient)

    # -- helpers ---------------------------------------------------------------

    def _resolve_slot(self, on: date, start) -> str:
        """Map (date, start) to the assigned doctor, enforcing grid alignment."""
        shift = self.config.shift_covering(start)
        if shift is None or start not in slot_grid(
            self.config.window_for(shift), self.config.slot_minutes
        ):
            raise MisalignedStart(f"{start.strftime('%H:%M')} is not on the slot grid")
        practitioner_id = self.store.get_shift_assignments(on).get(shift)
        if practitioner_id is None:
            raise NoPractitionerScheduled(
                f"no doctor assigned to the {shift.value.lower()} shift on {on.isoformat()}"
            )
        return practitioner_id


def _check_horizon(requested: date, today: date, config: ClinicConfig) -> None:
    verdict = validate_booking_date(requested, today, config)
    if verdict is DateVerdict.REJECT_TOO_SOON:
        raise RejectTooSoon(
            f"{requested.isoformat()} is not bookable: appointments start from the next day"
        )
    if verdict is DateVerdict.REJECT_TOO_FAR:
        raise RejectTooFar(
            f"{requested.isoformat()} is more than {config.max_horizon_days} days ahead"
        )
