"""SMS reminders: the automatic 30-minutes-before sweep, doctor-triggered
bulk morning sends, the gateway abstraction and the audit log.

At-most-once per (appointment, kind) is guaranteed by the log's unique
index: the log row is written in the same transaction that acknowledges the
send, and a gateway failure rolls the row back so a retry stays possible.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Optional

from .clock import Clock, SystemClock
from .domain import Appointment, AppointmentStatus, ClinicConfig, ReminderKind, ReminderLogEntry
from .errors import GatewayFailed, NotEditable, NotFound, UnknownPractitioner
from .store import Store

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SendResult:
    ok: bool
    reason: Optional[str] = None


class SmsGateway:
    """Delivery backend; implementations must be safe to call concurrently."""

    def send(self, mobile_number: str, message_body: str) -> SendResult:
        raise NotImplementedError


class FileSmsGateway(SmsGateway):
    """Bundled stub: appends one `ISO8601-timestamp|mobile|body` line per
    message to the configured sink file and always reports SENT."""

    def __init__(self, sink_path: str, clock: Clock | None = None):
        self.sink_path = str(sink_path)
        self._clock = clock or SystemClock()
        self._lock = threading.Lock()

    def send(self, mobile_number: str, message_body: str) -> SendResult:
        line = f"{self._clock.now().isoformat(timespec='seconds')}|{mobile_number}|{message_body}\n"
        with self._lock:
            with open(self.sink_path, "a", encoding="utf-8") as sink:
                sink.write(line)
        return SendResult(ok=True)


@dataclass(frozen=True)
class ReminderMessage:
    appointment_id: str
    body: str


@dataclass
class BulkOutcome:
    """Per-appointment results of a bulk send; partial gateway failures are
    reported rather than aborting the run."""

    sent: list[ReminderLogEntry] = field(default_factory=list)
    skipped_duplicates: list[str] = field(default_factory=list)
    failed: list[tuple[str, str]] = field(default_factory=list)  # (appointment_id, reason)


def render_message(appointment, patient, practitioner) -> ReminderMessage:
    """Deterministic reminder text carrying the patient name, appointment id,
    doctor and the date/time."""
    if patient is None or practitioner is None:
        raise NotFound(f"appointment {appointment.appointment_id} has a dangling reference")
    body = (
        f"Dear {patient.full_name}, reminder: appointment {appointment.appointment_id}"
        f" with Dr {practitioner.full_name} on {appointment.date.isoformat()}"
        f" at {appointment.start.strftime('%H:%M')}."
    )
    return ReminderMessage(appointment_id=appointment.appointment_id, body=body)


class ReminderService:
    def __init__(self, store: Store, config: ClinicConfig = ClinicConfig()):
        self.store = store
        self.config = config

    def due_auto(self, now: datetime) -> list[Appointment]:
        """Appointments whose reminder window covers ``now`` and that have no
        AUTO_T30 entry yet. Catch-up semantics: a reminder missed at exactly
        T-30 stays due any time before the appointment starts."""
        deadline = now + timedelta(minutes=self.config.reminder_lead_minutes)
        return self.store.find_unreminded(ReminderKind.AUTO_T30, now, deadline)

    def dispatch(
        self,
        appointment: Appointment,
        kind: ReminderKind,
        gateway: SmsGateway,
        now: datetime,
    ) -> Optional[ReminderLogEntry]:
        """Send one reminder at most once per kind.

        Returns the log entry, or None when this (appointment, kind) was
        already sent (the gateway is not touched). On gateway failure the
        log row is rolled back and GATEWAY_FAILED raised so a later retry
        can succeed exactly once.
        """
        current = self.store.get_appointment(appointment.appointment_id)
        if current is None:
            raise NotFound(f"appointment {appointment.appointment_id} not found")
        if current.status is not AppointmentStatus.BOOKED:
            raise NotEditable(
                f"appointment {current.appointment_id} is {current.status.value}, not reminding"
            )
        patient = self.store.get_patient(current.patient_id)
        practitioner = self.store.get_practitioner(current.practitioner_id)
        message = render_message(current, patient, practitioner)
        with self.store.write_txn() as cur:
            entry = self.store.insert_reminder_row(
                cur,
                current.appointment_id,
                kind,
                now,
                patient.mobile_number,
                message.body,
            )
            if entry is None:
                return None
            result = gateway.send(patient.mobile_number, message.body)
            if not result.ok:
                raise GatewayFailed(result.reason or "gateway rejected the message")
        return entry

    def bulk_today(self, practitioner_id: str, now: datetime, gateway: SmsGateway) -> BulkOutcome:
        """One BULK_MORNING send per remaining booked appointment of the
        doctor's day; idempotent per appointment and independent of the
        automatic T-30 reminders."""
        if self.store.get_practitioner(practitioner_id) is None:
            raise UnknownPractitioner(f"practitioner {practitioner_id} not found")
        outcome = BulkOutcome()
        appointments = self.store.list_appointments(
            practitioner_id=practitioner_id,
            on=now.date(),
            statuses=[AppointmentStatus.BOOKED],
            start_from=now,
        )
        for appointment in appointments:
            try:
                entry = self.dispatch(appointment, ReminderKind.BULK_MORNING, gateway, now)
            except GatewayFailed as exc:
                outcome.failed.append((appointment.appointment_id, exc.message))
                continue
            except (NotFound, NotEditable) as exc:
                outcome.failed.append((appointment.appointment_id, exc.message))
                continue
            if entry is None:
                outcome.skipped_duplicates.append(appointment.appointment_id)
            else:
                outcome.sent.append(entry)
        return outcome

    def reminder_tick(self, now: datetime, gateway: SmsGateway) -> int:
        """One scheduler sweep: dispatch every due automatic reminder.
        Per-appointment failures are logged and skipped, never aborting the
        sweep; overlapping ticks cannot double-send."""
        dispatched = 0
        for appointment in self.due_auto(now):
            try:
                entry = self.dispatch(appointment, ReminderKind.AUTO_T30, gateway, now)
            except (GatewayFailed, NotFound, NotEditable) as exc:
                logger.warning(
                    "reminder for %s not sent: %s", appointment.appointment_id, exc.message
                )
                continue
            if entry is not None:
                dispatched += 1
        return dispatched


class ReminderDispatcher:
    """Background loop running reminder_tick every ``tick_seconds``.

    One logical dispatcher runs per service instance; the log's uniqueness
    constraint keeps even accidental concurrent dispatchers safe.
    """

    def __init__(
        self,
        service: ReminderService,
        gateway: SmsGateway,
        clock: Clock,
        tick_seconds: int = 60,
    ):
        self.service = service
        self.gateway = gateway
        self.clock = clock
        self.tick_seconds = tick_seconds
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None

    def start(self) -> None:
        self._thread = threading.Thread(target=self._run, name="reminder-dispatcher", daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=self.tick_seconds + 5)

    def _run(self) -> None:
        while not self._stop.is_set():
            try:
                self.service.reminder_tick(self.clock.now(), self.gateway)
            except Exception:
                logger.exception("reminder tick failed")
            self._stop.wait(self.tick_seconds)
