"""Embedded relational store (sqlite) behind the five-table clinic schema.

Concurrency contract: every write runs in an IMMEDIATE transaction and the
partial unique index on BOOKED appointment slots is the single arbiter of
double booking — claim and uniqueness check are one atomic action. Readers
never block readers (WAL). Each thread gets its own connection.

Schema documented in docs/schema.md. Appointment rows are never physically
deleted; cancellations and completions only change status.
"""

from __future__ import annotations

import sqlite3
import threading
from contextlib import contextmanager
from datetime import date, datetime, time
from typing import Iterator, Optional

from .domain import (
    Appointment,
    AppointmentStatus,
    PatientRecord,
    Practitioner,
    ReminderKind,
    ReminderLogEntry,
    Role,
    Shift,
    ShiftAssignment,
)
from .errors import (
    DuplicateId,
    MigrationConflict,
    NotEditable,
    NotFound,
    SlotTaken,
    StoreUnavailable,
    UnknownPatient,
    UnknownPractitioner,
)

SCHEMA_VERSION = 1

_TABLES = {
    "schema_version",
    "counters",
    "patients",
    "practitioners",
    "shift_assignments",
    "appointments",
    "sms_reminder_log",
}

_SCHEMA_V1 = """
CREATE TABLE schema_version (
    version INTEGER NOT NULL
);

CREATE TABLE counters (
    name  TEXT PRIMARY KEY,
    value INTEGER NOT NULL
);

CREATE TABLE patients (
    patient_id    TEXT PRIMARY KEY,
    full_name     TEXT NOT NULL,
    mobile_number TEXT NOT NULL,
    credential    TEXT,
    created_at    TEXT NOT NULL
);

CREATE TABLE practitioners (
    practitioner_id TEXT PRIMARY KEY,
    full_name       TEXT NOT NULL,
    role            TEXT NOT NULL CHECK (role IN ('DOCTOR','PHARMACIST','ADMIN')),
    mobile_number   TEXT NOT NULL,
    credential      TEXT
);

-- at most one resolvable pharmacist contact
CREATE UNIQUE INDEX ux_single_pharmacist
    ON practitioners(role) WHERE role = 'PHARMACIST';

CREATE TABLE shift_assignments (
    date            TEXT NOT NULL,
    shift           TEXT NOT NULL CHECK (shift IN ('MORNING','AFTERNOON')),
    practitioner_id TEXT NOT NULL REFERENCES practitioners(practitioner_id),
    PRIMARY KEY (date, shift)
);

CREATE TABLE appointments (
    appointment_id  TEXT PRIMARY KEY,
    patient_id      TEXT NOT NULL REFERENCES patients(patient_id),
    practitioner_id TEXT NOT NULL REFERENCES practitioners(practitioner_id),
    date            TEXT NOT NULL,
    start           TEXT NOT NULL,
    status          TEXT NOT NULL CHECK (status IN ('BOOKED','COMPLETED','CANCELLED')),
    created_at      TEXT NOT NULL,
    updated_at      TEXT NOT NULL
);

-- the double-booking arbiter: one BOOKED row per practitioner/date/start
CREATE UNIQUE INDEX ux_booked_slot
    ON appointments(practitioner_id, date, start) WHERE status = 'BOOKED';

CREATE INDEX ix_appointments_patient ON appointments(patient_id, date, start);
CREATE INDEX ix_appointments_practitioner ON appointments(practitioner_id, date, start);

CREATE TABLE sms_reminder_log (
    entry_id         INTEGER PRIMARY KEY AUTOINCREMENT,
    appointment_id   TEXT NOT NULL REFERENCES appointments(appointment_id),
    kind             TEXT NOT NULL CHECK (kind IN ('AUTO_T30','BULK_MORNING')),
    sent_at          TEXT NOT NULL,
    recipient_mobile TEXT NOT NULL,
    message_body     TEXT NOT NULL,
    UNIQUE (appointment_id, kind)
);

INSERT INTO counters (name, value) VALUES ('appointment_seq', 0);
INSERT INTO schema_version (version) VALUES (1);
"""


def _iso_dt(dt: datetime) -> str:
    return dt.isoformat(timespec="seconds")


def _iso_date(d: date) -> str:
    return d.isoformat()


def _iso_time(t: time) -> str:
    return t.strftime("%H:%M")


def _parse_dt(s: str) -> datetime:
    return datetime.fromisoformat(s)


def _parse_date(s: str) -> date:
    return date.fromisoformat(s)


def _parse_time(s: str) -> time:
    hh, mm = s.split(":")
    return time(int(hh), int(mm))


def _is_unique_violation(exc: sqlite3.IntegrityError) -> bool:
    return "UNIQUE constraint failed" in str(exc)


class Store:
    """Thread-safe handle on the clinic database.

    ``path`` may be a filesystem path or ':memory:'; in-memory stores use a
    per-instance shared-cache database so every thread sees the same data.
    """

    def __init__(self, path: str):
        self.path = str(path)
        self._local = threading.local()
        self._conns: list[sqlite3.Connection] = []
        self._conns_lock = threading.Lock()
        # serializes same-process writers; far cheaper than letting sqlite's
        # busy handler arbitrate 50 spinning threads. Cross-process writers
        # are still handled by the IMMEDIATE lock + busy_timeout below.
        self._write_lock = threading.Lock()
        self._memory_uri: Optional[str] = None
        if self.path == ":memory:":
            self._memory_uri = f"file:clinicdesk-mem-{id(self)}?mode=memory&cache=shared"
            # anchor connection keeps the shared in-memory db alive
            self._anchor = self._open()
        else:
            self._anchor = None

    # -- connections --------------------------------------------------------

    def _open(self) -> sqlite3.Connection:
        try:
            if self._memory_uri:
                conn = sqlite3.connect(self._memory_uri, uri=True, isolation_level=None)
            else:
                conn = sqlite3.connect(self.path, isolation_level=None, timeout=30.0)
                conn.execute("PRAGMA journal_mode=WAL")
                conn.execute("PRAGMA synchronous=NORMAL")
        except sqlite3.Error as exc:
            raise StoreUnavailable(f"cannot open store at {self.path}: {exc}") from exc
        conn.execute("PRAGMA foreign_keys=ON")
        conn.execute("PRAGMA busy_timeout=30000")
        conn.row_factory = sqlite3.Row
        with self._conns_lock:
            self._conns.append(conn)
        return conn

    def _conn(self) -> sqlite3.Connection:
        conn = getattr(self._local, "conn", None)
        if conn is None:
            conn = self._open()
            self._local.conn = conn
        return conn

    def close(self) -> None:
        with self._conns_lock:
            for conn in self._conns:
                try:
                    conn.close()
                except sqlite3.Error:
                    pass
            self._conns.clear()
        self._local = threading.local()
        self._anchor = None

    @contextmanager
    def write_txn(self) -> Iterator[sqlite3.Cursor]:
        """IMMEDIATE transaction: commits on success, rolls back on error."""
        with self._write_lock:
            conn = self._conn()
            conn.execute("BEGIN IMMEDIATE")
            try:
                yield conn.cursor()
            except BaseException:
                conn.execute("ROLLBACK")
                raise
            else:
                conn.execute("COMMIT")

    # -- migration -----------------------------------------------------------

    def migrate(self) -> int:
        """Bring the schema to the latest version; idempotent.

        Refuses to touch a database that holds unrelated tables or a schema
        version newer than this build understands.
        """
        conn = self._conn()
        existing = {
            row["name"]
            for row in conn.execute(
                "SELECT name FROM sqlite_master WHERE type='table' AND name NOT LIKE 'sqlite_%'"
            )
        }
        if "schema_version" in existing:
            version = conn.execute("SELECT version FROM schema_version").fetchone()["version"]
            if version == SCHEMA_VERSION:
                return version
            raise MigrationConflict(
                f"store has schema version {version}, this build supports {SCHEMA_VERSION}"
            )
        if existing:
            raise MigrationConflict(
                f"store already contains unrelated tables: {', '.join(sorted(existing))}"
            )
        with self.write_txn() as cur:
            for statement in _SCHEMA_V1.split(";"):
                if statement.strip():
                    cur.execute(statement)
        return SCHEMA_VERSION

    # -- patients ------------------------------------------------------------

    def add_patient(self, patient: PatientRecord) -> None:
        try:
            with self.write_txn() as cur:
                cur.execute(
                    "INSERT INTO patients VALUES (?,?,?,?,?)",
                    (
                        patient.patient_id,
                        patient.full_name,
                        patient.mobile_number,
                        patient.credential,
                        _iso_dt(patient.created_at),
                    ),
                )
        except sqlite3.IntegrityError as exc:
            raise DuplicateId(f"patient id {patient.patient_id} already exists") from exc

    def update_patient(
        self,
        patient_id: str,
        full_name: Optional[str] = None,
        mobile_number: Optional[str] = None,
        credential: Optional[str] = None,
    ) -> PatientRecord:
        with self.write_txn() as cur:
            row = cur.execute(
                "SELECT * FROM patients WHERE patient_id=?", (patient_id,)
            ).fetchone()
            if row is None:
                raise NotFound(f"patient {patient_id} not found")
            cur.execute(
                "UPDATE patients SET full_name=?, mobile_number=?, credential=? WHERE patient_id=?",
                (
                    full_name if full_name is not None else row["full_name"],
                    mobile_number if mobile_number is not None else row["mobile_number"],
                    credential if credential is not None else row["credential"],
                    patient_id,
                ),
            )
        return self.get_patient(patient_id)  # type: ignore[return-value]

    def get_patient(self, patient_id: str) -> Optional[PatientRecord]:
        row = self._conn().execute(
            "SELECT * FROM patients WHERE patient_id=?", (patient_id,)
        ).fetchone()
        return _patient_from_row(row) if row else None

    # -- practitioners ---------------------------------------------------------

    def add_practitioner(self, practitioner: Practitioner) -> None:
        try:
            with self.write_txn() as cur:
                cur.execute(
                    "INSERT INTO practitioners VALUES (?,?,?,?,?)",
                    (
                        practitioner.practitioner_id,
                        practitioner.full_name,
                        practitioner.role.value,
                        practitioner.mobile_number,
                        practitioner.credential,
                    ),
                )
        except sqlite3.IntegrityError as exc:
            raise DuplicateId(
                f"practitioner id {practitioner.practitioner_id} conflicts with an existing record"
            ) from exc

    def update_practitioner(
        self,
        practitioner_id: str,
        full_name: Optional[str] = None,
        mobile_number: Optional[str] = None,
        credential: Optional[str] = None,
    ) -> Practitioner:
        with self.write_txn() as cur:
            row = cur.execute(
                "SELECT * FROM practitioners WHERE practitioner_id=?", (practitioner_id,)
            ).fetchone()
            if row is None:
                raise NotFound(f"practitioner {practitioner_id} not found")
            cur.execute(
                "UPDATE practitioners SET full_name=?, mobile_number=?, credential=?"
                " WHERE practitioner_id=?",
                (
                    full_name if full_name is not None else row["full_name"],
                    mobile_number if mobile_number is not None else row["mobile_number"],
                    credential if credential is not None else row["credential"],
                    practitioner_id,
                ),
            )
        return self.get_practitioner(practitioner_id)  # type: ignore[return-value]

    def get_practitioner(self, practitioner_id: str) -> Optional[Practitioner]:
        row = self._conn().execute(
            "SELECT * FROM practitioners WHERE practitioner_id=?", (practitioner_id,)
        ).fetchone()
        return _practitioner_from_row(row) if row else None

    def get_pharmacist(self) -> Optional[Practitioner]:
        row = self._conn().execute(
            "SELECT * FROM practitioners WHERE role='PHARMACIST'"
        ).fetchone()
        return _practitioner_from_row(row) if row else None

    # -- shift assignments ------------------------------------------------------

    def set_shift(self, assignment: ShiftAssignment) -> Optional[str]:
        """Upsert the (date, shift) assignment; returns the replaced doctor id."""
        with self.write_txn() as cur:
            prev = cur.execute(
                "SELECT practitioner_id FROM shift_assignments WHERE date=? AND shift=?",
                (_iso_date(assignment.date), assignment.shift.value),
            ).fetchone()
            cur.execute(
                "INSERT INTO shift_assignments (date, shift, practitioner_id) VALUES (?,?,?)"
                " ON CONFLICT(date, shift) DO UPDATE SET practitioner_id=excluded.practitioner_id",
                (_iso_date(assignment.date), assignment.shift.value, assignment.practitioner_id),
            )
        return prev["practitioner_id"] if prev else None

    def get_shift_assignments(self, on: date) -> dict[Shift, str]:
        rows = self._conn().execute(
            "SELECT shift, practitioner_id FROM shift_assignments WHERE date=?",
            (_iso_date(on),),
        ).fetchall()
        return {Shift(row["shift"]): row["practitioner_id"] for row in rows}

    # -- appointments -----------------------------------------------------------

    def claim_slot(
        self,
        patient_id: str,
        practitioner_id: str,
        on: date,
        start: time,
        now: datetime,
    ) -> Appointment:
        """Atomically claim one slot; exactly one concurrent caller wins.

        The insert and the uniqueness check are a single transaction; losers
        get SLOT_TAKEN. The appointment sequence counter is bumped in the
        same transaction, so ids stay monotonic.
        """
        try:
            with self.write_txn() as cur:
                if not cur.execute(
                    "SELECT 1 FROM patients WHERE patient_id=?", (patient_id,)
                ).fetchone():
                    raise UnknownPatient(f"patient {patient_id} not found")
                if not cur.execute(
                    "SELECT 1 FROM practitioners WHERE practitioner_id=?", (practitioner_id,)
                ).fetchone():
                    raise UnknownPractitioner(f"practitioner {practitioner_id} not found")
                cur.execute("UPDATE counters SET value = value + 1 WHERE name='appointment_seq'")
                seq = cur.execute(
                    "SELECT value FROM counters WHERE name='appointment_seq'"
                ).fetchone()["value"]
                appointment = Appointment(
                    appointment_id=f"APT-{seq:06d}",
                    patient_id=patient_id,
                    practitioner_id=practitioner_id,
                    date=on,
                    start=start,
                    status=AppointmentStatus.BOOKED,
                    created_at=now,
                    updated_at=now,
                )
                cur.execute(
                    "INSERT INTO appointments VALUES (?,?,?,?,?,?,?,?)",
                    _appointment_row(appointment),
                )
        except sqlite3.IntegrityError as exc:
            if _is_unique_violation(exc):
                raise SlotTaken(
                    f"slot {on.isoformat()} {start.strftime('%H:%M')} already booked"
                ) from exc
            raise
        return appointment

    def get_appointment(self, appointment_id: str) -> Optional[Appointment]:
        row = self._conn().execute(
            "SELECT * FROM appointments WHERE appointment_id=?", (appointment_id,)
        ).fetchone()
        return _appointment_from_row(row) if row else None

    def update_status(
        self, appointment_id: str, new_status: AppointmentStatus, now: datetime
    ) -> Appointment:
        """Apply a lifecycle transition; terminal rows stay untouched."""
        with self.write_txn() as cur:
            row = cur.execute(
                "SELECT * FROM appointments WHERE appointment_id=?", (appointment_id,)
            ).fetchone()
            if row is None:
                raise NotFound(f"appointment {appointment_id} not found")
            updated = _appointment_from_row(row).with_status(new_status, now)
            cur.execute(
                "UPDATE appointments SET status=?, updated_at=? WHERE appointment_id=?",
                (updated.status.value, _iso_dt(updated.updated_at), appointment_id),
            )
        return updated

    def move_appointment(
        self,
        appointment_id: str,
        practitioner_id: str,
        new_date: date,
        new_start: time,
        now: datetime,
    ) -> Appointment:
        """Atomic move: frees the old slot and claims the new one, or leaves
        the row byte-identical on failure."""
        try:
            with self.write_txn() as cur:
                row = cur.execute(
                    "SELECT * FROM appointments WHERE appointment_id=?", (appointment_id,)
                ).fetchone()
                if row is None:
                    raise NotFound(f"appointment {appointment_id} not found")
                current = _appointment_from_row(row)
                if current.status is not AppointmentStatus.BOOKED:
                    raise NotEditable(f"appointment {appointment_id} is {current.status.value}")
                cur.execute(
                    "UPDATE appointments SET practitioner_id=?, date=?, start=?, updated_at=?"
                    " WHERE appointment_id=?",
                    (
                        practitioner_id,
                        _iso_date(new_date),
                        _iso_time(new_start),
                        _iso_dt(now),
                        appointment_id,
                    ),
                )
        except sqlite3.IntegrityError as exc:
            if _is_unique_violation(exc):
                raise SlotTaken(
                    f"slot {new_date.isoformat()} {new_start.strftime('%H:%M')} already booked"
                ) from exc
            raise
        return self.get_appointment(appointment_id)  # type: ignore[return-value]

    def list_appointments(
        self,
        patient_id: Optional[str] = None,
        practitioner_id: Optional[str] = None,
        on: Optional[date] = None,
        after_date: Optional[date] = None,
        statuses: Optional[list[AppointmentStatus]] = None,
        start_from: Optional[datetime] = None,
    ) -> list[Appointment]:
        """Filtered read, always ordered ascending by (date, start)."""
        clauses, params = [], []
        if patient_id is not None:
            clauses.append("patient_id=?")
            params.append(patient_id)
        if practitioner_id is not None:
            clauses.append("practitioner_id=?")
            params.append(practitioner_id)
        if on is not None:
            clauses.append("date=?")
            params.append(_iso_date(on))
        if after_date is not None:
            clauses.append("date>?")
            params.append(_iso_date(after_date))
        if statuses:
            clauses.append(f"status IN ({','.join('?' * len(statuses))})")
            params.extend(s.value for s in statuses)
        if start_from is not None:
            clauses.append("(date || 'T' || start || ':00') >= ?")
            params.append(_iso_dt(start_from))
        where = f"WHERE {' AND '.join(clauses)}" if clauses else ""
        rows = self._conn().execute(
            f"SELECT * FROM appointments {where} ORDER BY date, start, appointment_id",
            params,
        ).fetchall()
        return [_appointment_from_row(row) for row in rows]

    # -- reminder log ------------------------------------------------------------

    def insert_reminder_row(
        self,
        cur: sqlite3.Cursor,
        appointment_id: str,
        kind: ReminderKind,
        sent_at: datetime,
        recipient_mobile: str,
        message_body: str,
    ) -> Optional[ReminderLogEntry]:
        """Within a caller-held transaction: insert one log row, or None when
        the (appointment, kind) pair is already logged."""
        try:
            cur.execute(
                "INSERT INTO sms_reminder_log"
                " (appointment_id, kind, sent_at, recipient_mobile, message_body)"
                " VALUES (?,?,?,?,?)",
                (appointment_id, kind.value, _iso_dt(sent_at), recipient_mobile, message_body),
            )
        except sqlite3.IntegrityError as exc:
            if _is_unique_violation(exc):
                return None
            raise
        return ReminderLogEntry(
            entry_id=cur.lastrowid,
            appointment_id=appointment_id,
            kind=kind,
            sent_at=sent_at,
            recipient_mobile=recipient_mobile,
            message_body=message_body,
        )

    def record_reminder(
        self,
        appointment_id: str,
        kind: ReminderKind,
        sent_at: datetime,
        recipient_mobile: str,
        message_body: str,
    ) -> Optional[ReminderLogEntry]:
        """Standalone log write; None when already logged for this kind."""
        with self.write_txn() as cur:
            return self.insert_reminder_row(
                cur, appointment_id, kind, sent_at, recipient_mobile, message_body
            )

    def list_reminders(
        self,
        appointment_id: Optional[str] = None,
        kind: Optional[ReminderKind] = None,
    ) -> list[ReminderLogEntry]:
        clauses, params = [], []
        if appointment_id is not None:
            clauses.append("appointment_id=?")
            params.append(appointment_id)
        if kind is not None:
            clauses.append("kind=?")
            params.append(kind.value)
        where = f"WHERE {' AND '.join(clauses)}" if clauses else ""
        rows = self._conn().execute(
            f"SELECT * FROM sms_reminder_log {where} ORDER BY entry_id", params
        ).fetchall()
        return [_reminder_from_row(row) for row in rows]

    def find_unreminded(
        self, kind: ReminderKind, window_start: datetime, window_end: datetime
    ) -> list[Appointment]:
        """BOOKED appointments starting in (window_start, window_end] with no
        log entry of ``kind``."""
        rows = self._conn().execute(
            "SELECT * FROM appointments"
            " WHERE status='BOOKED'"
            "   AND (date || 'T' || start || ':00') > ?"
            "   AND (date || 'T' || start || ':00') <= ?"
            "   AND appointment_id NOT IN"
            "       (SELECT appointment_id FROM sms_reminder_log WHERE kind=?)"
            " ORDER BY date, start, appointment_id",
            (_iso_dt(window_start), _iso_dt(window_end), kind.value),
        ).fetchall()
        return [_appointment_from_row(row) for row in rows]


# -- row mapping ------------------------------------------------------------


def _patient_from_row(row: sqlite3.Row) -> PatientRecord:
    return PatientRecord(
        patient_id=row["patient_id"],
        full_name=row["full_name"],
        mobile_number=row["mobile_number"],
        credential=row["credential"],
        created_at=_parse_dt(row["created_at"]),
    )


def _practitioner_from_row(row: sqlite3.Row) -> Practitioner:
    return Practitioner(
        practitioner_id=row["practitioner_id"],
        full_name=row["full_name"],
        role=Role(row["role"]),
        mobile_number=row["mobile_number"],
        credential=row["credential"],
    )


def _appointment_row(appointment: Appointment) -> tuple:
    return (
        appointment.appointment_id,
        appointment.patient_id,
        appointment.practitioner_id,
        _iso_date(appointment.date),
        _iso_time(appointment.start),
        appointment.status.value,
        _iso_dt(appointment.created_at),
        _iso_dt(appointment.updated_at),
    )


def _appointment_from_row(row: sqlite3.Row) -> Appointment:
    return Appointment(
        appointment_id=row["appointment_id"],
        patient_id=row["patient_id"],
        practitioner_id=row["practitioner_id"],
        date=_parse_date(row["date"]),
        start=_parse_time(row["start"]),
        status=AppointmentStatus(row["status"]),
        created_at=_parse_dt(row["created_at"]),
        updated_at=_parse_dt(row["updated_at"]),
    )


def _reminder_from_row(row: sqlite3.Row) -> ReminderLogEntry:
    return ReminderLogEntry(
        entry_id=row["entry_id"],
        appointment_id=row["appointment_id"],
        kind=ReminderKind(row["kind"]),
        sent_at=_parse_dt(row["sent_at"]),
        recipient_mobile=row["recipient_mobile"],
        message_body=row["message_body"],
    )
