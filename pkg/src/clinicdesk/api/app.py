"""HTTP+JSON surface for the patient and doctor clients.

Every response body is the envelope {"ok", "data", "error"}; error codes
are a closed set mapped onto HTTP statuses (docs/api.md). Handlers are
synchronous and stateless: FastAPI runs them on a threadpool and contended
writes are arbitrated by the store, so any number of concurrent clients is
safe.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime, time

from fastapi import Depends, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel
from starlette.exceptions import HTTPException as StarletteHTTPException

from ..auth import Session, SessionRole, SessionStore, login, reset_password
from ..clock import Clock
from ..config import ServiceConfig
from ..domain import Appointment, ClinicConfig, Shift
from ..errors import ClinicError, Forbidden, MalformedRequest, NotFound, Unauthenticated
from ..reminders import ReminderService, SmsGateway
from ..scheduling import Scheduler, summarize
from ..store import Store
from . import schemas

API_PREFIX = "/api/v1"

# Closed error-code -> HTTP status mapping (docs/api.md).
STATUS_BY_CODE = {
    "MALFORMED_REQUEST": 400,
    "AUTH_FAILED": 401,
    "UNAUTHENTICATED": 401,
    "FORBIDDEN": 403,
    "NOT_FOUND": 404,
    "UNKNOWN_PATIENT": 404,
    "UNKNOWN_PRACTITIONER": 404,
    "SLOT_TAKEN": 409,
    "NOT_EDITABLE": 409,
    "DUPLICATE_ID": 409,
    "REJECT_TOO_SOON": 422,
    "REJECT_TOO_FAR": 422,
    "MISALIGNED_START": 422,
    "MISALIGNED_WINDOW": 422,
    "NO_PRACTITIONER_SCHEDULED": 422,
    "WEAK_PASSWORD": 422,
    "INVALID_MOBILE": 422,
    "INVALID_SCENARIO": 422,
    "MISMATCHED_SCENARIOS": 422,
    "GATEWAY_FAILED": 502,
    "STORE_UNAVAILABLE": 503,
    "MIGRATION_CONFLICT": 500,
    "CONFIG_ERROR": 500,
    "INTERNAL": 500,
}


def ok_envelope(payload: BaseModel) -> dict:
    return {"ok": True, "data": payload.model_dump(), "error": None}


def error_envelope(code: str, message: str) -> dict:
    return {"ok": False, "data": None, "error": {"code": code, "message": message}}


def error_response(code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=STATUS_BY_CODE.get(code, 500), content=error_envelope(code, message)
    )


@dataclass
class AppContext:
    store: Store
    scheduler: Scheduler
    reminders: ReminderService
    sessions: SessionStore
    clock: Clock
    gateway: SmsGateway
    session_ttl_hours: int


def _parse_date(value: str) -> date:
    try:
        return date.fromisoformat(value)
    except ValueError as exc:
        raise MalformedRequest(f"expected YYYY-MM-DD date, got {value!r}") from exc


def _parse_time(value: str) -> time:
    try:
        hh, mm = value.split(":")
        return time(int(hh), int(mm))
    except (ValueError, TypeError) as exc:
        raise MalformedRequest(f"expected HH:MM time, got {value!r}") from exc


def _ctx(request: Request) -> AppContext:
    return request.app.state.ctx


def _session(request: Request) -> Session:
    header = request.headers.get("Authorization", "")
    if not header.startswith("Bearer "):
        raise Unauthenticated("missing bearer token")
    token = header[len("Bearer "):].strip()
    ctx = _ctx(request)
    session = ctx.sessions.get(token, ctx.clock.now())
    if session is None:
        raise Unauthenticated("invalid or expired token")
    return session


def _require_patient_access(session: Session, patient_id: str) -> None:
    """Doctors read any patient; a patient only themself."""
    if session.role is SessionRole.DOCTOR:
        return
    if session.principal_id != patient_id:
        raise Forbidden("patients may only access their own records")


def _load_appointment(ctx: AppContext, appointment_id: str) -> Appointment:
    appointment = ctx.store.get_appointment(appointment_id)
    if appointment is None:
        raise NotFound(f"appointment {appointment_id} not found")
    return appointment


def create_app(
    store: Store,
    service_config: ServiceConfig,
    clock: Clock,
    gateway: SmsGateway,
    clinic_config: ClinicConfig | None = None,
) -> FastAPI:
    clinic_config = clinic_config or ClinicConfig()
    ctx = AppContext(
        store=store,
        scheduler=Scheduler(store, clinic_config),
        reminders=ReminderService(store, clinic_config),
        sessions=SessionStore(),
        clock=clock,
        gateway=gateway,
        session_ttl_hours=service_config.session_ttl_hours,
    )
    app = FastAPI(title="clinicdesk", docs_url=None, redoc_url=None, openapi_url=None)
    app.state.ctx = ctx

    @app.exception_handler(ClinicError)
    def clinic_error_handler(request: Request, exc: ClinicError):
        return error_response(exc.code, exc.message)

    @app.exception_handler(RequestValidationError)
    def validation_handler(request: Request, exc: RequestValidationError):
        return error_response("MALFORMED_REQUEST", "request body or parameters are malformed")

    @app.exception_handler(StarletteHTTPException)
    def http_exception_handler(request: Request, exc: StarletteHTTPException):
        code = "NOT_FOUND" if exc.status_code == 404 else "MALFORMED_REQUEST"
        return JSONResponse(
            status_code=exc.status_code, content=error_envelope(code, str(exc.detail))
        )

    @app.exception_handler(Exception)
    def unhandled_handler(request: Request, exc: Exception):
        return error_response("INTERNAL", "internal error")

    # -- public ------------------------------------------------------------

    @app.get(API_PREFIX + "/health")
    def health():
        return ok_envelope(schemas.HealthOut(status="up"))

    @app.post(API_PREFIX + "/login")
    def do_login(body: schemas.LoginRequest, request: Request):
        ctx = _ctx(request)
        session, display_name = login(
            ctx.store,
            ctx.sessions,
            SessionRole(body.role),
            body.id,
            body.password,
            ctx.clock.now(),
            ctx.session_ttl_hours,
        )
        return ok_envelope(
            schemas.LoginOut(
                token=session.token,
                expires_at=session.expires_at.isoformat(timespec="seconds"),
                display_name=display_name,
            )
        )

    @app.post(API_PREFIX + "/password-reset")
    def do_password_reset(body: schemas.PasswordResetRequest, request: Request):
        ctx = _ctx(request)
        reset_password(
            ctx.store,
            ctx.sessions,
            SessionRole(body.role),
            body.id,
            body.old_password,
            body.new_password,
        )
        return ok_envelope(schemas.ResetOut(reset=True))

    # -- patients ------------------------------------------------------------

    @app.get(API_PREFIX + "/patients/{patient_id}")
    def get_patient(patient_id: str, request: Request, session: Session = Depends(_session)):
        ctx = _ctx(request)
        summary = ctx.scheduler.find_patient(
            patient_id, session.role.value, session.principal_id
        )
        return ok_envelope(schemas.patient_out(summary))

    @app.get(API_PREFIX + "/patients/{patient_id}/appointments")
    def get_patient_appointments(
        patient_id: str,
        request: Request,
        include_past: bool = False,
        session: Session = Depends(_session),
    ):
        ctx = _ctx(request)
        _require_patient_access(session, patient_id)
        appointments = ctx.scheduler.patient_appointments(
            patient_id, include_past=include_past, now=ctx.clock.now()
        )
        return ok_envelope(
            schemas.AppointmentListOut(
                appointments=[schemas.appointment_out(a) for a in appointments]
            )
        )

    @app.get(API_PREFIX + "/patients/{patient_id}/appointments/next")
    def get_next_appointment(
        patient_id: str, request: Request, session: Session = Depends(_session)
    ):
        ctx = _ctx(request)
        _require_patient_access(session, patient_id)
        nxt = ctx.scheduler.next_appointment(patient_id, ctx.clock.now())
        return ok_envelope(
            schemas.NextAppointmentOut(
                appointment=schemas.appointment_out(nxt) if nxt else None
            )
        )

    # -- slots ------------------------------------------------------------------

    @app.get(API_PREFIX + "/slots")
    def get_slots(date: str, request: Request, session: Session = Depends(_session)):
        ctx = _ctx(request)
        on = _parse_date(date)
        slots = ctx.scheduler.available_slots(on, ctx.clock.today())
        on_duty = ctx.scheduler.on_duty(on)
        names = {
            p.practitioner_id: p.full_name for p in on_duty.values() if p is not None
        }
        return ok_envelope(
            schemas.SlotsOut(
                date=on.isoformat(),
                on_duty=schemas.OnDutyOut(
                    morning=(
                        schemas.doctor_out(on_duty[Shift.MORNING])
                        if on_duty[Shift.MORNING]
                        else None
                    ),
                    afternoon=(
                        schemas.doctor_out(on_duty[Shift.AFTERNOON])
                        if on_duty[Shift.AFTERNOON]
                        else None
                    ),
                ),
                slots=[
                    schemas.slot_out(s, names.get(s.practitioner_id, "")) for s in slots
                ],
            )
        )

    # -- appointment lifecycle -----------------------------------------------------

    @app.post(API_PREFIX + "/appointments")
    def book_appointment(
        body: schemas.BookRequest, request: Request, session: Session = Depends(_session)
    ):
        ctx = _ctx(request)
        if session.role is not SessionRole.PATIENT:
            raise Forbidden("only patients book appointments here")
        if body.patient_id != session.principal_id:
            raise Forbidden("patients may only book for themselves")
        appointment = ctx.scheduler.book(
            body.patient_id, _parse_date(body.date), _parse_time(body.start), ctx.clock.now()
        )
        return ok_envelope(schemas.appointment_out(appointment))

    @app.patch(API_PREFIX + "/appointments/{appointment_id}")
    def edit_appointment(
        appointment_id: str,
        body: schemas.EditRequest,
        request: Request,
        session: Session = Depends(_session),
    ):
        ctx = _ctx(request)
        current = _load_appointment(ctx, appointment_id)
        if session.role is not SessionRole.PATIENT or current.patient_id != session.principal_id:
            raise Forbidden("only the booking patient may edit an appointment")
        appointment = ctx.scheduler.edit(
            appointment_id, _parse_date(body.date), _parse_time(body.start), ctx.clock.now()
        )
        return ok_envelope(schemas.appointment_out(appointment))

    @app.post(API_PREFIX + "/appointments/{appointment_id}/cancel")
    def cancel_appointment(
        appointment_id: str, request: Request, session: Session = Depends(_session)
    ):
        ctx = _ctx(request)
        current = _load_appointment(ctx, appointment_id)
        owns = (
            session.role is SessionRole.PATIENT
            and current.patient_id == session.principal_id
        )
        treats = (
            session.role is SessionRole.DOCTOR
            and current.practitioner_id == session.principal_id
        )
        if not (owns or treats):
            raise Forbidden("only the booking patient or the treating doctor may cancel")
        appointment = ctx.scheduler.cancel(appointment_id, ctx.clock.now())
        return ok_envelope(schemas.appointment_out(appointment))

    @app.post(API_PREFIX + "/appointments/{appointment_id}/complete")
    def complete_appointment(
        appointment_id: str, request: Request, session: Session = Depends(_session)
    ):
        ctx = _ctx(request)
        if session.role is not SessionRole.DOCTOR:
            raise Forbidden("only doctors complete appointments")
        current = _load_appointment(ctx, appointment_id)
        if current.practitioner_id != session.principal_id:
            raise Forbidden("doctors may only complete their own appointments")
        appointment = ctx.scheduler.complete(appointment_id, ctx.clock.now())
        return ok_envelope(schemas.appointment_out(appointment))

    # -- doctor console ---------------------------------------------------------------

    @app.get(API_PREFIX + "/doctors/{doctor_id}/queue")
    def get_queue(
        doctor_id: str,
        request: Request,
        scope: str = "today",
        session: Session = Depends(_session),
    ):
        ctx = _ctx(request)
        if session.role is not SessionRole.DOCTOR or session.principal_id != doctor_id:
            raise Forbidden("doctors may only view their own queue")
        if scope not in ("today", "future"):
            raise MalformedRequest("scope must be 'today' or 'future'")
        now = ctx.clock.now()
        queue = ctx.scheduler.doctor_queue(doctor_id, now, scope=scope)
        items = []
        for appointment in queue.appointments:
            patient = ctx.store.get_patient(appointment.patient_id)
            items.append(
                schemas.QueueItemOut(
                    appointment=schemas.appointment_out(appointment),
                    patient_name=patient.full_name if patient else "",
                )
            )
        first = None
        if queue.first is not None:
            first_patient = ctx.store.get_patient(queue.first.patient_id)
            if first_patient is not None:
                first = schemas.QueueFirstOut(
                    appointment=schemas.appointment_out(queue.first),
                    patient=schemas.patient_out(summarize(first_patient)),
                )
        return ok_envelope(
            schemas.QueueOut(
                scope=scope,
                date=now.date().isoformat() if scope == "today" else None,
                first=first,
                appointments=items,
            )
        )

    @app.post(API_PREFIX + "/doctors/{doctor_id}/reminders/bulk")
    def send_bulk_reminders(
        doctor_id: str, request: Request, session: Session = Depends(_session)
    ):
        ctx = _ctx(request)
        if session.role is not SessionRole.DOCTOR or session.principal_id != doctor_id:
            raise Forbidden("doctors may only send reminders for their own queue")
        outcome = ctx.reminders.bulk_today(doctor_id, ctx.clock.now(), ctx.gateway)
        return ok_envelope(
            schemas.BulkOut(
                sent=len(outcome.sent),
                skipped_duplicates=len(outcome.skipped_duplicates),
                failed=[
                    schemas.BulkFailureOut(appointment_id=aid, reason=reason)
                    for aid, reason in outcome.failed
                ],
            )
        )

    # -- pharmacist -----------------------------------------------------------------------

    @app.get(API_PREFIX + "/pharmacist/contact")
    def pharmacist_contact(request: Request, session: Session = Depends(_session)):
        ctx = _ctx(request)
        pharmacist = ctx.store.get_pharmacist()
        if pharmacist is None:
            raise NotFound("no pharmacist contact registered")
        return ok_envelope(
            schemas.ContactOut(
                practitioner_id=pharmacist.practitioner_id,
                full_name=pharmacist.full_name,
                mobile_number=pharmacist.mobile_number,
            )
        )

    return app
