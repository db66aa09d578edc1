"""Admin command line: registration, schedule management, appointment
overrides on a patient's behalf, and service lifecycle (migrate/serve/
simulate). Shares the store with the running service, so every mutation is
immediately visible through the API."""

from __future__ import annotations

import csv
import dataclasses
import enum
import functools
import json
import math
import sys
from datetime import date, datetime, time

import click

from . import sim as sim_mod
from .auth import check_password_strength, hash_password
from .clock import SystemClock
from .config import load_config
from .domain import (
    AppointmentStatus,
    ClinicConfig,
    PatientRecord,
    Practitioner,
    Role,
    Shift,
    ShiftAssignment,
    valid_mobile,
)
from .errors import ClinicError, InvalidMobile
from .reminders import FileSmsGateway, ReminderDispatcher, ReminderService
from .scheduling import Scheduler
from .store import Store


def _fail(code: str, message: str) -> None:
    click.echo(f"{code}: {message}", err=True)
    sys.exit(1)


def handle_clinic_errors(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ClinicError as exc:
            _fail(exc.code, exc.message)

    return wrapper


def _open_store(config_path: str | None) -> tuple[Store, ClinicConfig]:
    service_config = load_config(config_path)
    store = Store(service_config.store_path)
    store.migrate()
    return store, ClinicConfig()


def _require_mobile(mobile: str) -> str:
    if not valid_mobile(mobile):
        raise InvalidMobile(f"{mobile!r} is not digits with an optional leading '+'")
    return mobile


def _prompt_credential() -> str:
    password = click.prompt("Password", hide_input=True, confirmation_prompt=True)
    check_password_strength(password)
    return hash_password(password)


def _parse_date(value: str) -> date:
    try:
        return date.fromisoformat(value)
    except ValueError:
        raise click.BadParameter(f"expected YYYY-MM-DD, got {value!r}")


def _parse_time(value: str) -> time:
    try:
        hh, mm = value.split(":")
        return time(int(hh), int(mm))
    except (ValueError, TypeError):
        raise click.BadParameter(f"expected HH:MM, got {value!r}")


def _patient_json(p: PatientRecord) -> dict:
    return {
        "patient_id": p.patient_id,
        "full_name": p.full_name,
        "mobile_number": p.mobile_number,
        "created_at": p.created_at.isoformat(timespec="seconds"),
    }


def _practitioner_json(p: Practitioner) -> dict:
    return {
        "practitioner_id": p.practitioner_id,
        "full_name": p.full_name,
        "role": p.role.value,
        "mobile_number": p.mobile_number,
    }


def _appointment_json(a) -> dict:
    return {
        "appointment_id": a.appointment_id,
        "patient_id": a.patient_id,
        "practitioner_id": a.practitioner_id,
        "date": a.date.isoformat(),
        "start": a.start.strftime("%H:%M"),
        "status": a.status.value,
    }


def _audit(action: str, appointment_id: str, patient_id: str, on_behalf: bool) -> None:
    click.echo(
        f"AUDIT actor=admin action={action} appointment={appointment_id}"
        f" patient={patient_id} on_behalf={'yes' if on_behalf else 'no'}",
        err=True,
    )


@click.group()
@click.option(
    "--config",
    "config_path",
    envvar="CLINICDESK_CONFIG",
    default=None,
    help="Path to the key=value config file.",
)
@click.pass_context
def main(ctx, config_path):
    """clinicdesk administration."""
    ctx.obj = config_path


# -- patients -----------------------------------------------------------------


@main.group()
def patient():
    """Register and maintain patient records."""


@patient.command("add")
@click.option("--id", "patient_id", required=True)
@click.option("--name", required=True)
@click.option("--mobile", required=True)
@click.option("--password-prompt", is_flag=True, help="Prompt for an initial login password.")
@click.pass_obj
@handle_clinic_errors
def patient_add(config_path, patient_id, name, mobile, password_prompt):
    store, _ = _open_store(config_path)
    credential = _prompt_credential() if password_prompt else None
    store.add_patient(
        PatientRecord(
            patient_id=patient_id,
            full_name=name,
            mobile_number=_require_mobile(mobile),
            credential=credential,
            created_at=SystemClock().now(),
        )
    )
    click.echo(patient_id)


@patient.command("update")
@click.option("--id", "patient_id", required=True)
@click.option("--name", default=None)
@click.option("--mobile", default=None)
@click.option("--password-prompt", is_flag=True)
@click.pass_obj
@handle_clinic_errors
def patient_update(config_path, patient_id, name, mobile, password_prompt):
    store, _ = _open_store(config_path)
    credential = _prompt_credential() if password_prompt else None
    store.update_patient(
        patient_id,
        full_name=name,
        mobile_number=_require_mobile(mobile) if mobile is not None else None,
        credential=credential,
    )
    click.echo(patient_id)


@patient.command("show")
@click.option("--id", "patient_id", required=True)
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
@handle_clinic_errors
def patient_show(config_path, patient_id, as_json):
    store, _ = _open_store(config_path)
    record = store.get_patient(patient_id)
    if record is None:
        _fail("NOT_FOUND", f"patient {patient_id} not found")
    if as_json:
        click.echo(json.dumps(_patient_json(record)))
    else:
        click.echo(f"{record.patient_id}  {record.full_name}  {record.mobile_number}")


# -- doctors -----------------------------------------------------------------


@main.group()
def doctor():
    """Register and maintain doctors."""


@doctor.command("add")
@click.option("--id", "practitioner_id", required=True)
@click.option("--name", required=True)
@click.option("--mobile", required=True)
@click.option("--password-prompt", is_flag=True)
@click.pass_obj
@handle_clinic_errors
def doctor_add(config_path, practitioner_id, name, mobile, password_prompt):
    store, _ = _open_store(config_path)
    credential = _prompt_credential() if password_prompt else None
    store.add_practitioner(
        Practitioner(
            practitioner_id=practitioner_id,
            full_name=name,
            role=Role.DOCTOR,
            mobile_number=_require_mobile(mobile),
            credential=credential,
        )
    )
    click.echo(practitioner_id)


@doctor.command("update")
@click.option("--id", "practitioner_id", required=True)
@click.option("--name", default=None)
@click.option("--mobile", default=None)
@click.option("--password-prompt", is_flag=True)
@click.pass_obj
@handle_clinic_errors
def doctor_update(config_path, practitioner_id, name, mobile, password_prompt):
    store, _ = _open_store(config_path)
    credential = _prompt_credential() if password_prompt else None
    store.update_practitioner(
        practitioner_id,
        full_name=name,
        mobile_number=_require_mobile(mobile) if mobile is not None else None,
        credential=credential,
    )
    click.echo(practitioner_id)


@doctor.command("show")
@click.option("--id", "practitioner_id", required=True)
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
@handle_clinic_errors
def doctor_show(config_path, practitioner_id, as_json):
    store, _ = _open_store(config_path)
    record = store.get_practitioner(practitioner_id)
    if record is None:
        _fail("NOT_FOUND", f"practitioner {practitioner_id} not found")
    if as_json:
        click.echo(json.dumps(_practitioner_json(record)))
    else:
        click.echo(f"{record.practitioner_id}  {record.full_name}  {record.role.value}")


# -- pharmacist -----------------------------------------------------------------


@main.group()
def pharmacist():
    """Maintain the single pharmacist contact."""


@pharmacist.command("set")
@click.option("--id", "practitioner_id", required=True)
@click.option("--name", required=True)
@click.option("--mobile", required=True)
@click.pass_obj
@handle_clinic_errors
def pharmacist_set(config_path, practitioner_id, name, mobile):
    store, _ = _open_store(config_path)
    existing = store.get_pharmacist()
    if existing is not None and existing.practitioner_id != practitioner_id:
        _fail(
            "DUPLICATE_ID",
            f"pharmacist contact already registered as {existing.practitioner_id};"
            " update that id instead",
        )
    if existing is not None:
        store.update_practitioner(
            practitioner_id, full_name=name, mobile_number=_require_mobile(mobile)
        )
    else:
        store.add_practitioner(
            Practitioner(
                practitioner_id=practitioner_id,
                full_name=name,
                role=Role.PHARMACIST,
                mobile_number=_require_mobile(mobile),
                credential=None,
            )
        )
    click.echo(practitioner_id)


@pharmacist.command("show")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
@handle_clinic_errors
def pharmacist_show(config_path, as_json):
    store, _ = _open_store(config_path)
    record = store.get_pharmacist()
    if record is None:
        _fail("NOT_FOUND", "no pharmacist contact registered")
    if as_json:
        click.echo(json.dumps(_practitioner_json(record)))
    else:
        click.echo(f"{record.practitioner_id}  {record.full_name}  {record.mobile_number}")


# -- schedule ---------------------------------------------------------------------


@main.group()
def schedule():
    """Assign doctors to shifts (one doctor per shift)."""


@schedule.command("set")
@click.option("--date", "on", required=True)
@click.option("--shift", required=True, type=click.Choice(["MORNING", "AFTERNOON"]))
@click.option("--doctor", "practitioner_id", required=True)
@click.pass_obj
@handle_clinic_errors
def schedule_set(config_path, on, shift, practitioner_id):
    store, clinic = _open_store(config_path)
    target = _parse_date(on)
    doctor_record = store.get_practitioner(practitioner_id)
    if doctor_record is None or doctor_record.role is not Role.DOCTOR:
        _fail("NOT_FOUND", f"doctor {practitioner_id} not found")
    replaced = store.set_shift(
        ShiftAssignment(date=target, shift=Shift(shift), practitioner_id=practitioner_id)
    )
    click.echo(f"{target.isoformat()} {shift} -> {practitioner_id}")
    if replaced and replaced != practitioner_id:
        window = clinic.window_for(Shift(shift))
        affected = [
            a.appointment_id
            for a in store.list_appointments(
                practitioner_id=replaced, on=target, statuses=[AppointmentStatus.BOOKED]
            )
            if window[0] <= a.start < window[1]
        ]
        if affected:
            click.echo(
                f"REPLACED_WITH_BOOKINGS: {len(affected)} booking(s) still reference"
                f" {replaced}: {', '.join(affected)}",
                err=True,
            )


@schedule.command("show")
@click.option("--date", "on", required=True)
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
@handle_clinic_errors
def schedule_show(config_path, on, as_json):
    store, _ = _open_store(config_path)
    target = _parse_date(on)
    assignments = store.get_shift_assignments(target)
    payload = {
        "date": target.isoformat(),
        "morning": assignments.get(Shift.MORNING),
        "afternoon": assignments.get(Shift.AFTERNOON),
    }
    if as_json:
        click.echo(json.dumps(payload))
    else:
        click.echo(
            f"{payload['date']}  morning={payload['morning'] or '-'}"
            f"  afternoon={payload['afternoon'] or '-'}"
        )


# -- appointments (admin acting on a patient's behalf) ---------------------------------


@main.group()
def appointment():
    """Book, move or cancel appointments for a patient."""


@appointment.command("book")
@click.option("--patient", "patient_id", required=True)
@click.option("--date", "on", required=True)
@click.option("--start", required=True)
@click.option("--on-behalf", is_flag=True, help="Mark the action as requested by the patient.")
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
@handle_clinic_errors
def appointment_book(config_path, patient_id, on, start, on_behalf, as_json):
    store, clinic = _open_store(config_path)
    scheduler = Scheduler(store, clinic)
    booked = scheduler.book(patient_id, _parse_date(on), _parse_time(start), SystemClock().now())
    _audit("book", booked.appointment_id, patient_id, on_behalf)
    click.echo(json.dumps(_appointment_json(booked)) if as_json else booked.appointment_id)


@appointment.command("edit")
@click.option("--id", "appointment_id", required=True)
@click.option("--date", "on", required=True)
@click.option("--start", required=True)
@click.option("--on-behalf", is_flag=True)
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
@handle_clinic_errors
def appointment_edit(config_path, appointment_id, on, start, on_behalf, as_json):
    store, clinic = _open_store(config_path)
    scheduler = Scheduler(store, clinic)
    moved = scheduler.edit(appointment_id, _parse_date(on), _parse_time(start), SystemClock().now())
    _audit("edit", moved.appointment_id, moved.patient_id, on_behalf)
    click.echo(json.dumps(_appointment_json(moved)) if as_json else moved.appointment_id)


@appointment.command("cancel")
@click.option("--id", "appointment_id", required=True)
@click.option("--on-behalf", is_flag=True)
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
@handle_clinic_errors
def appointment_cancel(config_path, appointment_id, on_behalf, as_json):
    store, clinic = _open_store(config_path)
    scheduler = Scheduler(store, clinic)
    cancelled = scheduler.cancel(appointment_id, SystemClock().now())
    _audit("cancel", cancelled.appointment_id, cancelled.patient_id, on_behalf)
    click.echo(json.dumps(_appointment_json(cancelled)) if as_json else cancelled.status.value)


@appointment.command("list")
@click.option("--patient", "patient_id", default=None)
@click.option("--doctor", "practitioner_id", default=None)
@click.option("--date", "on", default=None)
@click.option("--json", "as_json", is_flag=True)
@click.pass_obj
@handle_clinic_errors
def appointment_list(config_path, patient_id, practitioner_id, on, as_json):
    store, _ = _open_store(config_path)
    rows = store.list_appointments(
        patient_id=patient_id,
        practitioner_id=practitioner_id,
        on=_parse_date(on) if on else None,
    )
    if as_json:
        click.echo(json.dumps([_appointment_json(a) for a in rows]))
    else:
        for a in rows:
            click.echo(
                f"{a.appointment_id}  {a.date.isoformat()} {a.start.strftime('%H:%M')}"
                f"  {a.patient_id} -> {a.practitioner_id}  {a.status.value}"
            )


# -- lifecycle ----------------------------------------------------------------------


@main.group()
def db():
    """Store maintenance."""


@db.command("migrate")
@click.pass_obj
@handle_clinic_errors
def db_migrate(config_path):
    service_config = load_config(config_path)
    store = Store(service_config.store_path)
    version = store.migrate()
    click.echo(f"schema version {version}")


@main.command("serve")
@click.pass_obj
@handle_clinic_errors
def serve(config_path):
    """Run the API plus the reminder dispatcher until signalled."""
    import uvicorn

    from .api import create_app

    service_config = load_config(config_path)
    store = Store(service_config.store_path)
    store.migrate()
    clock = SystemClock()
    gateway = FileSmsGateway(service_config.sms_sink_path, clock)
    app = create_app(store, service_config, clock, gateway)
    dispatcher = ReminderDispatcher(
        ReminderService(store), gateway, clock, service_config.tick_seconds
    )
    dispatcher.start()
    try:
        uvicorn.run(app, host=service_config.listen_host, port=service_config.listen_port)
    finally:
        dispatcher.stop()


# -- simulator ---------------------------------------------------------------------------


def _jsonable(value):
    if dataclasses.is_dataclass(value):
        return {k: _jsonable(v) for k, v in dataclasses.asdict(value).items()}
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, float) and math.isinf(value):
        return None
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


@main.command("simulate")
@click.option(
    "--mode",
    required=True,
    type=click.Choice(["walk-in", "appointments", "compare"]),
    help="Single-scenario run, or a paired walk-in vs appointments comparison.",
)
@click.option("--patients", type=int, default=32, show_default=True)
@click.option("--seed", type=int, default=1, show_default=True)
@click.option("--reps", type=int, default=1, show_default=True, help="Replications (compare).")
@click.option("--out", "out_path", type=click.Path(), default=None, help="Write a JSON report.")
@click.option("--csv", "csv_path", type=click.Path(), default=None, help="Per-patient waits CSV.")
@click.option("--peak-hour", type=float, default=8.0, show_default=True)
@click.option("--peak-share", type=float, default=0.7, show_default=True)
@click.option("--jitter-mean", type=float, default=0.0, show_default=True)
@click.option("--jitter-sd", type=float, default=5.0, show_default=True)
@click.option("--no-show-rate", type=float, default=0.05, show_default=True)
@handle_clinic_errors
def simulate_cmd(
    mode,
    patients,
    seed,
    reps,
    out_path,
    csv_path,
    peak_hour,
    peak_share,
    jitter_mean,
    jitter_sd,
    no_show_rate,
):
    """Quantify waiting times for a simulated clinic day."""
    arrivals = sim_mod.WalkInArrivals(peak_hour=peak_hour, peak_share=peak_share)
    jitter = sim_mod.PunctualityJitter(mean_minutes=jitter_mean, sd_minutes=jitter_sd)

    def scenario(sim_mode: sim_mod.SimMode) -> sim_mod.SimScenario:
        return sim_mod.SimScenario(
            mode=sim_mode,
            n_patients=patients,
            seed=seed,
            walk_in=arrivals,
            jitter=jitter,
            no_show_rate=no_show_rate,
        )

    if mode == "compare":
        report = sim_mod.compare(
            scenario(sim_mod.SimMode.WALK_IN), scenario(sim_mod.SimMode.APPOINTMENTS), reps
        )
        ratio = "inf" if math.isinf(report.wait_ratio) else f"{report.wait_ratio:.2f}"
        click.echo(
            f"walk-in mean wait {report.mean_wait_a:.1f} min,"
            f" appointments {report.mean_wait_b:.1f} min, ratio {ratio}x"
            + (" (degenerate CI)" if report.degenerate_ci else "")
        )
        payload = _jsonable(report)
    else:
        sim_mode = sim_mod.SimMode.WALK_IN if mode == "walk-in" else sim_mod.SimMode.APPOINTMENTS
        report = sim_mod.simulate(scenario(sim_mode))
        click.echo(
            f"{report.mode.value}: served {report.served}/{report.n_patients},"
            f" mean wait {report.mean_wait:.1f} min, p90 {report.p90_wait:.1f} min,"
            f" idle {report.doctor_idle_minutes:.0f} min"
        )
        payload = _jsonable(report)
        if csv_path:
            with open(csv_path, "w", newline="", encoding="utf-8") as handle:
                writer = csv.writer(handle)
                writer.writerow(["patient_index", "wait_minutes"])
                for index, wait in enumerate(report.waits_minutes):
                    writer.writerow([index, f"{wait:.3f}"])
    if out_path:
        with open(out_path, "w", encoding="utf-8") as handle:
            json.dump(payload, handle, indent=2)
            handle.write("\n")


if __name__ == "__main__":
    main()
