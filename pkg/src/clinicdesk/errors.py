"""Typed failures shared by every module.

Each error carries a stable ``code`` string; the API layer maps codes to
HTTP statuses and the CLI maps them to exit messages. The full closed set
is published in docs/api.md.
"""

from __future__ import annotations


class ClinicError(Exception):
    """Base for all typed failures. ``code`` is wire-stable."""

    code = "INTERNAL"

    def __init__(self, message: str = ""):
        super().__init__(message or self.__class__.code)
        self.message = message or self.__class__.code


class RejectTooSoon(ClinicError):
    code = "REJECT_TOO_SOON"


class RejectTooFar(ClinicError):
    code = "REJECT_TOO_FAR"


class MisalignedWindow(ClinicError):
    code = "MISALIGNED_WINDOW"


class MisalignedStart(ClinicError):
    code = "MISALIGNED_START"


class NoPractitionerScheduled(ClinicError):
    code = "NO_PRACTITIONER_SCHEDULED"


class SlotTaken(ClinicError):
    code = "SLOT_TAKEN"


class NotFound(ClinicError):
    code = "NOT_FOUND"


class UnknownPatient(ClinicError):
    code = "UNKNOWN_PATIENT"


class UnknownPractitioner(ClinicError):
    code = "UNKNOWN_PRACTITIONER"


class NotEditable(ClinicError):
    code = "NOT_EDITABLE"


class Forbidden(ClinicError):
    code = "FORBIDDEN"


class Unauthenticated(ClinicError):
    code = "UNAUTHENTICATED"


class AuthFailed(ClinicError):
    code = "AUTH_FAILED"


class WeakPassword(ClinicError):
    code = "WEAK_PASSWORD"


class MalformedRequest(ClinicError):
    code = "MALFORMED_REQUEST"


class DuplicateId(ClinicError):
    code = "DUPLICATE_ID"


class InvalidMobile(ClinicError):
    code = "INVALID_MOBILE"


class GatewayFailed(ClinicError):
    code = "GATEWAY_FAILED"


class StoreUnavailable(ClinicError):
    code = "STORE_UNAVAILABLE"


class MigrationConflict(ClinicError):
    code = "MIGRATION_CONFLICT"


class InvalidScenario(ClinicError):
    code = "INVALID_SCENARIO"


class MismatchedScenarios(ClinicError):
    code = "MISMATCHED_SCENARIOS"


class ConfigError(ClinicError):
    code = "CONFIG_ERROR"
