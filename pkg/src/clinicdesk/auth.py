"""Credential hashing and bearer-token sessions.

Passwords are stored only as salted PBKDF2-HMAC-SHA256 hashes. Login never
distinguishes an unknown id from a bad password, and verification runs in
constant time (a dummy hash absorbs lookups for unknown principals).
"""

from __future__ import annotations

import enum
import hashlib
import hmac
import secrets
import threading
from dataclasses import dataclass
from datetime import datetime, timedelta
from typing import Optional

from .domain import Role
from .errors import AuthFailed, WeakPassword
from .store import Store

PBKDF2_ITERATIONS = 200_000
MIN_PASSWORD_LENGTH = 8
SESSION_TOKEN_BYTES = 32  # 256-bit tokens


class SessionRole(str, enum.Enum):
    PATIENT = "PATIENT"
    DOCTOR = "DOCTOR"


@dataclass(frozen=True)
class Session:
    token: str
    principal_id: str
    role: SessionRole
    issued_at: datetime
    expires_at: datetime


def hash_password(password: str, iterations: int = PBKDF2_ITERATIONS) -> str:
    salt = secrets.token_hex(16)
    digest = hashlib.pbkdf2_hmac("sha256", password.encode(), bytes.fromhex(salt), iterations)
    return f"pbkdf2_sha256${iterations}${salt}${digest.hex()}"


def verify_password(password: str, credential: Optional[str]) -> bool:
    """Constant-time check; a missing credential still burns a full hash."""
    if credential is None:
        credential = _DUMMY_CREDENTIAL
        password = password + "\x00"  # guarantee mismatch
    try:
        scheme, iterations, salt, expected = credential.split("$")
        if scheme != "pbkdf2_sha256":
            return False
        digest = hashlib.pbkdf2_hmac(
            "sha256", password.encode(), bytes.fromhex(salt), int(iterations)
        )
        return hmac.compare_digest(digest.hex(), expected)
    except (ValueError, TypeError):
        return False


_DUMMY_CREDENTIAL = hash_password("!" * 24)


def check_password_strength(password: str) -> None:
    if len(password) < MIN_PASSWORD_LENGTH:
        raise WeakPassword(f"password must be at least {MIN_PASSWORD_LENGTH} characters")


class SessionStore:
    """In-process token table; safe for concurrent handlers."""

    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(
        self, principal_id: str, role: SessionRole, now: datetime, ttl_hours: int
    ) -> Session:
        session = Session(
            token=secrets.token_urlsafe(SESSION_TOKEN_BYTES),
            principal_id=principal_id,
            role=role,
            issued_at=now,
            expires_at=now + timedelta(hours=ttl_hours),
        )
        with self._lock:
            self._sessions[session.token] = session
        return session

    def get(self, token: str, now: datetime) -> Optional[Session]:
        with self._lock:
            session = self._sessions.get(token)
            if session is None:
                return None
            if now >= session.expires_at:
                del self._sessions[token]
                return None
            return session

    def revoke_principal(self, role: SessionRole, principal_id: str) -> None:
        with self._lock:
            stale = [
                token
                for token, s in self._sessions.items()
                if s.role is role and s.principal_id == principal_id
            ]
            for token in stale:
                del self._sessions[token]


def _credential_for(store: Store, role: SessionRole, principal_id: str) -> tuple[Optional[str], Optional[str]]:
    """(credential, display_name) for a principal; (None, None) if absent or
    not allowed to log in (only patients and doctors hold sessions)."""
    if role is SessionRole.PATIENT:
        patient = store.get_patient(principal_id)
        if patient is not None:
            return patient.credential, patient.full_name
    else:
        practitioner = store.get_practitioner(principal_id)
        if practitioner is not None and practitioner.role is Role.DOCTOR:
            return practitioner.credential, practitioner.full_name
    return None, None


def login(
    store: Store,
    sessions: SessionStore,
    role: SessionRole,
    principal_id: str,
    password: str,
    now: datetime,
    ttl_hours: int,
) -> tuple[Session, str]:
    credential, display_name = _credential_for(store, role, principal_id)
    if not verify_password(password, credential):
        raise AuthFailed("invalid credentials")
    return sessions.create(principal_id, role, now, ttl_hours), display_name or principal_id


def reset_password(
    store: Store,
    sessions: SessionStore,
    role: SessionRole,
    principal_id: str,
    old_password: str,
    new_password: str,
) -> None:
    """Old-password reset flow; success invalidates every live session of
    the principal."""
    credential, _ = _credential_for(store, role, principal_id)
    if not verify_password(old_password, credential):
        raise AuthFailed("invalid credentials")
    check_password_strength(new_password)
    new_credential = hash_password(new_password)
    if role is SessionRole.PATIENT:
        store.update_patient(principal_id, credential=new_credential)
    else:
        store.update_practitioner(principal_id, credential=new_credential)
    sessions.revoke_principal(role, principal_id)
