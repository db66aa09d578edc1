"""clinicdesk: outpatient appointment management.

Slot-based booking for a single-doctor-per-shift clinic, an HTTP+JSON API
for patient and doctor clients, an idempotent SMS reminder pipeline, an
admin CLI, and a discrete-event simulator contrasting walk-in queues with
scheduled appointments.
"""

__version__ = "0.1.0"
