"""Contact-confirming app: registration, notification and the outing window.

An infectious agent ``i`` triggers a notification on agent ``j`` at a contact
step only if ``i`` uses the app, ``i`` has registered as infected, and ``j``
uses the app. A notification on day ``d`` reduces ``j``'s outings for days
``d+1 .. d+notification_days`` (that day's plan is already fixed).
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

from .contact import ContactEvent
from .domain import AppParams
from .rngstreams import RngStream

NOTIFICATION_DAYS = 14


@dataclass(frozen=True)
class NotificationState:
    agent_id: int
    notified_until_day: int


@dataclass(frozen=True)
class ContactLogEntry:
    day: int
    infector_id: int
    other_id: int
    step: int = 0
    notified: bool = False


class ContactLog:
    """Contacts between app users, kept for ``retention_days`` days."""

    def __init__(self, retention_days: int = NOTIFICATION_DAYS):
        self.retention_days = retention_days
        self._entries: deque[ContactLogEntry] = deque()

    def append(self, entry: ContactLogEntry) -> None:
        self.prune(entry.day)
        self._entries.append(entry)

    def prune(self, today: int) -> None:
        """Drop entries recorded ``retention_days`` or more days before ``today``."""
        oldest = today - self.retention_days
        while self._entries and self._entries[0].day <= oldest:
            self._entries.popleft()

    def __iter__(self):
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)


def maybe_register(agent, registration_rate: float, app_stream: RngStream) -> bool:
    """Registration draw at infection onset; non-users draw nothing."""
    if not agent.app_user:
        agent.registered = False
        return False
    agent.registered = app_stream.next_bernoulli(registration_rate)
    return agent.registered


def process_contacts(events: Iterable[ContactEvent], agents: Sequence, app: AppParams,
                     day: int, notification_days: int = NOTIFICATION_DAYS,
                     log: ContactLog | None = None) -> list[NotificationState]:
    """Apply one step's contact events; return the notifications issued.

    ``agents`` is indexed by agent id. ``app`` is accepted for symmetry with
    the engine: whether a pair qualifies depends only on the agents' own
    ``app_user`` / ``registered`` flags, which the app parameters set up.
    """
    issued = []
    for ev in events:
        i, j = agents[ev.infector_id], agents[ev.other_id]
        both_users = i.app_user and j.app_user
        notify = both_users and i.registered
        if notify:
            j.notified_until_day = day + notification_days
            issued.append(NotificationState(j.id, j.notified_until_day))
        if log is not None and both_users:
            log.append(ContactLogEntry(day, i.id, j.id, ev.step, notify))
    return issued


def is_notification_active(agent, day: int) -> bool:
    return agent.notified_until_day is not None and day <= agent.notified_until_day


EVENT_LOG_COLUMNS = ("day", "step", "infector_id", "other_id", "notified")


def write_event_log(entries: Iterable, path) -> None:
    """CSV with columns day, step, infector_id, other_id, notified (0/1)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_LOG_COLUMNS)
        for e in entries:
            w.writerow((e.day, e.step, e.infector_id, e.other_id, int(e.notified)))


def read_event_log(path) -> list[ContactLogEntry]:
    with open(path, newline="") as fh:
        return [ContactLogEntry(int(r["day"]), int(r["infector_id"]), int(r["other_id"]),
                                int(r["step"]), r["notified"] == "1")
                for r in csv.DictReader(fh)]
