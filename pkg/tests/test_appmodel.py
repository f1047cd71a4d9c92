from hypothesis import given, strategies as st

from cocoa_abm.appmodel import (ContactLog, ContactLogEntry, is_notification_active,
                                maybe_register, process_contacts, read_event_log,
                                write_event_log)
from cocoa_abm.contact import ContactEvent
from cocoa_abm.domain import Agent, AgentRole, AppParams, InfectionState
from cocoa_abm.rngstreams import Domain, derive_stream


def mk(i, app_user=True, registered=False, state=InfectionState.S):
    return Agent(id=i, role=AgentRole.Student, house_id=0, facility_id=0, home=(0, 0),
                 destination=(1, 1), app_user=app_user, registered=registered, state=state)


def test_register_examples():
    s = derive_stream(1, Domain.APP, 0)
    assert maybe_register(mk(0), 1.0, s) and s.counter == 1
    assert not maybe_register(mk(0), 0.0, s)
    s = derive_stream(1, Domain.APP, 0)
    a = mk(0, app_user=False)
    assert not maybe_register(a, 1.0, s) and s.counter == 0 and not a.registered


def test_notification_examples():
    agents = [mk(0, registered=True, state=InfectionState.I), mk(1), mk(2, app_user=False),
              mk(3, registered=False, state=InfectionState.I)]
    out = process_contacts([ContactEvent(0, 1, 10, 5)], agents, AppParams(1, 1, 1), 10)
    assert agents[1].notified_until_day == 24 and len(out) == 1
    process_contacts([ContactEvent(3, 1, 11, 5)], agents, AppParams(1, 1, 1), 11)
    assert agents[1].notified_until_day == 24
    process_contacts([ContactEvent(0, 2, 11, 5)], agents, AppParams(1, 1, 1), 11)
    assert agents[2].notified_until_day is None


def test_window_refreshes_and_is_inclusive():
    agents = [mk(0, registered=True, state=InfectionState.I), mk(1)]
    process_contacts([ContactEvent(0, 1)], agents, AppParams(), 10)
    assert is_notification_active(agents[1], 24)
    assert not is_notification_active(agents[1], 25)
    process_contacts([ContactEvent(0, 1)], agents, AppParams(), 12)
    assert is_notification_active(agents[1], 26)
    assert not is_notification_active(mk(5), 1)


def test_log_only_app_user_pairs_with_flag():
    agents = [mk(0, registered=True, state=InfectionState.I),
              mk(1, registered=False, state=InfectionState.I), mk(2), mk(3, app_user=False)]
    log = ContactLog()
    evs = [ContactEvent(0, 2, 4, 1), ContactEvent(1, 2, 4, 1), ContactEvent(0, 3, 4, 1)]
    process_contacts(evs, agents, AppParams(), 4, log=log)
    assert list(log) == [ContactLogEntry(4, 0, 2, 1, True), ContactLogEntry(4, 1, 2, 1, False)]


@given(st.lists(st.integers(1, 100), min_size=1, max_size=60).map(sorted), st.integers(1, 20))
def test_log_retention(days, keep):
    log = ContactLog(keep)
    for d in days:
        log.append(ContactLogEntry(d, 0, 1))
        assert all(e.day > d - keep for e in log)
    assert all(e.day > days[-1] - keep for e in log)


def test_event_log_round_trip(tmp_path):
    entries = [ContactLogEntry(1, 2, 3, 4, True), ContactLogEntry(2, 5, 6, 7, False)]
    path = tmp_path / "ev.csv"
    write_event_log(entries, path)
    assert path.read_text().splitlines()[0] == "day,step,infector_id,other_id,notified"
    assert read_event_log(path) == entries
