import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cocoa_abm.domain import InfectionState, ScenarioConfig
from cocoa_abm.engine import CSV_COLUMNS, C_ACTIVE, C_NOTIF, run_simulation
from conftest import small_config
from reference_engine import reference_run

S, E, I, R, D = InfectionState


@pytest.mark.parametrize("seed, overrides", [
    (1, dict()),
    (2, dict(hospital_prob=0.2, ward_capacity=3)),
    (3, dict(hospital_prob=0.5, ward_capacity=10, app_=(0.7, 0.5, 0.8))),
    (4, dict(app_=(1.0, 1.0, 1.0), notification_days=3)),
    (5, dict(app_=(0.4, 0.3, 0.6), contact_radius=40.0, travel_speed=37.0)),
])
def test_matches_reference_engine(seed, overrides):
    app = overrides.pop("app_", (0, 0, 0))
    config = small_config(**overrides).with_app(*app)
    table, events = reference_run(config, seed)
    result = run_simulation(config, seed, record_events=True)
    assert np.array_equal(result.table[:, :10], table)
    assert [(e.day, e.step, e.infector_id, e.other_id, e.notified)
            for e in result.events] == events


def test_no_transmission_no_death():
    c = dataclasses.replace(ScenarioConfig(), beta=0.0, gamma0=0.0, max_days=20)
    last = run_simulation(c, 1).days[-1]
    assert last.counts == {S: 989, E: 0, I: 0, R: 10, D: 0}


def test_certain_death_without_beds():
    c = small_config(gamma0=1.0, gamma1=0.0, ward_capacity=0, hospital_prob=0.0, max_days=20)
    result = run_simulation(c, 3, keep_trace=True)
    ever_i = result.trace.infectious_from >= 0
    finished = result.trace.infectious_until >= 0
    assert ever_i.sum() > 5
    assert np.all(result.trace.final_state[ever_i & finished] == D)
    assert result.days[-1].counts[R] == 0


configs = st.builds(
    lambda seed, beta, hp, beds, g0, p: (seed, small_config(
        beta=beta, hospital_prob=hp, ward_capacity=beds, gamma0=max(g0, 0.1), gamma1=0.1,
        max_days=10).with_app(*p)),
    st.integers(0, 2**31), st.floats(0, 0.05), st.floats(0, 1), st.integers(0, 10),
    st.floats(0, 1), st.tuples(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1)))


@settings(max_examples=25)
@given(configs)
def test_conservation_and_monotonicity(case):
    seed, config = case
    r = run_simulation(config, seed)
    t = r.table
    assert np.all(t[:, 1:6].sum(axis=1) == config.population)
    n_ip = t[:, 6]
    assert np.array_equal(n_ip, t[:, 2:6].sum(axis=1))
    assert np.all(np.diff(n_ip) >= 0)
    assert np.all(np.diff(t[:, 4]) >= 0) and np.all(np.diff(t[:, 5]) >= 0)
    assert np.all(np.diff(t[:, 1]) <= 0)
    assert np.all(t[:, 9] <= config.ward_capacity)
    assert n_ip[0] >= config.n_initial_infected
    assert np.array_equal(np.diff(n_ip), t[1:, 7])


def test_deterministic_serialization():
    c = small_config().with_app(0.5, 0.5, 0.5)
    assert run_simulation(c, 9).to_csv() == run_simulation(c, 9).to_csv()


@pytest.mark.parametrize("app", [(0, 0.6, 1.0), (0.6, 0, 1.0), (0.6, 0.6, 0)])
def test_baseline_equivalence_small(app):
    c = small_config(max_days=15)
    base = run_simulation(c, 2).table[:, :8]
    assert np.array_equal(run_simulation(c.with_app(*app), 2).table[:, :8], base)


def test_no_notifications_without_users_or_registration():
    c = small_config()
    for app in [(0, 1, 1), (1, 1, 0)]:
        t = run_simulation(c.with_app(*app), 4).table
        assert t[:, C_NOTIF].sum() == 0 and t[:, C_ACTIVE].sum() == 0


def test_zero_reduction_notifies_without_changing_behaviour():
    c = small_config(max_days=15)
    t = run_simulation(c.with_app(1.0, 0.0, 1.0), 4).table
    assert t[:, C_NOTIF].sum() > 0
    assert np.array_equal(t[:, :8], run_simulation(c, 4).table[:, :8])


def test_notifications_replay_from_event_log():
    c = small_config(max_days=12).with_app(0.7, 0.5, 0.6)
    r = run_simulation(c, 6, record_events=True, keep_trace=True)
    tr = r.trace
    per_day = {}
    for e in r.events:
        assert tr.app_user[e.infector_id] and tr.app_user[e.other_id]
        # the infector was infectious at the time of contact
        assert tr.infectious_from[e.infector_id] <= e.day
        until = tr.infectious_until[e.infector_id]
        assert until == -1 or e.day < until
        assert e.notified == bool(tr.registered_at_onset[e.infector_id])
        if e.notified:
            per_day.setdefault(e.day, set()).add(e.other_id)
    expected = [len(per_day.get(d, ())) for d in range(1, c.max_days + 1)]
    assert r.table[:, C_NOTIF].tolist() == expected


def test_csv_layout():
    r = run_simulation(small_config(max_days=3).with_app(0.2, 0.4, 1.0), 5)
    lines = r.to_csv().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert len(lines) == 4
    assert lines[1].startswith("5,0.2,0.4,1,1,")


def test_config_errors_propagate():
    with pytest.raises(ValueError):
        run_simulation(dataclasses.replace(ScenarioConfig(), beta=2.0), 1)
