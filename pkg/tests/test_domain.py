import dataclasses
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cocoa_abm.domain import (ALLOWED_EDGES, AgentRole, AppParams, ConfigError, FacilityKind,
                              InfectionState, ROLE_FACILITY, ScenarioConfig, WORLD_SIZE,
                              app_user_count, build_population, config_from_dict,
                              config_to_dict, format_clock, load_config, parse_clock,
                              population_arrays, validate_config)
from cocoa_abm.rngstreams import Domain, derive_stream


def pop_of(config, seed=1):
    return build_population(config, derive_stream(seed, Domain.INIT, 0))


def test_defaults_accepted():
    c = validate_config(ScenarioConfig())
    assert c.population == 999
    assert c.max_days == 45 and c.n_initial_infected == 10
    assert c.beta == pytest.approx(6e-5)
    assert len(c.facilities_of(FacilityKind.Company)) == 3
    assert len(c.facilities) == 9


@pytest.mark.parametrize("change, message", [
    (dict(beta=-0.1), "beta out of [0,1]"),
    (dict(beta=1.5), "beta out of [0,1]"),
    (dict(n_initial_infected=1000), "n_initial_infected > 3*n_houses"),
    (dict(max_days=0), "max_days < 1"),
    (dict(gamma0=0.01, gamma1=0.02, hospital_prob=0.1, ward_capacity=5), "gamma0 < gamma1"),
    (dict(travel_speed=0.0), "travel_speed <= 0"),
    (dict(incubation_set=()), "incubation_set"),
    (dict(app=AppParams(1.2, 0, 0)), "app.usage_rate out of [0,1]"),
])
def test_validation_names_the_violation(change, message):
    with pytest.raises(ConfigError, match=message.replace("[", r"\[").replace("]", r"\]")
                       .replace("*", r"\*")):
        validate_config(dataclasses.replace(ScenarioConfig(), **change))


def test_gamma_order_ignored_without_hospital():
    validate_config(dataclasses.replace(ScenarioConfig(), gamma0=0.01, gamma1=0.02))


def test_allowed_edges_match_kernel_graph():
    S, E, I, R, D = InfectionState
    assert ALLOWED_EDGES == {(S, E), (E, I), (I, R), (I, D)}


def test_default_population_shape():
    agents, houses = pop_of(ScenarioConfig())
    assert len(agents) == 999 and len(houses) == 333
    states = [a.state for a in agents]
    assert states.count(InfectionState.I) == 10
    assert states.count(InfectionState.S) == 989
    assert all(a.days_in_state == 0 for a in agents)


def test_one_agent_of_each_role_per_house():
    agents, houses = pop_of(ScenarioConfig(), seed=3)
    by_house = {}
    for a in agents:
        by_house.setdefault(a.house_id, []).append(a.role)
    assert all(sorted(v) == sorted(AgentRole) for v in by_house.values())
    assert len(by_house) == len(houses)


def test_facility_kind_matches_role():
    c = ScenarioConfig()
    agents, _ = pop_of(c, seed=4)
    kinds = {f.id: f.kind for f in c.facilities}
    locs = {f.id: f.location for f in c.facilities}
    for a in agents:
        assert kinds[a.facility_id] == ROLE_FACILITY[a.role]
        assert a.destination == locs[a.facility_id]


def test_homes_and_attributes_in_range():
    c = ScenarioConfig()
    agents, houses = pop_of(c, seed=5)
    for h in houses:
        assert 0 <= h.location[0] <= WORLD_SIZE and 0 <= h.location[1] <= WORLD_SIZE
    for a in agents:
        assert a.incubation_days in c.incubation_set
        assert a.infectious_days in c.infectious_set
        lo, hi = c.go_out_prob_range[a.role]
        assert lo <= a.base_go_out_prob <= hi
        assert a.position == houses[a.house_id].location


@pytest.mark.parametrize("rate, expected", [(1.0, 999), (0.2, 200), (0.0, 0), (0.6, 599)])
def test_app_user_count(rate, expected):
    c = ScenarioConfig().with_app(rate, 0, 0)
    agents, _ = pop_of(c)
    assert sum(a.app_user for a in agents) == expected == app_user_count(rate, 999)


@given(st.floats(0, 1), st.integers(1, 50), st.integers(0, 2**32))
def test_app_user_count_property(rate, n_houses, seed):
    c = dataclasses.replace(ScenarioConfig(), n_houses=n_houses, n_initial_infected=1)
    pop = population_arrays(c.with_app(rate, 0, 0), derive_stream(seed, Domain.INIT, 0))
    assert pop.app_user.sum() == int(np.floor(rate * 3 * n_houses + 0.5))


def test_registration_only_for_infected_app_users():
    c = ScenarioConfig().with_app(1.0, 0, 1.0)
    agents, _ = pop_of(c)
    for a in agents:
        assert a.registered == (a.state == InfectionState.I)
    agents, _ = pop_of(ScenarioConfig().with_app(0.5, 0, 1.0))
    assert all(a.app_user for a in agents if a.registered)


def test_population_deterministic():
    a1, h1 = pop_of(ScenarioConfig(), seed=8)
    a2, h2 = pop_of(ScenarioConfig(), seed=8)
    assert a1 == a2 and h1 == h2
    a3, _ = pop_of(ScenarioConfig(), seed=9)
    assert a1 != a3


def test_structure_independent_of_app_params():
    base = population_arrays(ScenarioConfig(), derive_stream(2, Domain.INIT, 0))
    other = population_arrays(ScenarioConfig().with_app(0.6, 0.6, 0.6),
                              derive_stream(2, Domain.INIT, 0))
    for name in ("house_xy", "facility_id", "base_go_out_prob", "incubation_days",
                 "infectious_days", "initially_infected"):
        assert np.array_equal(getattr(base, name), getattr(other, name))


def test_app_users_nested_in_usage_rate():
    # more users only ever adds agents: same keys, larger k
    lo = population_arrays(ScenarioConfig().with_app(0.2, 0, 0), derive_stream(2, Domain.INIT, 0))
    hi = population_arrays(ScenarioConfig().with_app(0.6, 0, 0), derive_stream(2, Domain.INIT, 0))
    assert np.all(hi.app_user[lo.app_user])


def test_clock_parsing():
    assert parse_clock("8:30") == 510
    assert parse_clock("10:30") == 630
    assert format_clock(90) == "1:30"
    for bad in ("830", "8:75", "x:10"):
        with pytest.raises(ConfigError):
            parse_clock(bad)


def test_json_round_trip():
    c = dataclasses.replace(ScenarioConfig(), beta=9.375e-5, ward_capacity=4,
                            hospital_prob=0.05).with_app(0.2, 0.4, 0.6)
    assert config_from_dict(json.loads(json.dumps(config_to_dict(c)))) == c


def test_json_units():
    c = config_from_dict({"beta": 0.006, "depart_time": {"Homemaker": ["10:30", "1:30"]},
                          "app": {"usage_rate": 20}})
    assert c.beta == pytest.approx(6e-5)
    assert c.depart_time[AgentRole.Homemaker] == (630, 90)
    assert c.app == AppParams(0.2, 0.0, 0.0)


@pytest.mark.parametrize("doc", [
    {"nonsense": 1},
    {"app": {"bogus": 1}},
    {"beta": 200},
    {"facilities": [{"kind": "Zoo", "location": [1, 1]}]},
    {"facilities": [{"kind": "Shop"}]},
    {"max_days": "many"},
    {"depart_time": {"Pilot": ["8:00", "1:00"]}},
])
def test_bad_documents_rejected(doc):
    with pytest.raises(ConfigError):
        config_from_dict(doc)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(bad)
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"n_houses": 10, "n_initial_infected": 2}))
    assert load_config(good).population == 30
