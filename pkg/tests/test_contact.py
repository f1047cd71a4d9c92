import math

import numpy as np
from hypothesis import given, strategies as st

from cocoa_abm.contact import (ContactEvent, Snapshot, build_index, contact_pairs,
                               contacts_for_step)
from cocoa_abm.domain import InfectionState

S, E, I, R, D = (int(s) for s in InfectionState)


def brute_force(x, y, state, hosp, radius):
    present = [(k != D) and not h for k, h in zip(state, hosp)]
    out = []
    for j in range(len(x)):
        for i in range(len(x)):
            if i != j and present[i] and present[j] and state[i] == I and \
                    math.hypot(x[i] - x[j], y[i] - y[j]) <= radius:
                out.append((i, j))
    return sorted(out, key=lambda p: (p[1], p[0]))


def events(x, y, state, hosp=None, radius=1.0):
    hosp = np.zeros(len(x), bool) if hosp is None else np.asarray(hosp)
    snap = Snapshot(np.asarray(x, float), np.asarray(y, float), np.asarray(state), hosp,
                    radius, day=3, step=7)
    return contacts_for_step(snap)


def test_build_index_examples():
    assert len(build_index([], 1.0)) == 0
    idx = build_index([(0, (5.5, 5.5))], 1.0)
    assert idx.cells == {(5, 5): [0]}
    rng = np.random.default_rng(0)
    pts = [(i, tuple(rng.random(2) * 1000)) for i in range(999)]
    assert len(build_index(pts, 1.0)) == 999
    assert sorted(build_index(pts, 1.0).neighbours(*pts[5][1])).count(5) == 1


def test_boundary_is_inclusive():
    assert [(e.infector_id, e.other_id) for e in events([0, 0.6], [0, 0.8], [I, S])] == [(0, 1)]
    assert events([0, 0.8], [0, 0.8], [I, S]) == []


def test_cohabitants():
    evs = events([5.0] * 3, [7.0] * 3, [S, I, S])
    assert evs == [ContactEvent(1, 0, 3, 7), ContactEvent(1, 2, 3, 7)]


def test_dead_and_hospitalized_excluded():
    evs = events([1.0] * 4, [1.0] * 4, [I, I, D, S], hosp=[False, True, False, False])
    assert {(e.infector_id, e.other_id) for e in evs} == {(0, 3)}


def test_infectious_pairs_both_ways():
    evs = events([0.0, 0.5], [0.0, 0.0], [I, I])
    assert [(e.infector_id, e.other_id) for e in evs] == [(1, 0), (0, 1)]


world = st.integers(1, 200).flatmap(lambda n: st.tuples(
    st.lists(st.floats(0, 30), min_size=n, max_size=n),
    st.lists(st.floats(0, 30), min_size=n, max_size=n),
    st.lists(st.sampled_from([S, E, I, I, R, D]), min_size=n, max_size=n),
    st.lists(st.booleans(), min_size=n, max_size=n),
    st.sampled_from([0.5, 1.0, 2.5])))


@given(world)
def test_matches_brute_force(w):
    x, y, state, hosp, radius = w
    hosp = [h and s == I for h, s in zip(hosp, state)]
    inf, oth = contact_pairs(np.array(x), np.array(y), np.array(state), np.array(hosp), radius)
    assert list(zip(inf.tolist(), oth.tolist())) == brute_force(x, y, state, hosp, radius)


def test_co_located_crowd():
    # a facility crowd: many agents on one point, several infectious
    n = 120
    state = np.full(n, S)
    state[[3, 50, 90]] = I
    x = np.full(n, 200.0)
    y = np.full(n, 800.0)
    inf, oth = contact_pairs(x, y, state, np.zeros(n, bool))
    assert inf.size == 3 * (n - 1)
    assert list(zip(inf, oth)) == brute_force(x, y, state, [False] * n, 1.0)


def test_deterministic_order():
    rng = np.random.default_rng(4)
    x, y = rng.random(300) * 20, rng.random(300) * 20
    state = rng.choice([S, I], 300)
    a = contact_pairs(x, y, state, np.zeros(300, bool))
    b = contact_pairs(x, y, state, np.zeros(300, bool))
    assert all(np.array_equal(p, q) for p, q in zip(a, b))
