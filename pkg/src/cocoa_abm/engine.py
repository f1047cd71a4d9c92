"""One full simulation run.

Each day runs the 1-day process (state durations, registration, hospital
attempts, outing plans) and then 144 1-step processes (movement, contact
detection, infection draws, notifications). All per-agent loops go in
ascending agent id.

Random draws are addressed by fixed counters, so a draw's value never
depends on how many other draws happened before it:

==========  ==========  ========================================
domain      entity      counter
==========  ==========  ========================================
Init        0           sequential, population construction
Schedule    agent       ``4*day + {0,1,2,3}`` (see ``mobility``)
Epidemic    agent       ``145*day + step`` for S->E,
                        ``145*day + 144`` for the I->R/D draw
Hospital    agent       ``day``
App         agent       ``0`` (registration at infection onset)
==========  ==========  ========================================
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from numba import njit, types
from numba.typed import List

from .appmodel import ContactLogEntry
from .contact import cell_index, index_insert, index_remove, new_tables, source_pairs
from .domain import (AgentRole, AppParams, InfectionState, PopulationArrays, ScenarioConfig,
                     WORLD_SIZE, population_arrays, validate_config)
from .epidemic import _day_e, _day_i
from .mobility import (STEPS_PER_DAY, _draw_plan, _effective_prob, _plan_position,
                       _travel_steps, stay_range_steps)
from .rngstreams import Domain, as_seed, derive_stream, entity_keys, uniform_at

S, E, I, R, D = (int(s) for s in InfectionState)
EPIDEMIC_DRAWS_PER_DAY = STEPS_PER_DAY + 1
NEVER = -(1 << 40)

# Columns of the per-day table produced by the kernel.
(C_DAY, C_S, C_E, C_I, C_R, C_D, C_NIP, C_NEW, C_NOTIF, C_HOSP,
 C_ACTIVE) = range(11)
N_COLS = 11

CSV_COLUMNS = ("seed", "p1", "p2", "p3", "day", "S", "E", "I", "R", "D", "n_ip",
               "new_infections", "notifications_issued", "hospitalized")


@dataclass(frozen=True)
class DailyRecord:
    day: int
    counts: dict
    n_ip: int
    new_infections: int
    notifications_issued: int
    hospitalized: int
    active_notified: int = 0


@dataclass
class AgentTrace:
    """Per-agent facts needed to audit a run after the fact."""

    app_user: np.ndarray
    registered_at_onset: np.ndarray
    infectious_from: np.ndarray  # day of entering I; 0 for initial infectors, -1 never
    infectious_until: np.ndarray  # day of leaving I, -1 if still I or never
    final_state: np.ndarray


@dataclass
class RunResult:
    app: AppParams
    seed: int
    days: list
    table: np.ndarray = field(repr=False, default=None)
    config: Optional[ScenarioConfig] = field(repr=False, default=None)
    events: Optional[list] = field(repr=False, default=None)
    trace: Optional[AgentTrace] = field(repr=False, default=None)

    @property
    def n_ip(self) -> np.ndarray:
        return np.array([r.n_ip for r in self.days], dtype=np.int64)

    @property
    def final_n_ip(self) -> int:
        return self.days[-1].n_ip

    def rows(self) -> list[tuple]:
        p1, p2, p3 = self.app.as_tuple()
        return [(self.seed, format_p(p1), format_p(p2), format_p(p3), r.day,
                 r.counts[InfectionState.S], r.counts[InfectionState.E],
                 r.counts[InfectionState.I], r.counts[InfectionState.R],
                 r.counts[InfectionState.D], r.n_ip, r.new_infections,
                 r.notifications_issued, r.hospitalized) for r in self.days]

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(CSV_COLUMNS)
        w.writerows(self.rows())
        return buf.getvalue()


def format_p(p: float) -> str:
    """Canonical text for a probability in CSV files and file names."""
    return f"{p:.4g}"


def records_from_table(table: np.ndarray) -> list[DailyRecord]:
    out = []
    for row in table:
        counts = {InfectionState.S: int(row[C_S]), InfectionState.E: int(row[C_E]),
                  InfectionState.I: int(row[C_I]), InfectionState.R: int(row[C_R]),
                  InfectionState.D: int(row[C_D])}
        out.append(DailyRecord(int(row[C_DAY]), counts, int(row[C_NIP]), int(row[C_NEW]),
                               int(row[C_NOTIF]), int(row[C_HOSP]), int(row[C_ACTIVE])))
    return out


@njit(cache=True)
def _simulate(state, days_in, inc, infd, base, hosp, app_user, registered, notified_until,
              hx, hy, fx, fy, role, n_out,
              dep_mean, dep_std, stay_lo, stay_hi,
              sched_keys, epi_keys, hosp_keys, app_keys,
              beta, gamma0, gamma1, hospital_prob, ward_capacity, sick_red, outing_red,
              reg_rate, speed, radius, notification_days, max_days, record,
              inf_from, inf_until, table):
    n = state.size
    x = hx.copy()
    y = hy.copy()
    plan_active = np.zeros(n, dtype=np.bool_)
    depart_abs = np.zeros(n, dtype=np.int64)
    stay = np.zeros(n, dtype=np.int64)
    end_abs = np.full(n, -1, dtype=np.int64)
    last_notified = np.full(n, -1, dtype=np.int64)
    newly_i = np.zeros(n, dtype=np.bool_)
    sources = np.empty(n, dtype=np.int64)
    touched = np.full(n, -1, dtype=np.int64)
    pair_i = np.empty(8 * n, dtype=np.int64)
    pair_j = np.empty(8 * n, dtype=np.int64)

    # every agent present (alive, not in hospital) sits in the grid
    cell = radius
    nx = int(np.floor(WORLD_SIZE / cell)) + 1
    head, gnext, gprev = new_tables(nx, nx, n)
    cell_of = np.empty(n, dtype=np.int64)
    indexed = np.zeros(n, dtype=np.bool_)
    for a in range(n):
        cell_of[a] = cell_index(x[a], y[a], 0.0, 0.0, cell, nx, nx)
        if state[a] != D and not hosp[a]:
            index_insert(a, cell_of[a], head, gnext, gprev)
            indexed[a] = True

    beds = 0
    for a in range(n):
        if hosp[a]:
            beds += 1

    ev_day = List.empty_list(types.int64)
    ev_step = List.empty_list(types.int64)
    ev_inf = List.empty_list(types.int64)
    ev_oth = List.empty_list(types.int64)
    ev_notified = List.empty_list(types.boolean)

    for d in range(1, max_days + 1):
        new_inf = 0
        n_notif = 0

        # ---- 1-day process
        if d >= 2:
            for a in range(n):
                if state[a] == E or state[a] == I:
                    days_in[a] += 1
        for a in range(n):
            newly_i[a] = False
            if state[a] == E and _day_e(days_in[a], inc[a]) == I:
                state[a] = I
                days_in[a] = 0
                newly_i[a] = True
                inf_from[a] = d
        for a in range(n):
            if state[a] == I and not newly_i[a]:
                u = uniform_at(epi_keys[a], d * EPIDEMIC_DRAWS_PER_DAY + STEPS_PER_DAY)
                nxt_state = _day_i(days_in[a], infd[a], hosp[a], gamma0, gamma1, u)
                if nxt_state != I:
                    state[a] = nxt_state
                    days_in[a] = 0
                    registered[a] = False
                    inf_until[a] = d
                    # discharged agents go home; the dead stay home, out of the grid
                    discharged = hosp[a]
                    if discharged:
                        hosp[a] = False
                        beds -= 1
                    if discharged or nxt_state == D:
                        plan_active[a] = False
                        if indexed[a]:
                            index_remove(a, cell_of[a], head, gnext, gprev)
                            indexed[a] = False
                        x[a] = hx[a]
                        y[a] = hy[a]
                        cell_of[a] = cell_index(x[a], y[a], 0.0, 0.0, cell, nx, nx)
                        if nxt_state != D:
                            index_insert(a, cell_of[a], head, gnext, gprev)
                            indexed[a] = True
        for a in range(n):
            if newly_i[a] and app_user[a]:
                registered[a] = uniform_at(app_keys[a], 0) < reg_rate
        if hospital_prob > 0.0:
            for a in range(n):
                if state[a] == I and not hosp[a]:
                    if uniform_at(hosp_keys[a], d) < hospital_prob and beds < ward_capacity:
                        hosp[a] = True
                        beds += 1
                        plan_active[a] = False
                        index_remove(a, cell_of[a], head, gnext, gprev)
                        indexed[a] = False
        day_start = d * STEPS_PER_DAY
        for a in range(n):
            if state[a] == D or hosp[a]:
                continue
            if plan_active[a] and end_abs[a] >= day_start:
                continue
            plan_active[a] = False
            r = role[a]
            p = _effective_prob(base[a], state[a], hosp[a], sick_red,
                                d <= notified_until[a], outing_red)
            goes, dep, st = _draw_plan(sched_keys[a], d, p, dep_mean[r], dep_std[r],
                                       stay_lo[r], stay_hi[r])
            if goes:
                plan_active[a] = True
                depart_abs[a] = day_start + dep
                stay[a] = st
                end_abs[a] = depart_abs[a] + 2 * n_out[a] + st - 1

        # ---- 1-step processes
        for s in range(STEPS_PER_DAY):
            t = day_start + s
            for a in range(n):
                if plan_active[a]:
                    k = t - depart_abs[a] + 1
                    if k >= 1:
                        px, py, ph = _plan_position(k, hx[a], hy[a], fx[a], fy[a], n_out[a],
                                                    stay[a], speed)
                        x[a] = px
                        y[a] = py
                        c = cell_index(px, py, 0.0, 0.0, cell, nx, nx)
                        if c != cell_of[a]:
                            index_remove(a, cell_of[a], head, gnext, gprev)
                            index_insert(a, c, head, gnext, gprev)
                            cell_of[a] = c
                        if t >= end_abs[a]:
                            plan_active[a] = False
            m = 0
            for a in range(n):
                if state[a] == I and not hosp[a]:
                    sources[m] = a
                    m += 1
            if m == 0:
                continue
            src = sources[:m]
            npairs = source_pairs(src, cell_of, x, y, radius, nx, nx, head, gnext, pair_i,
                                  pair_j)
            if npairs < 0:
                pair_i = np.empty(-2 * npairs, dtype=np.int64)
                pair_j = np.empty(-2 * npairs, dtype=np.int64)
                npairs = source_pairs(src, cell_of, x, y, radius, nx, nx, head, gnext,
                                      pair_i, pair_j)
            n_rec = 0
            for q in range(npairs):
                i = pair_i[q]
                j = pair_j[q]
                # one S->E draw per exposed agent and step, however many sources
                if touched[j] != t:
                    touched[j] = t
                    if state[j] == S:
                        u = uniform_at(epi_keys[j], d * EPIDEMIC_DRAWS_PER_DAY + s)
                        if u < beta:
                            state[j] = E
                            days_in[j] = 0
                            new_inf += 1
                if app_user[j] and app_user[i]:
                    if registered[i]:
                        notified_until[j] = d + notification_days
                        if last_notified[j] != d:
                            last_notified[j] = d
                            n_notif += 1
                    if record:
                        pair_i[n_rec] = i
                        pair_j[n_rec] = j
                        n_rec += 1
            if n_rec > 0:
                order = np.argsort(pair_j[:n_rec] * n + pair_i[:n_rec])
                for q in order:
                    i = pair_i[q]
                    ev_day.append(d)
                    ev_step.append(s)
                    ev_inf.append(i)
                    ev_oth.append(pair_j[q])
                    ev_notified.append(registered[i])

        # ---- record
        row = d - 1
        table[row, C_DAY] = d
        for a in range(n):
            table[row, C_S + state[a]] += 1
            if app_user[a] and d <= notified_until[a]:
                table[row, C_ACTIVE] += 1
        table[row, C_NIP] = n - table[row, C_S]
        table[row, C_NEW] = new_inf
        table[row, C_NOTIF] = n_notif
        table[row, C_HOSP] = beds

    return ev_day, ev_step, ev_inf, ev_oth, ev_notified


@njit(cache=True)
def _travel_steps_all(hx, hy, fx, fy, speed):
    out = np.empty(hx.size, dtype=np.int64)
    for a in range(hx.size):
        out[a] = _travel_steps(hx[a], hy[a], fx[a], fy[a], speed)
    return out


def initial_registration(pop: PopulationArrays, app_keys: np.ndarray, rate: float) -> np.ndarray:
    """Registration flags of the initial infectors (same draw as ``maybe_register``)."""
    reg = np.zeros(pop.role.size, dtype=np.bool_)
    for a in np.flatnonzero(pop.initially_infected & pop.app_user):
        reg[a] = uniform_at(app_keys[a], 0) < rate
    return reg


def run_simulation(config: ScenarioConfig, seed: int, record_events: bool = False,
                   keep_trace: bool = False) -> RunResult:
    """Simulate ``config.max_days`` days with master seed ``seed``.

    ``record_events`` keeps every contact between two app users (with its
    notified flag); ``keep_trace`` keeps per-agent audit arrays.
    """
    config = validate_config(config)
    pop = population_arrays(config, derive_stream(seed, Domain.INIT, 0))
    n = pop.role.size
    s64 = as_seed(seed)
    keys = {dom: entity_keys(s64, int(dom), n) for dom in
            (Domain.SCHEDULE, Domain.EPIDEMIC, Domain.HOSPITAL, Domain.APP)}

    state = np.where(pop.initially_infected, I, S).astype(np.int64)
    days_in = np.zeros(n, dtype=np.int64)
    hosp = np.zeros(n, dtype=np.bool_)
    app_user = pop.app_user.copy()
    registered = initial_registration(pop, keys[Domain.APP], config.app.registration_rate)
    notified_until = np.full(n, NEVER, dtype=np.int64)
    hx = np.ascontiguousarray(pop.home[:, 0])
    hy = np.ascontiguousarray(pop.home[:, 1])
    fx = np.ascontiguousarray(pop.destination[:, 0])
    fy = np.ascontiguousarray(pop.destination[:, 1])
    n_out = _travel_steps_all(hx, hy, fx, fy, float(config.travel_speed))

    roles = list(AgentRole)
    dep_mean = np.array([config.depart_time[r][0] for r in roles], dtype=np.float64)
    dep_std = np.array([config.depart_time[r][1] for r in roles], dtype=np.float64)
    stay_lo = np.array([stay_range_steps(config, r)[0] for r in roles], dtype=np.int64)
    stay_hi = np.array([stay_range_steps(config, r)[1] for r in roles], dtype=np.int64)

    inf_from = np.where(state == I, 0, -1).astype(np.int64)
    inf_until = np.full(n, -1, dtype=np.int64)
    registered_at_onset = registered.copy()
    table = np.zeros((config.max_days, N_COLS), dtype=np.int64)

    ev = _simulate(state, days_in, pop.incubation_days, pop.infectious_days,
                   pop.base_go_out_prob, hosp, app_user, registered, notified_until,
                   hx, hy, fx, fy, pop.role, n_out, dep_mean, dep_std, stay_lo, stay_hi,
                   keys[Domain.SCHEDULE], keys[Domain.EPIDEMIC], keys[Domain.HOSPITAL],
                   keys[Domain.APP],
                   float(config.beta), float(config.gamma0), float(config.gamma1),
                   float(config.hospital_prob), int(config.ward_capacity),
                   float(config.sick_outing_reduction), float(config.app.outing_reduction),
                   float(config.app.registration_rate), float(config.travel_speed),
                   float(config.contact_radius), int(config.notification_days),
                   int(config.max_days), bool(record_events), inf_from, inf_until, table)

    result = RunResult(app=config.app, seed=int(seed), days=records_from_table(table),
                       table=table, config=config)
    if record_events:
        result.events = [ContactLogEntry(int(dd), int(i), int(j), int(s), bool(nf))
                         for dd, s, i, j, nf in zip(*ev)]
    if keep_trace:
        onset = (inf_from > 0) & app_user
        if onset.any():
            u = np.array([uniform_at(keys[Domain.APP][a], 0) for a in np.flatnonzero(onset)])
            registered_at_onset[onset] = u < config.app.registration_rate
        result.trace = AgentTrace(app_user, registered_at_onset, inf_from, inf_until, state)
    return result
