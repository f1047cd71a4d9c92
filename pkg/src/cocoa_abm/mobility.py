"""Daily outing plans and per-step movement.

Time is discrete: one step is 10 minutes and a day has 144 steps. Steps are
addressed absolutely as ``day * STEPS_PER_DAY + step_of_day``.

A plan departing at absolute step ``t0`` with one-way commute ``n`` steps and
stay ``s`` steps is a pure function of ``k = t - t0 + 1``:

* ``k <= 0``                  at home
* ``1 <= k <= n``             outbound, ``min(k*speed, dist)`` along the segment
                              (the arrival step ``k == n`` snaps to the facility)
* ``n < k <= n + s``          at the facility
* ``n + s < k <= 2n + s``     inbound, mirrored
* ``k > 2n + s``              at home, plan finished
"""

from __future__ import annotations

import math

from numba import njit

from .domain import AgentRole, DayPlan, InfectionState, Phase, ScenarioConfig
from .rngstreams import RngStream, uniform_at

STEPS_PER_DAY = 144
MINUTES_PER_STEP = 10

_I = int(InfectionState.I)
_D = int(InfectionState.D)
AT_HOME, OUTBOUND, AT_FACILITY, INBOUND = (int(p) for p in Phase)

# Schedule-stream counters used per agent per day: base + {0: go out,
# 1-2: departure gaussian, 3: stay length}.
SCHEDULE_DRAWS_PER_DAY = 4


@njit(cache=True, inline="always")
def _effective_prob(base, state, hospitalized, sick_reduction, notified_active,
                    outing_reduction):
    if hospitalized or state == _D:
        return 0.0
    p = base
    if state == _I:
        p -= sick_reduction
    if notified_active:
        p -= outing_reduction
    if p < 0.0:
        return 0.0
    if p > 1.0:
        return 1.0
    return p


def effective_go_out_probability(base: float, state: InfectionState, hospitalized: bool,
                                 sick_reduction: float, notified_active: bool,
                                 outing_reduction: float) -> float:
    return float(_effective_prob(float(base), int(state), bool(hospitalized),
                                 float(sick_reduction), bool(notified_active),
                                 float(outing_reduction)))


@njit(cache=True)
def _round_half_up(x):
    return int(math.floor(x + 0.5))


@njit(cache=True)
def _departure_step(z, mean_min, std_min):
    """Standard normal ``z`` -> departure step of day, clamped to [0, 143]."""
    step = _round_half_up((mean_min + std_min * z) / MINUTES_PER_STEP)
    if step < 0:
        return 0
    if step > STEPS_PER_DAY - 1:
        return STEPS_PER_DAY - 1
    return step


@njit(cache=True)
def _stay_steps(u, lo_steps, hi_steps):
    k = lo_steps + int(u * (hi_steps - lo_steps + 1))
    return min(k, hi_steps)


@njit(cache=True)
def _travel_steps(hx, hy, fx, fy, speed):
    dist = math.hypot(fx - hx, fy - hy)
    return int(math.ceil(dist / speed))


@njit(cache=True, inline="always")
def _draw_plan(key, day, p, mean_min, std_min, stay_lo, stay_hi):
    """(goes_out, depart_step, stay_steps) from the Schedule stream ``key``."""
    base = day * SCHEDULE_DRAWS_PER_DAY
    if not uniform_at(key, base) < p:
        return False, 0, 0
    u1 = uniform_at(key, base + 1)
    u2 = uniform_at(key, base + 2)
    z = math.sqrt(-2.0 * math.log(1.0 - u1)) * math.cos(2.0 * math.pi * u2)
    depart = _departure_step(z, mean_min, std_min)
    stay = _stay_steps(uniform_at(key, base + 3), stay_lo, stay_hi)
    return True, depart, stay


@njit(cache=True, inline="always")
def _plan_position(k, hx, hy, fx, fy, n_out, stay, speed):
    """(x, y, phase) at plan-relative step ``k`` (see module docstring)."""
    if k <= 0:
        return hx, hy, AT_HOME
    if k <= n_out:
        if k == n_out:
            return fx, fy, OUTBOUND
        dist = math.hypot(fx - hx, fy - hy)
        f = k * speed / dist
        return hx + f * (fx - hx), hy + f * (fy - hy), OUTBOUND
    if k <= n_out + stay:
        return fx, fy, AT_FACILITY
    j = k - n_out - stay
    if j < n_out:
        dist = math.hypot(fx - hx, fy - hy)
        f = j * speed / dist
        return fx + f * (hx - fx), fy + f * (hy - fy), INBOUND
    if j == n_out:
        return hx, hy, INBOUND
    return hx, hy, AT_HOME


def stay_range_steps(config: ScenarioConfig, role: AgentRole) -> tuple[int, int]:
    lo, hi = config.stay_time[role]
    return lo // MINUTES_PER_STEP, hi // MINUTES_PER_STEP


def plan_day(agent, day: int, config: ScenarioConfig, schedule_stream: RngStream,
             notified_active: bool = False) -> DayPlan:
    """Draw the agent's plan for ``day``.

    ``schedule_stream`` must be the agent's Schedule-domain stream; the draws
    for ``day`` sit at counters ``4*day .. 4*day+3`` regardless of the
    stream's current position, and the counter is left after the last one
    used (only the first when the agent stays home).
    """
    p = effective_go_out_probability(
        agent.base_go_out_prob, agent.state, agent.hospitalized,
        config.sick_outing_reduction, notified_active, config.app.outing_reduction)
    mean, std = config.depart_time[agent.role]
    lo, hi = stay_range_steps(config, agent.role)
    goes, depart, stay = _draw_plan(schedule_stream.key, day, p, float(mean), float(std), lo, hi)
    base = day * SCHEDULE_DRAWS_PER_DAY
    schedule_stream.counter = base + (SCHEDULE_DRAWS_PER_DAY if goes else 1)
    if not goes:
        return DayPlan(goes_out=False, day=day)
    n_out = _travel_steps(*agent.home, *agent.destination, config.travel_speed)
    return DayPlan(goes_out=True, depart_step=int(depart), stay_steps=int(stay),
                   phase=Phase.AtHome, day=day, travel_steps=int(n_out))


def advance_position(agent, day: int, step: int, travel_speed: float) -> tuple[float, float]:
    """Move ``agent`` to where its plan puts it at (``day``, ``step``).

    Updates ``agent.position`` and ``agent.plan.phase`` and returns the new
    position. Agents without an outing sit at their house.
    """
    plan = agent.plan
    if plan is None or not plan.goes_out:
        agent.position = agent.home
        return agent.position
    k = (day * STEPS_PER_DAY + step) - (plan.day * STEPS_PER_DAY + plan.depart_step) + 1
    x, y, phase = _plan_position(k, *agent.home, *agent.destination, plan.travel_steps,
                                 plan.stay_steps, float(travel_speed))
    agent.position = (float(x), float(y))
    plan.phase = Phase(phase)
    return agent.position
