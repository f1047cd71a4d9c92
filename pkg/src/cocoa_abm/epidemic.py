"""S/E/I/R/D transition kernel.

S->E is decided once per 10-minute step; E->I and I->{R,D} at day
boundaries. The sampling functions take the uniform variate explicitly so
the caller controls which stream it comes from.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from numba import njit

from .domain import InfectionState

S, E, I, R, D = (int(s) for s in InfectionState)


@dataclass(frozen=True)
class KernelInputs:
    state: InfectionState
    contact: bool = False
    days_in_state: int = 0
    hospitalized: bool = False


@dataclass(frozen=True)
class KernelParams:
    beta: float
    gamma0: float
    gamma1: float
    incubation_days: int
    infectious_days: int


@njit(cache=True)
def _step_s(contact, beta, u):
    if contact and u < beta:
        return E
    return S


@njit(cache=True, inline="always")
def _day_e(days_in_state, incubation_days):
    return I if days_in_state == incubation_days else E


@njit(cache=True, inline="always")
def _day_i(days_in_state, infectious_days, hospitalized, gamma0, gamma1, u):
    if days_in_state != infectious_days:
        return I
    gamma = gamma1 if hospitalized else gamma0
    return D if u < gamma else R


def step_transition_S(contact: bool, beta: float, u: float) -> InfectionState:
    return InfectionState(_step_s(bool(contact), float(beta), float(u)))


def day_transition_E(days_in_state: int, incubation_days: int) -> InfectionState:
    return InfectionState(_day_e(int(days_in_state), int(incubation_days)))


def day_transition_I(days_in_state: int, infectious_days: int, hospitalized: bool,
                     gamma0: float, gamma1: float, u: float) -> InfectionState:
    return InfectionState(_day_i(int(days_in_state), int(infectious_days), bool(hospitalized),
                                 float(gamma0), float(gamma1), float(u)))


def kernel_distribution(inputs: KernelInputs, params: KernelParams) -> dict:
    """Exact next-state distribution as ``{state: Fraction}``.

    Fractions keep the row sums exactly one; ``float(p)`` recovers the
    probability the samplers use.
    """
    one = Fraction(1)
    x = InfectionState(inputs.state)
    if x == InfectionState.S:
        if not inputs.contact:
            return {InfectionState.S: one}
        b = Fraction(params.beta)
        return {InfectionState.S: one - b, InfectionState.E: b}
    if x == InfectionState.E:
        if inputs.days_in_state == params.incubation_days:
            return {InfectionState.I: one}
        return {InfectionState.E: one}
    if x == InfectionState.I:
        if inputs.days_in_state != params.infectious_days:
            return {InfectionState.I: one}
        g = Fraction(params.gamma1 if inputs.hospitalized else params.gamma0)
        return {InfectionState.R: one - g, InfectionState.D: g}
    return {x: one}
