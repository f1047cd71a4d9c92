"""Core data types, scenario configuration and population construction."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .rngstreams import Domain, RngStream, derive_stream

WORLD_SIZE = 1000.0


class ConfigError(ValueError):
    """A scenario configuration violates one of its invariants."""


class InfectionState(enum.IntEnum):
    S = 0
    E = 1
    I = 2  # noqa: E741
    R = 3
    D = 4


ALLOWED_EDGES = frozenset({
    (InfectionState.S, InfectionState.E),
    (InfectionState.E, InfectionState.I),
    (InfectionState.I, InfectionState.R),
    (InfectionState.I, InfectionState.D),
})


class AgentRole(enum.IntEnum):
    OfficeWorker = 0
    Homemaker = 1
    Student = 2


class FacilityKind(enum.IntEnum):
    Company = 0
    Shop = 1
    School = 2


ROLE_FACILITY = {
    AgentRole.OfficeWorker: FacilityKind.Company,
    AgentRole.Homemaker: FacilityKind.Shop,
    AgentRole.Student: FacilityKind.School,
}


class Phase(enum.IntEnum):
    AtHome = 0
    Outbound = 1
    AtFacility = 2
    Inbound = 3


@dataclass(frozen=True)
class Facility:
    id: int
    kind: FacilityKind
    location: tuple[float, float]


@dataclass(frozen=True)
class House:
    id: int
    location: tuple[float, float]


@dataclass
class DayPlan:
    """One agent's outing for one day.

    ``stay_steps`` counts the steps spent at the facility after the arrival
    step; ``travel_steps`` is the one-way commute length,
    ``ceil(distance / travel_speed)``.
    """

    goes_out: bool
    depart_step: int = 0
    stay_steps: int = 0
    phase: Phase = Phase.AtHome
    day: int = 0
    travel_steps: int = 0

    @property
    def length(self) -> int:
        """Number of steps from departure to arriving back home."""
        return 2 * self.travel_steps + self.stay_steps if self.goes_out else 0


@dataclass
class Agent:
    id: int
    role: AgentRole
    house_id: int
    facility_id: int
    home: tuple[float, float]
    destination: tuple[float, float]
    state: InfectionState = InfectionState.S
    days_in_state: int = 0
    incubation_days: int = 5
    infectious_days: int = 10
    base_go_out_prob: float = 1.0
    hospitalized: bool = False
    app_user: bool = False
    registered: bool = False
    notified_until_day: Optional[int] = None
    position: tuple[float, float] = (0.0, 0.0)
    plan: Optional[DayPlan] = None


@dataclass(frozen=True)
class AppParams:
    usage_rate: float = 0.0
    outing_reduction: float = 0.0
    registration_rate: float = 0.0

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.usage_rate, self.outing_reduction, self.registration_rate)


def _default_facilities() -> tuple[Facility, ...]:
    locs = [
        (FacilityKind.Company, (200.0, 800.0)),
        (FacilityKind.Company, (500.0, 500.0)),
        (FacilityKind.Company, (800.0, 100.0)),
        (FacilityKind.Shop, (200.0, 500.0)),
        (FacilityKind.Shop, (500.0, 100.0)),
        (FacilityKind.Shop, (800.0, 800.0)),
        (FacilityKind.School, (200.0, 100.0)),
        (FacilityKind.School, (500.0, 800.0)),
        (FacilityKind.School, (800.0, 500.0)),
    ]
    return tuple(Facility(i, kind, loc) for i, (kind, loc) in enumerate(locs))


def _per_role(office, homemaker, student):
    return {AgentRole.OfficeWorker: office, AgentRole.Homemaker: homemaker,
            AgentRole.Student: student}


@dataclass(frozen=True)
class ScenarioConfig:
    """All simulation parameters. Defaults reproduce the published setup.

    Probabilities are fractions in [0, 1]; clock times and durations are in
    minutes (``depart_time`` is ``(mean, std)``, ``stay_time`` is ``(lo, hi)``).
    """

    max_days: int = 45
    n_houses: int = 333
    n_initial_infected: int = 10
    facilities: tuple[Facility, ...] = field(default_factory=_default_facilities)
    ward_capacity: int = 0
    go_out_prob_range: dict = field(
        default_factory=lambda: _per_role((0.99, 1.0), (0.5, 1.0), (0.99, 1.0)))
    depart_time: dict = field(
        default_factory=lambda: _per_role((510, 90), (630, 90), (510, 90)))
    stay_time: dict = field(
        default_factory=lambda: _per_role((360, 480), (10, 30), (300, 360)))
    hospital_prob: float = 0.0
    sick_outing_reduction: float = 0.30
    beta: float = 0.00006
    gamma0: float = 0.10
    gamma1: float = 0.02
    incubation_set: tuple[int, ...] = (3, 5, 7)
    infectious_set: tuple[int, ...] = (8, 10, 12)
    app: AppParams = AppParams()
    travel_speed: float = 100.0
    contact_radius: float = 1.0
    notification_days: int = 14
    slope_epsilon: float = 0.01

    @property
    def population(self) -> int:
        return 3 * self.n_houses

    def with_app(self, p1: float, p2: float, p3: float) -> "ScenarioConfig":
        return replace(self, app=AppParams(p1, p2, p3))

    def facilities_of(self, kind: FacilityKind) -> list[Facility]:
        return [f for f in self.facilities if f.kind == kind]


def _check_prob(name: str, p: float) -> None:
    if not (isinstance(p, (int, float)) and 0.0 <= p <= 1.0):
        raise ConfigError(f"{name} out of [0,1]")


def validate_config(raw: ScenarioConfig) -> ScenarioConfig:
    """Return ``raw`` unchanged if every invariant holds, else raise ConfigError."""
    c = raw
    if not isinstance(c.max_days, int) or c.max_days < 1:
        raise ConfigError("max_days < 1")
    if not isinstance(c.n_houses, int) or c.n_houses < 1:
        raise ConfigError("n_houses < 1")
    if c.n_initial_infected < 0:
        raise ConfigError("n_initial_infected < 0")
    if c.n_initial_infected > c.population:
        raise ConfigError("n_initial_infected > 3*n_houses")
    for kind in FacilityKind:
        if not c.facilities_of(kind):
            raise ConfigError(f"no facility of kind {kind.name}")
    for f in c.facilities:
        x, y = f.location
        if not (0.0 <= x <= WORLD_SIZE and 0.0 <= y <= WORLD_SIZE):
            raise ConfigError(f"facility {f.id} location outside [0,{WORLD_SIZE:g}]^2")
    if c.ward_capacity < 0:
        raise ConfigError("ward_capacity < 0")
    for role in AgentRole:
        if role not in c.go_out_prob_range:
            raise ConfigError(f"go_out_prob_range missing {role.name}")
        lo, hi = c.go_out_prob_range[role]
        _check_prob(f"go_out_prob_range[{role.name}].lo", lo)
        _check_prob(f"go_out_prob_range[{role.name}].hi", hi)
        if lo > hi:
            raise ConfigError(f"go_out_prob_range[{role.name}] lo > hi")
        mean, std = c.depart_time[role]
        if std < 0:
            raise ConfigError(f"depart_time[{role.name}] std < 0")
        lo, hi = c.stay_time[role]
        if lo < 10 or lo > hi:
            raise ConfigError(f"stay_time[{role.name}] must satisfy 10 <= lo <= hi")
    _check_prob("hospital_prob", c.hospital_prob)
    _check_prob("sick_outing_reduction", c.sick_outing_reduction)
    _check_prob("beta", c.beta)
    _check_prob("gamma0", c.gamma0)
    _check_prob("gamma1", c.gamma1)
    if c.ward_capacity > 0 and c.hospital_prob > 0 and c.gamma0 < c.gamma1:
        raise ConfigError("gamma0 < gamma1")
    for name in ("incubation_set", "infectious_set"):
        values = getattr(c, name)
        if not values or any(not isinstance(v, int) or v < 1 for v in values):
            raise ConfigError(f"{name} must be non-empty positive integers")
    _check_prob("app.usage_rate", c.app.usage_rate)
    _check_prob("app.outing_reduction", c.app.outing_reduction)
    _check_prob("app.registration_rate", c.app.registration_rate)
    if not c.travel_speed > 0:
        raise ConfigError("travel_speed <= 0")
    if not c.contact_radius > 0:
        raise ConfigError("contact_radius <= 0")
    if c.notification_days < 0:
        raise ConfigError("notification_days < 0")
    if c.slope_epsilon < 0:
        raise ConfigError("slope_epsilon < 0")
    return c


# ---------------------------------------------------------------------------
# JSON documents: percentages for probabilities, "HH:MM" for times.

_PERCENT_FIELDS = ("hospital_prob", "sick_outing_reduction", "beta", "gamma0", "gamma1")
_APP_FIELDS = ("usage_rate", "outing_reduction", "registration_rate")


def parse_clock(text: str) -> int:
    """``"8:30"`` -> 510 minutes."""
    try:
        h, m = str(text).split(":")
        h, m = int(h), int(m)
    except ValueError:
        raise ConfigError(f"bad clock time {text!r}, expected HH:MM") from None
    if h < 0 or not 0 <= m < 60:
        raise ConfigError(f"bad clock time {text!r}")
    return 60 * h + m


def format_clock(minutes: float) -> str:
    minutes = int(round(minutes))
    return f"{minutes // 60}:{minutes % 60:02d}"


def _role_map(doc, name, convert):
    if not isinstance(doc, dict):
        raise ConfigError(f"{name} must map role names to values")
    out = {}
    for key, value in doc.items():
        try:
            role = AgentRole[key]
        except KeyError:
            raise ConfigError(f"{name}: unknown role {key!r}") from None
        out[role] = tuple(convert(v) for v in value)
    return out


def config_from_dict(doc: dict, base: Optional[ScenarioConfig] = None) -> ScenarioConfig:
    """Build a validated config from a JSON-style document.

    Missing fields fall back to ``base`` (the built-in defaults if omitted).
    """
    try:
        return _config_from_dict(doc, base)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ConfigError(f"bad config value: {exc!r}") from None


def _config_from_dict(doc: dict, base: Optional[ScenarioConfig]) -> ScenarioConfig:
    base = base or ScenarioConfig()
    known = {f.name for f in fields(ScenarioConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config field(s): {', '.join(sorted(unknown))}")
    kw = {}
    for name in ("max_days", "n_houses", "n_initial_infected", "ward_capacity",
                 "notification_days"):
        if name in doc:
            kw[name] = int(doc[name])
    for name in ("travel_speed", "contact_radius", "slope_epsilon"):
        if name in doc:
            kw[name] = float(doc[name])
    for name in _PERCENT_FIELDS:
        if name in doc:
            kw[name] = float(doc[name]) / 100.0
    for name in ("incubation_set", "infectious_set"):
        if name in doc:
            kw[name] = tuple(int(v) for v in doc[name])
    if "facilities" in doc:
        facs = []
        for i, item in enumerate(doc["facilities"]):
            try:
                kind = FacilityKind[item["kind"]]
            except KeyError:
                raise ConfigError(f"facility {i}: bad kind {item.get('kind')!r}") from None
            x, y = item["location"]
            facs.append(Facility(int(item.get("id", i)), kind, (float(x), float(y))))
        kw["facilities"] = tuple(facs)
    if "go_out_prob_range" in doc:
        kw["go_out_prob_range"] = {**base.go_out_prob_range,
                                   **_role_map(doc["go_out_prob_range"], "go_out_prob_range",
                                               lambda v: float(v) / 100.0)}
    if "depart_time" in doc:
        kw["depart_time"] = {**base.depart_time,
                             **_role_map(doc["depart_time"], "depart_time", parse_clock)}
    if "stay_time" in doc:
        kw["stay_time"] = {**base.stay_time,
                           **_role_map(doc["stay_time"], "stay_time", parse_clock)}
    if "app" in doc:
        app = doc["app"]
        bad = set(app) - set(_APP_FIELDS)
        if bad:
            raise ConfigError(f"unknown app field(s): {', '.join(sorted(bad))}")
        cur = base.app
        kw["app"] = AppParams(*(float(app[k]) / 100.0 if k in app else getattr(cur, k)
                                for k in _APP_FIELDS))
    return validate_config(replace(base, **kw))


def config_to_dict(config: ScenarioConfig) -> dict:
    """Inverse of :func:`config_from_dict` (percentages and HH:MM strings)."""
    def pct(p):
        # shortest percentage that reads back as exactly ``p``
        for digits in range(12, 18):
            v = round(p * 100.0, digits)
            if v / 100.0 == p:
                return v
        return p * 100.0

    return {
        "max_days": config.max_days,
        "n_houses": config.n_houses,
        "n_initial_infected": config.n_initial_infected,
        "facilities": [{"id": f.id, "kind": f.kind.name, "location": list(f.location)}
                       for f in config.facilities],
        "ward_capacity": config.ward_capacity,
        "go_out_prob_range": {r.name: [pct(v) for v in config.go_out_prob_range[r]]
                              for r in AgentRole},
        "depart_time": {r.name: [format_clock(v) for v in config.depart_time[r]]
                        for r in AgentRole},
        "stay_time": {r.name: [format_clock(v) for v in config.stay_time[r]]
                      for r in AgentRole},
        "hospital_prob": pct(config.hospital_prob),
        "sick_outing_reduction": pct(config.sick_outing_reduction),
        "beta": pct(config.beta),
        "gamma0": pct(config.gamma0),
        "gamma1": pct(config.gamma1),
        "incubation_set": list(config.incubation_set),
        "infectious_set": list(config.infectious_set),
        "app": {k: pct(v) for k, v in zip(_APP_FIELDS, config.app.as_tuple())},
        "travel_speed": config.travel_speed,
        "contact_radius": config.contact_radius,
        "notification_days": config.notification_days,
        "slope_epsilon": config.slope_epsilon,
    }


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return config_from_dict(doc)


# ---------------------------------------------------------------------------
# Population

def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def app_user_count(usage_rate: float, population: int) -> int:
    return round_half_up(usage_rate * population)


def _smallest_k(keys: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` smallest keys (ties by index), i.e. a uniform k-subset."""
    order = np.argsort(keys, kind="stable")
    return np.sort(order[:k])


@dataclass
class PopulationArrays:
    """Column-wise population, agent ``i`` living in house ``i // 3``."""

    house_xy: np.ndarray
    role: np.ndarray
    house_id: np.ndarray
    facility_id: np.ndarray
    home: np.ndarray
    destination: np.ndarray
    base_go_out_prob: np.ndarray
    incubation_days: np.ndarray
    infectious_days: np.ndarray
    initially_infected: np.ndarray
    app_user: np.ndarray


def population_arrays(config: ScenarioConfig, rng: RngStream) -> PopulationArrays:
    """Draw the population structure from the Init stream ``rng``.

    Draw order is fixed (house coordinates, facility choice, base outing
    probability, incubation, infectious period, infection keys, app keys) and
    every block is drawn whatever the parameters, so the structure never
    depends on the app parameters. Registration is not drawn here.
    """
    config = validate_config(config)
    n_h = config.n_houses
    n = config.population

    house_xy = rng.take(2 * n_h).reshape(n_h, 2) * WORLD_SIZE
    u_fac = rng.take(n)
    u_base = rng.take(n)
    u_inc = rng.take(n)
    u_inf = rng.take(n)
    infect_keys = rng.take(n)
    app_keys = rng.take(n)

    role = np.tile(np.arange(3, dtype=np.int64), n_h)
    house_id = np.repeat(np.arange(n_h, dtype=np.int64), 3)
    facility_id = np.empty(n, dtype=np.int64)
    destination = np.empty((n, 2), dtype=np.float64)
    base = np.empty(n, dtype=np.float64)
    for r in AgentRole:
        sel = role == int(r)
        options = config.facilities_of(ROLE_FACILITY[r])
        pick = np.minimum((u_fac[sel] * len(options)).astype(np.int64), len(options) - 1)
        facility_id[sel] = np.array([f.id for f in options])[pick]
        destination[sel] = np.array([f.location for f in options], dtype=np.float64)[pick]
        lo, hi = config.go_out_prob_range[r]
        base[sel] = lo + (hi - lo) * u_base[sel]

    def pick_from(values, u):
        idx = np.minimum((u * len(values)).astype(np.int64), len(values) - 1)
        return np.asarray(values, dtype=np.int64)[idx]

    infected = np.zeros(n, dtype=bool)
    infected[_smallest_k(infect_keys, config.n_initial_infected)] = True
    users = np.zeros(n, dtype=bool)
    users[_smallest_k(app_keys, app_user_count(config.app.usage_rate, n))] = True
    return PopulationArrays(
        house_xy=house_xy, role=role, house_id=house_id, facility_id=facility_id,
        home=house_xy[house_id], destination=destination, base_go_out_prob=base,
        incubation_days=pick_from(config.incubation_set, u_inc),
        infectious_days=pick_from(config.infectious_set, u_inf),
        initially_infected=infected, app_user=users)


def build_population(config: ScenarioConfig, rng: RngStream) -> tuple[list[Agent], list[House]]:
    """Houses and agents for one run; see :func:`population_arrays`.

    Initial infectors who use the app make their registration draw here,
    from their own App stream.
    """
    from .appmodel import maybe_register

    pop = population_arrays(config, rng)
    houses = [House(h, (float(x), float(y))) for h, (x, y) in enumerate(pop.house_xy)]
    agents = []
    for i in range(pop.role.size):
        a = Agent(
            id=i,
            role=AgentRole(int(pop.role[i])),
            house_id=int(pop.house_id[i]),
            facility_id=int(pop.facility_id[i]),
            home=houses[pop.house_id[i]].location,
            destination=(float(pop.destination[i, 0]), float(pop.destination[i, 1])),
            incubation_days=int(pop.incubation_days[i]),
            infectious_days=int(pop.infectious_days[i]),
            base_go_out_prob=float(pop.base_go_out_prob[i]),
            app_user=bool(pop.app_user[i]),
            position=houses[pop.house_id[i]].location,
        )
        if pop.initially_infected[i]:
            a.state = InfectionState.I
            maybe_register(a, config.app.registration_rate,
                           derive_stream(rng.master_seed, Domain.APP, a.id))
        agents.append(a)
    return agents, houses
