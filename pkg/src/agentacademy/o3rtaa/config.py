"""Scenario configuration: INI-style key/value sections.

Example::

    [simulation]
    seed = 1
    ticks = 240
    stations = 25
    locations = valencia, castellon, alicante, elche, gandia

    [variable ozone]
    bounds = 0, 400
    thresholds = 60, 180

    [hidden_truth]
    tree = (node ozone (low (leaf 0)) (normal (leaf 1)) (high (leaf 3)))

    [user ana]
    alarms = 2, 3
    location = valencia
    channels = email 9-17, sms 0-24

    [ontology O3RTAAEnglish]
    terms = pressure, ozone, nitrogen, alarm type, location

    [map O3RTAAEnglish -> O3RTAATurkish]
    pressure = basinc
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

from ..mining import CATEGORIES, DecisionTree, Discretizer, Leaf, tree_attributes, tree_from_sl, tree_to_sl
from ..sl import print_sl

__all__ = [
    "ConfigError", "Channel", "UserProfile", "VariableSpec", "ScenarioConfig",
    "load_config", "loads_config", "dump_config", "DEFAULT_HIDDEN_TRUTH",
]


def _covers(tree) -> bool:
    if isinstance(tree, Leaf):
        return True
    return set(tree.branches) == set(CATEGORIES) and all(_covers(t) for t in tree.branches.values())


class ConfigError(ValueError):
    def __init__(self, path: str, reason: str):
        super().__init__(f"{path}: {reason}")
        self.path = path


@dataclass(frozen=True)
class Channel:
    name: str
    start: int
    end: int

    def contains(self, hour: int) -> bool:
        if self.start == self.end:
            return False
        if self.start < self.end:
            return self.start <= hour < self.end
        return hour >= self.start or hour < self.end

    def __str__(self):
        return f"{self.name} {self.start}-{self.end}"


@dataclass(frozen=True)
class UserProfile:
    user_id: str
    subscribed: frozenset[int]
    location: str
    mobile: bool = False
    channels: tuple[Channel, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "subscribed", frozenset(self.subscribed))
        object.__setattr__(self, "channels", tuple(self.channels))
        if not self.channels:
            raise ValueError(f"user {self.user_id} has no channels")


@dataclass(frozen=True)
class VariableSpec:
    """Physical bounds, discretization thresholds and per-regime sampling ranges.

    ``ranges`` maps low/normal/high to the interval readings are drawn from
    in that regime; each must sit inside its own category so that a
    noise-free reading discretizes back to its regime.
    """

    bounds: tuple[float, float]
    thresholds: tuple[float, float]
    ranges: Mapping[str, tuple[float, float]] | None = None

    def __post_init__(self):
        lo, hi = self.bounds
        t_lo, t_hi = self.thresholds
        if not lo < t_lo < t_hi < hi:
            raise ValueError("need bound_low < t_low < t_high < bound_high")
        ranges = dict(self.ranges) if self.ranges is not None else {
            "low": (lo, round(t_lo - 0.01, 2)), "normal": (t_lo, t_hi), "high": (round(t_hi + 0.01, 2), hi),
        }
        if set(ranges) != set(CATEGORIES):
            raise ValueError(f"ranges must cover exactly {list(CATEGORIES)}")
        for cat, (a, b) in ranges.items():
            if a > b:
                raise ValueError(f"{cat} range is empty")
        if not (lo <= ranges["low"][0] and ranges["low"][1] < t_lo):
            raise ValueError("low range must lie in [bound_low, t_low)")
        if not (t_lo <= ranges["normal"][0] and ranges["normal"][1] <= t_hi):
            raise ValueError("normal range must lie in [t_low, t_high]")
        if not (t_hi < ranges["high"][0] and ranges["high"][1] <= hi):
            raise ValueError("high range must lie in (t_high, bound_high]")
        object.__setattr__(self, "ranges", {c: tuple(ranges[c]) for c in CATEGORIES})

    def __hash__(self):
        return hash((self.bounds, self.thresholds, tuple(self.ranges.items())))


DEFAULT_HIDDEN_TRUTH = (
    "(node ozone"
    " (low (leaf 0))"
    " (normal (node NO2NO3 (low (leaf 0)) (normal (leaf 1)) (high (leaf 2))))"
    " (high (node pressure (low (leaf 3)) (normal (leaf 3)) (high (leaf 2)))))"
)


def _default_variables() -> dict[str, VariableSpec]:
    return {
        "NO2NO3": VariableSpec((0.0, 400.0), (40.0, 200.0)),
        "ozone": VariableSpec((0.0, 400.0), (60.0, 180.0)),
        "pressure": VariableSpec((900.0, 1100.0), (1000.0, 1025.0)),
    }


def _default_users() -> tuple[UserProfile, ...]:
    office = (Channel("email", 9, 17), Channel("html", 17, 22))
    return (
        UserProfile("ana", {2, 3}, "valencia", False, office),
        UserProfile("bora", {1, 2, 3}, "valencia", True, (Channel("html", 8, 20),)),
        UserProfile("carmen", {3}, "castellon", False, (Channel("email", 9, 17),)),
        UserProfile("deniz", {1, 2, 3}, "alicante", True, (Channel("sms", 0, 24),)),
        UserProfile("elena", {2, 3}, "elche", False, office),
        UserProfile("hospital_gandia", {1, 2, 3}, "gandia", False, (Channel("email", 0, 24),)),
        UserProfile("civil_protection", {2, 3}, "valencia", False, (Channel("email", 9, 17),)),
    )


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 1
    ticks: int = 240
    stations: int = 25
    locations: tuple[str, ...] = ("valencia", "castellon", "alicante", "elche", "gandia")
    fault_prob: float = 0.02
    regime_stay: float = 0.7
    day_length: int = 24
    mobility: float = 0.1
    variables: Mapping[str, VariableSpec] = field(default_factory=_default_variables)
    hidden_truth: DecisionTree = field(default_factory=lambda: tree_from_sl(DEFAULT_HIDDEN_TRUTH))
    users: tuple[UserProfile, ...] = field(default_factory=_default_users)
    threshold_k: int = 5
    window: int = 50
    epsilon: float = 0.1
    retrain_every: int = 200
    urgent_threshold: int = 3
    institutional_fraction: float = 0.2
    individual_accuracy: float = 0.9
    authority: str = "authority"
    ontologies: Mapping[str, tuple[str, ...]] = field(default_factory=lambda: {
        "O3RTAAEnglish": ("pressure", "ozone", "nitrogen", "alarm type", "location", "NO2NO3"),
        "O3RTAATurkish": ("basinc", "ozon", "azot", "alarm tipi", "konum", "NO2NO3"),
    })
    term_maps: tuple[tuple[str, str, Mapping[str, str]], ...] = field(default_factory=lambda: (
        ("O3RTAAEnglish", "O3RTAATurkish", {
            "pressure": "basinc", "ozone": "ozon", "nitrogen": "azot",
            "alarm type": "alarm tipi", "location": "konum", "NO2NO3": "NO2NO3",
        }),
    ))
    shared_ontology: str = "O3RTAAEnglish"
    log: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        def check(cond, path, reason):
            if not cond:
                raise ConfigError(path, reason)

        check(self.ticks >= 0, "simulation.ticks", "must be >= 0")
        check(self.stations >= 1, "simulation.stations", "must be >= 1")
        check(len(self.locations) >= 1, "simulation.locations", "need at least one location")
        check(len(set(self.locations)) == len(self.locations), "simulation.locations", "duplicate location")
        check(0.0 <= self.fault_prob < 1.0, "simulation.fault_prob", "must be in [0, 1)")
        check(0.0 <= self.regime_stay <= 1.0, "simulation.regime_stay", "must be in [0, 1]")
        check(self.day_length >= 1, "simulation.day_length", "must be >= 1")
        check(0.0 <= self.mobility <= 1.0, "simulation.mobility", "must be in [0, 1]")
        check(len(self.variables) >= 1, "variable", "need at least one variable")
        missing = tree_attributes(self.hidden_truth) - set(self.variables)
        check(not missing, "hidden_truth.tree", f"unknown attributes {sorted(missing)}")
        check(_covers(self.hidden_truth), "hidden_truth.tree", f"every node needs branches {list(CATEGORIES)}")
        check(self.threshold_k >= 1, "policy.threshold_k", "must be >= 1")
        check(self.window >= 1, "policy.window", "must be >= 1")
        check(0.0 <= self.epsilon <= 1.0, "policy.epsilon", "must be in [0, 1]")
        check(self.retrain_every >= 1, "policy.retrain_every", "must be >= 1")
        check(1 <= self.urgent_threshold <= 3, "policy.urgent_threshold", "must be in 1..3")
        check(0.0 <= self.institutional_fraction <= 1.0, "feedback.institutional_fraction", "must be in [0, 1]")
        check(0.0 <= self.individual_accuracy <= 1.0, "feedback.individual_accuracy", "must be in [0, 1]")
        check(self.shared_ontology in self.ontologies, "ontology", f"shared ontology {self.shared_ontology} undefined")
        for u in self.users:
            check(u.location in self.locations, f"user {u.user_id}.location", f"unknown location {u.location}")
            for c in u.channels:
                check(0 <= c.start <= self.day_length and 0 <= c.end <= self.day_length,
                      f"user {u.user_id}.channels", "window outside the day")

    @property
    def schema(self) -> tuple[tuple[str, tuple[str, ...]], ...]:
        return tuple((v, CATEGORIES) for v in sorted(self.variables))

    @property
    def discretizer(self) -> Discretizer:
        return Discretizer({v: spec.thresholds for v, spec in self.variables.items()})

    def with_overrides(self, **kw) -> "ScenarioConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def _floats(text: str, path: str, n: int) -> tuple[float, ...]:
    try:
        out = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise ConfigError(path, f"expected {n} comma-separated numbers") from None
    if len(out) != n:
        raise ConfigError(path, f"expected {n} comma-separated numbers")
    return out


def _split(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _parse_channel(text: str, path: str) -> Channel:
    try:
        name, window = text.split()
        start, end = (int(x) for x in window.split("-"))
    except ValueError:
        raise ConfigError(path, f"channel must look like 'email 9-17', got {text!r}") from None
    if name not in ("email", "sms", "html"):
        raise ConfigError(path, f"unknown channel {name!r}")
    return Channel(name, start, end)


def _bool(text: str, path: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "yes", "true", "on"):
        return True
    if low in ("0", "no", "false", "off"):
        return False
    raise ConfigError(path, f"expected a boolean, got {text!r}")


_SCALARS = {
    "simulation": {"seed": int, "ticks": int, "stations": int, "fault_prob": float, "regime_stay": float,
                   "day_length": int, "mobility": float},
    "policy": {"threshold_k": int, "window": int, "epsilon": float, "retrain_every": int, "urgent_threshold": int},
    "feedback": {"institutional_fraction": float, "individual_accuracy": float},
}


def loads_config(text: str) -> ScenarioConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("<file>", str(exc)) from None

    kw: dict = {}
    variables: dict[str, VariableSpec] = {}
    users: list[UserProfile] = []
    ontologies: dict[str, tuple[str, ...]] = {}
    maps: list = []
    for section in parser.sections():
        sec = parser[section]
        kind, _, name = section.partition(" ")
        name = name.strip()
        if kind in _SCALARS and not name:
            for key, value in sec.items():
                path = f"{kind}.{key}"
                if key == "locations" and kind == "simulation":
                    kw["locations"] = tuple(_split(value))
                elif key == "log" and kind == "simulation":
                    kw["log"] = value.strip() or None
                elif key == "authority" and kind == "feedback":
                    kw["authority"] = value.strip()
                elif key in _SCALARS[kind]:
                    try:
                        kw[key] = _SCALARS[kind][key](value)
                    except ValueError:
                        raise ConfigError(path, f"expected {_SCALARS[kind][key].__name__}, got {value!r}") from None
                else:
                    raise ConfigError(path, "unknown key")
        elif kind == "variable" and name:
            path = f"variable {name}"
            try:
                unknown = set(sec) - {"bounds", "thresholds", *CATEGORIES}
                if unknown:
                    raise ConfigError(f"{path}.{sorted(unknown)[0]}", "unknown key")
                ranges = {c: _floats(sec[c], f"{path}.{c}", 2) for c in CATEGORIES if c in sec}
                if ranges and len(ranges) != len(CATEGORIES):
                    raise ConfigError(path, "give all of low, normal, high ranges or none")
                variables[name] = VariableSpec(
                    _floats(sec.get("bounds", ""), f"{path}.bounds", 2),
                    _floats(sec.get("thresholds", ""), f"{path}.thresholds", 2),
                    ranges or None,
                )
            except ValueError as exc:
                if isinstance(exc, ConfigError):
                    raise
                raise ConfigError(path, str(exc)) from None
        elif kind == "hidden_truth" and not name:
            try:
                kw["hidden_truth"] = tree_from_sl(sec.get("tree", ""))
            except ValueError as exc:
                raise ConfigError("hidden_truth.tree", str(exc)) from None
        elif kind == "user" and name:
            path = f"user {name}"
            try:
                alarms = frozenset(int(x) for x in _split(sec.get("alarms", "")))
            except ValueError:
                raise ConfigError(f"{path}.alarms", "expected alarm codes") from None
            if not alarms <= {1, 2, 3}:
                raise ConfigError(f"{path}.alarms", "alarm codes must be in 1..3")
            channels = tuple(_parse_channel(c, f"{path}.channels") for c in _split(sec.get("channels", "")))
            if not channels:
                raise ConfigError(f"{path}.channels", "at least one channel required")
            users.append(UserProfile(name, alarms, sec.get("location", "").strip(),
                                     _bool(sec.get("mobile", "no"), f"{path}.mobile"), channels))
        elif kind == "ontology" and name:
            terms = tuple(_split(sec.get("terms", "")))
            if not terms:
                raise ConfigError(f"ontology {name}.terms", "need at least one term")
            ontologies[name] = terms
        elif kind == "map" and "->" in name:
            src, dst = (x.strip() for x in name.split("->"))
            maps.append((src, dst, dict(sec.items())))
        elif kind == "ontology_default" and not name:
            kw["shared_ontology"] = sec.get("name", "").strip()
        else:
            raise ConfigError(section, "unknown section")
    if variables:
        kw["variables"] = variables
    if users:
        kw["users"] = tuple(users)
    if ontologies:
        kw["ontologies"] = ontologies
        kw["term_maps"] = ()
    if maps:
        kw["term_maps"] = tuple(maps)
    try:
        return ScenarioConfig(**kw)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError("<config>", str(exc)) from None


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(str(path), str(exc)) from None
    return loads_config(text)


def _num(x: float) -> str:
    return repr(float(x))


def dump_config(cfg: ScenarioConfig) -> str:
    """Inverse of :func:`loads_config` (up to formatting)."""
    out = ["[simulation]"]
    for key in ("seed", "ticks", "stations"):
        out.append(f"{key} = {getattr(cfg, key)}")
    out.append(f"locations = {', '.join(cfg.locations)}")
    for key in ("fault_prob", "regime_stay", "day_length", "mobility"):
        out.append(f"{key} = {getattr(cfg, key)}")
    if cfg.log:
        out.append(f"log = {cfg.log}")
    for name in sorted(cfg.variables):
        spec = cfg.variables[name]
        out += ["", f"[variable {name}]",
                f"bounds = {_num(spec.bounds[0])}, {_num(spec.bounds[1])}",
                f"thresholds = {_num(spec.thresholds[0])}, {_num(spec.thresholds[1])}"]
        out += [f"{c} = {_num(a)}, {_num(b)}" for c, (a, b) in spec.ranges.items()]
    out += ["", "[hidden_truth]", f"tree = {print_sl(tree_to_sl(cfg.hidden_truth))}"]
    out += ["", "[policy]"] + [f"{k} = {getattr(cfg, k)}" for k in _SCALARS["policy"]]
    out += ["", "[feedback]"] + [f"{k} = {getattr(cfg, k)}" for k in _SCALARS["feedback"]]
    out.append(f"authority = {cfg.authority}")
    for u in cfg.users:
        out += ["", f"[user {u.user_id}]",
                f"alarms = {', '.join(str(a) for a in sorted(u.subscribed))}",
                f"location = {u.location}",
                f"mobile = {'yes' if u.mobile else 'no'}",
                f"channels = {', '.join(str(c) for c in u.channels)}"]
    for name, terms in cfg.ontologies.items():
        out += ["", f"[ontology {name}]", f"terms = {', '.join(terms)}"]
    for src, dst, pairs in cfg.term_maps:
        out += ["", f"[map {src} -> {dst}]"] + [f"{a} = {b}" for a, b in pairs.items()]
    out += ["", "[ontology_default]", f"name = {cfg.shared_ontology}"]
    return "\n".join(out) + "\n"
