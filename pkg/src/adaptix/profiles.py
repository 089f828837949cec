"""Demographic segments and synthetic client populations."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

import numpy as np

MAX_SAMPLED_AGE = 80


class UnderAge(ValueError):
    pass


class InvalidDistribution(ValueError):
    pass


class Segment(Enum):
    AGE_18_25 = "18-25"
    AGE_26_35 = "26-35"
    AGE_36_45 = "36-45"
    AGE_46_PLUS = "46+"

    @property
    def label(self) -> str:
        return self.value

    @property
    def bracket(self) -> tuple[int, int | None]:
        return _BRACKETS[self]

    @classmethod
    def parse(cls, text: str | Segment) -> Segment:
        """Accept either the label (``18-25``) or the member name (``AGE_18_25``)."""
        if isinstance(text, Segment):
            return text
        key = str(text).strip()
        for seg in cls:
            if key == seg.value or key.upper() == seg.name:
                return seg
        aliases = {">45": cls.AGE_46_PLUS, "46-": cls.AGE_46_PLUS, "46plus": cls.AGE_46_PLUS}
        if key.lower() in aliases:
            return aliases[key.lower()]
        raise ValueError(f"unknown segment {text!r}")


_BRACKETS: dict[Segment, tuple[int, int | None]] = {
    Segment.AGE_18_25: (18, 25),
    Segment.AGE_26_35: (26, 35),
    Segment.AGE_36_45: (36, 45),
    Segment.AGE_46_PLUS: (46, None),
}


class Occupation(Enum):
    STUDENT = "STUDENT"
    PROFESSIONAL = "PROFESSIONAL"
    EMPLOYED = "EMPLOYED"
    OTHER = "OTHER"

    @classmethod
    def parse(cls, text: str | Occupation) -> Occupation:
        if isinstance(text, Occupation):
            return text
        try:
            return cls[str(text).strip().upper()]
        except KeyError:
            raise ValueError(f"unknown occupation {text!r}") from None


@dataclass(frozen=True)
class UserProfile:
    user_id: str
    age: int
    occupation: Occupation = Occupation.OTHER

    def __post_init__(self):
        if self.age < 18:
            raise UnderAge(f"age {self.age} is below 18")


@dataclass(frozen=True)
class PopulationDistribution:
    age_weights: dict[Segment, float]
    occupation_weights: dict[Occupation, float]

    def validate(self) -> None:
        for name, weights in (("age", self.age_weights), ("occupation", self.occupation_weights)):
            if any(w < 0 for w in weights.values()):
                raise InvalidDistribution(f"negative {name} weight")
            if not any(w > 0 for w in weights.values()):
                raise InvalidDistribution(f"all {name} weights are zero")

    def to_dict(self) -> dict:
        return {
            "age_weights": {s.label: self.age_weights.get(s, 0) for s in Segment},
            "occupation_weights": {o.name: self.occupation_weights.get(o, 0) for o in Occupation},
        }

    @classmethod
    def from_dict(cls, data: dict) -> PopulationDistribution:
        try:
            ages = {Segment.parse(k): float(v) for k, v in data["age_weights"].items()}
            occs = {Occupation.parse(k): float(v) for k, v in data["occupation_weights"].items()}
        except (KeyError, AttributeError, TypeError, ValueError) as exc:
            raise InvalidDistribution(f"malformed distribution: {exc}") from exc
        dist = cls(ages, occs)
        dist.validate()
        return dist


def classify(profile: UserProfile | int) -> Segment:
    """Map an age (or a profile's age) to its bracket."""
    age = profile.age if isinstance(profile, UserProfile) else int(profile)
    if age < 18:
        raise UnderAge(f"age {age} is below 18")
    if age <= 25:
        return Segment.AGE_18_25
    if age <= 35:
        return Segment.AGE_26_35
    if age <= 45:
        return Segment.AGE_36_45
    return Segment.AGE_46_PLUS


def default_distribution() -> PopulationDistribution:
    text = resources.files("adaptix").joinpath("data/distribution.json").read_text("utf-8")
    return PopulationDistribution.from_dict(json.loads(text))


def load_distribution(path: str | Path) -> PopulationDistribution:
    with open(path, encoding="utf-8") as fh:
        return PopulationDistribution.from_dict(json.load(fh))


def _normalized(weights: dict, members: list) -> np.ndarray:
    w = np.array([float(weights.get(m, 0.0)) for m in members], dtype=float)
    return w / w.sum()


def sample_population(dist: PopulationDistribution, n: int, seed: int) -> list[UserProfile]:
    if n < 0:
        raise ValueError("n must be non-negative")
    dist.validate()
    segments = list(Segment)
    occupations = list(Occupation)
    rng = np.random.default_rng(seed)
    seg_idx = rng.choice(len(segments), size=n, p=_normalized(dist.age_weights, segments))
    occ_idx = rng.choice(len(occupations), size=n, p=_normalized(dist.occupation_weights, occupations))
    lows = np.array([segments[i].bracket[0] for i in seg_idx], dtype=np.int64)
    highs = np.array(
        [segments[i].bracket[1] or MAX_SAMPLED_AGE for i in seg_idx], dtype=np.int64
    )
    ages = rng.integers(lows, highs + 1) if n else np.empty(0, dtype=np.int64)
    return [
        UserProfile(f"u{i:06d}", int(ages[i]), occupations[occ_idx[i]])
        for i in range(n)
    ]
