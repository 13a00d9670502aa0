"""Detection-efficiency chains and n-fold coincidence rates."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class EfficiencyChain:
    stages: tuple = ()  # (name, transmission) pairs, in optical order
    arm: str = ""

    def __post_init__(self):
        stages = tuple((str(n), float(t)) for n, t in self.stages)
        for name, t in stages:
            if not 0 <= t <= 1:
                raise ValueError(f"stage {name!r} transmission must lie in [0, 1], got {t!r}")
        object.__setattr__(self, "stages", stages)

    def __add__(self, other: "EfficiencyChain") -> "EfficiencyChain":
        return EfficiencyChain(self.stages + other.stages, self.arm or other.arm)

    @classmethod
    def from_dict(cls, doc: dict) -> "EfficiencyChain":
        stages = doc.get("stages", [])
        if isinstance(stages, dict):
            stages = list(stages.items())
        else:
            stages = [(s["name"], s["transmission"]) if isinstance(s, dict) else tuple(s) for s in stages]
        return cls(tuple(stages), doc.get("arm", ""))

    def to_dict(self) -> dict:
        return {"arm": self.arm, "stages": [{"name": n, "transmission": t} for n, t in self.stages]}


def chain_efficiency(chain: EfficiencyChain) -> float:
    return math.prod(t for _, t in chain.stages)


# Filter and detector figures are measured; the rest of each arm (PCF
# absorption, dichroic mirror, fibre coupling) is one residual stage sized to
# reproduce the overall 0.21 / 0.18 collection efficiencies.
SIGNAL_CHAIN = EfficiencyChain(
    (("blocking filter", 0.81), ("detector", 0.59), ("coupling, PCF and dichroic", 0.21 / (0.81 * 0.59))),
    "signal",
)
IDLER_CHAIN = EfficiencyChain(
    (("blocking filter", 0.65), ("detector", 0.40), ("coupling, PCF and dichroic", 0.18 / (0.65 * 0.40))),
    "idler",
)


def nfold_rate(rep_rate: float, p_pair: float, efficiencies) -> float:
    """rep * p^(n/2) * prod(mu) for n detected photons from n/2 pair sources."""
    eff = [float(e) for e in efficiencies]
    if len(eff) % 2:
        raise ValueError(f"photons come in pairs: need an even number of efficiencies, got {len(eff)}")
    if not rep_rate >= 0:
        raise ValueError("repetition rate must be >= 0")
    if not 0 <= p_pair <= 1:
        raise ValueError(f"pair probability must lie in [0, 1], got {p_pair!r}")
    for e in eff:
        if not 0 <= e <= 1:
            raise ValueError(f"efficiency must lie in [0, 1], got {e!r}")
    return rep_rate * p_pair ** (len(eff) // 2) * math.prod(eff)


def accidental_rate(singles_rates, coincidence_window: float) -> float:
    """prod(singles) * window^(n-1)."""
    rates = [float(r) for r in singles_rates]
    if not coincidence_window > 0:
        raise ValueError("coincidence window must be > 0")
    if any(r < 0 for r in rates):
        raise ValueError("singles rates must be >= 0")
    if not rates:
        return 0.0
    return math.prod(rates) * coincidence_window ** (len(rates) - 1)


@dataclass(frozen=True)
class RateReport:
    rep_rate: float
    p_pair: float
    efficiencies: tuple
    rate: float = field(init=False)
    accidentals: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "efficiencies", tuple(float(e) for e in self.efficiencies))
        object.__setattr__(self, "rate", nfold_rate(self.rep_rate, self.p_pair, self.efficiencies))

    @property
    def n(self) -> int:
        return len(self.efficiencies)

    def to_dict(self) -> dict:
        doc = {
            "rep_rate_hz": float(f"{self.rep_rate:.9g}"),
            "p_pair": float(f"{self.p_pair:.9g}"),
            "efficiencies": [float(f"{e:.9g}") for e in self.efficiencies],
            "n_fold": self.n,
            "rate_hz": float(f"{self.rate:.9g}"),
        }
        if self.accidentals is not None:
            doc["accidental_rate_hz"] = float(f"{self.accidentals:.9g}")
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)
