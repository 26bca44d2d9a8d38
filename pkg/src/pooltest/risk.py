"""Population risk models."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

from .errors import DomainError
from .strategy import Stratum


def _check_rate(r) -> None:
    if not (0 <= r <= 1):
        raise DomainError(f"rate {r} outside [0, 1]")


@dataclass(frozen=True)
class RiskModel:
    kind: str                      # "homogeneous" | "two_group" | "stratified"
    x: float = 0.0                 # homogeneous rate / high-risk rate
    y: Optional[float] = None      # low-risk rate (two_group)
    strata: Tuple[Tuple[float, float], ...] = ()   # (rate, weight) pairs

    def rate_for(self, stratum: Stratum):
        if stratum == Stratum.LOW_RISK_LOWER and self.kind == "two_group":
            return self.y
        return self.x


def homogeneous(x) -> RiskModel:
    _check_rate(x)
    return RiskModel("homogeneous", x=x)


def two_group(x, y) -> RiskModel:
    _check_rate(x)
    _check_rate(y)
    return RiskModel("two_group", x=x, y=y)


def stratified(strata) -> RiskModel:
    strata = tuple((r, w) for r, w in strata)
    for r, w in strata:
        _check_rate(r)
        if w <= 0:
            raise DomainError("stratum weights must be positive")
    return RiskModel("stratified", x=strata[0][0], strata=strata)
