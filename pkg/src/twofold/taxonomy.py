"""Demand pattern classification from ADI and CV^2."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import DemandSeries

ADI_CUTOFF = 1.32
CV2_CUTOFF = 0.49


class UndefinedPatternError(ValueError):
    """The series has no demand, so ADI and CV^2 are undefined."""


class Quadrant(str, enum.Enum):
    SMOOTH = "Smooth"
    ERRATIC = "Erratic"
    INTERMITTENT = "Intermittent"
    LUMPY = "Lumpy"


class Schema2(str, enum.Enum):
    R = "R"
    C_PLUS_R = "C_plus_R"


@dataclass(frozen=True)
class PatternProfile:
    adi: float
    cv2: float
    quadrant: Quadrant
    schema2: Schema2


def _values(series) -> np.ndarray:
    if isinstance(series, DemandSeries):
        return series.values
    return np.asarray(series, dtype=float)


def adi(series, weekdays_only: bool = False) -> float:
    """Total periods over periods with positive demand.

    All calendar days count as periods unless ``weekdays_only`` is set, in
    which case Saturdays and Sundays are dropped first (only possible for a
    :class:`DemandSeries`, which knows its dates).
    """
    values = _values(series)
    if weekdays_only:
        if not isinstance(series, DemandSeries):
            raise TypeError("weekdays_only needs a DemandSeries")
        values = values[np.is_busday(series.dates)]
    buckets = np.count_nonzero(values > 0)
    if buckets == 0:
        raise UndefinedPatternError("ADI undefined for a series without demand")
    return len(values) / buckets


def cv2(series, ddof: int = 0) -> float:
    """Squared coefficient of variation of the nonzero demand sizes.

    ``ddof=0`` uses the population standard deviation; ``ddof=1`` the
    sample one (a single demand then gives 0 by convention).
    """
    sizes = _values(series)
    sizes = sizes[sizes > 0]
    if len(sizes) == 0:
        raise UndefinedPatternError("CV^2 undefined for a series without demand")
    if len(sizes) <= ddof:
        return 0.0
    mean = sizes.mean()
    return float((sizes.std(ddof=ddof) / mean) ** 2)


def quadrant_of(adi_value: float, cv2_value: float,
                adi_cutoff: float = ADI_CUTOFF, cv2_cutoff: float = CV2_CUTOFF) -> Quadrant:
    irregular = adi_value >= adi_cutoff
    variable = cv2_value >= cv2_cutoff
    if irregular:
        return Quadrant.LUMPY if variable else Quadrant.INTERMITTENT
    return Quadrant.ERRATIC if variable else Quadrant.SMOOTH


def schema2_of(adi_value: float, adi_cutoff: float = ADI_CUTOFF) -> Schema2:
    return Schema2.C_PLUS_R if adi_value >= adi_cutoff else Schema2.R


def classify(series, adi_cutoff: float = ADI_CUTOFF, cv2_cutoff: float = CV2_CUTOFF,
             ddof: int = 0, weekdays_only: bool = False) -> PatternProfile:
    a = adi(series, weekdays_only=weekdays_only)
    c = cv2(series, ddof=ddof)
    return PatternProfile(a, c, quadrant_of(a, c, adi_cutoff, cv2_cutoff),
                          schema2_of(a, adi_cutoff))


def profile_from_stats(adi_value: float, cv2_value: float,
                       adi_cutoff: float = ADI_CUTOFF, cv2_cutoff: float = CV2_CUTOFF) -> PatternProfile:
    return PatternProfile(adi_value, cv2_value,
                          quadrant_of(adi_value, cv2_value, adi_cutoff, cv2_cutoff),
                          schema2_of(adi_value, adi_cutoff))
