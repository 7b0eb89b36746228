"""Affine calibration of automated judge scores against human ratings"""
import math
from typing import Sequence

import numpy as np
from pydantic import BaseModel, Field, field_validator

DEFAULT_SLOPE = 1.015
DEFAULT_INTERCEPT = 0.042


class CalibrationModel(BaseModel):
    """calibrated = slope * raw + intercept, with slope > 0 so rankings are preserved."""
    model_config = {"frozen": True}

    slope: float = Field(DEFAULT_SLOPE, description="Must be positive")
    intercept: float = DEFAULT_INTERCEPT

    @field_validator("slope")
    @classmethod
    def _positive(cls, value: float) -> float:
        if not math.isfinite(value) or value <= 0:
            raise ValueError(f"slope must be a positive finite number, got {value}")
        return value

    def calibrate(self, raw: float) -> float:
        if not math.isfinite(raw):
            raise ValueError(f"raw score must be finite, got {raw}")
        return self.slope * raw + self.intercept


DEFAULT_CALIBRATION = CalibrationModel()


def calibrate(raw: float, model: CalibrationModel = DEFAULT_CALIBRATION) -> float:
    return model.calibrate(raw)


def fit_calibration(raw: Sequence[float], human: Sequence[float]) -> CalibrationModel:
    """Least-squares line through (raw, human) pairs."""
    if len(raw) != len(human):
        raise ValueError(f"{len(raw)} raw scores but {len(human)} human scores")
    if len(raw) < 2:
        raise ValueError("need at least two rated items")
    x = np.asarray(raw, dtype=float)
    if np.allclose(x, x[0]):
        raise ValueError("raw scores have no spread; slope is undefined")
    slope, intercept = np.polyfit(x, np.asarray(human, dtype=float), 1)
    return CalibrationModel(slope=float(slope), intercept=float(intercept))
