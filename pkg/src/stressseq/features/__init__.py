from stressseq.features.hrv import (
    BandSpec,
    RrSeries,
    hrv_freq_features,
    hrv_time_features,
)
from stressseq.features.eda import ScSeries, sc_features
from stressseq.features.phone import PhoneEventLog, phone_features

__all__ = [
    "BandSpec",
    "RrSeries",
    "ScSeries",
    "PhoneEventLog",
    "hrv_time_features",
    "hrv_freq_features",
    "sc_features",
    "phone_features",
]
