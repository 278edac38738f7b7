"""Covert communication through a STAR-RIS with a full-duplex jamming receiver.

Closed-form detection and outage analytics, a GCMMA solver for the joint
beamforming design, Monte Carlo oracles and a seeded sweep runner.
"""
from .model import SystemParams, sample_channels
from .problem import make_instance, baseline_ris_instance
from .gcmma import optimize

__all__ = ["SystemParams", "sample_channels", "make_instance", "baseline_ris_instance",
           "optimize"]
__version__ = "0.1.0"
