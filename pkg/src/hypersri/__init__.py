"""Viewer-response indicator pipeline with a hypergraph classification core.

Subpackages cover per-timestamp indicators (`signals`), demographic
aggregation (`aggregation`), adaptive scene detection (`scenes`), k-NN
hypergraph construction and the spectral layer (`hypergraph`), the toy
multimodal model and its two-stage trainer (`model`, `training`), seeded
synthetic data (`synth`), and the evaluation harness (`metrics`, `harness`).
"""

__version__ = "0.1.0"

from .signals import (  # noqa: F401
    BandPowerSample,
    GazeSample,
    Indicator,
    SriClass,
    classify,
    compute_emotion,
    compute_emr,
    compute_engagement,
)
