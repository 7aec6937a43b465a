"""Method dispatch with scoring for the studies."""

import logging
from dataclasses import dataclass

import numpy as np

from ghostkit.acquisition.masks import AcquisitionSet
from ghostkit.algorithms.engines import ReconReport, reconstruct
from ghostkit.experiments.spec import ExperimentSpec, MethodSettings
from ghostkit.scoring.metrics import MetricBundle, QualityScorer

logger = logging.getLogger(__name__)

@dataclass
class ScoredRun:
    """One reconstruction of one realization set, scored against the phantom."""
    settings: MethodSettings
    photons: float
    repeat: int
    report: ReconReport
    metrics: MetricBundle


def score_report(report: ReconReport, reference: np.ndarray, hann: bool = False) -> MetricBundle:
    bundle = QualityScorer(hann=hann).score(report.image, reference)
    report.metrics = bundle.to_dict()
    return bundle


def run_method(
    spec: ExperimentSpec,
    settings: MethodSettings,
    acquisition: AcquisitionSet,
    repeat: int = 0,
) -> ReconReport:
    model, train, variational = spec.configs(settings, repeat)
    logger.debug("reconstructing with %s (repeat %d)", settings.method.value, repeat)
    return reconstruct(settings.method, acquisition.masks, acquisition.buckets, model, train, variational)


def run_scored(
    spec: ExperimentSpec,
    settings: MethodSettings,
    photons: float,
    repeat: int,
    phantom: np.ndarray,
) -> ScoredRun:
    acquisition = spec.acquire(phantom, photons, repeat)
    report = run_method(spec, settings, acquisition, repeat)
    return ScoredRun(settings, photons, repeat, report, score_report(report, phantom))
