"""Noise-level sweep: every method at every photon level, repeated over realization sets."""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from ghostkit.experiments.runner import ScoredRun, run_scored
from ghostkit.experiments.spec import ExperimentSpec
from ghostkit.parallel import parallel_map

logger = logging.getLogger(__name__)

SWEEP_METRICS = ("psnr", "ssim", "resolution")


@dataclass
class SweepPoint:
    """Aggregate of the repeats of one method at one photon level."""
    method: str
    photons: float
    values: Dict[str, List[float]] = field(default_factory=dict)

    def mean(self, metric: str) -> float:
        return float(np.mean(self.values[metric]))

    def std(self, metric: str) -> float:
        return float(np.std(self.values[metric]))

    def row(self) -> Dict[str, Any]:
        row: Dict[str, Any] = {"method": self.method, "photons": self.photons, "repeats": len(self.values["psnr"])}
        for metric in SWEEP_METRICS:
            row[f"{metric}_mean"] = self.mean(metric)
            row[f"{metric}_std"] = self.std(metric)
        return row


@dataclass
class SweepResult:
    spec: ExperimentSpec
    points: List[SweepPoint]
    runs: List[ScoredRun]

    def rows(self) -> List[Dict[str, Any]]:
        return [p.row() for p in self.points]

    def point(self, method: str, photons: float) -> SweepPoint:
        for p in self.points:
            if p.method == method and p.photons == photons:
                return p
        raise KeyError((method, photons))


def noise_sweep(spec: ExperimentSpec, workers: int = 1, phantom: Optional[np.ndarray] = None) -> SweepResult:
    """Run ``levels x repeats x methods`` reconstructions and aggregate mean and std.

    Rows come out level-major, methods in the order of the experiment.
    """
    phantom = spec.load_phantom() if phantom is None else phantom
    jobs = [
        (photons, repeat, settings)
        for photons in spec.photons
        for repeat in range(spec.repeats)
        for settings in spec.methods
    ]
    logger.info("sweep: %d photon levels x %d repeats x %d methods", len(spec.photons), spec.repeats, len(spec.methods))
    runs = parallel_map(lambda job: run_scored(spec, job[2], job[0], job[1], phantom), jobs, workers)

    points: List[SweepPoint] = []
    for photons in spec.photons:
        for settings in spec.methods:
            name = settings.method.value
            point = SweepPoint(name, photons, {metric: [] for metric in SWEEP_METRICS})
            for run in runs:
                if run.photons == photons and run.settings is settings:
                    for metric in SWEEP_METRICS:
                        point.values[metric].append(getattr(run.metrics, metric))
            points.append(point)
    return SweepResult(spec, points, runs)
