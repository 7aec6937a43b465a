"""Dose needed by a ghost-imaging method to match a pencil-beam scan.

Dose model (a recorded modelling decision, reports label it as such):

* pencil beam with ``n`` photons per pixel: total ``n * N``, per-pixel maximum ``n``;
* ghost imaging at photon constant ``C``: total ``C * sum_m mean(w_m) * N``,
  per-pixel maximum per exposure ``C * max(w)``.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from ghostkit.acquisition.masks import MaskSet, generate_masks
from ghostkit.acquisition.noise import pencil_beam_scan
from ghostkit.algorithms.engines import Method
from ghostkit.errors import ConfigError
from ghostkit.experiments.runner import run_scored
from ghostkit.experiments.spec import ExperimentSpec, MethodSettings
from ghostkit.parallel import parallel_map
from ghostkit.scoring.metrics import psnr, ssim

logger = logging.getLogger(__name__)

DOSE_MODEL = "total = photons x sum_m mean(mask_m) x N; max pixel = photons x max(mask)"
TOLERANCES = {"psnr": 0.25, "ssim": 0.005}
METRICS: Dict[str, Callable[[np.ndarray, np.ndarray], float]] = {"psnr": psnr, "ssim": ssim}


@dataclass(frozen=True)
class DoseAccount:
    total: float
    max_pixel: float


def pencil_beam_dose(photons_per_pixel: float, pixels: int) -> DoseAccount:
    return DoseAccount(photons_per_pixel * pixels, photons_per_pixel)


def ghost_imaging_dose(masks: MaskSet, photons: float) -> DoseAccount:
    """Dose delivered by ``masks.M`` exposures at photon constant ``photons``."""
    pixels = masks.height * masks.width
    per_mask_mean = masks.matrix.mean(axis=1)
    return DoseAccount(photons * float(per_mask_mean.sum()) * pixels, photons * float(masks.masks.max()))


def _ratio(a: float, b: float) -> float:
    if b == 0 or (math.isinf(a) and math.isinf(b)):
        return math.nan
    return a / b


def pencil_beam_quality(
    phantom: np.ndarray, photons_per_pixel: float, metric: str = "psnr", repeats: int = 1, seed: int = 0
) -> float:
    """Mean quality of ``repeats`` pencil-beam scans."""
    score = METRICS[metric]
    return float(np.mean([score(pencil_beam_scan(phantom, photons_per_pixel, seed + r), phantom) for r in range(repeats)]))


@dataclass
class DoseMatch:
    """Photon constant at which one method matches the pencil-beam quality."""
    method: str
    metric: str
    target: float
    photons: float
    value: float
    gi_dose: DoseAccount
    pb_dose: DoseAccount
    edge: Optional[str] = None  # "lower" or "upper" when the bracket did not contain the target
    evaluations: List[Tuple[float, float]] = field(default_factory=list)

    @property
    def total_ratio(self) -> float:
        return _ratio(self.gi_dose.total, self.pb_dose.total)

    @property
    def max_pixel_ratio(self) -> float:
        return _ratio(self.gi_dose.max_pixel, self.pb_dose.max_pixel)

    @property
    def flagged(self) -> bool:
        return self.edge is not None

    def row(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "metric": self.metric,
            "target": self.target,
            "photons": self.photons,
            "value": self.value,
            "gi_total_dose": self.gi_dose.total,
            "gi_max_pixel_dose": self.gi_dose.max_pixel,
            "pb_total_dose": self.pb_dose.total,
            "pb_max_pixel_dose": self.pb_dose.max_pixel,
            "total_dose_ratio": self.total_ratio,
            "max_pixel_dose_ratio": self.max_pixel_ratio,
            "bracket_edge": self.edge or "",
        }


def gi_quality(
    spec: ExperimentSpec,
    settings: MethodSettings,
    photons: float,
    phantom: np.ndarray,
    metric: str = "psnr",
    workers: int = 1,
) -> float:
    """Mean quality of ``spec.repeats`` reconstructions at photon constant ``photons``."""
    runs = parallel_map(lambda r: run_scored(spec, settings, photons, r, phantom), range(spec.repeats), workers)
    return float(np.mean([getattr(run.metrics, metric) for run in runs]))


def match_dose(
    spec: ExperimentSpec,
    settings: MethodSettings,
    target: float,
    pb_dose: DoseAccount,
    metric: str = "psnr",
    bracket: Tuple[float, float] = (1.0, 1e4),
    tolerance: Optional[float] = None,
    max_steps: int = 20,
    workers: int = 1,
    phantom: Optional[np.ndarray] = None,
) -> DoseMatch:
    """Bisect ``log C`` until the method's mean quality is within ``tolerance`` of ``target``.

    Quality is assumed to increase with ``C``. When even the bracket ends
    miss the target the nearest end is returned with ``edge`` set.
    """
    if metric not in METRICS:
        raise ConfigError(f"unknown metric '{metric}' (choose from {', '.join(METRICS)})")
    lo, hi = bracket
    if not 0 < lo < hi or math.isinf(hi):
        raise ConfigError(f"photon bracket must satisfy 0 < low < high < inf, got {bracket}")
    tolerance = TOLERANCES[metric] if tolerance is None else tolerance
    phantom = spec.load_phantom() if phantom is None else phantom
    masks = generate_masks(spec.M, spec.height, spec.width, spec.seed)
    evaluations: List[Tuple[float, float]] = []

    def quality(photons: float) -> float:
        value = gi_quality(spec, settings, photons, phantom, metric, workers)
        evaluations.append((photons, value))
        logger.debug("%s at C=%.4g: %s=%.4f (target %.4f)", settings.method.value, photons, metric, value, target)
        return value

    def result(photons: float, value: float, edge: Optional[str] = None) -> DoseMatch:
        if edge is not None:
            logger.warning("%s: %s target %.4f not reached inside the bracket, stopped at the %s edge",
                           settings.method.value, metric, target, edge)
        return DoseMatch(
            settings.method.value, metric, target, photons, value,
            ghost_imaging_dose(masks, photons), pb_dose, edge, evaluations,
        )

    q_hi = quality(hi)
    if q_hi < target - tolerance:
        return result(hi, q_hi, "upper")
    q_lo = quality(lo)
    if q_lo > target + tolerance:
        return result(lo, q_lo, "lower")
    if abs(q_lo - target) <= tolerance:
        return result(lo, q_lo)
    if abs(q_hi - target) <= tolerance:
        return result(hi, q_hi)

    mid, q_mid = hi, q_hi
    for _ in range(max_steps):
        mid = math.sqrt(lo * hi)
        q_mid = quality(mid)
        if abs(q_mid - target) <= tolerance:
            break
        if q_mid < target:
            lo = mid
        else:
            hi = mid
    return result(mid, q_mid)


@dataclass
class DoseStudy:
    pb_photons: float
    metric: str
    target: float
    matches: List[DoseMatch]
    reference: str = Method.N2G.value

    def relative_to_reference(self) -> Dict[str, float]:
        """Dose of every method divided by the reference method's dose at equal quality."""
        base = next((m for m in self.matches if m.method == self.reference), None)
        if base is None:
            return {}
        return {m.method: _ratio(m.gi_dose.total, base.gi_dose.total) for m in self.matches}

    def rows(self) -> List[Dict[str, Any]]:
        relative = self.relative_to_reference()
        rows = []
        for match in self.matches:
            row = match.row()
            row[f"dose_vs_{self.reference}"] = relative.get(match.method, math.nan)
            rows.append(row)
        return rows

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dose_model": DOSE_MODEL,
            "pb_photons_per_pixel": self.pb_photons,
            "metric": self.metric,
            "target": self.target,
            "reference": self.reference,
            "matches": self.rows(),
        }


def dose_study(
    spec: ExperimentSpec,
    pb_photons: float,
    metric: str = "psnr",
    bracket: Tuple[float, float] = (1.0, 1e4),
    tolerance: Optional[float] = None,
    workers: int = 1,
) -> DoseStudy:
    """Match every method of ``spec`` against one pencil-beam acquisition."""
    if metric not in METRICS:
        raise ConfigError(f"unknown metric '{metric}' (choose from {', '.join(METRICS)})")
    phantom = spec.load_phantom()
    target = pencil_beam_quality(phantom, pb_photons, metric, spec.repeats, spec.seed)
    pb_dose = pencil_beam_dose(pb_photons, phantom.size)
    logger.info("pencil beam at %g photons/pixel: %s = %.4f", pb_photons, metric, target)
    matches = [
        match_dose(spec, settings, target, pb_dose, metric, bracket, tolerance, workers=workers, phantom=phantom)
        for settings in spec.methods
    ]
    return DoseStudy(pb_photons, metric, target, matches)
