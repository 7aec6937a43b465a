"""Experiment orchestration: noise sweeps and dose matching."""

from ghostkit.experiments.dose import (
    DoseAccount,
    DoseMatch,
    DoseStudy,
    dose_study,
    ghost_imaging_dose,
    match_dose,
    pencil_beam_dose,
    pencil_beam_quality,
)
from ghostkit.experiments.runner import ScoredRun, run_method, run_scored, score_report
from ghostkit.experiments.spec import ExperimentSpec, MethodSettings, resolve_configs
from ghostkit.experiments.sweep import SweepPoint, SweepResult, noise_sweep

__all__ = [
    "DoseAccount",
    "DoseMatch",
    "DoseStudy",
    "ExperimentSpec",
    "MethodSettings",
    "ScoredRun",
    "SweepPoint",
    "SweepResult",
    "dose_study",
    "ghost_imaging_dose",
    "match_dose",
    "noise_sweep",
    "pencil_beam_dose",
    "pencil_beam_quality",
    "resolve_configs",
    "run_method",
    "run_scored",
    "score_report",
]
