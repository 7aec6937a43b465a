"""Numerical verification helpers for the autodiff core."""

from ghostkit.validation.gradcheck import GradientChecker, GradientCheckResult, check_gradients

__all__ = ["GradientCheckResult", "GradientChecker", "check_gradients"]
