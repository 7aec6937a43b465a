"""Finite-difference verification of tape gradients."""

import time
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from ghostkit.acquisition.rng import RandomStream
from ghostkit.errors import ConfigError
from ghostkit.tensor.tape import DiffTensor, Precision, Tape, precision

ScalarFunction = Callable[[List[DiffTensor]], DiffTensor]


@dataclass
class GradientCheckResult:
    """Outcome of comparing reverse-mode gradients with central differences."""
    is_valid: bool
    max_relative_error: float
    relative_errors: List[float]  # one per input, norm-wise over the checked entries
    checked_entries: int
    execution_time_ms: float
    warnings: List[str] = field(default_factory=list)


class GradientChecker:
    """Checks ``d f / d inputs`` in 64-bit precision.

    At most ``max_entries`` entries per input are perturbed, chosen at
    random from a fixed stream.
    """

    def __init__(self, step: float = 1e-6, tolerance: float = 1e-4, max_entries: int = 64, seed: int = 0):
        if step <= 0 or tolerance <= 0:
            raise ConfigError("step and tolerance must be positive")
        self.step = step
        self.tolerance = tolerance
        self.max_entries = max_entries
        self.seed = seed

    def _evaluate(self, fn: ScalarFunction, values: Sequence[np.ndarray]) -> float:
        return float(fn([DiffTensor(v) for v in values]).values.reshape(-1)[0])

    def check(self, fn: ScalarFunction, inputs: Sequence[np.ndarray]) -> GradientCheckResult:
        start_time = time.perf_counter()
        warnings: List[str] = []
        with precision(Precision.FLOAT64):
            values = [np.array(v, dtype=np.float64, copy=True) for v in inputs]
            tape = Tape()
            variables = [tape.variable(v) for v in values]
            output = fn(variables)
            if output.size != 1:
                raise ConfigError(f"gradient check needs a scalar function, got shape {output.shape}")
            analytic = tape.gradient(output, variables)

            stream = RandomStream(self.seed, "gradient-check")
            errors: List[float] = []
            checked = 0
            for index, value in enumerate(values):
                flat = value.reshape(-1)
                entries = np.arange(flat.size)
                if flat.size > self.max_entries:
                    entries = np.sort(stream.permutation(flat.size)[: self.max_entries])
                numeric = np.empty(entries.size, dtype=np.float64)
                for slot, entry in enumerate(entries):
                    original = flat[entry]
                    flat[entry] = original + self.step
                    upper = self._evaluate(fn, values)
                    flat[entry] = original - self.step
                    lower = self._evaluate(fn, values)
                    flat[entry] = original
                    numeric[slot] = (upper - lower) / (2.0 * self.step)
                exact = analytic[index].reshape(-1)[entries]
                scale = max(float(np.linalg.norm(exact)), float(np.linalg.norm(numeric)))
                error = 0.0 if scale == 0 else float(np.linalg.norm(exact - numeric) / scale)
                if scale == 0:
                    warnings.append(f"input {index}: gradient is identically zero on the checked entries")
                errors.append(error)
                checked += entries.size

        max_error = max(errors) if errors else 0.0
        return GradientCheckResult(
            is_valid=max_error < self.tolerance,
            max_relative_error=max_error,
            relative_errors=errors,
            checked_entries=checked,
            execution_time_ms=(time.perf_counter() - start_time) * 1000,
            warnings=warnings,
        )


def check_gradients(
    fn: ScalarFunction,
    inputs: Sequence[np.ndarray],
    tolerance: float = 1e-4,
    max_entries: Optional[int] = 64,
) -> GradientCheckResult:
    """Convenience wrapper around :class:`GradientChecker`."""
    checker = GradientChecker(tolerance=tolerance, max_entries=max_entries or 1 << 30)
    return checker.check(fn, inputs)
