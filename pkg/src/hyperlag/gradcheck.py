"""Central finite-difference verification of analytic gradients."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .autodiff import Tensor
from .exceptions import NumericError
from .params import ParamStore

# Entries where both gradients sit below this magnitude are inside the
# finite-difference noise floor and count as matching.
REL_FLOOR = 1e-6


@dataclass
class GradCheckReport:
    tolerance: float
    step: float
    per_param: dict[str, float] = field(default_factory=dict)
    worst_param: str = ""
    worst_error: float = 0.0
    n_entries: int = 0
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return self.worst_error < self.tolerance

    def failing_params(self) -> list[str]:
        return [n for n, e in self.per_param.items() if e >= self.tolerance]

    def summary_lines(self) -> list[str]:
        lines = []
        for name in sorted(self.per_param):
            err = self.per_param[name]
            status = "ok" if err < self.tolerance else "FAIL"
            lines.append(f"{status:4s}  {err:.3e}  {name}")
        verdict = "PASS" if self.passed else "FAIL"
        lines.append(
            f"{verdict}: max relative error {self.worst_error:.3e} "
            f"({self.worst_param}) over {self.n_entries} entries "
            f"in {self.seconds:.1f}s"
        )
        return lines


def finite_difference_check(
    loss_fn: Callable[[], Tensor],
    store: ParamStore,
    step: float = 1e-5,
    tolerance: float = 1e-4,
) -> GradCheckReport:
    """Compare analytic gradients of ``loss_fn`` against central differences.

    ``loss_fn`` must rebuild the forward graph from the store's current
    parameter values on every call and return a scalar tensor.
    """
    start = time.perf_counter()
    store.zero_grads()
    loss = loss_fn()
    if not np.isfinite(loss.data).all():
        raise NumericError("loss is non-finite at the linearization point")
    loss.backward()
    analytic = {
        name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
        for name, t in store.items()
    }
    store.zero_grads()

    report = GradCheckReport(tolerance=tolerance, step=step)
    worst = 0.0
    worst_name = ""
    for name, tensor in store.items():
        flat = tensor.data.reshape(-1)
        grads_a = analytic[name].reshape(-1)
        max_err = 0.0
        for idx in range(flat.size):
            saved = flat[idx]
            flat[idx] = saved + step
            up = loss_fn().item()
            flat[idx] = saved - step
            down = loss_fn().item()
            flat[idx] = saved
            numeric = (up - down) / (2.0 * step)
            denom = max(abs(grads_a[idx]), abs(numeric), REL_FLOOR)
            err = abs(grads_a[idx] - numeric) / denom
            if err > max_err:
                max_err = err
        report.per_param[name] = max_err
        report.n_entries += flat.size
        if max_err > worst:
            worst = max_err
            worst_name = name
    report.worst_error = worst
    report.worst_param = worst_name
    report.seconds = time.perf_counter() - start
    return report
