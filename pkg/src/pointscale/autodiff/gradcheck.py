"""Central finite-difference verification of reverse-mode gradients.

``grad_check`` compares tape gradients against central differences of
the same forward function. Loss builders must hold any data-dependent
discrete structure (nearest neighbors, token assignments, transport
plans) fixed across the perturbations, exactly as the corresponding
backward rules do; the check then validates the backward implementation
of every op in the composition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tape, Tensor


@dataclass
class GradCheckReport:
    max_rel_err: float
    worst_param: str
    checked: int

    def ok(self, tol: float) -> bool:
        return self.max_rel_err < tol


def _loss_value(loss_fn) -> float:
    out = loss_fn()
    return float(np.asarray(out.values).reshape(()))


def grad_check(
    loss_fn,
    params: list[Tensor],
    step: float = 1e-5,
    max_entries_per_param: int = 64,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """Compare reverse-mode gradients of ``loss_fn`` against central
    finite differences on every (or a sampled subset of) parameter entry.

    ``loss_fn`` takes no arguments and rebuilds the scalar loss from the
    current values of ``params``.
    """
    rng = rng or np.random.default_rng(0)
    for p in params:
        p.grad = None
    with Tape() as tape:
        loss = loss_fn()
    tape.backward(loss)
    analytic = [np.zeros_like(p.values) if p.grad is None else p.grad.copy() for p in params]

    worst = 0.0
    worst_param = ""
    checked = 0
    for p, grad in zip(params, analytic):
        flat = p.values.reshape(-1)
        n = flat.size
        if n <= max_entries_per_param:
            entries = np.arange(n)
        else:
            entries = rng.choice(n, size=max_entries_per_param, replace=False)
        for i in entries:
            orig = flat[i]
            flat[i] = orig + step
            f_plus = _loss_value(loss_fn)
            flat[i] = orig - step
            f_minus = _loss_value(loss_fn)
            flat[i] = orig
            fd = (f_plus - f_minus) / (2.0 * step)
            an = grad.reshape(-1)[i]
            rel = abs(fd - an) / max(abs(fd), abs(an), 1e-8)
            checked += 1
            if rel > worst:
                worst = rel
                worst_param = p.name or "<unnamed>"
    return GradCheckReport(max_rel_err=worst, worst_param=worst_param, checked=checked)
