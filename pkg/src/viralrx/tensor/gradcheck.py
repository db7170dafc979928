"""Central finite-difference gradient checks."""

from dataclasses import dataclass

import numpy as np

from .core import Tape, backward
from .ops import mul, sum as tsum


@dataclass
class GradCheckReport:
    name: str
    max_rel_err: float
    n_checked: int
    tolerance: float

    @property
    def passed(self):
        return bool(self.max_rel_err < self.tolerance)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<28} max_rel_err={self.max_rel_err:.3e}  coords={self.n_checked}"


def rel_error(a, n, floor=1e-6):
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def grad_check(fn, tensors, name="fn", tol=1e-4, n_coords=24, h=1e-5, seed=0, floor=1e-6):
    """Compare analytic and central-difference gradients.

    ``fn()`` must read the tensors in ``tensors`` (by closure) and return a
    tensor.  Non-scalar outputs are reduced with a fixed random projection.
    Up to ``n_coords`` random coordinates of each tensor are probed.
    """
    rng = np.random.default_rng(seed)
    tensors = [t for t in tensors if t.requires_grad]
    proj = None

    def scalar(out):
        nonlocal proj
        if out.size == 1:
            return out
        if proj is None:
            proj = rng.standard_normal(out.shape) / np.sqrt(out.size)
        return tsum(mul(out, proj))

    with Tape() as tape:
        loss = scalar(fn())
    analytic = [g.copy() for g in backward(tape, loss, tensors)]

    def value():
        return float(scalar(fn()).data)

    worst = 0.0
    checked = 0
    for t, grad in zip(tensors, analytic):
        flat = t.data.reshape(-1)
        idx = rng.choice(flat.size, size=min(n_coords, flat.size), replace=False)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            fp = value()
            flat[i] = orig - h
            fm = value()
            flat[i] = orig
            num = (fp - fm) / (2 * h)
            worst = max(worst, float(rel_error(grad.reshape(-1)[i], num, floor)))
            checked += 1
    return GradCheckReport(name, worst, checked, tol)
