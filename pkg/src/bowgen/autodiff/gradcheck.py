"""Central finite-difference verification of analytic gradients."""
import numpy as np

from .tensor import Tensor


def _rel_err(analytic, numeric, floor):
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def grad_check(f, inputs, h=1e-5, floor=1e-6, max_checks=None, rng=None):
    """Compare ``backward`` against central differences; return the max relative error.

    ``f`` maps the list of input tensors to a scalar tensor. Inputs should be
    float64. With ``max_checks`` only that many randomly chosen entries per
    input are probed.
    """
    inputs = list(inputs) if isinstance(inputs, (list, tuple)) else [inputs]
    for t in inputs:
        t.grad = None
    f(inputs).backward()
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in inputs]
    rng = rng or np.random.default_rng(0)
    worst = 0.0
    for t, ga in zip(inputs, analytic):
        if not t.requires_grad:
            continue
        flat = t.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_checks is not None and flat.size > max_checks:
            idx = rng.choice(flat.size, max_checks, replace=False)
        for k in idx:
            orig = flat[k]
            flat[k] = orig + h
            fp = float(f(inputs).data)
            flat[k] = orig - h
            fm = float(f(inputs).data)
            flat[k] = orig
            worst = max(worst, _rel_err(float(ga.reshape(-1)[k]), (fp - fm) / (2 * h), floor))
    for t in inputs:
        t.grad = None
    return worst


def directional_grad_check(f, params, h=1e-5, floor=1e-6, n_directions=1, rng=None):
    """Per-tensor check along random unit directions.

    For each parameter tensor ``p`` and direction ``v`` compares ``<grad, v>``
    with ``(f(p + h v) - f(p - h v)) / 2h``. Returns ``{name: max rel err}``.
    ``params`` is a mapping name -> Tensor.
    """
    rng = rng or np.random.default_rng(0)
    for t in params.values():
        t.grad = None
    f().backward()
    grads = {k: (np.zeros_like(t.data) if t.grad is None else t.grad.copy()) for k, t in params.items()}
    errs = {}
    for name, t in params.items():
        worst = 0.0
        for _ in range(n_directions):
            v = rng.standard_normal(t.shape)
            v /= np.linalg.norm(v) or 1.0
            orig = t.data.copy()
            t.data[...] = orig + h * v
            fp = float(f().data)
            t.data[...] = orig - h * v
            fm = float(f().data)
            t.data[...] = orig
            worst = max(worst, _rel_err(float((grads[name] * v).sum()), (fp - fm) / (2 * h), floor))
        errs[name] = worst
    for t in params.values():
        t.grad = None
    return errs


__all__ = ["grad_check", "directional_grad_check", "Tensor"]
