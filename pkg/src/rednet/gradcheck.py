"""Finite-difference verification of the hand-derived backward passes."""

import numpy as np

from .network import Network, NetworkConfig, build
from .tensor import RngStream

__all__ = ["numerical_gradient", "max_relative_error", "network_gradcheck"]


def numerical_gradient(f, arr: np.ndarray, h: float = 1e-3) -> np.ndarray:
    """Central differences of scalar f() w.r.t. every element of arr.

    Perturbs arr in place and restores each element exactly; arr should
    be float64 for the differences to resolve 1e-4 relative accuracy.
    """
    grad = np.zeros_like(arr, dtype=np.float64)
    flat = arr.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray,
                       floor: float | None = None) -> float:
    """Worst per-element |a - n| / max(|a|, |n|).

    Elements where both magnitudes sit below `floor` (default: 1e-6 of
    the numeric gradient's largest entry) count as matching; this keeps
    finite-difference noise on true zeros from dominating.
    """
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    if a.shape != n.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {n.shape}")
    if floor is None:
        floor = 1e-6 * max(1.0, float(np.max(np.abs(n))) if n.size else 1.0)
    denom = np.maximum(np.abs(a), np.abs(n))
    err = np.where(denom > floor, np.abs(a - n) / np.maximum(denom, floor), 0.0)
    return float(err.max()) if err.size else 0.0


def _condition_for_check(net: Network, x: np.ndarray) -> None:
    """Move the evaluation point away from every ReLU kink.

    The network is piecewise linear; a finite difference that straddles a
    kink measures the average of two slopes instead of either one. Taking
    positive-magnitude weights and then biasing every second interior
    channel firmly negative (and the rest firmly positive) keeps each
    pre-activation at least ~1 away from zero, far beyond the reach of an
    h-sized perturbation, while still exercising both open and closed
    units, every junction, and every layer kind.
    """
    for layer in net.layers:
        np.abs(layer.params.weights, out=layer.params.weights)
        layer.params.bias[...] = 1.0
    cur = x
    acts = [x]
    for g, layer in enumerate(net.layers, start=1):
        pre = net._apply(layer, cur)
        if g < net.depth and pre.shape[1] >= 2:
            tap = net.junctions.get(g)
            shift = acts[tap] if tap is not None else 0.0
            for oc in range(1, pre.shape[1], 2):
                margin = float((pre[:, oc] + (shift[:, oc] if tap is not None
                                              else 0.0)).max())
                layer.params.bias[oc] -= margin + 1.0
                pre[:, oc] -= margin + 1.0
        tap = net.junctions.get(g)
        cur = np.maximum(pre + acts[tap], 0) if tap is not None \
            else np.maximum(pre, 0)
        acts.append(cur)


def network_gradcheck(cfg: NetworkConfig, size: int = 8, seed: int = 7,
                      h: float = 1e-3) -> float:
    """Max relative error between analytic and numeric gradients of a
    random linear functional of the network output, over every parameter
    and every input element. Runs in float64.
    """
    net = build(cfg, dtype=np.float64)
    rng = RngStream(seed)
    x = rng.uniform((1, cfg.channels, size, size)) + 0.05
    _condition_for_check(net, x)
    out0, cache = net.forward(x, keep_cache=True)
    probe = np.where(rng.uniform(out0.shape) < 0.5, -1.0, 1.0)

    def loss() -> float:
        return float(np.sum(net.forward(x)[0] * probe))

    grads = net.backward(cache, probe)
    worst = 0.0
    for layer_grads, layer in zip(grads.layers, net.layers):
        for analytic, arr in ((layer_grads.d_weights, layer.params.weights),
                              (layer_grads.d_bias, layer.params.bias)):
            numeric = numerical_gradient(loss, arr, h)
            worst = max(worst, max_relative_error(analytic, numeric))
    numeric = numerical_gradient(loss, x, h)
    worst = max(worst, max_relative_error(grads.d_input, numeric))
    return worst
