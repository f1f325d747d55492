#!/usr/bin/env python3
"""Numerically verify the hand-derived backward passes.

Two independent checks:
  1. the transposed convolution is the exact adjoint of the convolution
     (inner-product identity on random instances);
  2. end-to-end finite differences match the analytic gradients for every
     skip-mode family, with and without a stride-2 stage.
"""

import numpy as np

from rednet import (ConvParams, NetworkConfig, RngStream, conv2d_forward,
                    deconv2d_forward, network_gradcheck)


def adjoint_demo(trials=50):
    rng = RngStream(7)
    worst = 0.0
    for t in range(trials):
        stride = 1 + t % 2
        oh = 2 + t % 4
        h = (oh - 1) * stride + 3 - 2  # kernel 3, padding 1
        w = rng.normal((3, 2, 3, 3))
        pc = ConvParams(w, np.zeros(3), stride=stride, padding=1)
        pd = ConvParams(np.ascontiguousarray(w.swapaxes(0, 1)), np.zeros(2),
                        stride=stride, padding=1)
        x = rng.normal((1, 2, h, h))
        y = rng.normal((1, 3, oh, oh))
        lhs = float(np.sum(conv2d_forward(x, pc) * y))
        rhs = float(np.sum(x * deconv2d_forward(y, pd)))
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs)))
    print(f"adjoint identity over {trials} random instances: "
          f"worst relative gap {worst:.2e}")


def gradcheck_demo():
    families = [
        ("plain chain", dict(skip_mode="none"), 8),
        ("mirror skips, step 1", dict(skip_mode="mirror", skip_step=1), 8),
        ("mirror skips, step 2", dict(skip_mode="mirror", skip_step=2), 8),
        ("block skips, span 2", dict(skip_mode="sequential", skip_step=2), 8),
        ("mirror + stride-2 stage",
         dict(skip_mode="mirror", skip_step=1, downsample_layers=(1,)), 9),
    ]
    print("\nfinite differences vs analytic gradients (float64, h=1e-3):")
    for name, kwargs, size in families:
        cfg = NetworkConfig(depth=4, filters=4, init_seed=1, **kwargs)
        err = network_gradcheck(cfg, size=size, seed=7)
        print(f"  {name:<26} max relative error {err:.2e}")


if __name__ == "__main__":
    adjoint_demo()
    gradcheck_demo()
