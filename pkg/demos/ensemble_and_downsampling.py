#!/usr/bin/env python3
"""Inference-side features: the 8-orientation ensemble and stride-2 speedups.

The ensemble averages restorations over all rotations/flips of the input.
Stride-2 encoder stages shrink the interior feature maps; the mirrored
decoder stage restores resolution, trading a little accuracy for speed.
"""

import time

import numpy as np

from rednet import (GaussianNoise, NetworkConfig, RngStream, add_gaussian_noise,
                    build, psnr, restore, restore_ensemble, synthetic_images)


def ensemble_demo():
    rng = RngStream(5)
    clean = synthetic_images(1, 96, 96, rng)[0]
    noisy = add_gaussian_noise(clean, 25, rng)
    # identity network: zero parameters + mirror skips pass the input through
    net = build(NetworkConfig(depth=4, filters=8, skip_mode="mirror",
                              skip_step=1))
    for layer in net.layers:
        layer.params.weights[...] = 0
        layer.params.bias[...] = 0
    single = restore(net, noisy)
    averaged = restore_ensemble(net, noisy)
    print("identity network (sanity check):")
    print(f"  single pass  psnr {psnr(single, clean):6.2f} dB")
    print(f"  8-way mean   psnr {psnr(averaged, clean):6.2f} dB")
    # exact pass-through holds for non-negative inputs (the final ReLU
    # clips the negative tails of noisy pixels)
    print(f"  restore(clean) == clean: "
          f"{np.array_equal(restore(net, clean), clean)}")


def downsample_demo():
    img = RngStream(6).uniform((160, 240)).astype(np.float32) * 255
    variants = {
        "no stride-2 stage": (),
        "stride 2 at layer 1": (1,),
        "stride 2 at layer 3": (3,),
    }
    print("\nforward wall-time on a 160x240 image (depth 10, 16 filters):")
    for name, down in variants.items():
        cfg = NetworkConfig(depth=10, filters=16, skip_mode="mirror",
                            skip_step=2, downsample_layers=down, init_seed=2)
        net = build(cfg)
        out = restore(net, img)  # warm-up; also checks the shape contract
        assert out.shape == img.shape
        best = min(_timed(restore, net, img) for _ in range(3))
        print(f"  {name:<22} {best * 1000:7.1f} ms  (output {out.shape})")


def _timed(fn, *args):
    t0 = time.perf_counter()
    fn(*args)
    return time.perf_counter() - t0


if __name__ == "__main__":
    ensemble_demo()
    downsample_demo()
