#!/usr/bin/env python3
"""Gallery of every corruption the data pipeline can synthesize.

Writes one PGM per corruption into demos/output/ and prints how far each
one moves the image from the clean original.
"""

import os

from rednet import (Blind, Blur, DiskKernel, GaussianKernel, GaussianNoise,
                    MotionKernel, RngStream, SRDegrade, TextOverlay, corrupt,
                    psnr, ssim, synthetic_images, write_pgm)

OUT = os.path.join(os.path.dirname(__file__), "output")


def main():
    os.makedirs(OUT, exist_ok=True)
    rng = RngStream(2024)
    clean = synthetic_images(1, 180, 180, rng)[0]
    write_pgm(clean, os.path.join(OUT, "clean.pgm"))

    gallery = {
        "noise_sigma10": GaussianNoise(10),
        "noise_sigma30": GaussianNoise(30),
        "noise_sigma70": GaussianNoise(70),
        "sr_x2": SRDegrade(2),
        "sr_x4": SRDegrade(4),
        "blur_disk5": Blur(DiskKernel(5)),
        "blur_gauss": Blur(GaussianKernel(1.6, 9)),
        "blur_motion": Blur(MotionKernel(15, 30)),
        "text_10pct": TextOverlay(12, 0.10, 0.0),
        "blind_mix": Blind((GaussianNoise(10), GaussianNoise(70))),
    }
    print(f"clean image: 180x180, range [{clean.min():.0f}, {clean.max():.0f}]")
    print(f"{'corruption':<14} {'psnr (dB)':>10} {'ssim':>8}")
    for name, spec in gallery.items():
        corrupted = corrupt(clean, spec, rng)
        write_pgm(corrupted, os.path.join(OUT, f"{name}.pgm"))
        print(f"{name:<14} {psnr(corrupted, clean):>10.2f} "
              f"{ssim(corrupted, clean):>8.4f}")
    print(f"\nimages written to {OUT}/")


if __name__ == "__main__":
    main()
