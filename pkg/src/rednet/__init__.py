"""Residual encoder-decoder network for grayscale image restoration.

A self-contained numpy implementation: symmetric convolution/transposed
convolution chains with skip junctions, hand-derived backward passes,
Adam updates, corruption synthesis for denoising / super-resolution /
deblurring / inpainting, and PSNR/SSIM evaluation.
"""

from .data import (Blind, Blur, DiskKernel, GaussianKernel, GaussianNoise,
                   MotionKernel, PairDir, SRDegrade, TextOverlay,
                   add_gaussian_noise, bicubic_resize, blur_image,
                   build_blur_kernel, corrupt, degrade_sr, extract_patches,
                   load_pair_dir, overlay_text, parse_corruption_spec,
                   read_pgm, synthetic_images, write_pgm)
from .engine import (EvalResult, TrainConfig, TrainLog, evaluate,
                     mse_loss_grad, restore, restore_ensemble, train)
from .gradcheck import max_relative_error, network_gradcheck, \
    numerical_gradient
from .layers import (ConvParams, LayerGrads, conv2d_backward, conv2d_forward,
                     deconv2d_backward, deconv2d_forward, relu_backward,
                     relu_forward, sum_relu_backward, sum_relu_forward)
from .metrics import MetricReport, psnr, ssim
from .network import (ForwardCache, ModelFormatError, Network, NetworkConfig,
                      NetworkGrads, build, load, save)
from .optim import AdamHyper, AdamState, adam_step, sgd_step
from .tensor import (RngStream, check_nchw, dihedral, dihedral_inverse,
                     gaussian_fill)

__version__ = "0.1.0"
