"""Differentiable multi-scale GLCM texture loss for image denoising."""
from .aggregation import (AggregationRule, AttentionParams, aggregate, aggregate_and_grad,
                          aggregate_attention, init_attention)
from .analysis import equispaced_templates, kde, matching_scores, ncc_map, pd_rank
from .core import HuWindow, Image, Interval, load_image, preprocess_ct, save_image
from .descriptors import DescriptorKind, descriptor, descriptor_and_grad
from .glcm import BinGrid, Glcm, Offset, glcm, hard_glcm, soft_glcm
from .grad import TextureLoss, finite_diff_check, loss_and_grad
from .metrics import cnr, mse, psnr, ssim
from .mste import OffsetGrid, delta, extract
from .optimize import OptimConfig, denoise_pixels

__version__ = "0.1.0"

__all__ = [
    "AggregationRule", "AttentionParams", "aggregate", "aggregate_and_grad", "aggregate_attention",
    "init_attention", "equispaced_templates", "kde", "matching_scores", "ncc_map", "pd_rank",
    "HuWindow", "Image", "Interval", "load_image", "preprocess_ct", "save_image",
    "DescriptorKind", "descriptor", "descriptor_and_grad", "BinGrid", "Glcm", "Offset", "glcm",
    "hard_glcm", "soft_glcm", "TextureLoss", "finite_diff_check", "loss_and_grad",
    "cnr", "mse", "psnr", "ssim", "OffsetGrid", "delta", "extract", "OptimConfig",
    "denoise_pixels",
]
