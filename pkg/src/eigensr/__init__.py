"""Eigen-patch super-resolution for small aligned iris images."""
__version__ = "0.1.0"

from .dictionary import CoupledDictionary, build_dictionary, load_dictionary, save_dictionary
from .eigenpatch import (EigenModel, fit_eigen, hallucinate, project_weights,
                         reconstruct_hr_patch, reproject)
from .imgcore import (BICUBIC, BILINEAR, Image, PatchLayout, ResampleKernel, compute_layout,
                      extract_patches, load_image, resample, save_image, stitch_patches,
                      target_size)
from .kernels import BACKEND
from .quality import psnr, ssim

__all__ = [
    "BACKEND", "BICUBIC", "BILINEAR", "CoupledDictionary", "EigenModel", "Image", "PatchLayout",
    "ResampleKernel", "build_dictionary", "compute_layout", "extract_patches", "fit_eigen",
    "hallucinate", "load_dictionary", "load_image", "project_weights", "psnr",
    "reconstruct_hr_patch", "reproject", "resample", "save_dictionary", "save_image", "ssim",
    "stitch_patches", "target_size",
]
