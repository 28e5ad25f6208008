"""Thermal/optical registration, encoder-decoder colorization and LAB fusion."""

from .image import (
    GrayImage,
    ImageFormatError,
    LabImage,
    RgbImage,
    lab_to_rgb,
    load_pgm,
    load_ppm,
    resize_bilinear,
    rgb_to_gray,
    rgb_to_lab,
    save_pgm,
    save_ppm,
)
from .homography import (
    DEFAULT_PROFILES,
    DegenerateCorrespondencesError,
    HomographyMatrix,
    ImagerProfile,
    PointCorrespondence,
    estimate_homography,
    rescale_optical,
    scale_factors,
)

__version__ = "0.1.0"
