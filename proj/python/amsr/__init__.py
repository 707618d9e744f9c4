"""Single-image super-resolution toolkit (Python bindings)."""

import json

from ._core import (
    AmsrError,
    ConfigError,
    ContractError,
    FormatError,
    IntegrityError,
    IoError,
    NumericError,
    ShapeError,
    __version__,
    compute_mean,
    cubic_kernel,
    degrade,
    evaluate_json,
    evaluate_pair,
    gradcheck,
    infer,
    load_png,
    luma,
    make_lr,
    modcrop,
    param_count,
    psnr,
    render_report_table,
    resize_image,
    resize_plane,
    rgb_to_ycbcr,
    save_png,
    ssim,
    toy_config_text,
    train,
    upscale,
    ycbcr_to_rgb,
)


def evaluate(manifest, scale, method="bicubic", checkpoint=None, save_dir=None, threads=0):
    """Run the evaluation protocol and return the report as a dict."""
    return json.loads(evaluate_json(manifest, scale, method, checkpoint, save_dir, threads))
