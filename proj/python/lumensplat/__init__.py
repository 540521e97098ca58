# SPDX-License-Identifier: Apache-2.0
"""Relightable Gaussian splatting for endoscopy."""

from ._core import (
    Camera,
    DatasetError,
    LightRig,
    OverrideError,
    Scene,
    SceneFormatError,
    fresnel_schlick,
    geometry_schlick_beckmann,
    ggx_d,
    load_poses,
    render,
    run_cli,
)

__all__ = [
    "Camera",
    "DatasetError",
    "LightRig",
    "OverrideError",
    "Scene",
    "SceneFormatError",
    "fresnel_schlick",
    "geometry_schlick_beckmann",
    "ggx_d",
    "load_poses",
    "render",
    "run_cli",
]
