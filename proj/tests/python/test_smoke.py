# SPDX-License-Identifier: Apache-2.0
import math

import numpy as np
import pytest

import lumensplat as ls


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    root = tmp_path_factory.mktemp("lumen")
    gen = root / "gen.toml"
    gen.write_text("[gen]\npoints = 600\nseed = 3\n\n[tube.trajectory]\nframes = 4\ntest_every = 2\nwidth = 24\nheight = 20\n")
    data, scene = root / "ds", root / "scene.splat"
    code, _, err = ls.run_cli(["gen", "--config", str(gen), "--out", str(data)])
    assert code == 0, err
    code, _, err = ls.run_cli(["train", "--data", str(data), "--out", str(scene), "--iterations", "3", "--quiet"])
    assert code == 0, err
    return data, scene


def test_ggx_closed_form():
    for r in (0.3, 0.7):
        for nh in (0.2, 0.6, 0.95):
            a2 = r**4
            want = a2 / (math.pi * (nh * nh * (a2 - 1) + 1) ** 2)
            assert ls.ggx_d(nh, r) == pytest.approx(want, rel=1e-4)
    assert ls.fresnel_schlick(1.0, 0.02) == pytest.approx(0.02)


def test_scene_arrays_and_round_trip(trained):
    _, path = trained
    scene = ls.Scene.load(str(path))
    a = scene.arrays()
    n = len(scene)
    assert n > 0
    assert a["position"].shape == (n, 3)
    assert a["rotation"].shape == (n, 4)
    assert np.all((a["opacity"] > 0) & (a["opacity"] < 1))
    assert np.allclose(np.linalg.norm(a["rotation"], axis=1), 1, atol=1e-5)
    back = ls.Scene.from_bytes(scene.to_bytes())
    assert back.to_bytes() == scene.to_bytes()
    with pytest.raises(ls.SceneFormatError):
        ls.Scene.from_bytes(scene.to_bytes()[:40])


def test_render_buffers(trained):
    data, path = trained
    scene = ls.Scene.load(str(path))
    poses = ls.load_poses(str(data / "poses.json"))
    assert [name for name, _ in poses] == ["0000", "0001", "0002", "0003"]
    cam = poses[1][1]
    out = ls.render(scene, cam, decomposition=True)
    assert out["rgb"].shape == (20, 24, 3)
    assert out["depth"].shape == (20, 24)
    assert np.all(np.isfinite(out["rgb"]))
    assert np.max(np.abs(out["diffuse"] + out["specular"] - out["rgb"])) <= 1e-5
    plain = ls.render(scene, cam)
    assert np.array_equal(plain["rgb"], out["rgb"])


def test_camera_look_at():
    cam = ls.Camera.look_at([0, 0, 0], [0, 0, 5], [0, 1, 0], 50, 50, 32, 32)
    assert np.allclose(cam.rotation @ cam.rotation.T, np.eye(3), atol=1e-6)
    assert np.allclose(cam.center(), 0, atol=1e-6)
    with pytest.raises(ValueError):
        ls.Camera(np.eye(3) * 2, [0, 0, 0], 10, 10, 5, 5, 10, 10)


def test_cli_reports_bad_arguments():
    code, _, err = ls.run_cli(["train"])
    assert code == 1
    assert "--data" in err or "--out" in err
