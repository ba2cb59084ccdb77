import json

import numpy as np
import pytest
from click.testing import CliRunner
from PIL import Image

from acnf import codec, container
from acnf.cli import EXIT_CODES, main
from acnf.data import load_image
from acnf.eval import jpeg_method, rd_sweep
from acnf.eval.report import curves_csv
from conftest import natural_patch

TINY = {
    "CRNet": {"depth": 1, "width": 8},
    "PPNet": {"depth": 1, "width": 8},
    "ACN": {"depth": 2, "width": 16},
    "BENet": {"depth": 2, "width": 16},
}


def run(*args, env=None):
    return CliRunner().invoke(main, [str(a) for a in args], env=env, catch_exceptions=False)


def last_json(text):
    return json.loads(text.strip().splitlines()[-1])


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    images = root / "images"
    images.mkdir()
    for i in range(3):
        arr = np.round(natural_patch(64, seed=i) * 255).astype(np.uint8)
        Image.fromarray(arr).save(images / f"im{i}.png")
    cfg = root / "cfg.json"
    cfg.write_text(json.dumps({"patch_size": 32, "batch_size": 2, "networks": TINY}))
    return root


@pytest.fixture(scope="module")
def trained(workspace):
    data, weights = workspace / "data", workspace / "weights"
    res = run("prepare-data", "--images", workspace / "images", "--out", data, "--patch-size", 32, "--split-ratio", 1.0, "--qfs", "10")
    assert res.exit_code == 0, res.output
    info = last_json(res.stdout)
    assert info["patches"] == 12 and info["caches"] == [{"qf": 10, "entries": 12}]
    for cmd in ("pretrain-acn", "pretrain-benet", "pretrain-crnet", "pretrain-ppnet"):
        res = run(cmd, "--config", workspace / "cfg.json", "--data", data, "--out", weights, "--steps", 2)
        assert res.exit_code == 0, res.output
    res = run("pretrain-acn", "--config", workspace / "cfg.json", "--data", data, "--out", weights, "--steps", 1, "--source", "cache")
    assert res.exit_code == 0, res.output
    res = run("train", "--config", workspace / "cfg.json", "--data", data, "--weights", weights, "--out", workspace / "run", "--steps", 2)
    assert res.exit_code == 0, res.output
    assert last_json(res.stdout)["steps"] == 2
    return weights


def test_help_lists_commands():
    res = run("--help")
    for cmd in ("prepare-data", "pretrain-acn", "pretrain-benet", "pretrain-crnet", "pretrain-ppnet", "train", "compress", "decompress", "eval", "bdrate", "plot"):
        assert cmd in res.output
    assert "--qf" in run("compress", "--help").output


def test_unknown_flag_fails_fast():
    res = CliRunner().invoke(main, ["compress", "--bogus"])
    assert res.exit_code == 2


def test_compress_decompress_roundtrip(workspace, trained, tmp_path):
    src = workspace / "images" / "im0.png"
    out = tmp_path / "a.acnf.jpg"
    res = run("compress", "--in", src, "--qf", 10, "--scale", "0.5", "--weights", trained, "--out", out)
    assert res.exit_code == 0, res.output
    info = last_json(res.stdout)
    blob = out.read_bytes()
    assert info["bpp"] == pytest.approx(8 * len(blob) / (64 * 64))
    art, meta = container.unpack(blob)
    assert meta.scale == 0.5 and (meta.orig_width, meta.orig_height) == (64, 64)
    assert codec.decode(art).shape == (32, 32, 1)

    back = tmp_path / "back.png"
    res = run("decompress", "--in", out, "--weights", trained, "--out", back)
    assert res.exit_code == 0, res.output
    assert last_json(res.stdout)["mode"] == "ppnet"
    assert load_image(back).shape == (64, 64, 1)


def test_scale_auto_uses_policy(workspace, trained, tmp_path):
    res = run("compress", "--in", workspace / "images" / "im1.png", "--qf", 10, "--weights", trained, "--out", tmp_path / "b.jpg")
    assert res.exit_code == 0, res.output
    assert last_json(res.stdout)["scale"] == 0.5


def test_decompress_plain_jpeg_falls_back(tmp_path):
    art = codec.encode(natural_patch(32), 50)
    src = tmp_path / "plain.jpg"
    src.write_bytes(art.payload)
    with pytest.warns(UserWarning, match="stock"):
        res = run("decompress", "--in", src, "--out", tmp_path / "o.png")
    assert res.exit_code == 0
    assert last_json(res.stdout)["mode"] == "stock"
    np.testing.assert_array_equal(codec.quantize_8bit(load_image(tmp_path / "o.png")), codec.quantize_8bit(codec.decode(art)))


def test_decompress_missing_weights_falls_back(workspace, trained, tmp_path):
    out = tmp_path / "c.acnf.jpg"
    run("compress", "--in", workspace / "images" / "im2.png", "--qf", 10, "--scale", "0.5", "--weights", trained, "--out", out)
    with pytest.warns(UserWarning, match="bicubic"):
        res = run("decompress", "--in", out, "--weights", tmp_path / "nothing", "--out", tmp_path / "d.png")
    assert res.exit_code == 0
    assert load_image(tmp_path / "d.png").shape == (64, 64, 1)


def test_eval_jpeg_only_matches_plain_sweep(workspace, tmp_path):
    res = run("eval", "--methods", "jpeg", "--images", workspace / "images", "--qfs", "10,40", "--out", tmp_path / "rep", "--no-plots")
    assert res.exit_code == 0, res.output
    images = [load_image(p) for p in sorted((workspace / "images").iterdir())]
    expected = curves_csv([rd_sweep(jpeg_method(), images, [10, 40])])
    assert (tmp_path / "rep" / "rd_points.csv").read_text() == expected


def test_eval_bdrate_and_plot(workspace, trained, tmp_path):
    rep = tmp_path / "rep"
    res = run("eval", "--images", workspace / "images", "--qfs", "10,20,40,80", "--weights", trained, "--out", rep)
    assert res.exit_code == 0, res.output
    assert (rep / "rd_psnr.png").is_file() and (rep / "summary.json").is_file()
    res = run("bdrate", "--csv", rep / "rd_points.csv", "--anchor", "jpeg", "--test", "jpeg")
    assert last_json(res.stdout)["bd_rate_percent"] == pytest.approx(0.0, abs=1e-9)
    res = run("plot", "--csv", rep / "rd_points.csv", "--out", tmp_path / "plots")
    assert res.exit_code == 0 and (tmp_path / "plots" / "rd_ssim.png").is_file()


def test_eval_needs_two_qfs(workspace, tmp_path):
    res = CliRunner().invoke(main, ["eval", "--methods", "jpeg", "--images", str(workspace / "images"), "--qfs", "10", "--out", str(tmp_path)])
    assert res.exit_code == 2


def _error(res):
    return json.loads(res.stderr.strip().splitlines()[-1])


def test_exit_codes_are_distinct():
    assert len(set(EXIT_CODES.values())) == len(EXIT_CODES)
    assert 0 not in EXIT_CODES.values() and 2 not in EXIT_CODES.values()


def test_missing_weights_exit_code(workspace, tmp_path):
    res = run("compress", "--in", workspace / "images" / "im0.png", "--qf", 10, "--weights", tmp_path, "--out", tmp_path / "x.jpg")
    assert res.exit_code == EXIT_CODES["missing_weights"]
    assert _error(res)["error"] == "missing_weights"


def test_bad_config_exit_code(workspace, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"qf": 10, "nope": 1}))
    res = run("train", "--config", bad, "--data", workspace, "--out", tmp_path / "run")
    assert res.exit_code == EXIT_CODES["bad_config"]
    res = run("train", "--config", tmp_path / "absent.json", "--data", workspace, "--out", tmp_path / "run")
    assert res.exit_code == EXIT_CODES["bad_config"]


def test_codec_error_exit_code(tmp_path):
    src = tmp_path / "broken.jpg"
    src.write_bytes(b"\xff\xd8\xff\xdb garbage")
    res = run("decompress", "--in", src, "--out", tmp_path / "o.png")
    assert res.exit_code in (EXIT_CODES["codec"], EXIT_CODES["container"])


def test_container_error_exit_code(workspace, trained, tmp_path):
    out = tmp_path / "e.acnf.jpg"
    run("compress", "--in", workspace / "images" / "im0.png", "--qf", 10, "--scale", "0.5", "--weights", trained, "--out", out)
    blob = bytearray(out.read_bytes())
    blob[10] = 9
    out.write_bytes(bytes(blob))
    res = run("decompress", "--in", out, "--out", tmp_path / "o.png")
    assert res.exit_code == EXIT_CODES["container"]


def test_data_error_exit_code(tmp_path):
    (tmp_path / "empty").mkdir()
    res = run("prepare-data", "--images", tmp_path / "empty", "--out", tmp_path / "d")
    assert res.exit_code == EXIT_CODES["data"]


def test_weights_env_var(workspace, trained, tmp_path):
    res = run("compress", "--in", workspace / "images" / "im0.png", "--qf", 10, "--scale", "0.5", "--out", tmp_path / "f.jpg", env={"ACNF_WEIGHTS_DIR": str(trained)})
    assert res.exit_code == 0, res.output
