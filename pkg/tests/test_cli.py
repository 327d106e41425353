import json

import numpy as np

from flowsym import cli, isohedral
from flowsym.identspace import DensityConfig
from flowsym.report import pgm_bytes

FAST_ESCHER = ["--omega", "1", "--iters-affine", "30", "--iters-flow", "5", "--restarts", "1", "--n-samples", "256",
               "--eval-samples", "512", "--steps", "4", "--verify-samples", "2000"]


def test_missing_target_names_path(tmp_path, capsys):
    missing = tmp_path / "nope.pgm"
    code = cli.main(["escherize", "--target", str(missing), "--class", "IH1", "--out", str(tmp_path / "o")])
    assert code == 1
    assert str(missing) in capsys.readouterr().err


def test_bad_class_and_usage_errors(tmp_path):
    assert cli.main(["escherize", "--target", "template", "--class", "IH8", "--out", str(tmp_path)]) == 1
    assert cli.main(["escherize"]) == 1
    assert cli.main(["frobnicate"]) == 1


def test_escherize_template_self_test(tmp_path):
    out = tmp_path / "run"
    code = cli.main(["escherize", "--target", "template", "--class", "IH1", "--out", str(out),
                     "--omega", "1", "--iters-affine", "100", "--iters-flow", "5", "--restarts", "2", "--tau", "50",
                     "--n-samples", "2048", "--eval-samples", "2048", "--steps", "4", "--verify-samples", "2000"])
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["metrics"]["iou"] >= 0.98 and rep["tiling_valid"] is True
    for k in ("svg", "tile_pgm", "loss_csv", "field"):
        assert (out / rep["outputs"][k].split("/")[-1]).exists()
    assert (out / "tiling.svg").read_text().startswith("<?xml")
    assert (out / "loss.csv").read_text().startswith("iteration,phase,loss")


def test_escherize_mask_file(tmp_path):
    y, x = np.mgrid[0:48, 0:48]
    img = np.where((x - 24) ** 2 + (y - 24) ** 2 < 15 ** 2, 0.0, 1.0)
    p = tmp_path / "disk.pgm"
    p.write_bytes(pgm_bytes(img))
    assert cli.main(["escherize", "--target", str(p), "--class", "IH4", "--out", str(tmp_path / "o")]
                    + FAST_ESCHER) == 0


def test_escherize_all_fans_out(tmp_path):
    out = tmp_path / "all"
    assert cli.main(["escherize", "--target", "template", "--class", "all", "--out", str(out)] + FAST_ESCHER) == 0
    reports = sorted(p.parent.name for p in out.glob("*/report.json"))
    assert reports == sorted(c.value for c in isohedral.IsohedralClass)


def test_sweep_omega_zero_is_placed_template(tmp_path):
    out = tmp_path / "sw"
    code = cli.main(["sweep-omega", "--target", "template", "--class", "IH2", "--omegas", "0,1", "--out", str(out)]
                    + FAST_ESCHER[2:])
    assert code == 0
    rep = json.loads((out / "sweep.json").read_text())
    runs = {r["omega"]: r for r in rep["metrics"]["runs"]}
    # IH2 keeps a constant glide-axis field at omega=0, so compare modulo translation
    assert runs[0]["hausdorff_mod_translation_relative"] <= 1e-4
    assert runs[1]["best_eval_loss"] <= runs[0]["best_eval_loss"]


def test_sweep_omega_empty_list(tmp_path):
    assert cli.main(["sweep-omega", "--target", "template", "--omegas", "", "--out", str(tmp_path)]) == 1
    assert cli.main(["sweep-omega", "--target", "template", "--omegas", "1,x", "--out", str(tmp_path)]) == 1


def test_density_unknown_space(tmp_path):
    assert cli.main(["density", "--space", "cylinder", "--out", str(tmp_path)]) == 1


def test_density_train_then_kl_only(tmp_path):
    out = tmp_path / "d"
    args = ["density", "--space", "torus", "--target", "4g", "--omega", "1", "--iters", "10", "--steps", "4",
            "--kl-samples", "500", "--grid", "16", "--out", str(out)]
    assert cli.main(args) == 0
    rep = json.loads((out / "report.json").read_text())
    assert np.isfinite(rep["metrics"]["kl_target_model"]) and "normalization" in rep["metrics"]
    assert (out / "density.pgm").read_bytes().startswith(b"P5")
    assert (out / "nll.csv").read_text().startswith("iteration,nll")
    out2 = tmp_path / "e"
    assert cli.main(["density", "--space", "torus", "--kl-only", "--checkpoint", str(out / "field.txt"),
                     "--steps", "4", "--kl-samples", "500", "--grid", "16", "--out", str(out2)]) == 0
    rep2 = json.loads((out2 / "report.json").read_text())
    assert rep2["kind"] == "density_eval" and np.isfinite(rep2["metrics"]["kl_target_model"])
    assert cli.main(["density", "--kl-only", "--out", str(out2)]) == 1


def test_config_file_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nomega = 3\niters = 7\nspace = sphere\nkappa = 2.5\n")
    ap = cli.build_parser()
    sub = ap._subparsers._group_actions[0].choices["density"]
    args = ap.parse_args(["density", "--config", str(cfg), "--iters", "9"])
    args = cli.merge_options(args, sub)
    assert args.omega == 3 and args.iters == 9 and args.space == "sphere"
    assert args.kappa == 2.5 and args.lr == DensityConfig().lr


def test_config_file_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense_key = 1\n")
    assert cli.main(["density", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert cli.main(["density", "--config", str(tmp_path / "missing.cfg")]) == 1


def test_verify_quick_passes(capsys):
    assert cli.main(["verify", "--quick", "--class", "IH1,IH4", "--space", "torus"]) == 0
    out = capsys.readouterr().out
    assert "verify_tiling[IH4]" in out and "PASS" in out


def test_verify_corrupted_template_fails(monkeypatch, capsys):
    good = isohedral._hexagon

    def corrupted():
        p = np.array(good(), float)
        p[2] += [0.07, -0.03]
        return p

    monkeypatch.setattr(isohedral, "_hexagon", corrupted)
    assert cli.main(["verify", "--quick", "--class", "IH4", "--space", "torus"]) == 3
    captured = capsys.readouterr()
    assert "verify_tiling[IH4]" in captured.err


def test_version(capsys):
    assert cli.main(["--version"]) == 0
    assert "flowsym" in capsys.readouterr().out
