"""End-to-end checks of the `ens` command line.

usage: cli_integration.py <ens executable> <schemas dir>
"""

import json
import os
import subprocess
import sys
import tempfile
import unittest
from pathlib import Path

import jsonschema
import numpy as np

ENS = None
SCHEMAS = None


def run(*args, env=None, check=True):
    proc = subprocess.run([ENS, *map(str, args)], capture_output=True, text=True, env=env)
    if check and proc.returncode != 0:
        raise AssertionError(f"{args[0]} exited {proc.returncode}\nstdout:\n{proc.stdout}\nstderr:\n{proc.stderr}")
    return proc


def schema(name):
    return json.loads((SCHEMAS / name).read_text())


def write_numpy_cube(path, hr, compressed):
    """hr: [h, w, 7, t] float32, written the way numpy users would."""
    t = hr.shape[3]
    save = np.savez_compressed if compressed else np.savez
    save(
        path,
        highresdynamic=hr.astype(np.float32),
        mesodynamic=np.zeros((80, 80, 5, 5 * t), np.float32),
        highresstatic=np.full((128, 128), 300.0, np.float32),
        mesostatic=np.full((80, 80), 300.0, np.float32),
    )


def clear_cube(rng, t=30):
    hr = np.zeros((128, 128, 7, t), np.float32)
    red = rng.uniform(0.03, 0.08, (128, 128, t))
    hr[:, :, 0] = 0.7 * red
    hr[:, :, 1] = 1.25 * red + 0.01
    hr[:, :, 2] = red
    hr[:, :, 3] = red * rng.uniform(2.0, 6.0, (128, 128, t))
    hr[:, :, 5] = 4.0
    return hr


class Evaluate(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory(prefix="ens_cli_")
        root = Path(cls.tmp.name)
        cls.cubes = root / "cubes"
        cls.preds = root / "preds"
        run("synth", "--seed", 7, "--n", 100, "--out", cls.cubes, "--profile", "mixed")
        run("baseline", "--track", "iid", "--cubes", cls.cubes, "--out", cls.preds)

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def test_report_validates_and_is_worker_independent(self):
        out = Path(self.tmp.name)
        reports = []
        for workers in (1, 3):
            env = dict(os.environ, ENS_NUM_WORKERS=str(workers))
            proc = run("evaluate", "--targets", self.cubes, "--predictions", self.preds,
                       "--out", out / f"r{workers}.json", "--csv", out / "r.csv", env=env)
            self.assertIn("IID", proc.stdout)
            reports.append((out / f"r{workers}.json").read_bytes())
        self.assertEqual(reports[0], reports[1])
        report = json.loads(reports[0])
        jsonschema.validate(report, schema("evaluation_report.schema.json"))
        self.assertEqual(len(report["cubes"]), 100)
        self.assertEqual(report["errors"], [])
        self.assertTrue(0.0 < report["summary"]["ens"] < 1.0)
        csv = (out / "r.csv").read_text().splitlines()
        self.assertEqual(csv[0], "test_set,ens,mad,ols,emd,ssim")
        self.assertAlmostEqual(float(csv[1].split(",")[1]), report["summary"]["ens"], places=12)

    def test_synth_writes_manifest_and_quality_table(self):
        lines = (self.cubes / "manifest.jsonl").read_text().splitlines()
        self.assertEqual(len(lines), 100)
        ids = [json.loads(l)["cube_id"] for l in lines]
        self.assertEqual(ids, sorted(ids))
        table = (self.cubes / "quality_table.csv").read_text().splitlines()
        self.assertEqual(len(table), 101)
        self.assertTrue(table[0].startswith("cube_id,tile,latitude_band,start_month"))

    def test_missing_cube_prediction_exits_2(self):
        out = Path(self.tmp.name)
        partial = out / "partial"
        partial.mkdir()
        first = sorted(p.name for p in self.preds.iterdir())[0]
        os.symlink(self.preds / first, partial / first)
        proc = run("evaluate", "--targets", self.cubes, "--predictions", partial,
                   "--out", out / "partial.json", "--workers", 2, check=False)
        self.assertEqual(proc.returncode, 2)
        report = json.loads((out / "partial.json").read_text())
        jsonschema.validate(report, schema("evaluation_report.schema.json"))
        self.assertEqual(len(report["cubes"]), 1)
        self.assertEqual({e["kind"] for e in report["errors"]}, {"MissingPrediction"})

    def test_missing_prediction_dir_exits_1(self):
        proc = run("evaluate", "--targets", self.cubes, "--predictions", Path(self.tmp.name) / "absent",
                   "--out", Path(self.tmp.name) / "x.json", check=False)
        self.assertEqual(proc.returncode, 1)
        self.assertIn("prediction directory not found", proc.stderr)

    def test_bad_track_is_rejected(self):
        proc = run("evaluate", "--track", "weekly", "--targets", self.cubes, "--predictions", self.preds,
                   "--out", Path(self.tmp.name) / "x.json", check=False)
        self.assertNotEqual(proc.returncode, 0)


class GroundTruth(unittest.TestCase):
    def test_truth_as_prediction_scores_one(self):
        rng = np.random.default_rng(3)
        with tempfile.TemporaryDirectory(prefix="ens_gt_") as tmp:
            root = Path(tmp)
            (root / "cubes").mkdir()
            for k in range(4):
                cube_id = f"32UMC_2019-0{k + 1}-01_gt{k}"
                hr = clear_cube(rng)
                write_numpy_cube(root / "cubes" / f"{cube_id}.npz", hr, compressed=k % 2 == 0)
                pred_dir = root / "preds" / cube_id
                pred_dir.mkdir(parents=True)
                np.savez(pred_dir / "pred_000.npz", highresdynamic=hr[:, :, :4, 10:])
                # a worse second trajectory: the best one is picked
                np.savez(pred_dir / "pred_001.npz", highresdynamic=np.clip(hr[:, :, :4, 10:] + 0.05, 0, 1))
            run("evaluate", "--targets", root / "cubes", "--predictions", root / "preds", "--out", root / "r.json")
            report = json.loads((root / "r.json").read_text())
            jsonschema.validate(report, schema("evaluation_report.schema.json"))
            for key in ("ens", "mad", "ols", "emd", "ssim"):
                self.assertEqual(report["summary"][key], 1.0, key)
            self.assertTrue(all(c["best_trajectory"] == 0 and c["trajectories"] == 2 for c in report["cubes"]))


class Mask(unittest.TestCase):
    def test_clear_and_bright_cubes(self):
        rng = np.random.default_rng(4)
        with tempfile.TemporaryDirectory(prefix="ens_mask_") as tmp:
            root = Path(tmp)
            clear = clear_cube(rng, t=3)
            clear[:, :, 6] = 1.0  # stale mask, recomputed by the command
            write_numpy_cube(root / "32UMC_2018-05-01_clear.npz", clear, compressed=True)
            run("mask", "--cube", root / "32UMC_2018-05-01_clear.npz", "--out", root / "out_clear.npz")
            with np.load(root / "out_clear.npz") as z:
                self.assertEqual(z["highresdynamic"].shape, (128, 128, 7, 3))
                self.assertEqual(z["highresdynamic"].dtype, np.float32)
                self.assertEqual(z["highresdynamic"][:, :, 6].max(), 0.0)
                np.testing.assert_array_equal(z["highresdynamic"][:, :, :6], clear[:, :, :6])

            bright = clear_cube(rng, t=2)
            bright[:, :, :4] = 0.6
            write_numpy_cube(root / "32UMC_2018-05-01_bright.npz", bright, compressed=False)
            run("mask", "--cube", root / "32UMC_2018-05-01_bright.npz", "--out", root / "out_bright.npz")
            with np.load(root / "out_bright.npz") as z:
                self.assertEqual(z["highresdynamic"][:, :, 6].min(), 1.0)

            # the rewritten file is itself a valid input
            run("mask", "--cube", root / "out_bright.npz", "--out", root / "again.npz")

    def test_missing_array_is_reported(self):
        with tempfile.TemporaryDirectory(prefix="ens_mask_") as tmp:
            path = Path(tmp) / "broken.npz"
            np.savez(path, highresdynamic=np.zeros((128, 128, 7, 2), np.float32))
            proc = run("mask", "--cube", path, "--out", Path(tmp) / "o.npz", check=False)
            self.assertEqual(proc.returncode, 1)
            self.assertIn("MissingArray", proc.stderr)


class Curate(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp = tempfile.TemporaryDirectory(prefix="ens_curate_")
        cls.root = Path(cls.tmp.name)
        run("synth", "--seed", 5, "--n", 2000, "--tiles", 20, "--profile", "mixed", "--table-only",
            "--out", cls.root)
        cls.table = cls.root / "quality_table.csv"
        # scaled to 2000 rows in 100-row tiles; x settles at 0.5, leaving 50 rows per tile
        cls.flags = ["--min-total", 1000, "--north-min", 300, "--ood-tiles", 3, "--ood-north-min", 50]

    @classmethod
    def tearDownClass(cls):
        cls.tmp.cleanup()

    def curate(self, out, lo, hi, *extra, check=True):
        return run("curate", "--quality-table", self.table, "--out", self.root / out, "--seed", 9,
                   *self.flags, "--ood-min", lo, "--ood-max", hi, *extra, check=check)

    def test_disjoint_and_reproducible(self):
        self.curate("a.json", 150, 150)
        self.curate("b.json", 150, 150)
        a = (self.root / "a.json").read_bytes()
        self.assertEqual(a, (self.root / "b.json").read_bytes())
        split = json.loads(a)
        jsonschema.validate(split, schema("split.schema.json"))
        train, iid, ood = map(set, (split["train"], split["iid"], split["ood"]))
        self.assertFalse(train & iid or train & ood or iid & ood)
        self.assertEqual(len(ood), 150)
        self.assertEqual(split["seed"], 9)
        self.assertEqual(split["x_final"], 0.5)
        self.assertEqual(len(train) + len(iid) + len(ood), 1000)
        tiles = {i.split("_")[0] for i in ood}
        self.assertEqual(len(tiles), 3)
        self.assertFalse(tiles & {i.split("_")[0] for i in train | iid})

    def test_impossible_bounds_exit_1(self):
        proc = self.curate("bad.json", 160, 190, "--max-draws", 200, check=False)
        self.assertEqual(proc.returncode, 1)
        self.assertIn("SamplingExhausted", proc.stderr)
        self.assertFalse((self.root / "bad.json").exists())


def main():
    global ENS, SCHEMAS
    if len(sys.argv) < 3:
        sys.exit(__doc__)
    ENS = str(Path(sys.argv[1]).resolve())
    SCHEMAS = Path(sys.argv[2])
    unittest.main(argv=[sys.argv[0], "-v", *sys.argv[3:]])


if __name__ == "__main__":
    main()
