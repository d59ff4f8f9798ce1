"""
The command-line workflow
=========================

The ``growthmic`` command chains the same steps through files: CSV datasets,
a JSON model and CSV predictions.  This script drives it in a temporary
directory with a small study.
"""

import json
import subprocess
import sys
import tempfile
from pathlib import Path


def growthmic(*args):
    subprocess.run([sys.executable, "-m", "growthmic", *map(str, args)], check=True)


with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp)
    cfg = root / "config.json"
    cfg.write_text(json.dumps({"simulation": {"n_panels": 80, "noise_sd": 0.05, "sub_mic_attenuation": 0.9}}))

    growthmic("simulate", "--config", cfg, "--seed", 3, "--out", root / "data")
    growthmic("extract", "--config", cfg, "--dataset", root / "data/dataset.csv",
              "--references", root / "data/references.csv", "--out", root / "feat")
    growthmic("train", "--config", cfg, "--features", root / "feat/features.csv", "--out", root / "model")
    growthmic("predict", "--config", cfg, "--model", root / "model/model.json",
              "--dataset", root / "data/dataset.csv", "--out", root / "pred")
    growthmic("evaluate", "--config", cfg, "--predictions", root / "pred/predictions.csv",
              "--references", root / "data/references.csv", "--out", root / "eval")

    print(json.loads((root / "model/model.json").read_text())["term_list"])
    for line in (root / "pred/predictions.csv").read_text().splitlines()[:3]:
        print(",".join(line.split(",")[:12]))
