"""
The command line in one sitting
===============================

Writes a small dataset and a run configuration into a scratch directory,
then drives ``train``, ``eval``, ``inspect``, ``preprocess`` and
``augment-preview`` through the same entry point the ``mcdnn`` console
script uses.
"""

import tempfile
from pathlib import Path

from mcdnn.cli import main
from mcdnn.data import save_mcds, synthetic_shapes
from mcdnn.tensor import Rng

work = Path(tempfile.mkdtemp(prefix="mcdnn_cli_"))
save_mcds(work / "train.mcds", synthetic_shapes(Rng(0), 300, 3, 16))
save_mcds(work / "test.mcds", synthetic_shapes(Rng(1), 60, 3, 16))
(work / "run.cfg").write_text("""\
descriptor = 1x16x16-8C5-MP2-16C3-MP2-32N-3N
train = train.mcds
preprocessors = original; imadjust
columns = 2
seed = 5
eta_start = 0.01
eta_factor = 0.95
eta_min = 0.0001
max_epochs = 12
max_translate = 0.1
max_rotate = 10
max_scale = 0.1
threads = 2
""")

steps = [
    ["inspect", "1x16x16-8C5-MP2-16C3-MP2-32N-3N"],
    ["train", str(work / "run.cfg")],
    ["eval", str(work / "models" / "manifest.txt"), str(work / "test.mcds"), "--out", str(work / "report")],
    ["preprocess", str(work / "test.mcds"), "histeq", str(work / "test_histeq.mcds")],
    ["augment-preview", str(work / "test.mcds"), str(work / "preview"), "-n", "3",
     "--max-rotate", "15", "--max-translate", "0.15", "--max-scale", "0.15"],
]
for argv in steps:
    print(f"\n$ mcdnn {' '.join(argv)}")
    code = main(argv)
    print(f"(exit code {code})")

print("\nartifacts:", sorted(p.name for p in work.iterdir()))
