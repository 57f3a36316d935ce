"""
The command-line stages, chained through files
==============================================

synth writes tensors and annotations, propose reads the tensors and writes
proposal CSVs, eval scores them. Each output directory keeps its resolved
config.json.
"""
import tempfile
from pathlib import Path

from farpn.cli import main

work = Path(tempfile.mkdtemp(prefix="farpn_demo_"))
main(["anchors", "--set", "image_width=1280", "--set", "image_height=1280", "--out", str(work / "anchors")])
main(["synth", "--set", "n_scenes=4", "--set", "noise_sd=0.1", "--out", str(work / "synth")])
ann = str(work / "synth" / "annotations.txt")
for it in (0, 1):
    main(["propose", "--tensors", str(work / "synth" / "tensors"), "--iterations", str(it),
          "--set", f"annotations={ann}", "--out", str(work / f"prop{it}")])
    main(["eval", "--proposals", str(work / f"prop{it}" / "proposals"), "--annotations", ann,
          "--topn", "100,1000", "--iou", "0.5,0.7", "--out", str(work / f"eval{it}")])
print("outputs under", work)
for p in sorted(work.rglob("config.json")):
    print("  ", p.relative_to(work))
