# The whole batch pipeline in one sitting: clean a raw corpus, derive
# heat levels, build the vector index, evaluate a scenario with a mock
# model, and aggregate the report. Everything lands in ./pipeline_demo.

import json
from pathlib import Path

from heatpred.pipeline import load_config, run_pipeline

workdir = Path("pipeline_demo")
workdir.mkdir(exist_ok=True)

# four well-separated heat blobs so the level scan lands on four
rows = []
i = 0
for lvl, center in enumerate((1.5, 10.5, 30.5, 60.5), start=1):
    for j in range(8):
        rows.append({
            "id": f"ev{i:03d}",
            "title": f"event {i}",
            "content": f"dispatch {i}: a level-{lvl} style incident, follow-up {j}",
            "category": f"cat{lvl}",
            "heat_index": center + 0.05 * j,
        })
        i += 1
(workdir / "corpus.jsonl").write_text(
    "".join(json.dumps(r) + "\n" for r in rows), encoding="utf-8"
)

(workdir / "demo.toml").write_text(
    """\
[paths]
corpus = "corpus.jsonl"
out_dir = "out"

[cluster]
k_range = "2..6"

[embedder]
dim = 256

[eval]
per_level = 6
recall_k = 5

[models.demo-mock]
kind = "mock"
letter = "B"
""",
    encoding="utf-8",
)

cfg = load_config(workdir / "demo.toml")
stages = ["clean", "cluster", "index", "eval", "report"]
run_pipeline(cfg, stages, scenario="recalled", model="demo-mock")

print("artifacts under", cfg.paths.out_dir)
for path in sorted(cfg.paths.out_dir.rglob("*")):
    if path.is_file() and not path.name.endswith(".stamp"):
        print(" ", path.relative_to(workdir))

print()
print((cfg.paths.out_dir / "report.md").read_text(encoding="utf-8"))

# run it again: every stage sees fresh inputs and skips itself
run_pipeline(cfg, stages, scenario="recalled", model="demo-mock")
print("second invocation was a no-op (content hashes unchanged)")
