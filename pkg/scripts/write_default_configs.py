"""Regenerate configs/default/<experiment>.json from the dataclass defaults."""

import json
from pathlib import Path

from minwidth_lab.experiments import EXPERIMENTS

out = Path(__file__).resolve().parents[1] / "configs" / "default"
out.mkdir(parents=True, exist_ok=True)
for name, exp in EXPERIMENTS.items():
    path = out / f"{name}.json"
    path.write_text(json.dumps(exp.config().to_dict(), indent=2, sort_keys=True) + "\n")
    print(path)
