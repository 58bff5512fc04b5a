"""End-to-end pipeline: experiment configs -> CSV artifacts -> figures.

Runs two shipped experiment configs through the registry, prints the sidecar
summaries, and (when the plotting package is installed) renders a figure
from the produced survival CSV.  Runs in a few seconds.
"""

import importlib.util
import json
import subprocess
import sys
import tempfile
from pathlib import Path

from stablelv import experiments as ex

CONFIG_DIR = Path(ex.__file__).parent / "configs"


def main():
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp)
        for name in ("voter-survival", "kernel-check"):
            cfg = ex.load_config(CONFIG_DIR / f"{name}.cfg", out_override=out)
            ex.run_experiment(cfg)
            sidecar = json.loads((out / f"{name}.json").read_text())
            print(f"== {name}: artifacts {sidecar['artifacts']}")
            print(json.dumps(sidecar["summary"], indent=2)[:400])

        if importlib.util.find_spec("plots") is None:
            print("plotting package not installed; skipping figure rendering")
            return
        spec = out / "survival.spec"
        spec.write_text(
            "kind = ratio-band\n"
            "input = survival.csv\n"
            f"output = {out / 'survival_ratio.png'}\n"
            "x = t\ny = p_t\nse = SE\nscale = x\n"
            "reference = inverse_escape_probability_heavy07\n"
            "title = Scaled survival probability\n"
        )
        subprocess.run(
            [sys.executable, "-m", "plots.cli", "render", str(spec)], check=True
        )
        print("figure bytes:", (out / "survival_ratio.png").stat().st_size)


if __name__ == "__main__":
    main()
