"""Run one experiment from a YAML config and write gnuplot scripts next to it.

    python3 scripts/run_experiment.py configs/default.yaml --set solver.gamma=0.9
"""

import argparse
import json
import sys

from fracsqg.config import apply_overrides, load_config
from fracsqg.experiment import emit_plots, run_experiment


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("config")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    args = p.parse_args()
    cfg = apply_overrides(load_config(args.config), args.set)
    rep = run_experiment(cfg)
    emit_plots([f"{cfg.output.directory}/report.json"])
    print(json.dumps({"termination_reason": rep.termination_reason,
                      "final_linf": rep.final_record.get("linf_norm"),
                      "certified": (rep.bounds or {}).get("certified"),
                      "seconds": round(rep.wall_clock_seconds, 2)}, indent=2))
    return 0 if rep.termination_reason == "completed" else 2


if __name__ == "__main__":
    sys.exit(main())
