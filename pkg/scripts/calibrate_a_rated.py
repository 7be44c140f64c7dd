"""Fit the single-firm jump parameters to a historical curve, then the pair diffusion matrix."""

import argparse
import json
from pathlib import Path

import numpy as np

from fptmc.calibrate import calibrate_pair, calibrate_single_firm, read_historical_csv
from fptmc.config import load_config

ROOT = Path(__file__).resolve().parents[1]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--historical", default=ROOT / "data" / "synthetic_a_rated.csv")
    ap.add_argument("--single", default=ROOT / "configs" / "single_a_rated.toml")
    ap.add_argument("--pair", default=ROOT / "configs" / "pair_aa.toml")
    ap.add_argument("--skip-pair", action="store_true")
    args = ap.parse_args(argv)

    hist = read_historical_csv(args.historical)
    cfg = load_config(args.single)
    opts = cfg.calibration
    single = calibrate_single_firm(hist, opts["init"], cfg.seed, opts["sim_runs"], max_evals=opts["max_evals"])
    print(json.dumps({"single": single.params, "objective": single.objective_value,
                      "evaluations": single.evaluations}, indent=2))
    if args.skip_pair:
        return
    pcfg = load_config(args.pair)
    p = single.params
    init = pcfg.calibration.get("init", pcfg.portfolio.diffusion.entries.ravel().tolist())
    pair = calibrate_pair([hist, hist], (p["lam"], p["jump_mean"], p["jump_sd"]), np.asarray(init),
                          pcfg.seed, pcfg.calibration.get("sim_runs", 20_000),
                          max_evals=pcfg.calibration.get("max_evals", 300))
    print(json.dumps({"pair": pair.params, "derived": pair.derived, "objective": pair.objective_value}, indent=2))


if __name__ == "__main__":
    main()
