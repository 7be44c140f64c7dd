"""CPU time per run of UNIF and Euler on the same single-firm config."""

import argparse
import time
from pathlib import Path

from fptmc.baseline import EulerConfig, euler_simulate
from fptmc.config import load_config
from fptmc.estimate import estimate_firm
from fptmc.unif import simulate

ROOT = Path(__file__).resolve().parents[1]


def cpu(fn):
    t0 = time.process_time()
    out = fn()
    return out, time.process_time() - t0


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=ROOT / "configs" / "single_a_rated.toml")
    ap.add_argument("--runs", type=int)
    args = ap.parse_args(argv)
    cfg = load_config(args.config)
    n = args.runs or cfg.n_runs

    ss_u, t_u = cpu(lambda: simulate(cfg.portfolio, n, cfg.seed))
    ss_e, t_e = cpu(lambda: euler_simulate(cfg.portfolio, EulerConfig(cfg.dt, n, cfg.seed)))
    print("engine,n_runs,cpu_seconds,cpu_per_run,p10,bandwidth")
    for name, ss, t in (("unif", ss_u, t_u), ("euler", ss_e, t_e)):
        est = estimate_firm(ss, 0)
        print(f"{name},{n},{t:.3f},{t / n:.3e},{est.rates.rates[-1]:.5f},{est.density.bandwidth:.4f}")
    print(f"speedup {t_e / t_u:.1f}x")


if __name__ == "__main__":
    main()
