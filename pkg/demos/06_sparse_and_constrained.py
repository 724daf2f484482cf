"""
Sparsity and constraints
========================

An l1 penalty on Haar coefficients zeroes more coefficients as lambda
grows. A warm start from the least-squares result inside an l1 ball keeps
every iterate feasible.
"""

import numpy as np

from proxfwi.experiment import ExperimentConfig, build_problem, run_experiment
from proxfwi.pqn import minimize

for lam in (1e-5, 1e-4, 1e-3):
    cfg = ExperimentConfig.from_dict({"transform": {"kind": "haar", "levels": 3},
                                      "regularizer": {"kind": "l1", "lam": lam}})
    s = run_experiment(cfg, write=False).summary
    print(f"lambda {lam:.0e}: {s['zero_coefficients']} zero coefficients, final phi {s['final_phi']:.3e}")

ls = run_experiment(ExperimentConfig.from_dict({"output_dir": "demo_runs/ls"}))
cfg = ExperimentConfig.from_dict({
    "start": {"kind": "run", "path": "demo_runs/ls"},
    "regularizer": {"kind": "l1_ball", "tau_from_start": 0.99},
})
problem, y0, _, _ = build_problem(cfg)
tau = problem.regularizer.tau
res = minimize(problem, y0, cfg.solver, lambda rec, y: print(
    f"  iter {rec.iter:2d}  phi {rec.phi:.3e}  ||y||_1/tau {np.abs(y).sum() / tau:.12f}") if rec.iter % 5 == 0 else None)
print("status", res.status)
