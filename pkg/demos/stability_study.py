"""A compact stability-constrained commitment study (two days).

Trains two linear assessors on a uniformly sampled criterion dataset,
splices each into the day-ahead commitment as a constraint, and reports
the operation-aware metric table.  The full 30-day version of this study
is the CLI command:

    gridlearn gen-testbed --case case14 --seed 7 --days 30 --out runs/tb
    gridlearn sco --profile runs/tb/profile.csv --days 30 --out runs/sco
"""

import numpy as np

from gridlearn.grid import build_uc, bundled_case, generate_profiles, uc_parameter_values
from gridlearn.learners import TrainConfig, train_constrained_logistic, train_logistic
from gridlearn.optmodel import substitute_parameters
from gridlearn.pipelines import add_stability_constraints, assessor_flags, assign_regions, sco_metrics
from gridlearn.sampling import oracle_label, uniform_sampling
from gridlearn.solver import SolverOptions
from gridlearn.solver.bnb import solve

LIM = 5.0
g = bundled_case("case14")
profile = generate_profiles(g, seed=7, days=2)
opts = SolverOptions(engine="mip")

ds = uniform_sampling(g, levels=5, threshold=LIM)
print(f"dataset: {len(ds)} samples, {ds.labels.mean() * 100:.1f}% unstable")
X, y = ds.features(), ds.labels
assessors = {
    "lgr": train_logistic(X, y, TrainConfig(epochs=600)),
    "clgr": train_constrained_logistic(X, y, TrainConfig(epochs=600)),
}

def run(prob):
    points, cost = [], 0.0
    for d in range(2):
        sl = slice(d * 24, (d + 1) * 24)
        conc = substitute_parameters(
            prob, uc_parameter_values(profile.load[sl], profile.solar[sl]))
        sol = solve(conc, opts)
        cost += sol.objective / 2
        u = np.round(sol.value_of(conc, "status").reshape(24, 5))
        curt = sol.value_of(conc, "curtail").reshape(24, 4)
        solar = profile.solar[sl]
        for t in range(24):
            points.append((u[t], (solar[t] - curt[t]) / g.base_mva))
    truth = np.array([oracle_label(g, u, p, LIM)[1] for u, p in points])
    return points, truth, cost

base_points, base_truth, base_cost = run(build_uc(g, horizon=24))
print(f"\nplain problem: avg cost {base_cost:.0f}, "
      f"{base_truth.mean() * 100:.0f}% of hours unstable")

for name, model in assessors.items():
    prob = add_stability_constraints(build_uc(g, horizon=24), model, g, 24)
    _, truth, cost = run(prob)
    feats = np.array([np.concatenate([u, p]) for u, p in base_points])
    flags = assessor_flags(model, feats[:, :5], feats[:, 5:]).ravel()
    rep = sco_metrics(assign_regions(base_truth.astype(bool), flags.astype(bool)),
                      np.where(truth == 1, 2, 1), daily_ur=False)
    print(f"{name}: avg cost {cost:.0f}  UR={rep.ur_constrained * 100:.1f}%  "
          f"SR={rep.sr * 100:.1f}%  DR={rep.dr * 100:.1f}%  OR={rep.or_ * 100:.1f}%")
