"""Noise floors of the inexact gradient method.

On a quadratic with mu = L = 1 and unit step, gradient descent reaches
the optimum in one step; with a biased and noisy oracle it instead
hovers at a floor no higher than delta^2/(2 mu) + L gamma sigma^2/(2 mu).
The trailing optimality gap (last 20% of iterates, averaged over seeds)
is compared against that floor for a small (delta, sigma) grid.
"""

import numpy as np

from plnet import (
    DGDConfig,
    LeastSquaresProblem,
    MixingModel,
    OracleSpec,
    dgd_run,
    noise_floor,
    make_graph_sequence,
)

n, d = 2, 2
problem = LeastSquaresProblem(np.tile(np.eye(d), (n, 1, 1)),
                              np.random.default_rng(5).standard_normal((n, d)))
model = MixingModel(make_graph_sequence(n, "static", topology="complete"))
iterations, seeds = 100, 30

print(f"{'delta':>6} {'sigma':>6} {'trailing gap':>14} {'floor bound':>14}")
for delta in (0.0, 0.1):
    for sigma in (0.1, 0.5):
        gaps = []
        for seed in range(seeds):
            spec = OracleSpec(delta=delta, sigma=sigma, seed=seed)
            config = DGDConfig(gamma=1.0, iterations=iterations,
                               rounds_schedule=1, oracle=spec)
            record, _ = dgd_run(problem, model, config, np.zeros((n, d)))
            gaps.extend(record.f_gap[-iterations // 5:])
        measured = float(np.mean(gaps))
        floor = noise_floor(delta, sigma, gamma=1.0, mu=1.0, L=1.0)
        assert measured <= floor
        print(f"{delta:>6.2f} {sigma:>6.2f} {measured:>14.4e} {floor:>14.4e}")

print("\nthe measured plateau sits under the floor for every oracle;")
print("averaging across nodes shrinks the effective noise, so the bound")
print("is loose but ordered: a noisier oracle plateaus strictly higher.")
