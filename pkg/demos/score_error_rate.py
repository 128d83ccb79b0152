"""How fast does the dataset-optimal score approach the exact score?

The closed-form minimizer of the conditional score-matching objective over
N training points is a softmax-weighted average of kernel scores. Averaged
over the diffusion time interval and the exact marginal law, its squared
distance to the exact Gaussian score decays like 1/N. This script estimates
that error for a handful of N values and fits the log-log slope, which
should land near -1.

Reduced-scale version of the `figure2` preset (the CLI runs the full one:
``scorekde score-error --config figure2``). Runtime: ~20 s.
"""


from scorekde import (
    IsotropicGaussianTarget,
    derived_seed,
    loglog_slope,
    score_error_protocol,
)

SEED = 7
target = IsotropicGaussianTarget([-5.0, 5.0], 10.0)
sample_sizes = (100, 200, 500, 1000)

print(f"target: N(mean={target.mean.tolist()}, {target.variance} I), d = {target.dim}")
print(f"{'N':>6} {'error':>10} {'std_err':>10}")

entries = []
for i, n in enumerate(sample_sizes):
    # fresh datasets per repetition; x drawn from the closed-form marginal
    report = score_error_protocol(
        target,
        n,
        delta=0.02,
        horizon=5.0,
        grid_step=0.05,
        mc_points=400,
        repetitions=5,
        seed=derived_seed(SEED, i),
    )
    entries.append((n, report))
    print(f"{n:>6} {report.value:>10.4f} {report.std_error:>10.4f}")

slope, intercept = loglog_slope(entries)
print(f"\nlog-log slope: {slope:.3f}  (1/N decay corresponds to -1)")
print(f"fitted error model: exp({intercept:.2f}) * N^({slope:.3f})")

ratio = entries[0][1].value / entries[-1][1].value
print(f"error(N=100) / error(N=1000) = {ratio:.2f}  (10 under an exact 1/N law)")
assert -1.25 <= slope <= -0.75, "rate drifted outside the expected band"
