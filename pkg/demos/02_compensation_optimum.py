"""Finding the best recovery field.

The compensation plan sets the recovery field so that its light shift cancels
the Doppler dependence of the coupling light shift.  Here the plan is compared
with a direct sweep of the recovery detuning and with a bounded optimizer.
"""

from inhomlimit import SweepSpec, compensation_plan, maximize_beta, preset, quadrature_grid, sweep

grid = quadrature_grid(1001)
base = preset("n_type", omega=29.0, delta=-270.0)

for eta in (1.0, 795 / 780):
    p = compensation_plan(29.0, -270.0, eta)
    print(f"eta={eta:.4f}: omega_r={p.omega_r:.2f} MHz, delta_r={p.delta_r:.2f} MHz")

spec = SweepSpec(base, (("delta_r", tuple(range(-330, -205, 15))),))
res = sweep(spec, grid)
print("\ndelta_r   beta")
for d, b in res.rows:
    print(f"{d:7.0f}  {b:6.2f}")

rep = maximize_beta(base, grid=grid, grid_points=5)
print(f"\noptimum   omega_r={rep.best_params['omega_r']:.2f}  delta_r={rep.best_params['delta_r']:.2f}"
      f"  beta={rep.best_beta:.3f}  ({rep.evaluations} evaluations)")
print(f"plan      omega_r={rep.plan.omega_r:.2f}  delta_r={rep.plan.delta_r:.2f}  beta={rep.plan_beta:.3f}")
