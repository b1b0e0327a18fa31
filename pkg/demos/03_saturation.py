"""How far can the enhancement go?

Far from resonance the closed form predicts beta rising as mu^2 / (1 + mu^2)
toward beta0 gamma / (gamma + gamma_r).  The full density-matrix ensemble
follows it only while the dressing is weak: stronger fields mix the ground
state into the recovery level and the enhancement turns over.  The third
column tracks that with the exact two-level dressing.
"""

from inhomlimit import quadrature_grid
from inhomlimit.optimize import fig4_rows

rows = fig4_rows("draft", quadrature_grid(1001))
print("    mu   omega   simulated   saturation   dressed   asymptote")
for mu, om, b, sat, dressed, asym in rows:
    print(f"{mu:6.2f} {om:7.1f} {b:11.2f} {sat:12.2f} {dressed:9.2f} {asym:11.2f}")
