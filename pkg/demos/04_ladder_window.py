"""Ladder scheme and the transparency window.

In the Rydberg ladder the coupling and recovery fields share the excited
level.  The enhanced line sits inside an Autler-Townes window whose width is
set by the combined dressing sqrt(omega^2 + omega_r^2).
"""

import math

from inhomlimit import at_window_width, preset, quadrature_grid, simulate_beta, spectrum

grid = quadrature_grid(1001)
ladder = preset("ladder_rydberg")
meas = simulate_beta(ladder, None, grid)
print(f"ladder beta {meas.beta:.2f} at {meas.peak.detuning:.2f} MHz")

sp = spectrum(ladder, (-300.0, 300.0), 601, grid)
w = at_window_width(sp)
print(f"window width {w:.1f} MHz; 2 sqrt(omega^2 + omega_r^2) = {2 * math.hypot(55, 45):.1f} MHz")

ntype = preset("n_type", omega=29.0, omega_r=29.0)
w2 = at_window_width(spectrum(ntype, (-700.0, 300.0), 501, grid))
print(f"N-type window width {w2:.1f} MHz")
