"""The six distance functions on histogram-like vectors.

Shows the linear-time Hutchinson (Monge-Kantorovich) transport distance
behaving differently from bin-wise distances: a histogram shifted by one
bin is "close" in transport terms no matter how little the bins overlap,
while chi-squared and L1 saturate.
"""
import numpy as np

from histocbir import CANONICAL_DISTANCE_ORDER, distance

base = np.zeros(16)
base[3:6] = [0.2, 0.6, 0.2]

shift1 = np.roll(base, 1)  # neighbouring shape
shift8 = np.roll(base, 8)  # far shape

print(f"{'distance':<14}{'1-bin shift':>14}{'8-bin shift':>14}")
for kind in CANONICAL_DISTANCE_ORDER:
    d1 = distance(kind, base, shift1)
    d8 = distance(kind, base, shift8)
    print(f"{kind.value:<14}{d1:>14.4f}{d8:>14.4f}")

print(
    "\nBin-wise distances (L1, chi2) can no longer tell a 1-bin shift from an"
    "\n8-bin shift once supports stop overlapping; the transport distance"
    "\ngrows with how far the mass moved (1.0 vs 8.0 above)."
)
