"""Desk-scale scaling sweep: time each method on tollbooth games with more
and more waves. Baselines stop at the cell budget; the interface filter
keeps going."""
import sys

from tagg import bench

waves = int(sys.argv[1]) if len(sys.argv) > 1 else 8
grid = bench.parse_grid(f"lanes=3,cars=5,waves=1..{waves}")
print(f"{'waves':>5} {'method':>15} {'seconds':>9} {'peak cells':>12}  outcome")
for rec in bench.run_bench("tollbooth", grid, profiles=5, seed=1):
    print(f"{rec.params['waves']:>5} {rec.method:>15} {rec.seconds:>9.3f} {rec.peak_cells:>12}  {rec.outcome}")
