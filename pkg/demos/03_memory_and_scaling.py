# Desk-scale version of the method comparison table.
#
# The sparse-dense baseline factors H + s I for every Schur shift. With a
# memory budget of about 1 MB its assembled factor stops fitting at level 5,
# while Lanczos-Sylvester only ever keeps a few N x 4 blocks.
import io

from kronsep.bench import DESK_MEM_BUDGET, compare_rows, rows_to_csv
from kronsep.sparse_dense import assembled_memory_estimate
from kronsep import new_grid

for h in range(1, 7):
    print(f"level {h}: assembled sparse-dense needs ~{assembled_memory_estimate(new_grid(h)):>10,d} bytes")

rows = compare_rows(range(1, 7), ["lanczos-sylvester", "sparse-dense"], mem_budget=DESK_MEM_BUDGET)
print(rows_to_csv(rows))

# Wall time per level for the two iterative solvers. N grows fourfold per
# level; at small levels fixed per-call overhead dominates, so the ratios only
# approach the linear-cost value of 4 from level 7 on.
rows = compare_rows(range(3, 9), ["cg", "lanczos-sylvester"], repeat=3)
buf = io.StringIO()
rows_to_csv(rows, buf)
print(buf.getvalue())
for method in ("cg", "lanczos-sylvester"):
    t = [float(r["wall_time_s"]) for r in rows if r["method"] == method]
    print(method, "time ratios:", " ".join(f"{b / a:.2f}" for a, b in zip(t, t[1:])))
