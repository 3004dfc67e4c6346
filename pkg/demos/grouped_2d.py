"""
Grouping qubits of a 2D grid into MPS sites
============================================

Columns of a diagonal grid are packed into groups. Gates inside a group are
applied exactly; only gates across group boundaries are truncated. Switching
between two groupings ("split and merge") makes every colour class of gates
in-group at some point.
"""

from __future__ import annotations

from noisy_mps import GroupedMpsState, Grid, grid_2d, parse_grouping

grid = Grid((2, 1, 2) * 4)  # 12 columns, 20 qubits
circuit = grid_2d(grid, 12, seed=0)
chi = 8

for tags in (["[1^12]"], ["[4,2,2,4]"], ["[4,2,2,4]", "[5,2,5]"]):
    groupings = [parse_grouping(t, grid=grid) for t in tags]
    state = GroupedMpsState.from_grouping(None, groupings[0], chi_max=chi)
    state.run(circuit, groupings=groupings)
    log = state.log
    exact = sum(e.kind == "exact" for e in log.entries)
    print(
        f"{' <-> '.join(tags):22s} exact gates {exact:3d}/{log.n_gates}  "
        f"f_av={log.f_av():.4f}  F={log.product():.3f}  memory={state.memory_bytes() / 1024:.0f} KiB"
    )
