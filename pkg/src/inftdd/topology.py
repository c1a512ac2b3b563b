"""Indoor-factory hall layout: BS grid and UE drops."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import NetworkConfig, TrafficConfig

# UE roles
DL_URLLC, DL_EMBB, UL_URLLC = 0, 1, 2


@dataclass(frozen=True)
class Topology:
    """Node positions and UE association.

    BSs are nodes ``0..C-1``; UE ``u`` is node ``C + u``.  Within a cell the
    UEs are ordered DL eMBB first, then DL URLLC, then UL URLLC.
    """

    bs_positions: np.ndarray  # (C, 3)
    ue_positions: np.ndarray  # (U, 3)
    cell_of_ue: np.ndarray  # (U,)
    ue_role: np.ndarray  # (U,)

    @property
    def num_cells(self) -> int:
        return len(self.bs_positions)

    @property
    def num_ues(self) -> int:
        return len(self.ue_positions)

    @property
    def node_positions(self) -> np.ndarray:
        return np.vstack([self.bs_positions, self.ue_positions])

    @property
    def ue_positions_per_cell(self) -> list[np.ndarray]:
        return [self.ue_positions[self.cell_of_ue == c] for c in range(self.num_cells)]

    def ues_of_cell(self, cell: int) -> np.ndarray:
        return np.flatnonzero(self.cell_of_ue == cell)


def bs_grid(cfg: NetworkConfig) -> np.ndarray:
    dx = cfg.hall_length_m / cfg.grid_cols
    dy = cfg.hall_width_m / cfg.grid_rows
    pos = [((col + 0.5) * dx, (row + 0.5) * dy, cfg.bs_height_m)
           for row in range(cfg.grid_rows) for col in range(cfg.grid_cols)]
    return np.array(pos, dtype=float)


def _roles(traffic: TrafficConfig) -> list[int]:
    return ([DL_EMBB] * traffic.k_embb_dl + [DL_URLLC] * traffic.k_urllc_dl + [UL_URLLC] * traffic.k_ul)


def build_topology(cfg: NetworkConfig, rng: np.random.Generator, traffic: TrafficConfig) -> Topology:
    """Place BSs on a centred grid and drop ``k_dl + k_ul`` UEs per cell.

    With ``ue_drop="cell_patch"`` each cell's UEs are uniform over the
    rectangular patch owned by its BS.  With ``"hall"`` all UEs are uniform
    over the hall and join the nearest BS (so per-cell counts vary).
    """
    bs = bs_grid(cfg)
    dx = cfg.hall_length_m / cfg.grid_cols
    dy = cfg.hall_width_m / cfg.grid_rows
    roles = _roles(traffic)
    k = len(roles)
    if cfg.ue_drop == "cell_patch":
        positions, cells, ue_roles = [], [], []
        for c in range(cfg.num_cells):
            row, col = divmod(c, cfg.grid_cols)
            x = rng.uniform(col * dx, (col + 1) * dx, size=k)
            y = rng.uniform(row * dy, (row + 1) * dy, size=k)
            positions.append(np.column_stack([x, y, np.full(k, cfg.ue_height_m)]))
            cells += [c] * k
            ue_roles += roles
        ue_pos = np.vstack(positions) if positions else np.zeros((0, 3))
        return Topology(bs, ue_pos, np.array(cells, dtype=int), np.array(ue_roles, dtype=int))

    n = k * cfg.num_cells
    x = rng.uniform(0, cfg.hall_length_m, size=n)
    y = rng.uniform(0, cfg.hall_width_m, size=n)
    ue_pos = np.column_stack([x, y, np.full(n, cfg.ue_height_m)])
    d2 = ((ue_pos[:, None, :2] - bs[None, :, :2]) ** 2).sum(axis=2)
    cell = d2.argmin(axis=1)
    order = np.argsort(cell, kind="stable")
    ue_pos, cell = ue_pos[order], cell[order]
    ue_roles = np.empty(n, dtype=int)
    for c in range(cfg.num_cells):
        idx = np.flatnonzero(cell == c)
        # roles cycle so every cell keeps the configured mix as far as its count allows
        ue_roles[idx] = [roles[i % k] for i in range(len(idx))]
    return Topology(bs, ue_pos, cell, ue_roles)
