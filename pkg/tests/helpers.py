import numpy as np

from multilevel_adaptation.landscape import InterdependenceMatrix, Landscape, global_optimum


def constant_landscape(matrix: InterdependenceMatrix, value: float = 0.5) -> Landscape:
    tables = np.full((matrix.n_decisions, 1 << (matrix.k + 1)), value)
    land = Landscape(matrix, tables, seed=0)
    object.__setattr__(land, "optimum", global_optimum(land))
    return land
