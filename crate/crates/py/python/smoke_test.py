"""Smoke test for the mmot extension module.

Build and install first, e.g. `maturin develop --release` or
`pip install .` from crates/py.
"""

import math

import mmot


def two_point():
    grid = mmot.GridSpec(3, 4.0, 3)
    density = mmot.Density.atoms([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0]], [0.5, 0.5])
    measure = mmot.discretize(density, grid)
    model = mmot.CostModel.coulomb(2)
    sol = mmot.solve_mmot(measure, model, cost_mode="pointwise")
    assert math.isclose(sol.value, 0.5, abs_tol=1e-12), sol.value
    assert math.isclose(sol.dual_value, 0.5, abs_tol=1e-12), sol.dual_value
    report = mmot.verify_duality(sol.plan, sol.potentials, model, measure, cost_mode="pointwise")
    assert report["dual_feasible"] and report["relative_gap"] < 1e-8, report
    assert all(math.isclose(u, 0.25, abs_tol=1e-12) for u in sol.potentials.symmetrized())
    again = mmot.TransportPlan.parse(sol.plan.to_text())
    assert again.atoms() == sol.plan.atoms()


def ball():
    grid = mmot.GridSpec(2, 1.0, 2)
    measure = mmot.discretize(mmot.Density.ball([0.0, 0.0], 0.8), grid)
    assert math.isclose(measure.total_mass(), 1.0, abs_tol=1e-12)
    model = mmot.CostModel.coulomb(3)
    sol = mmot.solve_mmot(measure, model)
    report = mmot.verify_duality(sol.plan, sol.potentials, model, measure)
    assert report["relative_gap"] < 1e-8, report
    csv = mmot.converge(mmot.Density.ball([0.0], 0.8), model, (1, 3), 1.0)
    lines = csv.splitlines()
    assert lines[0] == "level,primal,dual,gap,alpha,pot_sup,bound,ms" and len(lines) == 4, csv
    primals = [float(l.split(",")[1]) for l in lines[1:]]
    assert primals == sorted(primals), primals


def improve():
    grid = mmot.GridSpec(1, 1.0, 1)
    plan = mmot.TransportPlan(grid, 2, [([[0], [0]], 0.5), ([[1], [1]], 0.5)])
    model = mmot.CostModel.coulomb(2)
    better, moves = mmot.swap_search(plan, model)
    assert len(moves) == 1 and moves[0][1] < moves[0][0], moves
    assert sorted(better.atoms()) == [([[0], [1]], 0.5), ([[1], [0]], 0.5)], better.atoms()


def errors():
    grid = mmot.GridSpec(2, 4.0, 1)
    measure = mmot.discretize(mmot.Density.atoms([[0.0], [2.0]], [0.5, 0.5]), grid)
    try:
        mmot.solve_mmot(measure, mmot.CostModel.coulomb(3))
    except mmot.SolverError as e:
        assert "marginals" in str(e)
    else:
        raise AssertionError("expected SolverError")
    try:
        mmot.GridSpec(2, 0.3, 1)
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")


if __name__ == "__main__":
    two_point()
    ball()
    improve()
    errors()
    print("smoke test passed")
