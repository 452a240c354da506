import json
import math

import numpy as np
import pytest

from app.services.convex_kernel import SubproblemBuilder, solve_subproblem
from app.services.errors import InfeasibleStartError
from app.services.sdr import hermitian_basis


class TestSolveSubproblem:
    def test_perspective_with_inequality(self):
        # max t log2(1 + s / t) s.t. s + t <= 1
        builder = SubproblemBuilder()
        t, s = builder.add_real("t")[0], builder.add_real("s")[0]
        builder.add_perspective(t, s, 1.0)
        builder.add_linear_le(builder.affine(-1.0).add(t, 1.0).add(s, 1.0))
        problem = builder.build()
        z, report = solve_subproblem(problem, np.array([0.3, 0.3]))
        assert report.status == "optimal"
        assert report.objective == pytest.approx(math.log2(math.e) / math.e, abs=1e-6)
        assert z[0] == pytest.approx(1.0 / math.e, abs=1e-3)

    def test_perspective_with_equality(self):
        builder = SubproblemBuilder()
        t, s = builder.add_real("t")[0], builder.add_real("s")[0]
        builder.add_perspective(t, s, 1.0)
        builder.add_linear_eq(builder.affine(-1.0).add(t, 1.0).add(s, 1.0))
        problem = builder.build()
        z, report = solve_subproblem(problem, np.array([0.5, 0.5]))
        assert report.objective == pytest.approx(math.log2(math.e) / math.e, abs=1e-6)
        assert z.sum() == pytest.approx(1.0, abs=1e-9)

    def test_unit_disk_linear_objective(self):
        b = np.array([1.0 + 1.0j, -2.0, 0.5j])
        builder = SubproblemBuilder()
        x = builder.add_complex("x", 3)
        builder.add_unit_disk(x)
        builder.add_linear_objective(x.re, b.real)
        builder.add_linear_objective(x.im, b.imag)
        problem = builder.build()
        z, report = solve_subproblem(problem, np.zeros(problem.num_vars))
        assert report.objective == pytest.approx(np.abs(b).sum(), abs=1e-6)
        np.testing.assert_allclose(x.value(z), b / np.abs(b), atol=1e-3)

    def test_exponential_cone(self):
        builder = SubproblemBuilder()
        x = builder.add_real("x")[0]
        builder.add_linear_objective(x, 1.0)
        builder.add_exp_le(x, builder.affine(2.0))
        problem = builder.build()
        _, report = solve_subproblem(problem, np.array([0.0]))
        assert report.objective == pytest.approx(math.log(2.0), abs=1e-6)

    def test_ratio_constraint(self):
        # max -tau s.t. 1 / tau <= 4
        builder = SubproblemBuilder()
        tau = builder.add_real("tau")[0]
        builder.add_linear_objective(tau, -1.0)
        builder.add_ratio_le(tau, 1.0, 1.0, builder.affine(4.0))
        problem = builder.build()
        z, report = solve_subproblem(problem, np.array([1.0]))
        assert z[0] == pytest.approx(0.25, abs=1e-6)
        assert report.gap <= 1e-8

    def test_psd_block(self):
        # max 2 Re W12 s.t. diag W = 1, W PSD
        basis = hermitian_basis(2)
        builder = SubproblemBuilder()
        params = builder.add_real("W", basis.shape[0])
        builder.set_psd_block(params, basis)
        for i in range(2):
            builder.add_linear_eq(builder.affine(-1.0).add(params[i], 1.0))
        builder.add_linear_objective(params[2], 2.0)
        problem = builder.build()
        z, report = solve_subproblem(problem, np.array([1.0, 1.0, 0.0, 0.0]))
        assert report.objective == pytest.approx(2.0, abs=1e-6)
        assert np.linalg.eigvalsh(problem.psd_matrix(z)).min() >= -1e-9

    def test_never_worse_than_start(self):
        builder = SubproblemBuilder()
        t, s = builder.add_real("t")[0], builder.add_real("s")[0]
        builder.add_perspective(t, s, 2.0, weight=0.5)
        builder.add_linear_le(builder.affine(-1.0).add(t, 1.0).add(s, 1.0))
        problem = builder.build()
        start = np.array([0.4, 0.5])
        _, report = solve_subproblem(problem, start)
        assert report.objective >= problem.objective(start)

    def test_infeasible_start(self):
        builder = SubproblemBuilder()
        x = builder.add_real("x")[0]
        builder.add_linear_objective(x, 1.0)
        builder.add_linear_le(builder.affine(-1.0).add(x, 1.0))
        problem = builder.build()
        with pytest.raises(InfeasibleStartError):
            solve_subproblem(problem, np.array([2.0]))
        with pytest.raises(InfeasibleStartError):
            solve_subproblem(problem, np.array([0.0, 0.0]))

    def test_dump(self, tmp_path):
        builder = SubproblemBuilder()
        x = builder.add_real("x")[0]
        builder.add_linear_objective(x, 1.0)
        builder.add_linear_le(builder.affine(-1.0).add(x, 1.0))
        path = tmp_path / "subproblem.json"
        builder.build().dump(path)
        data = json.loads(path.read_text())
        assert data["num_vars"] == 1
