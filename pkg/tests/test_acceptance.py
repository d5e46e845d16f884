"""Acceptance gate: one test (and one printed pass/fail line) per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines; each test is independent and pins its tolerance explicitly.
"""

import time

import numpy as np
import pytest

from congestion_mfg import (
    ContinuationSchedule,
    CouplingSpec,
    FixedPointOptions,
    GridSpec,
    ModelParams,
    crossed_energy_gap,
    energy_identity_residual,
    solve_mfg,
    solve_with_continuation,
    uniqueness_gap,
    uniqueness_integrand,
    legendre_residual,
)
from congestion_mfg.cli import EXIT_OK, EXIT_STRUCTURAL, cmd_check
from congestion_mfg.diagnostics import low_density_gradient_mass
from congestion_mfg.grid import l1_space_time
from congestion_mfg.hjb import transport_jacobian
from congestion_mfg.model import GridSearchSpec

from conftest import cosine_density, reference_params


def report(criterion, passed, detail=""):
    tag = "PASS" if passed else "FAIL"
    print(f"ACCEPTANCE {criterion}: {tag} {detail}")
    assert passed, f"criterion {criterion} failed: {detail}"


_SOLUTION_LOG = []


def log_solution(sol):
    _SOLUTION_LOG.append(sol)
    return sol


@pytest.fixture(scope="module")
def constant_solution():
    grid = GridSpec(dim=1, n=32, nt=32, horizon=1.0)
    start = time.perf_counter()
    sol = solve_mfg(grid, reference_params(), CouplingSpec())
    sol.meta["acceptance_runtime"] = time.perf_counter() - start
    return log_solution(sol)


@pytest.fixture(scope="module")
def heat_solution():
    grid = GridSpec(dim=1, n=64, nt=512, horizon=1.0)
    zero = CouplingSpec(cf=0.0, offset_f=0.0, cg=0.0, offset_g=0.0)
    sol = solve_mfg(
        grid,
        reference_params(),
        zero,
        FixedPointOptions(damping=1.0),
        m0=cosine_density(grid),
    )
    return log_solution(sol)


@pytest.fixture(scope="module")
def refinement_solutions():
    start = time.perf_counter()
    sols = []
    for n in (32, 64, 128):
        grid = GridSpec(dim=1, n=n, nt=n, horizon=1.0)
        sols.append(
            log_solution(
                solve_mfg(
                    grid, reference_params(), CouplingSpec(), m0=cosine_density(grid)
                )
            )
        )
    wall = time.perf_counter() - start
    return sols, wall


@pytest.fixture(scope="module")
def invariance_pair():
    grid = GridSpec(dim=1, n=32, nt=32, horizon=1.0)
    m0 = cosine_density(grid)
    uniform = solve_mfg(
        grid, reference_params(), CouplingSpec(), FixedPointOptions(), m0=m0
    )
    bump = solve_mfg(
        grid,
        reference_params(),
        CouplingSpec(),
        FixedPointOptions(init_m=cosine_density(grid, 0.3)),
        m0=m0,
    )
    return log_solution(uniform), log_solution(bump)


@pytest.fixture(scope="module")
def singular_ladder():
    # beta and alpha pinned by the criterion; the mild coupling keeps the
    # sub-quadratic drift's relaxation oscillation within the solver's
    # adaptive damping budget at fp_tol = 1e-6 (gaps sit 2-3 orders above)
    params = ModelParams(nu=0.5, beta=1.5, alpha=0.6, mu=1.0, horizon=1.0)
    grid = GridSpec(dim=1, n=32, nt=32, horizon=1.0)
    schedule = ContinuationSchedule(
        epsilons=(0.05,), mus=(1.0, 0.5, 0.25, 0.1, 0.05), warm_start=True
    )
    result = solve_with_continuation(
        grid,
        params,
        CouplingSpec(cf=0.5, cg=0.5),
        FixedPointOptions(fp_tol=1e-6, max_outer_iter=400),
        schedule,
        m0=cosine_density(grid),
    )
    for sol in result.solutions:
        log_solution(sol)
    return result


def test_c01_constant_equilibrium_exact(constant_solution):
    sol = constant_solution
    grid = sol.grid
    m_err = float(np.abs(sol.m - 1.0).max())
    u_exact = 1.0 + (1.0 - grid.times())[:, None]
    u_err = float(np.abs(sol.u - u_exact).max())
    energy = energy_identity_residual(sol)
    runtime = sol.meta["acceptance_runtime"]
    ok = (
        m_err <= 1e-10
        and u_err <= 1e-10
        and energy <= 1e-10
        and sol.meta["outer_iters"] <= 2
        and runtime < 1.0
    )
    report(
        1,
        ok,
        f"(m_err={m_err:.1e} u_err={u_err:.1e} energy={energy:.1e} "
        f"iters={sol.meta['outer_iters']} runtime={runtime:.2f}s)",
    )


def test_c02_decoupled_heat_flow(heat_solution):
    sol = heat_solution
    grid = sol.grid
    u_max = float(np.abs(sol.u).max())
    lam = sol.params.nu * (2.0 * np.pi) ** 2
    amp0 = sol.m[0] - 1.0  # pure first cosine mode: m0 = 1 + 0.5 cos(2 pi x)
    exact = 1.0 + np.outer(np.exp(-lam * grid.times()), amp0)
    gap = l1_space_time(grid, sol.m - exact)
    ok = u_max <= 1e-12 and gap <= 1e-3
    report(2, ok, f"(max|u|={u_max:.1e} heat L1 gap={gap:.2e})")


def test_c03_mass_and_positivity(
    constant_solution, heat_solution, refinement_solutions, invariance_pair, singular_ladder
):
    worst_mass = 0.0
    worst_min = 0.0
    for sol in _SOLUTION_LOG:
        axes = tuple(range(1, sol.m.ndim))
        masses = sol.grid.cell_volume * sol.m.sum(axis=axes)
        worst_mass = max(worst_mass, float(np.abs(masses - 1.0).max()))
        worst_min = min(worst_min, float(sol.m.min()))
    ok = worst_mass <= 1e-10 and worst_min >= -1e-12
    report(
        3,
        ok,
        f"({len(_SOLUTION_LOG)} solves: max mass drift={worst_mass:.1e} "
        f"min m={worst_min:.1e})",
    )


def test_c04_discrete_duality():
    rng = np.random.default_rng(42)
    worst = 0.0
    operators = []
    for dim, n, beta in ((1, 64, 2.0), (1, 64, 1.5), (2, 8, 2.0)):
        grid = GridSpec(dim=dim, n=n, nt=4, horizon=1.0)
        params = ModelParams(nu=0.5, beta=beta, alpha=1.0, mu=0.5, horizon=1.0)
        u = rng.normal(size=grid.shape)
        m = np.abs(rng.random(grid.shape)) + 0.05
        operators.append((grid, transport_jacobian(grid, u, m, params, 0.0)))
    for grid, jac in operators:
        jac_t = jac.T.tocsr()
        for _ in range(100):
            v = rng.normal(size=grid.ncells)
            w = rng.normal(size=grid.ncells)
            lhs = float((jac @ v) @ w)
            rhs = float(v @ (jac_t @ w))
            worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-30))
    ok = worst <= 1e-13
    report(4, ok, f"(worst relative pairing defect={worst:.2e})")


def test_c05_energy_identity_refinement(refinement_solutions):
    sols, wall = refinement_solutions
    residuals = [energy_identity_residual(s) for s in sols]
    ratios = [residuals[i] / residuals[i + 1] for i in range(2)]
    ok = (
        residuals[0] > residuals[1] > residuals[2]
        and all(1.5 <= r <= 3.0 for r in ratios)
        and wall < 60.0
    )
    report(
        5,
        ok,
        f"(residuals={[f'{r:.2e}' for r in residuals]} "
        f"ratios={[f'{r:.2f}' for r in ratios]} wall={wall:.1f}s)",
    )


def test_c06_initialization_invariance(invariance_pair):
    uniform, bump = invariance_pair
    gap = l1_space_time(uniform.grid, uniform.m - bump.m)
    ugap = uniqueness_gap(uniform, bump).gap
    crossed = crossed_energy_gap(uniform, bump)
    ok = gap <= 1e-6 and ugap <= 1e-8 and crossed >= -1e-6
    report(6, ok, f"(L1 m gap={gap:.2e} uniqueness gap={ugap:.2e})")


def test_c07_e_functional_sign():
    rng = np.random.default_rng(42)
    n = 10_000
    worst = np.inf
    for beta, alpha, mu in ((2.0, 1.0, 1.0), (1.5, 1.0, 1.0), (2.0, 2.0, 1.0)):
        params = ModelParams(nu=0.5, beta=beta, alpha=alpha, mu=mu, horizon=1.0)
        coupling = CouplingSpec()
        m1 = 10 ** rng.uniform(-2, 2, n)
        m2 = np.abs(m1 * (1.0 + 0.05 * rng.normal(size=n)))
        p1 = np.stack([10 ** rng.uniform(-2, 1.5, n) * rng.choice([-1.0, 1.0], n)])
        p2 = p1 * (1.0 + 0.05 * rng.normal(size=(1, n))) + 0.01 * rng.normal(size=(1, n))
        vals = uniqueness_integrand(m1, p1, m2, p2, params, coupling)
        worst = min(worst, float(vals.min()))
    in_regime_ok = worst >= -1e-10

    # above the threshold a negative witness must exist
    params = ModelParams(nu=0.5, beta=2.0, alpha=3.0, mu=1.0, horizon=1.0)
    coupling = CouplingSpec()
    witness = None
    for _ in range(10_000):
        m1 = rng.uniform(2.5, 20.0)
        z = rng.choice([-1.0, 1.0]) * 0.02 * m1
        p1 = np.array([rng.choice([-1.0, 1.0]) * 10 ** rng.uniform(1.5, 3.0)])
        ratio = 1.5 * abs(p1[0]) / (m1 + 1.0) * 10 ** rng.uniform(-0.3, 0.3)
        p2 = p1 + ratio * z * np.sign(p1)
        val = float(uniqueness_integrand(m1, p1, m1 + z, p2, params, coupling))
        if val < 0.0:
            witness = dict(m1=m1, z=z, p1=float(p1[0]), p2=float(p2[0]), E=val)
            break
    ok = in_regime_ok and witness is not None
    report(7, ok, f"(min E in regime={worst:.2e}; witness={witness})")


def test_c08_legendre_duality():
    rng = np.random.default_rng(42)
    search = GridSearchSpec(radius=16.0, n_points=41)
    worst = 0.0
    for beta, alpha, mu in (
        (2.0, 1.0, 0.0),
        (1.5, 1.0, 0.1),
        (1.8, 0.5, 1.0),
        (2.0, 2.0, 1.0),
        (1.2, 0.25, 0.5),
    ):
        params = ModelParams(nu=0.5, beta=beta, alpha=alpha, mu=mu, horizon=1.0)
        for _ in range(20):
            m = rng.uniform(0.1, 3.0)
            p = rng.normal(size=2)
            worst = max(worst, legendre_residual(m, p, params, search))
    ok = worst <= 1e-5
    report(8, ok, f"(worst residual={worst:.2e} over 5 parameter sets x 20 draws)")


def test_c09_singular_continuation(singular_ladder):
    result = singular_ladder
    all_converged = result.ok and all(s.converged for s in result.solutions)
    vanishing = [low_density_gradient_mass(s, 1e-3) for s in result.solutions]
    vg_ok = all(vanishing[i + 1] <= vanishing[i] + 1e-12 for i in range(len(vanishing) - 1))
    gaps = [row["m_gap"] for row in result.cauchy_table]
    gaps_ok = all(gaps[i + 1] < gaps[i] for i in range(len(gaps) - 1))
    ok = all_converged and vg_ok and gaps_ok
    report(
        9,
        ok,
        f"(converged={all_converged} vanishing-grad={[f'{v:.1e}' for v in vanishing]} "
        f"gaps={[f'{g:.2e}' for g in gaps]})",
    )


def test_c10_structural_gatekeeping(tmp_path, capsys):
    checked = []
    for beta in (1.2, 2.0, 2.5):
        threshold = 4.0 * (beta - 1.0) / beta
        for alpha in (0.5, threshold, 3.0):
            cfg = tmp_path / f"gate_{beta}_{alpha}.cfg"
            cfg.write_text(f"beta = {beta}\nalpha = {alpha}\n")
            code = cmd_check(str(cfg))
            out = capsys.readouterr().out
            expect_accept = 1.0 < beta <= 2.0
            accept_ok = (code == EXIT_OK) == expect_accept
            if not expect_accept:
                accept_ok = accept_ok and code == EXIT_STRUCTURAL
            uniq_ok = True
            if expect_accept:
                expected = "true" if alpha <= threshold else "false"
                uniq_ok = f"uniqueness_ok: {expected}" in out
            checked.append(accept_ok and uniq_ok)
    ok = all(checked) and len(checked) == 9
    report(10, ok, f"({sum(checked)}/9 tuples gated per the range and threshold rules)")
