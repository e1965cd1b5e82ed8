import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_radial, two_bus
from dgplace.network import Branch, Bus, DGPlan, DGUnit, Network, apply_dg, i_base_amps, load_sample
from dgplace.powerflow import (ConvergenceError, PowerFlowError, SingularNetworkError, SolverOptions, branch_flows,
                               solve, total_losses, voltage_regulation, write_solution_csv)

# Two-bus oracle: |V2|^4 + |V2|^2 (2(PR + QX) - |V1|^2) + (P^2 + Q^2)|Z|^2 = 0 with
# P, Q = 0.5, 0.3; R, X = 0.02, 0.04; V1 = 1, solved by hand (larger root):
#   b = 2(0.01 + 0.012) - 1 = -0.956, c = 0.34 * 0.002 = 0.00068
#   |V2|^2 = (0.956 + sqrt(0.956^2 - 0.00272)) / 2
V2_ORACLE = 0.97738844525104
I_ORACLE = math.sqrt(0.34) / V2_ORACLE  # |S| / |V2|
LOSS_ORACLE = I_ORACLE**2 * 0.02


def test_two_bus_oracle_value_is_consistent():
    u = V2_ORACLE**2
    assert u * u + u * (2 * (0.5 * 0.02 + 0.3 * 0.04) - 1) + 0.34 * 0.002 == pytest.approx(0, abs=1e-13)


@pytest.mark.parametrize("method", ["sweep", "newton", "auto"])
def test_two_bus_matches_closed_form(method):
    net = two_bus()
    sol = solve(net, SolverOptions(method=method))
    assert sol.converged
    assert sol.v_mag[1] == pytest.approx(V2_ORACLE, abs=1e-6)
    assert sol.i_branch[0] == pytest.approx(I_ORACLE, abs=1e-6)
    assert sol.p_loss == pytest.approx(LOSS_ORACLE, abs=1e-7)
    p, _ = total_losses(sol, net)
    assert p == pytest.approx(LOSS_ORACLE, abs=1e-6)
    pf, _, _ = branch_flows(sol, net)
    assert pf[0] - 0.5 == pytest.approx(p, abs=1e-6)


def test_no_load_network():
    net = Network(6.5, 10.0, (Bus(1, "slack"), Bus(2), Bus(3)),
                  (Branch(1, 1, 2, 0.1, 0.1), Branch(2, 2, 3, 0.1, 0.1)))
    sol = solve(net)
    assert np.all(sol.v_mag == 1.0)
    assert np.all(sol.i_branch == 0.0)
    assert sol.p_loss == 0.0
    p, q, i = branch_flows(sol, net)
    assert not p.any() and not q.any() and not i.any()


def test_zero_resistance_is_lossless():
    net = Network(1.0, 1.0, (Bus(1, "slack"), Bus(2, "load", 0.3, 0.1), Bus(3, "load", 0.2, 0.1)),
                  (Branch(1, 1, 2, 0.0, 0.05), Branch(2, 2, 3, 0.0, 0.05)))
    sol = solve(net)
    assert total_losses(sol, net)[0] == pytest.approx(0.0, abs=1e-6)


def test_local_supply_gives_zero_flow():
    net = load_sample("fixture10")
    plan = DGPlan(tuple(DGUnit(b.id, b.p_load, b.q_load) for b in net.buses if b.kind != "slack"))
    sol = solve(apply_dg(net, plan))
    assert np.all(sol.i_branch == 0.0)
    assert total_losses(sol, apply_dg(net, plan))[0] == pytest.approx(0.0, abs=1e-12)


def test_slack_voltage_exact():
    net = load_sample("ieee30")
    for v in (1.0, 1.03):
        for m in ("newton",):
            sol = solve(net, SolverOptions(slack_voltage=v, method=m))
            assert sol.v_mag[0] == v
    sol = solve(load_sample("ieee9"), SolverOptions(slack_voltage=1.02))
    assert sol.v_mag[0] == 1.02


def test_voltage_regulation_formula():
    sol = solve(two_bus(0, 0))
    assert voltage_regulation(sol) == 0.0
    fake = lambda vmin: type(sol)(**{**sol.__dict__, "v_mag": np.array([1.0, vmin])})  # noqa: E731
    assert voltage_regulation(fake(0.9014)) == pytest.approx(9.86, abs=1e-9)
    assert voltage_regulation(fake(0.85)) == pytest.approx(15.0, abs=1e-9)


def test_ampere_conversion_matches_table_scale():
    # 10 MVA / (sqrt(3) 6.5 kV) = 888.2 A, so 488.5 A is 0.55 pu
    net = Network(6.5, 10.0, (Bus(1, "slack"),), ())
    ib = i_base_amps(net)
    assert ib == pytest.approx(888.2, abs=0.05)
    assert 0.55 * ib == pytest.approx(488.5, abs=0.1)


def test_non_convergence_reports_bus():
    net = two_bus(p=20.0, q=10.0, r=0.05, x=0.1)
    with pytest.raises(ConvergenceError, match="bus 2") as exc:
        solve(net, SolverOptions(method="newton"))
    assert exc.value.solution is not None and not exc.value.solution.converged
    with pytest.raises(ConvergenceError):
        solve(net, SolverOptions(method="sweep"))


def test_max_iterations_one_fails_cleanly():
    with pytest.raises(ConvergenceError):
        solve(load_sample("ieee9"), SolverOptions(max_iterations=1))


def test_non_converged_solution_rejected():
    try:
        solve(two_bus(p=20.0, q=10.0, r=0.05, x=0.1))
    except ConvergenceError as exc:
        sol = exc.solution
    with pytest.raises(PowerFlowError):
        total_losses(sol, two_bus())
    with pytest.raises(PowerFlowError):
        voltage_regulation(sol)


def test_zero_impedance_loop_is_singular():
    net = Network(1.0, 1.0, (Bus(1, "slack"), Bus(2, "load", 0.1, 0.0), Bus(3, "load", 0.1, 0.0)),
                  (Branch(1, 1, 2, 0.01, 0.01), Branch(2, 2, 3, 0.0, 0.0), Branch(3, 1, 3, 0.01, 0.01)))
    with pytest.raises(SingularNetworkError):
        solve(net)


def test_sweep_refuses_meshed():
    with pytest.raises(ValueError, match="radial"):
        solve(load_sample("ieee30"), SolverOptions(method="sweep"))


def test_auto_method_picks_by_loops():
    assert solve(load_sample("ieee30")).method == "newton"
    assert solve(load_sample("ieee30_radial")).method == "sweep"


def test_invalid_options():
    with pytest.raises(ValueError):
        SolverOptions(tolerance=0)
    with pytest.raises(ValueError):
        SolverOptions(max_iterations=0)
    with pytest.raises(ValueError):
        SolverOptions(method="gauss")


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**31))
def test_sweep_and_newton_agree_on_small_radial(n, seed):
    net = random_radial(np.random.default_rng(seed), n)
    opts = dict(tolerance=1e-12)
    a = solve(net, SolverOptions(method="sweep", **opts))
    b = solve(net, SolverOptions(method="newton", **opts))
    np.testing.assert_allclose(a.v_mag, b.v_mag, atol=1e-8, rtol=0)
    np.testing.assert_allclose(a.i_branch, b.i_branch, atol=1e-8, rtol=0)


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 30), st.integers(0, 2**31), st.sampled_from(["auto", "newton"]))
def test_power_balance_and_loss_cross_check(n, seed, method):
    net = random_radial(np.random.default_rng(seed), n)
    opts = SolverOptions(method=method)
    sol = solve(net, opts)
    assert sol.converged and sol.max_mismatch < opts.tolerance
    balance = sol.p_slack + net.s_gen_pu.sum().real - net.s_load_pu.sum().real - sol.p_loss
    assert abs(balance) < 10 * opts.tolerance
    assert abs(total_losses(sol, net)[0] - sol.p_loss) < 10 * opts.tolerance
    assert sol.p_loss >= 0


@settings(max_examples=60, deadline=None)
@given(st.integers(3, 20), st.integers(0, 2**31), st.floats(0.0, 1.0))
def test_leaf_injection_never_lowers_min_voltage(n, seed, frac):
    net = random_radial(np.random.default_rng(seed), n, flip=False)
    parents = {br.from_bus for br in net.branches}
    leaves = [b for b in net.buses if b.id not in parents and b.kind != "slack" and b.p_load > 0]
    if not leaves:
        return
    leaf = leaves[0]
    base = solve(net)
    with_dg = solve(apply_dg(net, DGPlan((DGUnit(leaf.id, frac * leaf.p_load),))))
    assert with_dg.v_mag.min() >= base.v_mag.min() - 1e-9


def test_deterministic():
    net = load_sample("ieee30")
    a, b = solve(net), solve(net)
    assert a.v_mag.tobytes() == b.v_mag.tobytes()
    assert a.i_branch.tobytes() == b.i_branch.tobytes()


def test_ieee30_base_case_band():
    net = load_sample("ieee30")
    sol = solve(net)
    kw = total_losses(sol, net)[0] * net.s_base * 1000
    assert 100 < kw < 1000  # hundreds of kW
    assert sol.v_mag.min() < 0.95
    assert voltage_regulation(sol) == pytest.approx(9.86, abs=0.05)


def test_solution_csv(tmp_path):
    net = load_sample("ieee9")
    sol = solve(net)
    write_solution_csv(sol, net, tmp_path / "bus.csv", tmp_path / "br.csv")
    bus = (tmp_path / "bus.csv").read_text().splitlines()
    br = (tmp_path / "br.csv").read_text().splitlines()
    assert bus[0] == "bus,v_mag_pu,v_ang_rad" and len(bus) == net.n_bus + 1
    assert br[0] == "branch,from,to,i_pu,i_amp,p_flow_pu,q_flow_pu" and len(br) == net.n_branch + 1
    i_pu, i_amp = map(float, br[1].split(",")[3:5])
    assert i_amp == pytest.approx(i_pu * i_base_amps(net), rel=1e-6)
