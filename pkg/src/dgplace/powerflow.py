"""Balanced AC power flow: backward/forward sweep for radial feeders, Newton-Raphson otherwise."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .network import Network, i_base_amps


class PowerFlowError(RuntimeError):
    pass


class ConvergenceError(PowerFlowError):
    def __init__(self, msg: str, solution: PowerFlowSolution | None = None):
        super().__init__(msg)
        self.solution = solution


class SingularNetworkError(PowerFlowError):
    pass


@dataclass(frozen=True)
class SolverOptions:
    tolerance: float = 1e-6
    max_iterations: int = 50
    slack_voltage: float = 1.0
    method: str = "auto"  # auto | sweep | newton

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.method not in ("auto", "sweep", "newton"):
            raise ValueError(f"unknown method {self.method!r}")


@dataclass(frozen=True, eq=False)
class PowerFlowSolution:
    v_mag: np.ndarray
    v_ang: np.ndarray
    i_branch: np.ndarray  # |I| per branch, pu
    p_slack: float
    q_slack: float
    p_loss: float  # sum |I|^2 R over branches, pu
    q_loss: float
    iterations: int
    converged: bool
    max_mismatch: float
    method: str
    i_complex: np.ndarray = field(repr=False)  # from -> to direction
    slack: int = 0

    @property
    def v(self) -> np.ndarray:
        return self.v_mag * np.exp(1j * self.v_ang)

    @property
    def v_slack(self) -> float:
        return float(self.v_mag[self.slack])


def _require_converged(sol: PowerFlowSolution):
    if not sol.converged:
        raise PowerFlowError("operation requires a converged power-flow solution")


def _branch_currents(net: Network, v: np.ndarray, fallback: np.ndarray | None = None) -> np.ndarray:
    f, t = net.branch_ends
    z = net.z_branch
    nz = z != 0
    i = np.zeros(net.n_branch, dtype=complex) if fallback is None else fallback.copy()
    i[nz] = (v[f[nz]] - v[t[nz]]) / z[nz]
    return i


def _injections(net: Network, i_br: np.ndarray) -> np.ndarray:
    f, t = net.branch_ends
    inj = np.zeros(net.n_bus, dtype=complex)
    np.add.at(inj, f, i_br)
    np.subtract.at(inj, t, i_br)
    return inj


def _mismatch(net: Network, v: np.ndarray, i_br: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Complex power mismatch per bus (slack entry zeroed) and the computed injections."""
    s_calc = v * np.conj(_injections(net, i_br))
    mis = s_calc + net.s_demand_pu
    mis[net.slack_index] = 0.0
    return mis, s_calc


def _finish(net, v, i_br, iterations, converged, mismatch, method) -> PowerFlowSolution:
    _, s_calc = _mismatch(net, v, i_br)
    s_slack = s_calc[net.slack_index]
    i2 = np.abs(i_br) ** 2
    return PowerFlowSolution(
        v_mag=np.abs(v), v_ang=np.angle(v), i_branch=np.abs(i_br),
        p_slack=float(s_slack.real), q_slack=float(s_slack.imag),
        p_loss=float(np.dot(i2, net.r_branch)), q_loss=float(np.dot(i2, net.z_branch.imag)),
        iterations=iterations, converged=converged, max_mismatch=mismatch,
        method=method, i_complex=i_br, slack=net.slack_index,
    )


# -- radial sweep ------------------------------------------------------------

def _radial_paths(net: Network) -> tuple[np.ndarray, np.ndarray]:
    """Path incidence P[b, k] = 1 when branch b lies on the slack-to-k path, and branch orientation signs."""
    cache = net.__dict__.get("_radial_paths")
    if cache is not None:
        return cache
    n, m = net.n_bus, net.n_branch
    f, t = net.branch_ends
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for b in range(m):
        adj[f[b]].append((t[b], b))
        adj[t[b]].append((f[b], b))
    root = net.slack_index
    parent_branch = np.full(n, -1)
    parent = np.full(n, -1)
    order = [root]
    seen = {root}
    for u in order:
        for v, b in adj[u]:
            if v not in seen:
                seen.add(v)
                parent[v], parent_branch[v] = u, b
                order.append(v)
    paths = np.zeros((m, n))
    for k in order[1:]:
        u = k
        while u != root:
            paths[parent_branch[u], k] = 1.0
            u = parent[u]
    sign = np.ones(m)
    for k in order[1:]:
        b = parent_branch[k]
        if t[b] != k:
            sign[b] = -1.0
    net.__dict__["_radial_paths"] = (paths, sign)
    return paths, sign


def _solve_sweep(net: Network, opts: SolverOptions) -> PowerFlowSolution:
    paths, sign = _radial_paths(net)
    s = net.s_demand_pu
    slack = net.slack_index
    v0 = complex(opts.slack_voltage)
    dlf = paths.T @ (net.z_branch[:, None] * paths)
    v = np.full(net.n_bus, v0, dtype=complex)
    worst = math.inf
    for it in range(1, opts.max_iterations + 1):
        i_load = np.conj(s / v)
        v_new = v0 - dlf @ i_load
        v_new[slack] = v0
        dv = float(np.max(np.abs(v_new - v)))
        v = v_new
        i_sweep = sign * (paths @ np.conj(s / v))
        i_br = _branch_currents(net, v, fallback=i_sweep)
        mis, _ = _mismatch(net, v, i_br)
        worst = float(np.max(np.abs(mis)))
        if dv < opts.tolerance and worst < opts.tolerance:
            return _finish(net, v, i_br, it, True, worst, "sweep")
    sol = _finish(net, v, i_br, opts.max_iterations, False, worst, "sweep")
    bus = net.buses[int(np.argmax(np.abs(mis)))].id
    raise ConvergenceError(
        f"sweep did not converge in {opts.max_iterations} iterations; "
        f"worst mismatch {worst:.3e} pu at bus {bus}", sol)


# -- Newton-Raphson ----------------------------------------------------------

def ybus(net: Network) -> np.ndarray:
    z = net.z_branch
    if np.any(z == 0):
        bad = [br.id for br, zz in zip(net.branches, z) if zz == 0]
        raise SingularNetworkError(f"zero-impedance branches {bad} cannot be modelled in the admittance matrix")
    f, t = net.branch_ends
    y = 1.0 / z
    Y = np.zeros((net.n_bus, net.n_bus), dtype=complex)
    np.add.at(Y, (f, f), y)
    np.add.at(Y, (t, t), y)
    np.add.at(Y, (f, t), -y)
    np.add.at(Y, (t, f), -y)
    return Y


def _solve_newton(net: Network, opts: SolverOptions) -> PowerFlowSolution:
    Y = ybus(net)
    n = net.n_bus
    slack = net.slack_index
    pq = np.array([k for k in range(n) if k != slack], dtype=int)
    s_spec = -net.s_demand_pu
    va = np.zeros(n)
    vm = np.full(n, float(opts.slack_voltage))
    v = vm * np.exp(1j * va)
    worst = math.inf
    it = 0
    while True:
        ibus = Y @ v
        mis = v * np.conj(ibus) - s_spec
        mis[slack] = 0.0
        worst = float(np.max(np.abs(mis)))
        if worst < opts.tolerance:
            i_br = _branch_currents(net, v)
            return _finish(net, v, i_br, it, True, worst, "newton")
        if it >= opts.max_iterations:
            break
        it += 1
        diag_v = np.diag(v)
        diag_i = np.diag(ibus)
        vnorm = np.diag(v / np.abs(v))
        ds_dva = 1j * diag_v @ np.conj(diag_i - Y @ diag_v)
        ds_dvm = diag_v @ np.conj(Y @ vnorm) + np.conj(diag_i) @ vnorm
        J = np.block([
            [ds_dva[np.ix_(pq, pq)].real, ds_dvm[np.ix_(pq, pq)].real],
            [ds_dva[np.ix_(pq, pq)].imag, ds_dvm[np.ix_(pq, pq)].imag],
        ])
        F = np.concatenate([mis[pq].real, mis[pq].imag])
        try:
            dx = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise SingularNetworkError(f"singular Jacobian at iteration {it}: {exc}") from None
        npq = len(pq)
        va[pq] += dx[:npq]
        vm[pq] += dx[npq:]
        v = vm * np.exp(1j * va)
    i_br = _branch_currents(net, v)
    sol = _finish(net, v, i_br, it, False, worst, "newton")
    bus = net.buses[int(np.argmax(np.abs(mis)))].id
    raise ConvergenceError(
        f"Newton did not converge in {opts.max_iterations} iterations; "
        f"worst mismatch {worst:.3e} pu at bus {bus}", sol)


def solve(net: Network, opts: SolverOptions | None = None) -> PowerFlowSolution:
    """Solve the power flow; raises ConvergenceError (carrying the last iterate) on failure."""
    opts = opts or SolverOptions()
    method = opts.method
    if method == "auto":
        method = "sweep" if net.is_radial else "newton"
    if method == "sweep":
        if not net.is_radial:
            raise ValueError(f"sweep method needs a radial network; this one has {net.loop_count} loops")
        return _solve_sweep(net, opts)
    return _solve_newton(net, opts)


# -- derived quantities ------------------------------------------------------

def total_losses(sol: PowerFlowSolution, net: Network) -> tuple[float, float]:
    """Generation minus demand (slack plus DG, minus loads), pu."""
    _require_converged(sol)
    gen = complex(sol.p_slack, sol.q_slack) + net.s_gen_pu.sum()
    loss = gen - net.s_load_pu.sum()
    return float(loss.real), float(loss.imag)


def voltage_regulation(sol: PowerFlowSolution) -> float:
    """Worst voltage sag relative to the substation voltage, in percent."""
    _require_converged(sol)
    vs = sol.v_slack
    return 100.0 * (vs - float(np.min(sol.v_mag))) / vs


def branch_flows(sol: PowerFlowSolution, net: Network) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sending-end (from-bus) active/reactive flow and current magnitude per branch, pu."""
    _require_converged(sol)
    f, _ = net.branch_ends
    s = sol.v[f] * np.conj(sol.i_complex)
    return s.real, s.imag, sol.i_branch.copy()


def write_solution_csv(sol: PowerFlowSolution, net: Network, bus_path: Path, branch_path: Path) -> None:
    p, q, i = branch_flows(sol, net)
    ib = i_base_amps(net)
    with open(bus_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bus", "v_mag_pu", "v_ang_rad"])
        for b, vm, va in zip(net.buses, sol.v_mag, sol.v_ang):
            w.writerow([b.id, f"{vm:.10f}", f"{va:.10f}"])
    with open(branch_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["branch", "from", "to", "i_pu", "i_amp", "p_flow_pu", "q_flow_pu"])
        for k, br in enumerate(net.branches):
            w.writerow([br.id, br.from_bus, br.to_bus, f"{i[k]:.10f}", f"{i[k] * ib:.6f}",
                        f"{p[k]:.10f}", f"{q[k]:.10f}"])
