"""Assignment-dependent link evaluation: interference at communication and
sensing receivers, SINRs, data rates, served sets, and the objective (number
of successfully served vehicles).

Two evaluation paths exist. The scalar functions below spell out every
interference term for one (SPV, request) pair and are the readable reference.
`LinkTables` precomputes per-topology contribution tensors so that solvers can
score thousands of candidate assignments with array operations; the test
suite pins the two paths together.

Beam policy: every transmission is beamed at its own target, and every
receiver aims at its serving SPV (a sensing receiver is the SPV itself, aimed
at its target). Interference gains classify the victim as main or side lobe
against the interfering beam's actual direction.

Indexing: SPVs, comm requests, and sensing requests are each indexed 0..-1 in
id order; `Assignment.alpha[u, m]` / `beta[u, n]` use those indices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import channel
from .channel import ChannelConfig
from .geometry import blockage_indicator
from .scenario import ServiceRequirements, Topology


@dataclass
class Assignment:
    """Binary connection matrices: alpha (U x M) for communication,
    beta (U x N) for sensing. Every request column must sum to exactly 1."""

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=np.int64)
        self.beta = np.asarray(self.beta, dtype=np.int64)

    @classmethod
    def from_choices(cls, num_spv: int, comm_choice, sense_choice) -> "Assignment":
        """Build from per-request serving-SPV indices."""
        alpha = np.zeros((num_spv, len(comm_choice)), dtype=np.int64)
        beta = np.zeros((num_spv, len(sense_choice)), dtype=np.int64)
        for m, u in enumerate(comm_choice):
            alpha[u, m] = 1
        for n, u in enumerate(sense_choice):
            beta[u, n] = 1
        return cls(alpha, beta)

    def comm_choice(self) -> np.ndarray:
        return np.argmax(self.alpha, axis=0)

    def sense_choice(self) -> np.ndarray:
        return np.argmax(self.beta, axis=0)


def validate_assignment(a: Assignment) -> list[str]:
    """Return a violation description per request column whose sum is not
    exactly 1 (or that holds non-binary entries); empty list when valid."""
    violations = []
    for name, mat in (("alpha", a.alpha), ("beta", a.beta)):
        if not np.isin(mat, (0, 1)).all():
            violations.append(f"{name}: non-binary entries")
            continue
        sums = mat.sum(axis=0)
        for col, s in enumerate(sums):
            if s != 1:
                violations.append(f"{name} column {col}: sum {s} != 1")
    return violations


def _sorted_spvs(topo: Topology):
    return sorted(topo.spvs, key=lambda s: s.id)


def _sorted_comm(topo: Topology):
    return sorted(topo.comm_requests, key=lambda c: c.id)


def _sorted_sense(topo: Topology):
    return sorted(topo.sense_requests, key=lambda s: s.id)


def comm_interference(u: int, m: int, a: Assignment, topo: Topology,
                      cfg: ChannelConfig) -> float:
    """Interference power (W) at comm vehicle m served by SPV u.

    Three contributions: other SPVs' communication beams, other SPVs' sensing
    beams, and the serving SPV's own sensing beams. The serving SPV's other
    communication beams are assumed nulled by its array and do not count.
    """
    spvs = _sorted_spvs(topo)
    comm = _sorted_comm(topo)
    sense = _sorted_sense(topo)
    rx = comm[m]
    srv = spvs[u]
    rx_aim = channel._bearing(rx.pos, srv.pos)
    obstacles = topo.obstacles
    total = 0.0
    for i, spv in enumerate(spvs):
        if spv.active == 0:
            continue
        if blockage_indicator(spv.pos, rx.pos, obstacles) == 0:
            continue
        d = spv.pos.dist(rx.pos)
        base = (cfg.tx_power
                * channel.gain_towards(rx.pos, rx_aim, spv.pos, cfg)
                / (channel.absorption_gain(d, cfg) * channel.free_space_gain(d, cfg)))
        if i != u:
            for m2, target in enumerate(comm):
                if a.alpha[i, m2] and blockage_indicator(spv.pos, target.pos, obstacles):
                    aim = channel._bearing(spv.pos, target.pos)
                    total += base * channel.gain_towards(spv.pos, aim, rx.pos, cfg)
        for n2, target in enumerate(sense):
            if a.beta[i, n2] and blockage_indicator(spv.pos, target.pos, obstacles):
                aim = channel._bearing(spv.pos, target.pos)
                total += base * channel.gain_towards(spv.pos, aim, rx.pos, cfg)
    return total


def sensing_interference(u: int, n: int, a: Assignment, topo: Topology,
                         cfg: ChannelConfig) -> float:
    """Interference power (W) corrupting the echo of sensing pair (u, n).

    The receiver is SPV u itself, aimed at target n. Four contributions, all
    from other SPVs: their communication and sensing beams arriving directly
    at u, and the same beams scattering off target n into u with the radar
    kernel rcs*c^2 / ((4*pi)^3 f^2 d_in^2 d_un^2).
    """
    spvs = _sorted_spvs(topo)
    comm = _sorted_comm(topo)
    sense = _sorted_sense(topo)
    srv = spvs[u]
    target = sense[n]
    rx_aim = channel._bearing(srv.pos, target.pos)
    obstacles = topo.obstacles
    d_un = srv.pos.dist(target.pos)
    main = channel.main_lobe_gain(cfg)
    total = 0.0
    for i, spv in enumerate(spvs):
        if i == u or spv.active == 0:
            continue
        links = []
        for m2, t in enumerate(comm):
            if a.alpha[i, m2] and blockage_indicator(spv.pos, t.pos, obstacles):
                links.append(t.pos)
        for n2, t in enumerate(sense):
            if a.beta[i, n2] and blockage_indicator(spv.pos, t.pos, obstacles):
                links.append(t.pos)
        if not links:
            continue
        # Direct leakage into the SPV receiver.
        if blockage_indicator(spv.pos, srv.pos, obstacles):
            d_iu = spv.pos.dist(srv.pos)
            base = (cfg.tx_power
                    * channel.gain_towards(srv.pos, rx_aim, spv.pos, cfg)
                    / (channel.absorption_gain(d_iu, cfg)
                       * channel.free_space_gain(d_iu, cfg)))
            for link_pos in links:
                aim = channel._bearing(spv.pos, link_pos)
                total += base * channel.gain_towards(spv.pos, aim, srv.pos, cfg)
        # Scattering off the target into the SPV receiver; the echo arrives
        # from the target's direction, i.e. in the receiver's main lobe.
        if blockage_indicator(spv.pos, target.pos, obstacles):
            d_in = spv.pos.dist(target.pos)
            base = (cfg.tx_power * main * cfg.rcs * cfg.c ** 2
                    / ((4.0 * math.pi) ** 3 * cfg.f ** 2 * d_in ** 2 * d_un ** 2
                       * channel.absorption_gain(d_in, cfg)
                       * channel.absorption_gain(d_un, cfg)))
            for link_pos in links:
                aim = channel._bearing(spv.pos, link_pos)
                total += base * channel.gain_towards(spv.pos, aim, target.pos, cfg)
    return total


def comm_sinr(u: int, m: int, a: Assignment, topo: Topology,
              cfg: ChannelConfig) -> float:
    """SINR of comm vehicle m served by SPV u; 0 when no power is received."""
    spvs = _sorted_spvs(topo)
    comm = _sorted_comm(topo)
    signal = channel.received_power(spvs[u].id, comm[m].id, topo, cfg)
    if signal == 0.0:
        return 0.0
    z = comm_interference(u, m, a, topo, cfg)
    eps = channel.noise_power(spvs[u].id, comm[m].id, topo, cfg)
    return signal / (z + eps)


def sensing_sinr(u: int, n: int, a: Assignment, topo: Topology,
                 cfg: ChannelConfig) -> float:
    """Echo SINR of sensing pair (u, n); 0 when the SPV is inactive or the
    path is blocked."""
    spvs = _sorted_spvs(topo)
    sense = _sorted_sense(topo)
    srv, target = spvs[u], sense[n]
    if srv.active == 0:
        return 0.0
    if blockage_indicator(srv.pos, target.pos, topo.obstacles) == 0:
        return 0.0
    d = srv.pos.dist(target.pos)
    main = channel.main_lobe_gain(cfg)
    num = (cfg.tx_power * main * main
           / (channel.sensing_spreading_loss(d, cfg) * channel.absorption_gain(d, cfg)))
    z = sensing_interference(u, n, a, topo, cfg)
    eps = channel.sensing_noise_power(srv.id, target.id, topo, cfg)
    return num / (z + eps)


def data_rate(u: int, m: int, a: Assignment, topo: Topology,
              cfg: ChannelConfig) -> float:
    """Achievable rate (bit/s) of the link from SPV u to comm vehicle m."""
    return cfg.bandwidth * math.log2(1.0 + comm_sinr(u, m, a, topo, cfg))


def served_sets(a: Assignment, topo: Topology, cfg: ChannelConfig,
                req: ServiceRequirements) -> tuple[set[int], set[int]]:
    """Successfully served request indices: comm vehicles whose delivery
    delay fits the budget (boundary inclusive) and sensing vehicles whose
    echo SINR meets the linear threshold."""
    comm = _sorted_comm(topo)
    served_comm: set[int] = set()
    for m in range(topo.num_comm):
        rate = 0.0
        for u in range(topo.num_spvs):
            if a.alpha[u, m]:
                rate += data_rate(u, m, a, topo, cfg)
        if rate > 0.0 and comm[m].demand_bits / rate <= req.d_max:
            served_comm.add(m)
    served_sense: set[int] = set()
    lam_min = req.sinr_min_linear
    for n in range(topo.num_sense):
        lam = 0.0
        for u in range(topo.num_spvs):
            if a.beta[u, n]:
                lam += sensing_sinr(u, n, a, topo, cfg)
        if lam >= lam_min:
            served_sense.add(n)
    return served_comm, served_sense


def objective(a: Assignment, topo: Topology, cfg: ChannelConfig,
              req: ServiceRequirements) -> int:
    """Number of successfully served vehicles, in [0, M+N]."""
    b, o = served_sets(a, topo, cfg, req)
    return len(b) + len(o)


def link_report(a: Assignment, topo: Topology, cfg: ChannelConfig,
                req: ServiceRequirements) -> dict:
    """Per-link diagnostic breakdown of an assignment, JSON-serializable."""
    spvs = _sorted_spvs(topo)
    comm = _sorted_comm(topo)
    sense = _sorted_sense(topo)
    served_comm, served_sense = served_sets(a, topo, cfg, req)
    comm_rows = []
    for m in range(topo.num_comm):
        u = int(np.argmax(a.alpha[:, m]))
        s = channel.received_power(spvs[u].id, comm[m].id, topo, cfg)
        z = comm_interference(u, m, a, topo, cfg)
        eps = channel.noise_power(spvs[u].id, comm[m].id, topo, cfg)
        lam = comm_sinr(u, m, a, topo, cfg)
        rate = data_rate(u, m, a, topo, cfg)
        comm_rows.append({
            "request": m, "request_id": comm[m].id, "spv": u, "spv_id": spvs[u].id,
            "signal_w": s, "interference_w": z, "noise_w": eps,
            "sinr": lam, "rate_bps": rate,
            "delay_s": (comm[m].demand_bits / rate) if rate > 0 else None,
            "served": m in served_comm,
        })
    sense_rows = []
    for n in range(topo.num_sense):
        u = int(np.argmax(a.beta[:, n]))
        z = sensing_interference(u, n, a, topo, cfg)
        eps = channel.sensing_noise_power(spvs[u].id, sense[n].id, topo, cfg)
        lam = sensing_sinr(u, n, a, topo, cfg)
        sense_rows.append({
            "request": n, "request_id": sense[n].id, "spv": u, "spv_id": spvs[u].id,
            "interference_w": z, "noise_w": eps, "sinr": lam,
            "served": n in served_sense,
        })
    return {
        "objective": len(served_comm) + len(served_sense),
        "comm_links": comm_rows,
        "sensing_links": sense_rows,
    }


# ---------------------------------------------------------------------------
# Vectorized evaluation over many candidate assignments.

@dataclass
class LinkTables:
    """Per-topology contribution tensors for fast assignment scoring.

    Every interference sum in the scalar path decomposes into per-beam
    contributions that depend only on (interferer, its target, victim pair).
    Those are precomputed here so a candidate assignment is scored with a few
    gathers and sums.
    """

    topo: Topology
    cfg: ChannelConfig
    num_spv: int = field(init=False)
    num_comm: int = field(init=False)
    num_sense: int = field(init=False)

    def __post_init__(self):
        topo, cfg = self.topo, self.cfg
        spvs = _sorted_spvs(topo)
        comm = _sorted_comm(topo)
        sense = _sorted_sense(topo)
        U, M, N = len(spvs), len(comm), len(sense)
        self.num_spv, self.num_comm, self.num_sense = U, M, N
        V = U + M + N
        nodes = spvs + comm + sense
        pos = np.array([[n.pos.x, n.pos.y] for n in nodes])
        active = np.array([s.active for s in spvs], dtype=float)
        heading = np.array([s.heading for s in spvs])

        diff = pos[None, :, :] - pos[:, None, :]
        dist = np.sqrt((diff ** 2).sum(axis=2))
        los = np.ones((V, V))
        for i in range(V):
            for j in range(i + 1, V):
                if blockage_indicator(nodes[i].pos, nodes[j].pos, topo.obstacles) == 0:
                    los[i, j] = los[j, i] = 0.0

        main = channel.main_lobe_gain(cfg)
        side = channel.side_lobe_gain(cfg)
        half = cfg.beam_h / 2.0

        ang = np.arctan2(diff[:, :, 1], diff[:, :, 0])  # ang[p, q]: p -> q
        off = np.abs((ang[:, :, None] - ang[:, None, :] + np.pi)
                     % (2.0 * np.pi) - np.pi)
        # gain[p, q, r]: antenna at p aimed at q, evaluated towards r
        gain = np.where(off <= half, main, side)

        hf = (4.0 * math.pi * cfg.f * np.maximum(dist, 1e-30) / cfg.c) ** 2
        hb = np.exp(cfg.tau * dist)
        pg_inv = 1.0 / (hf * hb)
        np.fill_diagonal(pg_inv, 0.0)

        P = cfg.tx_power
        tgt = U + np.arange(M + N)          # global node index of target t
        cm = U + np.arange(M)               # global node index of comm m
        sn = U + M + np.arange(N)           # global node index of sensing n
        iu = np.arange(U)

        # Direct contribution to a comm victim (u, m) from SPV i beaming at
        # target t: covers cross-SPV comm/sensing leakage and the serving
        # SPV's own sensing beams (i == u rows, sensing targets).
        cd = np.zeros((U, M + N, U, M))
        for i in range(U):
            for t in range(M + N):
                for u in range(U):
                    for m in range(M):
                        cd[i, t, u, m] = (active[i] * los[i, tgt[t]] * los[i, cm[m]]
                                          * P * gain[i, tgt[t], cm[m]]
                                          * gain[cm[m], u, i] * pg_inv[i, cm[m]])
        self.comm_direct = cd

        # Direct + scattered contribution to a sensing victim (u, n) from SPV
        # i beaming at target t (only i != u enters the sums).
        sd = np.zeros((U, M + N, U, N))
        radar = cfg.rcs * cfg.c ** 2 / ((4.0 * math.pi) ** 3 * cfg.f ** 2)
        for i in range(U):
            for t in range(M + N):
                for u in range(U):
                    for n in range(N):
                        direct = (los[i, tgt[t]] * los[i, u]
                                  * gain[i, tgt[t], u] * gain[u, sn[n], i]
                                  * pg_inv[i, u])
                        d_in = dist[i, sn[n]]
                        d_un = dist[u, sn[n]]
                        if d_in > 0 and d_un > 0:
                            scattered = (los[i, tgt[t]] * los[i, sn[n]]
                                         * gain[i, tgt[t], sn[n]] * main * radar
                                         / (d_in ** 2 * d_un ** 2
                                            * hb[i, sn[n]] * hb[u, sn[n]]))
                        else:
                            scattered = 0.0
                        sd[i, t, u, n] = active[i] * P * (direct + scattered)
        self.sense_direct = sd

        # Serving-link signal powers and echo numerators.
        self.comm_signal = (active[:, None] * los[np.ix_(iu, cm)] * P * main * main
                            * pg_inv[np.ix_(iu, cm)])
        hs = np.zeros((U, N))
        for u in range(U):
            for n in range(N):
                d = dist[u, sn[n]]
                hs[u, n] = (4.0 * math.pi) ** 3 * cfg.f ** 2 * max(d, 1e-30) ** 4 \
                    / (cfg.rcs * cfg.c ** 2)
        self.sense_numerator = (active[:, None] * los[np.ix_(iu, sn)] * P * main * main
                                / (hs * hb[np.ix_(iu, sn)]))

        # Assignment-independent noise: thermal floor plus absorbed power
        # re-radiated by every other active LoS SPV (heading boresight).
        gain_head = np.empty((U, V))
        for i in range(U):
            offh = np.abs((ang[i, :] - heading[i] + np.pi) % (2.0 * np.pi) - np.pi)
            gain_head[i] = np.where(offh <= half, main, side)
        eps_c = np.full((U, M), cfg.noise_floor)
        for u in range(U):
            for m in range(M):
                for i in range(U):
                    if i == u:
                        continue
                    d = dist[i, cm[m]]
                    eps_c[u, m] += (active[i] * los[i, cm[m]] * P
                                    * gain_head[i, cm[m]] * gain[cm[m], u, i]
                                    * (1.0 - math.exp(-cfg.tau * d)) / hf[i, cm[m]])
        self.comm_noise = eps_c
        eps_s = np.full((U, N), cfg.noise_floor)
        for u in range(U):
            for n in range(N):
                for i in range(U):
                    if i == u:
                        continue
                    d = dist[i, u]
                    eps_s[u, n] += (active[i] * los[i, u] * P
                                    * gain_head[i, u] * gain[u, sn[n], i]
                                    * (1.0 - math.exp(-cfg.tau * d)) / hf[i, u])
        self.sense_noise = eps_s

        self.demand_bits = np.array([c.demand_bits for c in comm])

    def served_matrix(self, comm_choice: np.ndarray, sense_choice: np.ndarray,
                      req: ServiceRequirements) -> tuple[np.ndarray, np.ndarray]:
        """Served flags for a batch of candidate assignments.

        comm_choice (A, M) and sense_choice (A, N) hold the serving SPV index
        per request; -1 marks an unassigned request (it is never served and
        its beam does not exist yet). Returns boolean arrays (A, M), (A, N).
        """
        cfg, U = self.cfg, self.num_spv
        A, M = comm_choice.shape
        N = sense_choice.shape[1]
        lam_min = req.sinr_min_linear

        served_c = np.zeros((A, M), dtype=bool)
        for m in range(M):
            u = comm_choice[:, m]
            assigned = u >= 0
            uc = np.where(assigned, u, 0)
            z = np.zeros(A)
            for m2 in range(M):
                if m2 == m:
                    continue
                s = comm_choice[:, m2]
                sel = assigned & (s >= 0) & (s != uc)
                z[sel] += self.comm_direct[s[sel], m2, uc[sel], m]
            for n2 in range(N):
                s = sense_choice[:, n2]
                sel = assigned & (s >= 0)
                z[sel] += self.comm_direct[s[sel], M + n2, uc[sel], m]
            signal = self.comm_signal[uc, m]
            sinr = signal / (z + self.comm_noise[uc, m])
            rate = cfg.bandwidth * np.log2(1.0 + sinr)
            with np.errstate(divide="ignore"):
                delay = np.where(rate > 0, self.demand_bits[m] / np.maximum(rate, 1e-300),
                                 np.inf)
            served_c[:, m] = assigned & (delay <= req.d_max)

        served_s = np.zeros((A, N), dtype=bool)
        for n in range(N):
            u = sense_choice[:, n]
            assigned = u >= 0
            uc = np.where(assigned, u, 0)
            z = np.zeros(A)
            for m2 in range(M):
                s = comm_choice[:, m2]
                sel = assigned & (s >= 0) & (s != uc)
                z[sel] += self.sense_direct[s[sel], m2, uc[sel], n]
            for n2 in range(N):
                s = sense_choice[:, n2]
                sel = assigned & (s >= 0) & (s != uc)
                z[sel] += self.sense_direct[s[sel], M + n2, uc[sel], n]
            lam = self.sense_numerator[uc, n] / (z + self.sense_noise[uc, n])
            served_s[:, n] = assigned & (lam >= lam_min)
        return served_c, served_s

    def objective_batch(self, comm_choice: np.ndarray, sense_choice: np.ndarray,
                        req: ServiceRequirements) -> np.ndarray:
        served_c, served_s = self.served_matrix(comm_choice, sense_choice, req)
        return served_c.sum(axis=1) + served_s.sum(axis=1)

    def objective_single(self, comm_choice, sense_choice,
                         req: ServiceRequirements) -> int:
        obj = self.objective_batch(np.asarray([comm_choice], dtype=np.int64),
                                   np.asarray([sense_choice], dtype=np.int64), req)
        return int(obj[0])
