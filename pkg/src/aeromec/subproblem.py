"""Per-iteration convex subproblem in canonical conic form.

Builds the full decision-variable registry (CPU rates, log time-shares,
transmit powers, Hermitian covariances, robustness multipliers and all
epigraph auxiliaries), the exponential-cone and second-order-cone encodings,
the four worst-case LMI families, and the first-order tangent surrogates
around a supplied linearization point.

Unit conventions confined to this module:
  - log-CPU variables g_k store ln(f_u,k / LOG_CPU_REF_HZ);
  - cube/square epigraphs for CPU rates and speed are normalized by their
    caps so cone rows stay O(1).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .config import NetworkConfig
from .conic import (
    ConicProgram,
    ProgramBuilder,
    VariableRegistry,
    herm_basis,
    herm_from_params,
    herm_to_params,
)
from .geometry import SlotContext, slant_distance
from .robust import (
    LmiBlock,
    build_offload_snr_lmi,
    build_qos_lmi,
    build_relay_snr_lmi,
    build_security_lmi,
    worst_case_max,
    worst_case_oracle,
)

LOG_CPU_REF_HZ = 1e9
V2_FLOOR = 1e-4
LN2 = float(np.log(2.0))


def scalar_groups(K: int, M: int) -> list[tuple[str, int]]:
    MK = M * K
    return [
        ("f_l", K), ("p", K), ("t", K), ("t_a", 1), ("g", K),
        ("zeta", K), ("zeta_a", 1), ("r", K), ("r_a", 1),
        ("alpha", K), ("alpha_a", 1),
        ("lam", K), ("lam_a", 1), ("lam_u", K), ("lam_u_mk", MK),
        ("beta", K), ("beta_a", 1), ("beta_u", K), ("beta_u_mk", MK),
        ("gam", K), ("gam_a", 1), ("gam_u", K), ("gam_u_mk", MK),
        ("s", K), ("s_eve", M), ("s_a", 1),
        ("v1", 1), ("v2", 1), ("q", 2),
        # epigraph / auxiliary scalars
        ("theta_epi", K), ("theta_a_epi", 1),
        ("lu_epi", K), ("fu_epi", K),
        ("ucomp_epi", K), ("uoff_epi", K), ("uoffa_epi", 1),
        ("e1_epi", K), ("e2_epi", MK),
        ("nu_rate", K), ("nu_rate_a", 1),
        ("sqd", K), ("sqd_eve", M), ("sqd_a", 1),
        ("flsq", K), ("flcub", K),
        ("v1sq", 1), ("v1cub", 1), ("winv", 1), ("uinv", 1),
    ]


def make_registry(K: int, M: int, NT: int, slack: bool = False) -> VariableRegistry:
    reg = VariableRegistry()
    for name, cnt in scalar_groups(K, M):
        reg.add(name, cnt)
    for j in range(K):
        reg.add_hermitian(f"W{j}", NT)
    reg.add_hermitian("W_a", NT)
    reg.add_hermitian("Z", NT)
    if slack:
        reg.add("slack", 1)
    return reg


@dataclass
class LinearizationPoint:
    """Values of the barred symbols entering the tangent surrogates."""

    gam: np.ndarray
    gam_a: float
    gam_u: np.ndarray
    gam_u_mk: np.ndarray  # (M, K)
    s: np.ndarray
    s_eve: np.ndarray
    s_a: float
    t: np.ndarray
    r: np.ndarray
    t_a: float
    r_a: float
    g: np.ndarray  # ln(f_u / LOG_CPU_REF_HZ)
    zeta: np.ndarray
    zeta_a: float
    q: np.ndarray
    v2: float

    EXP_FIELDS = ("gam", "gam_a", "gam_u", "gam_u_mk", "s", "s_eve", "s_a",
                  "t", "r", "t_a", "r_a", "g", "zeta", "zeta_a")

    def validate(self) -> None:
        for f in dataclasses.fields(self):
            v = np.asarray(getattr(self, f.name), dtype=float)
            if not np.all(np.isfinite(v)):
                raise ValueError(f"non-finite linearization value in {f.name}")
            if f.name in self.EXP_FIELDS and np.any(v > 600.0):
                raise ValueError(f"linearization exponent overflow in {f.name}")


@dataclass
class DecisionPoint:
    """One full assignment of the subproblem variable set."""

    f_l: np.ndarray
    p: np.ndarray
    t: np.ndarray
    t_a: float
    g: np.ndarray
    zeta: np.ndarray
    zeta_a: float
    r: np.ndarray
    r_a: float
    alpha: np.ndarray
    alpha_a: float
    lam: np.ndarray
    lam_a: float
    lam_u: np.ndarray
    lam_u_mk: np.ndarray  # (M, K)
    beta: np.ndarray
    beta_a: float
    beta_u: np.ndarray
    beta_u_mk: np.ndarray  # (M, K)
    gam: np.ndarray
    gam_a: float
    gam_u: np.ndarray
    gam_u_mk: np.ndarray  # (M, K)
    s: np.ndarray
    s_eve: np.ndarray
    s_a: float
    v1: float
    v2: float
    q: np.ndarray
    W_gu: np.ndarray  # (K, NT, NT) complex
    W_a: np.ndarray
    Z: np.ndarray
    raw: np.ndarray | None = None
    aux: dict = field(default_factory=dict)

    @property
    def theta(self) -> np.ndarray:
        return np.exp(self.t)

    @property
    def theta_a(self) -> float:
        return float(np.exp(self.t_a))

    @property
    def f_u(self) -> np.ndarray:
        return LOG_CPU_REF_HZ * np.exp(self.g)

    def to_linearization(self) -> LinearizationPoint:
        return LinearizationPoint(
            gam=self.gam.copy(), gam_a=self.gam_a,
            gam_u=self.gam_u.copy(), gam_u_mk=self.gam_u_mk.copy(),
            s=self.s.copy(), s_eve=self.s_eve.copy(), s_a=self.s_a,
            t=self.t.copy(), r=self.r.copy(), t_a=self.t_a, r_a=self.r_a,
            g=self.g.copy(), zeta=self.zeta.copy(), zeta_a=self.zeta_a,
            q=self.q.copy(), v2=self.v2,
        )


def extract_point(x: np.ndarray, reg: VariableRegistry, K: int, M: int, NT: int) -> DecisionPoint:
    def arr(name):
        return np.asarray(x[reg.slice(name)], dtype=float).copy()

    def sca(name):
        return float(x[reg.index(name)])

    return DecisionPoint(
        f_l=arr("f_l"), p=arr("p"), t=arr("t"), t_a=sca("t_a"), g=arr("g"),
        zeta=arr("zeta"), zeta_a=sca("zeta_a"), r=arr("r"), r_a=sca("r_a"),
        alpha=arr("alpha"), alpha_a=sca("alpha_a"),
        lam=arr("lam"), lam_a=sca("lam_a"), lam_u=arr("lam_u"),
        lam_u_mk=arr("lam_u_mk").reshape(M, K),
        beta=arr("beta"), beta_a=sca("beta_a"), beta_u=arr("beta_u"),
        beta_u_mk=arr("beta_u_mk").reshape(M, K),
        gam=arr("gam"), gam_a=sca("gam_a"), gam_u=arr("gam_u"),
        gam_u_mk=arr("gam_u_mk").reshape(M, K),
        s=arr("s"), s_eve=arr("s_eve"), s_a=sca("s_a"),
        v1=sca("v1"), v2=sca("v2"), q=arr("q"),
        W_gu=np.array([herm_from_params(x[reg.slice(f"W{j}")], NT) for j in range(K)]),
        W_a=herm_from_params(x[reg.slice("W_a")], NT),
        Z=herm_from_params(x[reg.slice("Z")], NT),
        raw=np.asarray(x, dtype=float).copy(),
    )


def point_vector(point: DecisionPoint, reg: VariableRegistry, ctx: SlotContext, cfg: NetworkConfig) -> np.ndarray:
    """Full variable vector for a point; epigraph entries are reconstructed
    from their defining expressions unless the point carries a raw vector
    or explicit aux overrides.
    """
    if point.raw is not None and point.raw.shape[0] == reg.size:
        return point.raw.copy()
    x = np.zeros(reg.size)
    K = point.f_l.shape[0]
    M = point.s_eve.shape[0]
    for name in ("f_l", "p", "t", "g", "zeta", "r", "alpha", "lam", "lam_u",
                 "beta", "beta_u", "gam", "gam_u", "s", "s_eve", "q"):
        x[reg.slice(name)] = np.asarray(getattr(point, name), dtype=float).ravel()
    for name in ("t_a", "zeta_a", "r_a", "alpha_a", "lam_a", "beta_a", "gam_a", "s_a", "v1", "v2"):
        x[reg.index(name)] = float(getattr(point, name))
    x[reg.slice("lam_u_mk")] = point.lam_u_mk.ravel()
    x[reg.slice("beta_u_mk")] = point.beta_u_mk.ravel()
    x[reg.slice("gam_u_mk")] = point.gam_u_mk.ravel()
    for j in range(K):
        x[reg.slice(f"W{j}")] = herm_to_params(point.W_gu[j])
    x[reg.slice("W_a")] = herm_to_params(point.W_a)
    x[reg.slice("Z")] = herm_to_params(point.Z)

    aux = dict(point.aux)
    fl_cap = cfg.f_gu_max_hz
    v_cap = cfg.v_max_mps
    d_gu = np.array([slant_distance(point.q, u, cfg.altitude_m) for u in cfg.gu_xy_m])
    d_eve = np.array([slant_distance(point.q, u, cfg.altitude_m) for u in cfg.eve_xy_m])
    d_a = slant_distance(point.q, cfg.mec_xy_m, cfg.altitude_m)
    defaults = {
        "theta_epi": np.exp(point.t),
        "theta_a_epi": np.exp(point.t_a),
        "lu_epi": np.exp(point.g + point.t_a),
        "fu_epi": np.exp(point.g),
        "ucomp_epi": np.exp(3 * point.g + point.t_a),
        "uoff_epi": np.exp(point.t + point.zeta),
        "uoffa_epi": np.exp(point.t_a + point.zeta_a),
        "e1_epi": np.exp(point.gam_u + point.s),
        "e2_epi": np.exp(point.gam_u_mk + point.s_eve[:, None]).ravel(),
        "nu_rate": np.exp(point.r),
        "nu_rate_a": np.exp(point.r_a),
        "sqd": d_gu**2,
        "sqd_eve": d_eve**2,
        "sqd_a": d_a**2,
        "flsq": (point.f_l / fl_cap) ** 2,
        "flcub": (point.f_l / fl_cap) ** 3,
        "v1sq": (point.v1 / v_cap) ** 2,
        "v1cub": (point.v1 / v_cap) ** 3,
        "winv": 1.0 / max(point.v2, V2_FLOOR),
        "uinv": 1.0 / max(point.v2, V2_FLOOR) ** 2,
    }
    defaults.update(aux)
    for name, val in defaults.items():
        x[reg.slice(name)] = np.asarray(val, dtype=float).ravel()
    if reg.has("slack"):
        x[reg.index("slack")] = float(aux.get("slack", 0.0))
    return x


@dataclass(frozen=True)
class BuildOptions:
    robust: bool = True
    slack: bool = False


SLACKABLE_TAG_PREFIXES = ("wc-offload-snr", "wc-qos", "wc-security", "wc-relay-snr",
                          "offload-rate", "relay-rate",
                          "nom-offload-snr", "nom-qos", "nom-security", "nom-relay-snr")


class SlotProgramFactory:
    """Constant-per-slot structure plus per-linearization tangent rows.

    `precond_point` supplies typical magnitudes for a diagonal congruence
    of each worst-case certificate block (D M D >= 0 iff M >= 0); without
    it the certificates mix entries across ~8 orders of magnitude and
    interior-point back-ends stall.
    """

    def __init__(self, ctx: SlotContext, cfg: NetworkConfig, options: BuildOptions | None = None,
                 precond_point: "DecisionPoint | None" = None):
        self.ctx = ctx
        self.cfg = cfg
        self.opts = options or BuildOptions()
        self.K = ctx.n_users
        self.M = ctx.n_eves
        self.NT = cfg.n_t
        self.reg = make_registry(self.K, self.M, self.NT, slack=self.opts.slack)
        self.lmi_blocks: list[LmiBlock] = []
        self._precond_values = None if precond_point is None else lmi_values(precond_point)
        self._builder = ProgramBuilder(self.reg)
        self._set_variable_units()
        self._build_constant()
        self._snap = self._builder.snapshot()

    def _set_variable_units(self) -> None:
        """Column units for quantities whose natural coefficients would
        otherwise exceed the back-ends' equilibration range (error-shape
        eigenvalues ~1e10, inverse noise ~1e8)."""
        pb = self._builder
        cfg = self.cfg
        c_gu = float(np.linalg.eigvalsh(cfg.err_matrix("gu"))[-1])
        c_mec = float(np.linalg.eigvalsh(cfg.err_matrix("mec"))[-1])
        pb.set_col_scale("lam", 1.0 / c_gu)
        pb.set_col_scale("lam_u", 1.0 / c_gu)
        pb.set_col_scale("lam_a", 1.0 / c_mec)
        eve_scales = np.empty(self.M * self.K)
        for m in range(self.M):
            c_eve = float(np.linalg.eigvalsh(cfg.err_matrix("eve", m))[-1])
            eve_scales[m * self.K : (m + 1) * self.K] = 1.0 / c_eve
        if self.M:
            pb.set_col_scale("lam_u_mk", eve_scales)
        pb.set_col_scale("alpha", cfg.noise_gu_w)
        pb.set_col_scale("alpha_a", cfg.noise_mec_w)
        pb.set_col_scale("f_l", cfg.f_gu_max_hz)
        pb.set_col_scale("v1", cfg.v_max_mps)

    # ------------------------------------------------------------------

    def _build_constant(self) -> None:
        pb = self._builder
        cfg, ctx, K, M, NT = self.cfg, self.ctx, self.K, self.M, self.NT
        rho = cfg.path_gain_ref
        dh = cfg.delta_hat_s
        dt = cfg.delta_t_s
        eta = cfg.uav_energy_weight
        D = cfg.cycles_per_bit
        B = cfg.bandwidth_hz
        rot = cfg.rotor

        # ---- objective (tau3 over epigraph variables) ----
        # restoration mode minimizes the slack; a tiny energy weight keeps
        # the flat directions of the feasibility program anchored
        w_obj = 1e-6 if self.opts.slack else 1.0
        for k in range(K):
            pb.add_objective("ucomp_epi", k, w_obj * eta * cfg.chip_uav * LOG_CPU_REF_HZ**3 * dh)
            pb.add_objective("uoff_epi", k, w_obj * dh)
            pb.add_objective("flcub", k, w_obj * cfg.chip_gu * cfg.f_gu_max_hz**3 * dh)
        pb.add_objective("uoffa_epi", 0, w_obj * eta * dh)
        for j in range(K):
            for i in range(NT):
                pb.add_objective(f"W{j}", i, w_obj * eta * cfg.download_s)
        for i in range(NT):
            pb.add_objective("Z", i, w_obj * eta * cfg.download_s)
        pb.add_objective("v1sq", 0, w_obj * eta * dt * 3 * rot.blade_power_w * cfg.v_max_mps**2 / rot.tip_speed_mps**2)
        pb.add_objective(
            "v1cub", 0,
            w_obj * eta * dt * 0.5 * rot.drag_ratio * rot.air_density * rot.solidity * rot.disc_area_m2 * cfg.v_max_mps**3,
        )
        pb.add_objective("v2", 0, w_obj * eta * dt * rot.induced_power_w)
        pb.obj_const = w_obj * eta * dt * rot.blade_power_w
        if self.opts.slack:
            pb.add_objective("slack", 0, 1.0)
            pb.add_nonneg("slack-floor", [(1.0, [("slack", 0, 1.0)])])

        # ---- simple boxes and caps ----
        inv_f = 1.0 / cfg.f_gu_max_hz
        pb.add_nonneg("gu-cpu-box", [(0.0, [("f_l", k, inv_f)]) for k in range(K)]
                      + [(1.0, [("f_l", k, -inv_f)]) for k in range(K)])
        pb.add_nonneg("gu-power-box", [(0.0, [("p", k, 1.0)]) for k in range(K)]
                      + [(cfg.p_gu_max_w, [("p", k, -1.0)]) for k in range(K)])
        mult_rows = [(0.0, [("lam", k, 1.0)]) for k in range(K)]
        mult_rows += [(0.0, [("lam_a", 0, 1.0)])]
        mult_rows += [(0.0, [("lam_u", k, 1.0)]) for k in range(K)]
        mult_rows += [(0.0, [("lam_u_mk", i, 1.0)]) for i in range(M * K)]
        pb.add_nonneg("multiplier-nonneg", mult_rows)
        pb.add_nonneg("uav-offload-power-cap",
                      [(cfg.p_uav_max_w, [("W_a", i, -1.0) for i in range(NT)])])
        dl_terms = [(f"W{j}", i, -1.0) for j in range(K) for i in range(NT)]
        dl_terms += [("Z", i, -1.0) for i in range(NT)]
        pb.add_nonneg("uav-download-power-cap", [(cfg.p_uav_max_w, dl_terms)])
        pb.add_nonneg("time-split", [(1.0, [("theta_epi", k, -1.0) for k in range(K)]
                                      + [("theta_a_epi", 0, -1.0)])])
        # bit/frequency rows normalized to O(1) so back-end scaling clamps
        # are not exceeded
        pb.add_nonneg("task-split", [
            (1.0, [("f_l", k, -dh / (D * ctx.quota_bits[k])),
                   ("lu_epi", k, -LOG_CPU_REF_HZ * dh / (D * ctx.quota_bits[k]))])
            for k in range(K)
        ])
        pb.add_nonneg("uav-cpu-cap",
                      [(1.0, [("fu_epi", k, -LOG_CPU_REF_HZ / cfg.f_uav_max_hz) for k in range(K)])])
        pb.add_nonneg("qos-corner-link", [
            (0.0, [("beta_u", k, 1.0), ("e1_epi", k, -1.0), ("sqd", k, -cfg.noise_gu_w)])
            for k in range(K)
        ])
        pb.add_nonneg("v2-floor", [(-V2_FLOOR, [("v2", 0, 1.0)])])
        # v1 upper-bounds the true speed, which the step limit keeps <= v_max
        pb.add_nonneg("speed-cap", [(cfg.v_max_mps, [("v1", 0, -1.0)])])

        # ---- trajectory second-order cones ----
        qp = ctx.q_prev
        vstep = cfg.v_max_mps * dt
        pb.add_soc("step-limit", [(vstep, []),
                                  (-qp[0], [("q", 0, 1.0)]),
                                  (-qp[1], [("q", 1, 1.0)])])
        reach = ctx.slots_remaining * vstep
        qf = cfg.q_final_m
        pb.add_soc("terminal-reach", [(reach, []),
                                      (-qf[0], [("q", 0, 1.0)]),
                                      (-qf[1], [("q", 1, 1.0)])])
        pb.add_soc("speed-epi", [(0.0, [("v1", 0, dt)]),
                                 (-qp[0], [("q", 0, 1.0)]),
                                 (-qp[1], [("q", 1, 1.0)])])

        # ---- squared-distance epigraphs ----
        h2 = cfg.altitude_m**2
        for label, centers, var in (("dist-sq-gu", cfg.gu_xy_m, "sqd"),
                                    ("dist-sq-eve", cfg.eve_xy_m, "sqd_eve"),
                                    ("dist-sq-relay", np.atleast_2d(cfg.mec_xy_m), "sqd_a")):
            for i, u in enumerate(centers):
                pb.add_soc(f"{label}[{i}]", [
                    ((1.0 - h2) / 2.0, [(var, i, 0.5)]),
                    (-u[0], [("q", 0, 1.0)]),
                    (-u[1], [("q", 1, 1.0)]),
                    ((-1.0 - h2) / 2.0, [(var, i, 0.5)]),
                ])

        # ---- cube epigraphs (normalized): w >= x^2, ucub * x >= w^2 ----
        for k in range(K):
            inv = 1.0 / cfg.f_gu_max_hz
            pb.add_soc(f"cpu-sq[{k}]", [(0.5, [("flsq", k, 0.5)]),
                                        (0.0, [("f_l", k, inv)]),
                                        (-0.5, [("flsq", k, 0.5)])])
            pb.add_soc(f"cpu-cub[{k}]", [(0.0, [("flcub", k, 1.0), ("f_l", k, inv)]),
                                         (0.0, [("flsq", k, 2.0)]),
                                         (0.0, [("flcub", k, 1.0), ("f_l", k, -inv)])])
        invv = 1.0 / cfg.v_max_mps
        pb.add_soc("speed-sq", [(0.5, [("v1sq", 0, 0.5)]),
                                (0.0, [("v1", 0, invv)]),
                                (-0.5, [("v1sq", 0, 0.5)])])
        pb.add_soc("speed-cub", [(0.0, [("v1cub", 0, 1.0), ("v1", 0, invv)]),
                                 (0.0, [("v1sq", 0, 2.0)]),
                                 (0.0, [("v1cub", 0, 1.0), ("v1", 0, -invv)])])
        # winv * v2 >= 1 and uinv >= winv^2 chain 1/v2^2 from below
        pb.add_soc("inv-speed", [(0.0, [("winv", 0, 1.0), ("v2", 0, 1.0)]),
                                 (2.0, []),
                                 (0.0, [("winv", 0, 1.0), ("v2", 0, -1.0)])])
        pb.add_soc("inv-speed-sq", [(0.5, [("uinv", 0, 0.5)]),
                                    (0.0, [("winv", 0, 1.0)]),
                                    (-0.5, [("uinv", 0, 0.5)])])

        # ---- exponential-cone encodings ----
        def exp_epi(tag, x_terms, z_name, z_idx):
            pb.add_exp(tag, (0.0, x_terms), (1.0, []), (0.0, [(z_name, z_idx, 1.0)]))

        for k in range(K):
            exp_epi(f"time-ratio-epi[{k}]", [("t", k, 1.0)], "theta_epi", k)
            exp_epi(f"uav-bits-epi[{k}]", [("g", k, 1.0), ("t_a", 0, 1.0)], "lu_epi", k)
            exp_epi(f"uav-cpu-epi[{k}]", [("g", k, 1.0)], "fu_epi", k)
            exp_epi(f"uav-compute-energy-epi[{k}]", [("g", k, 3.0), ("t_a", 0, 1.0)], "ucomp_epi", k)
            exp_epi(f"gu-offload-energy-epi[{k}]", [("t", k, 1.0), ("zeta", k, 1.0)], "uoff_epi", k)
            exp_epi(f"gain-dist-product[{k}]", [("gam", k, 1.0), ("s", k, 1.0)], "beta", k)
            exp_epi(f"qos-mult-dist[{k}]", [("gam_u", k, 1.0), ("s", k, 1.0)], "e1_epi", k)
            exp_epi(f"log-rate-epi[{k}]", [("r", k, 1.0)], "nu_rate", k)
            pb.add_exp(f"rate-def[{k}]",
                       (0.0, [("nu_rate", k, LN2)]), (1.0, []),
                       (1.0, [("alpha", k, 1.0 / cfg.noise_gu_w)]))
        exp_epi("time-ratio-epi[a]", [("t_a", 0, 1.0)], "theta_a_epi", 0)
        exp_epi("relay-energy-epi", [("t_a", 0, 1.0), ("zeta_a", 0, 1.0)], "uoffa_epi", 0)
        exp_epi("gain-dist-product-relay", [("gam_a", 0, 1.0), ("s_a", 0, 1.0)], "beta_a", 0)
        exp_epi("log-rate-epi[a]", [("r_a", 0, 1.0)], "nu_rate_a", 0)
        pb.add_exp("rate-def[a]",
                   (0.0, [("nu_rate_a", 0, LN2)]), (1.0, []),
                   (1.0, [("alpha_a", 0, 1.0 / cfg.noise_mec_w)]))
        for m in range(M):
            for k in range(K):
                i = m * K + k
                exp_epi(f"sec-mult-dist[{m},{k}]",
                        [("gam_u_mk", i, 1.0), ("s_eve", m, 1.0)], "e2_epi", i)

        # ---- PSD variable cones ----
        basis = herm_basis(NT)
        for name in [f"W{j}" for j in range(K)] + ["W_a", "Z"]:
            pb.add_psd_hermitian(
                f"psd-var[{name}]", NT, np.zeros((NT, NT), dtype=complex),
                [(self.reg.index(name, pidx), basis[pidx]) for pidx in range(NT * NT)],
            )

        # ---- worst-case certificates (or their zero-error corners) ----
        user_mats = [f"W{j}" for j in range(K)]
        if self.opts.robust:
            blocks = []
            for k in range(K):
                blocks.append(build_offload_snr_lmi(k, ctx.steering_gu[k], cfg.err_matrix("gu"), rho))
                blocks.append(build_qos_lmi(k, ctx.steering_gu[k], cfg.err_matrix("gu"), rho,
                                            cfg.sinr_req_linear, user_mats))
            for m in range(M):
                for k in range(K):
                    blocks.append(build_security_lmi(
                        m, k, ctx.steering_eve[m], cfg.err_matrix("eve", m), rho,
                        cfg.sinr_leak_linear, user_mats, flat_idx=m * K + k))
            blocks.append(build_relay_snr_lmi(ctx.steering_mec, cfg.err_matrix("mec"), rho))
            self.lmi_blocks = blocks
            for blk in blocks:
                D = self._congruence(blk)
                cols = [(self.reg.index(name, idx), D[:, None] * coeff * D[None, :])
                        for (name, idx), coeff in blk.coeffs.items()]
                if self.opts.slack:
                    cols.append((self.reg.index("slack"), np.diag(D**2).astype(complex)))
                const = D[:, None] * blk.const * D[None, :]
                pb.add_psd_hermitian(blk.tag, blk.dim, const, cols)
        else:
            self._nominal_corner_rows(pb)

    def _congruence(self, blk: LmiBlock) -> np.ndarray:
        if self._precond_values is None:
            return np.ones(blk.dim)
        M0 = blk.assemble({k: self._precond_values[k] for k in blk.coeffs})
        mags = np.abs(M0).max(axis=1)
        floor = max(mags.max(), 1e-30) * 1e-6
        return 1.0 / np.sqrt(np.maximum(mags, floor))

    def _nominal_corner_rows(self, pb: ProgramBuilder) -> None:
        """Zero-error replacements: the corner scalar of each certificate."""
        cfg, ctx, K, M, NT = self.cfg, self.ctx, self.K, self.M, self.NT
        rho = cfg.path_gain_ref
        basis = herm_basis(NT)

        def x_terms(a, k, gamma):
            # rho * a^H X a with X = Z + sum_{j!=k} W_j - W_k / gamma
            corner = np.real(np.einsum("i,bij,j->b", a.conj(), basis, a))
            terms = []
            for j in range(K):
                s = -1.0 / gamma if j == k else 1.0
                terms += [(f"W{j}", p, rho * s * corner[p]) for p in range(NT * NT)]
            terms += [("Z", p, rho * corner[p]) for p in range(NT * NT)]
            return terms

        slack_term = [("slack", 0, 1.0)] if self.opts.slack else []
        pb.add_nonneg("nom-offload-snr", [
            (0.0, [("p", k, rho * NT), ("beta", k, -1.0)] + slack_term) for k in range(K)
        ])
        rows = []
        for k in range(K):
            terms = [(n, i, -c) for n, i, c in x_terms(ctx.steering_gu[k], k, cfg.sinr_req_linear)]
            rows.append((0.0, terms + [("beta_u", k, -1.0)] + slack_term))
        pb.add_nonneg("nom-qos", rows)
        rows = []
        for m in range(M):
            for k in range(K):
                terms = x_terms(ctx.steering_eve[m], k, cfg.sinr_leak_linear)
                rows.append((0.0, terms + [("beta_u_mk", m * K + k, 1.0)] + slack_term))
        pb.add_nonneg("nom-security", rows)
        corner = np.real(np.einsum("i,bij,j->b", ctx.steering_mec.conj(), basis, ctx.steering_mec))
        pb.add_nonneg("nom-relay-snr", [
            (0.0, [("W_a", p, rho * corner[p]) for p in range(NT * NT)]
             + [("beta_a", 0, -1.0)] + slack_term)
        ])
        # multipliers are meaningless without uncertainty; pin them to zero
        pins = [(0.0, [("lam", k, 1.0)]) for k in range(K)]
        pins += [(0.0, [("lam_a", 0, 1.0)])]
        pins += [(0.0, [("lam_u", k, 1.0)]) for k in range(K)]
        pins += [(0.0, [("lam_u_mk", i, 1.0)]) for i in range(M * K)]
        pb.add_zero("nominal-multiplier-pins", pins)

    # ------------------------------------------------------------------

    def program_at(self, lin: LinearizationPoint, pins: dict | None = None) -> ConicProgram:
        """Emit the convex program linearized at `lin`.

        pins maps (name, idx) -> value; pinned variables are fixed by
        zero-cone rows (used by the fixed-schedule baseline and the
        alternating-optimization blocks).
        """
        lin.validate()
        pb = self._builder
        pb.restore(self._snap)
        self._tangent_rows(pb, lin)
        if not self.opts.robust:
            # keep the idle multiplier proxies anchored
            rows = [(-float(lin.gam_u[k]), [("gam_u", k, 1.0)]) for k in range(self.K)]
            rows += [(-float(lin.gam_u_mk[m, k]), [("gam_u_mk", m * self.K + k, 1.0)])
                     for m in range(self.M) for k in range(self.K)]
            pb.add_zero("nominal-proxy-pins", rows)
        if pins:
            pb.add_zero("variable-pins", [(-float(v), [(n, i, 1.0)]) for (n, i), v in pins.items()])
        return pb.build()

    def _tangent_rows(self, pb: ProgramBuilder, lin: LinearizationPoint) -> None:
        cfg, ctx, K, M = self.cfg, self.ctx, self.K, self.M
        dh = cfg.delta_hat_s
        B = cfg.bandwidth_hz
        D = cfg.cycles_per_bit
        slack_term = [("slack", 0, 1.0)] if self.opts.slack else []

        def tangent(cexp, var, idx, others):
            # e^{bar} (1 + x - bar) >= sum(others), normalized by e^{bar}
            # (normalization clamped so far-negative exponents cannot blow
            # up the right-hand-side coefficients)
            c_eff = max(float(cexp), -25.0)
            lead = float(np.exp(cexp - c_eff))
            scale = float(np.exp(-c_eff))
            return (lead * (1.0 - cexp),
                    [(var, idx, lead)] + [(n, i, c * scale) for n, i, c in others])

        pb.add_nonneg("tangent-gain", [
            tangent(lin.gam[k], "gam", k, [("alpha", k, -1.0), ("lam", k, -1.0)]) for k in range(K)
        ])
        pb.add_nonneg("tangent-gain-relay",
                      [tangent(lin.gam_a, "gam_a", 0, [("alpha_a", 0, -1.0), ("lam_a", 0, -1.0)])])
        pb.add_nonneg("tangent-qos-mult", [
            tangent(lin.gam_u[k], "gam_u", k, [("lam_u", k, -1.0)]) for k in range(K)
        ])
        pb.add_nonneg("tangent-sec-mult", [
            tangent(lin.gam_u_mk[m, k], "gam_u_mk", m * K + k, [("lam_u_mk", m * K + k, -1.0)])
            for m in range(M) for k in range(K)
        ])
        pb.add_nonneg("tangent-dist-gu", [
            tangent(lin.s[k], "s", k, [("sqd", k, -1.0)]) for k in range(K)
        ])
        pb.add_nonneg("tangent-dist-eve", [
            tangent(lin.s_eve[m], "s_eve", m, [("sqd_eve", m, -1.0)]) for m in range(M)
        ])
        pb.add_nonneg("tangent-dist-relay", [tangent(lin.s_a, "s_a", 0, [("sqd_a", 0, -1.0)])])

        # offload-rate: chi2(t, r) * dh * B + f_l * dh / D - Q >= 0 (per-quota units)
        rate_rows = []
        for k in range(K):
            e2 = float(np.exp(lin.t[k] + lin.r[k]))
            qk = ctx.quota_bits[k]
            const = e2 * (1.0 - lin.t[k] - lin.r[k]) * dh * B / qk - 1.0
            terms = [("t", k, e2 * dh * B / qk), ("r", k, e2 * dh * B / qk),
                     ("f_l", k, dh / (D * qk))]
            rate_rows.append((const, terms + slack_term))
        pb.add_nonneg("offload-rate", rate_rows)

        # relay-rate: chi3(t_a, r_a, g) + sum f_l / D - sum Q / dh >= 0 (sum-quota units)
        e3 = float(np.exp(lin.t_a + lin.r_a))
        eg = np.exp(lin.g + lin.t_a)
        qs = float(ctx.quota_bits.sum()) / dh
        const = (e3 * B * (1.0 - lin.t_a - lin.r_a) - qs
                 + float(np.sum(LOG_CPU_REF_HZ * eg * (1.0 - lin.g - lin.t_a) / D))) / qs
        terms = [("t_a", 0, (e3 * B + float(np.sum(LOG_CPU_REF_HZ * eg / D))) / qs),
                 ("r_a", 0, e3 * B / qs)]
        terms += [("g", k, LOG_CPU_REF_HZ * eg[k] / (D * qs)) for k in range(K)]
        terms += [("f_l", k, 1.0 / (D * qs)) for k in range(K)]
        pb.add_nonneg("relay-rate", [(const, terms + slack_term)])

        # security distance minorant: sigma_e^2 chi4(q) - beta_u_mk - e2 >= 0
        h2 = cfg.altitude_m**2
        sec_rows = []
        for m in range(M):
            u = cfg.eve_xy_m[m]
            base = float(np.sum((lin.q - u) ** 2)) + h2 - 2.0 * float((lin.q - u) @ lin.q)
            for k in range(K):
                i = m * K + k
                sec_rows.append((
                    cfg.noise_eve_w * base,
                    [("q", 0, cfg.noise_eve_w * 2 * (lin.q[0] - u[0])),
                     ("q", 1, cfg.noise_eve_w * 2 * (lin.q[1] - u[1])),
                     ("beta_u_mk", i, -1.0), ("e2_epi", i, -1.0)],
                ))
        pb.add_nonneg("security-corner-link", sec_rows)

        pb.add_nonneg("tangent-power", [
            tangent(lin.zeta[k], "zeta", k, [("p", k, -1.0)]) for k in range(K)
        ])
        pb.add_nonneg("tangent-power-relay", [
            tangent(lin.zeta_a, "zeta_a", 0, [("W_a", i, -1.0) for i in range(self.NT)])
        ])

        # propulsion inverse-square minorant: chi5(q, v2) >= uinv
        rot = cfg.rotor
        dt = cfg.delta_t_s
        den = rot.v0_mps**2 * dt**2
        qp = ctx.q_prev
        dq = lin.q - qp
        const = -lin.v2**2 + (float(dq @ dq) - 2.0 * float(dq @ lin.q)) / den
        pb.add_nonneg("tangent-propulsion", [(
            const,
            [("v2", 0, 2.0 * lin.v2),
             ("q", 0, 2.0 * dq[0] / den), ("q", 1, 2.0 * dq[1] / den),
             ("uinv", 0, -1.0)],
        )])

        if self.opts.slack:
            # cap the feasibility program's flat-up directions; everything
            # else is bounded through the certificate chains already
            width = 10.0
            rows = []

            def cap(name, idx, center):
                rows.append((width + float(center), [(name, idx, -1.0)]))

            for k in range(K):
                cap("s", k, lin.s[k])
                cap("zeta", k, lin.zeta[k])
            for m in range(M):
                cap("s_eve", m, lin.s_eve[m])
            cap("s_a", 0, lin.s_a)
            cap("zeta_a", 0, lin.zeta_a)
            rows.append((max(10.0, 2.0 * lin.v2 + 1.0), [("v2", 0, -1.0)]))
            pb.add_nonneg("restoration-trust", rows)


def lmi_values(point: "DecisionPoint") -> dict[tuple[str, int], float]:
    """Point values keyed the way the certificate blocks reference them."""
    K = point.f_l.shape[0]
    M = point.s_eve.shape[0]
    NT = point.W_a.shape[0]
    vals: dict[tuple[str, int], float] = {}
    for k in range(K):
        vals[("p", k)] = float(point.p[k])
        vals[("lam", k)] = float(point.lam[k])
        vals[("beta", k)] = float(point.beta[k])
        vals[("lam_u", k)] = float(point.lam_u[k])
        vals[("beta_u", k)] = float(point.beta_u[k])
    for m in range(M):
        for k in range(K):
            i = m * K + k
            vals[("lam_u_mk", i)] = float(point.lam_u_mk[m, k])
            vals[("beta_u_mk", i)] = float(point.beta_u_mk[m, k])
    vals[("lam_a", 0)] = float(point.lam_a)
    vals[("beta_a", 0)] = float(point.beta_a)
    for j in range(K):
        params = herm_to_params(point.W_gu[j])
        for p in range(NT * NT):
            vals[(f"W{j}", p)] = float(params[p])
    for name, Mx in (("W_a", point.W_a), ("Z", point.Z)):
        params = herm_to_params(Mx)
        for p in range(NT * NT):
            vals[(name, p)] = float(params[p])
    return vals


def build_p7(ctx: SlotContext, lin: LinearizationPoint, cfg: NetworkConfig,
             options: BuildOptions | None = None, pins: dict | None = None,
             precond_point: "DecisionPoint | None" = None) -> ConicProgram:
    return SlotProgramFactory(ctx, cfg, options, precond_point).program_at(lin, pins)


def evaluate_tau3(point: DecisionPoint, cfg: NetworkConfig) -> float:
    """Reparametrized per-slot objective evaluated directly from the point."""
    dh = cfg.delta_hat_s
    dt = cfg.delta_t_s
    rot = cfg.rotor
    tr = float(np.real(sum(np.trace(W) for W in point.W_gu) + np.trace(point.Z)))
    uav = (
        cfg.chip_uav * LOG_CPU_REF_HZ**3 * float(np.sum(np.exp(3 * point.g + point.t_a))) * dh
        + float(np.exp(point.t_a + point.zeta_a)) * dh
        + cfg.download_s * tr
        + (
            rot.blade_power_w * (1 + 3 * point.v1**2 / rot.tip_speed_mps**2)
            + 0.5 * rot.drag_ratio * rot.air_density * rot.solidity * rot.disc_area_m2 * point.v1**3
            + rot.induced_power_w * point.v2
        ) * dt
    )
    gu = float(np.sum(cfg.chip_gu * point.f_l**3 * dh + np.exp(point.t + point.zeta) * dh))
    return gu + cfg.uav_energy_weight * uav


def block_count_formula(K: int, M: int) -> dict[str, int]:
    """Documented closed-form block census of the robust subproblem.

    nonneg blocks: boxes(2) + multipliers + 2 power caps + time-split +
    task-split + uav-cpu-cap + qos-corner-link + v2-floor + the 13 tangent
    families. soc: 3 trajectory + (K + M + 1) distance + 2K CPU cubes +
    2 speed cubes + 2 inverse-speed. exp: 9 per user + 5 relay-side + MK
    security products. psd: (K + 2) variable cones + (2K + MK + 1)
    certificates.
    """
    return {
        "zero": 0,
        "nonneg": 11 + 13,
        "soc": 3 + (K + M + 1) + 2 * K + 2 + 2,
        "exp": 9 * K + 5 + M * K,
        "psd": (K + 2) + (2 * K + M * K + 1),
    }
