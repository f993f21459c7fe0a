import numpy as np
import pytest

from aeromec.conic import herm_from_params
from aeromec.robust import (
    build_offload_snr_lmi,
    build_qos_lmi,
    build_relay_snr_lmi,
    build_security_lmi,
    scale_error_sets,
    sprocedure_feasible,
    worst_case_max,
    worst_case_oracle,
)


def rand_herm(rng, n, shift=0.0):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    H = 0.5 * (A + A.conj().T)
    return H + shift * np.eye(n)


def rand_pd(rng, n, floor=0.5):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return A @ A.conj().T + floor * np.eye(n)


# ----- trust-region oracle -----------------------------------------------------


def test_oracle_constant_case():
    val, e = worst_case_oracle(np.zeros((3, 3)), np.zeros(3), 4.2, np.eye(3), 1.0)
    assert val == pytest.approx(4.2)
    assert np.linalg.norm(e) == pytest.approx(0.0)


def test_oracle_convex_interior_and_concave_boundary():
    val, e = worst_case_oracle(np.eye(2), np.zeros(2), 0.0, np.eye(2), 1.0)
    assert val == pytest.approx(0.0, abs=1e-12)
    assert np.linalg.norm(e) <= 1e-9

    val, e = worst_case_oracle(-np.eye(2), np.zeros(2), 0.0, np.eye(2), 1.0)
    assert val == pytest.approx(-1.0, rel=1e-10)
    assert np.linalg.norm(e) == pytest.approx(1.0, rel=1e-10)


def test_oracle_membership_and_attainment():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = rng.integers(1, 4)
        F = rand_herm(rng, n)
        g = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        h = float(rng.standard_normal())
        C = rand_pd(rng, n)
        r2 = float(rng.uniform(0.1, 4.0))
        val, e = worst_case_oracle(F, g, h, C, r2)
        # attaining point is a member and reproduces the value
        assert np.real(e.conj() @ C @ e) <= r2 * (1 + 1e-8)
        direct = np.real(e.conj() @ F @ e + 2 * np.real(g.conj() @ e)) + h
        assert direct == pytest.approx(val, rel=1e-8, abs=1e-10)


def test_oracle_against_dense_sampling():
    # 1e6 mixed interior/boundary samples bracket the minimum; an independent
    # constrained local minimizer seeded at the best sample closes the gap
    from scipy.optimize import minimize

    rng = np.random.default_rng(42)
    n = 3
    F = rand_herm(rng, n)
    g = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    h = 0.3
    C = rand_pd(rng, n)
    r2 = 1.7
    val, _ = worst_case_oracle(F, g, h, C, r2)

    w, V = np.linalg.eigh(C)
    Cinv_half = (V * (1 / np.sqrt(w))) @ V.conj().T
    z = rng.standard_normal((1_000_000, n)) + 1j * rng.standard_normal((1_000_000, n))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    radii = np.sqrt(r2) * np.concatenate(
        [rng.uniform(0, 1, 500_000) ** (1 / (2 * n)), np.ones(500_000)]
    )
    pts = (radii[:, None] * z) @ Cinv_half.T
    vals = (
        np.real(np.einsum("bi,ij,bj->b", pts.conj(), F, pts))
        + 2 * np.real(pts.conj() @ g)
        + h
    )
    scale = abs(val) + 1.0
    assert val <= vals.min() + 1e-10 * scale  # true lower bound

    def as_c(xr):
        return xr[:n] + 1j * xr[n:]

    def fun(xr):
        e = as_c(xr)
        return float(np.real(e.conj() @ F @ e) + 2 * np.real(g.conj() @ e) + h)

    def con(xr):
        e = as_c(xr)
        return r2 - float(np.real(e.conj() @ C @ e))

    best = pts[int(np.argmin(vals))]
    res = minimize(
        fun,
        np.concatenate([best.real, best.imag]),
        constraints=[{"type": "ineq", "fun": con}],
        method="SLSQP",
        options={"maxiter": 300, "ftol": 1e-14},
    )
    assert res.fun - val <= 1e-4 * scale
    assert val <= res.fun + 1e-8 * scale


def test_oracle_rejects_ill_conditioned():
    with pytest.raises(ValueError):
        worst_case_oracle(np.eye(2), np.zeros(2), 0.0, np.diag([1.0, 1e-13]), 1.0)


def test_worst_case_max_negates_min():
    rng = np.random.default_rng(9)
    F = rand_herm(rng, 2)
    g = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    C = rand_pd(rng, 2)
    mx, _ = worst_case_max(F, g, 0.0, C, 2.0)
    mn, _ = worst_case_oracle(-F, -g, 0.0, C, 2.0)
    assert mx == pytest.approx(-mn, rel=1e-12)


# ----- S-Procedure equivalence -------------------------------------------------


def implication_holds(F1, g1, h1, F2, g2, h2):
    """Ground truth via the oracle: quad1 <= 0 is the ellipsoid {x^H F1 x + ... <= 0}
    written as x^H C x <= r2 with C = F1, r2 = -h1, g1 = 0 in our usage."""
    val, _ = worst_case_max(F2, g2, h2, F1, -h1)
    return val <= 0, val


def test_sprocedure_matches_oracle_on_random_instances():
    rng = np.random.default_rng(123)
    checked = 0
    while checked < 60:
        n = int(rng.integers(1, 4))
        C = rand_pd(rng, n)
        r2 = float(rng.uniform(0.2, 2.0))
        F2 = rand_herm(rng, n)
        g2 = 0.3 * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        h2 = float(rng.uniform(-2, 1))
        holds, margin = implication_holds(C, np.zeros(n), -r2, F2, g2, h2)
        scale = max(1.0, abs(margin))
        if abs(margin) <= 1e-6 * scale:
            continue  # boundary-ambiguous draw
        feas, lam, mineig = sprocedure_feasible(
            C, np.zeros(n), -r2, F2, g2, h2, tol=1e-7
        )
        assert feas == holds, (margin, mineig, lam)
        assert lam >= 0
        checked += 1


def test_sprocedure_scaling_invariance():
    # scaling (F2, g2, h2) by t > 0 preserves the verdict
    rng = np.random.default_rng(5)
    n = 2
    C = rand_pd(rng, n)
    F2 = rand_herm(rng, n, shift=1.0)
    g2 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    h2 = -8.0
    f0, _, _ = sprocedure_feasible(C, np.zeros(n), -1.0, F2, g2, h2)
    f1, _, _ = sprocedure_feasible(C, np.zeros(n), -1.0, 50 * F2, 50 * g2, 50 * h2)
    assert f0 == f1


# ----- bordered-matrix monotonicity (relaxation direction) ---------------------


def test_corner_increase_preserves_psd():
    rng = np.random.default_rng(77)
    for _ in range(50):
        n = int(rng.integers(1, 5))
        A = rand_pd(rng, n, floor=0.1)
        b = 0.1 * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        # smallest corner keeping the bordered matrix PSD: Schur complement
        c_min = np.real(b.conj() @ np.linalg.solve(A, b))
        for bump in (0.0, 0.5, 3.0):
            M = np.zeros((n + 1, n + 1), dtype=complex)
            M[:n, :n] = A
            M[:n, n] = b
            M[n, :n] = b.conj()
            M[n, n] = c_min + bump
            assert np.linalg.eigvalsh(M)[0] >= -1e-10


# ----- scaled error sets --------------------------------------------------------


def test_scale_error_sets_membership_mapping():
    rng = np.random.default_rng(8)
    C = rand_pd(rng, 3)
    d = 2.5
    (C_out, r2), = scale_error_sets([C], [d])
    assert r2 == pytest.approx(d * d)
    for _ in range(1000):
        e = 0.3 * (rng.standard_normal(3) + 1j * rng.standard_normal(3))
        in_orig = np.real(e.conj() @ C @ e) <= 1.0
        v = e * d
        in_scaled = np.real(v.conj() @ C_out @ v) <= r2
        assert in_orig == in_scaled


def test_scale_error_sets_identity_at_unit_distance():
    C = np.eye(2) * 3.0
    (C_out, r2), = scale_error_sets([C], [1.0])
    assert r2 == 1.0
    np.testing.assert_array_equal(C_out, C)


# ----- LMI builders -------------------------------------------------------------


def lmi_values_from_point(names_vals):
    return dict(names_vals)


def test_offload_lmi_zero_power_forces_nonpositive_beta():
    a = np.ones(2, dtype=complex)
    blk = build_offload_snr_lmi(0, a, 1e10 * np.eye(2), 1e-4)
    assert blk.structure_ok()
    M = blk.assemble({("p", 0): 0.0, ("lam", 0): 0.0, ("beta", 0): 1e-6})
    assert np.linalg.eigvalsh(M)[0] < 0  # positive beta infeasible at zero power
    M = blk.assemble({("p", 0): 0.0, ("lam", 0): 0.0, ("beta", 0): -1.0})
    assert np.linalg.eigvalsh(M)[0] >= 0


def test_offload_lmi_homogeneous_in_variables():
    rng = np.random.default_rng(2)
    a = np.exp(1j * rng.uniform(0, 2 * np.pi, 3))
    blk = build_offload_snr_lmi(0, a, 5e9 * np.eye(3), 2e-4)
    base = {("p", 0): 2.0, ("lam", 0): 3e-10, ("beta", 0): 1e-4}
    M1 = blk.assemble(base)
    M2 = blk.assemble({k: 7.0 * v for k, v in base.items()})
    np.testing.assert_allclose(M2, 7.0 * M1)


def test_scalar_offload_lmi_matches_bruteforce():
    # N_T = 1: the certificate must match direct minimization of
    # p |sqrt(rho) + v|^2 over |v| <= d/sqrt(c)
    rho, c, d, p = 2.0e-4, 1e8, 30.0, 5.0
    a = np.ones(1, dtype=complex)
    blk = build_offload_snr_lmi(0, a, c * np.eye(1), rho)
    # scaled error v ranges over |v| <= d/sqrt(c); worst received power bound
    # on alpha*d^2 is min over that disc of p |sqrt(rho) + v|^2
    r = d / np.sqrt(c)
    grid = np.linspace(-r, r, 2001)
    wc = (p * np.abs(np.sqrt(rho) + grid) ** 2).min()
    for alpha_d2, expect in (((1 - 1e-3) * wc, True), ((1 + 1e-3) * wc, False)):
        ok = False
        for lam in np.logspace(-12, 0, 400):
            M = blk.assemble({("p", 0): p, ("lam", 0): lam, ("beta", 0): alpha_d2 + lam * d * d})
            if np.linalg.eigvalsh(M)[0] >= -1e-14:
                ok = True
                break
        assert ok == expect


def test_qos_and_security_lmi_structure():
    rng = np.random.default_rng(4)
    n = 3
    a = np.exp(1j * rng.uniform(0, 2 * np.pi, n))
    C = rand_pd(rng, n)
    qos = build_qos_lmi(1, a, C, 1e-4, 0.1, ["W0", "W1", "W2"])
    sec = build_security_lmi(0, 1, a, C, 1e-4, 0.03, ["W0", "W1", "W2"], flat_idx=1)
    rel = build_relay_snr_lmi(a, C, 1e-4)
    for blk in (qos, sec, rel):
        assert blk.structure_ok()
    # the served user's matrix enters QoS with sign -(-1/gamma) = +1/gamma in TL
    E00 = np.zeros((n, n), dtype=complex)
    E00[0, 0] = 1.0
    tl = qos.coeffs[("W1", 0)][:n, :n]
    np.testing.assert_allclose(tl, E00 / 0.1)
    # and an interferer's with -1
    tl_other = qos.coeffs[("W0", 0)][:n, :n]
    np.testing.assert_allclose(tl_other, -E00)
    # security flips the outer sign
    np.testing.assert_allclose(sec.coeffs[("W1", 0)][:n, :n], -E00 / 0.03)
    np.testing.assert_allclose(sec.coeffs[("W0", 0)][:n, :n], E00)


def test_security_direction_matches_oracle():
    # single user, one eavesdropper: certificate feasible exactly when the
    # worst-case leakage margin quadratic stays nonnegative
    rng = np.random.default_rng(10)
    n = 2
    a = np.exp(1j * rng.uniform(0, 2 * np.pi, n))
    rho = 1e-4
    sigma2 = 1e-8
    d2 = 900.0
    C = 1e8 * np.eye(n)
    gamma_seq = 10 ** (-1.5)
    for scale_w in (1e-5, 1e-3, 0.1):
        W = scale_w * np.outer(a, a.conj()) / n
        Z = 1e-4 * np.eye(n)
        X = Z - W / gamma_seq
        # margin quadratic over scaled errors v: v^H X v + 2 Re(v^H sqrt(rho) X a)
        # + sigma2 d2 + rho a^H X a >= 0 for all v^H C v <= d2
        const = sigma2 * d2 + rho * np.real(a.conj() @ X @ a)
        val, _ = worst_case_oracle(X, np.sqrt(rho) * (X @ a), const, C, d2)
        q_scale = sigma2 * d2 + abs(const) + rho * np.linalg.norm(X @ a)
        if abs(val) < 1e-6 * q_scale:
            continue  # boundary-ambiguous configuration
        feas, lam, mineig = sprocedure_feasible(
            C, np.zeros(n), -d2, -X, -np.sqrt(rho) * (X @ a), -const, tol=0.0,
        )
        assert feas == (val >= 0), (scale_w, val, mineig)
