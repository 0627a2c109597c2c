"""Named experiments: each returns CSV tables plus pass/fail checks.

The CLI writes the tables; the acceptance tests call the same functions so a
check means the same thing in both places.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import catalog, dyadic, oscillatory, renewal, spectral
from .config import ExperimentConfig
from .errors import ConfigError
from .geometry import dilate, w_abs, w_eval
from .markov_models import (FiniteChain, centered_longrun_cov, longrun_sigma,
                            mean_vector, nonlattice_diagnostic, stationary_dist)
from .rng import stream


@dataclass(frozen=True)
class Check:
    label: str
    passed: bool
    detail: str

    def __post_init__(self):
        object.__setattr__(self, "passed", bool(self.passed))


@dataclass
class Table:
    header: tuple
    rows: list


@dataclass
class ExperimentResult:
    tables: dict[str, Table] = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def merge(self, other: "ExperimentResult") -> "ExperimentResult":
        self.tables.update(other.tables)
        self.checks.extend(other.checks)
        return self


# ------------------------------------------------------------ model-info


def model_info(model) -> ExperimentResult:
    res = ExperimentResult()
    rows = []
    m = mean_vector(model)
    rows += [("m", i, "", float(v)) for i, v in enumerate(m)]
    sig = longrun_sigma(model)
    sc = centered_longrun_cov(model)
    for name, M in (("sigma", sig), ("sigma_c", sc)):
        rows += [(name, i, j, float(M[i, j])) for i in range(M.shape[0]) for j in range(M.shape[1])]
    if isinstance(model, FiniteChain):
        rows += [("pi", i, "", float(v)) for i, v in enumerate(stationary_dist(model))]
    rep = nonlattice_diagnostic(model)
    rows.append(("lattice_flag", "", "", int(rep.lattice)))
    rows.append(("renewal_constant", "", "", renewal.renewal_constant(1.0, m, sig)))
    res.tables["model_info"] = Table(("quantity", "i", "j", "value"), rows)
    return res


# ------------------------------------------------------- spectral report


def spectral_report(chain: FiniteChain, n_max: int = 60, t=None, grid_radius: float = 1.0,
                    grid_points: int = 9, workers: int = 1) -> ExperimentResult:
    if not isinstance(chain, FiniteChain):
        raise ConfigError("spectral-report needs a finite-chain model")
    res = ExperimentResult()
    pi = stationary_dist(chain)
    m = pi @ chain.xi
    sig = longrun_sigma(chain)
    m_fd = spectral.grad_lambda_zero(chain)
    sigma_fd = spectral.hess_lambda_zero(chain)
    grad_err = float(np.linalg.norm(m_fd - m))
    hess_err = float(np.linalg.norm(sigma_fd - sig))
    t = np.full(chain.d, 0.3) if t is None else np.asarray(t, dtype=float)
    dec = spectral.decomposition_check(chain, t=t, n_max=n_max)
    res.tables["spectral_derivatives"] = Table(
        ("quantity", "error"), [("gradient_vs_drift", grad_err), ("hessian_vs_sigma_frobenius", hess_err)])
    res.tables["spectral_decomposition"] = Table(
        ("n", "abs_remainder"), [(n, float(abs(r))) for n, r in enumerate(dec.remainders)])
    axis = np.linspace(-grid_radius, grid_radius, grid_points)
    grid = np.stack(np.meshgrid(*([axis] * chain.d), indexing="ij"), axis=-1).reshape(-1, chain.d)
    rows = spectral.lambda_grid(chain, grid, workers=workers)
    head = tuple(f"t{i + 1}" for i in range(chain.d)) + ("re_lambda", "im_lambda", "abs_lambda", "re_L", "im_L")
    res.tables["lambda_grid"] = Table(head, rows)
    res.checks += [
        Check("gradient of lambda at 0 equals i m", grad_err < 1e-6, f"error {grad_err:.3e} (< 1e-6)"),
        Check("Hessian of lambda at 0 equals -Sigma", hess_err < 1e-4, f"error {hess_err:.3e} (< 1e-4)"),
        Check("remainder decays at the subdominant rate",
              abs(dec.fitted_rate - dec.second_modulus) < 0.02,
              f"fitted {dec.fitted_rate:.5f} vs |lambda_2| {dec.second_modulus:.5f} (within 0.02)"),
    ]
    return res


# ------------------------------------------------------------ renewal run


def _target(spec, d: int) -> renewal.TargetSet:
    if spec is None:
        return renewal.TargetSet("box", np.zeros(d), 0.5)
    kind = spec.get("kind", "box")
    center = np.asarray(spec.get("center", np.zeros(d)), dtype=float)
    if kind == "box":
        return renewal.TargetSet("box", center, spec.get("half_width", 0.5))
    return renewal.TargetSet("ball", center, spec.get("radius", 0.5))


def renewal_run(model, taus, n_paths: int, seed: int, target=None, frak_A=None, margin_sigmas: float = 12.0,
                chunk_size: int = 8192, check_lattice: bool = True, band=(0.9, 1.1),
                workers: int = 1, shift_along_m: float | None = None) -> ExperimentResult:
    """Convergence table of the scaled renewal measure; ``shift_along_m = s`` sets ``frak_A = s m / |m|``."""
    res = ExperimentResult()
    m = mean_vector(model)
    if shift_along_m is not None:
        if frak_A is not None:
            raise ConfigError("give either frak_A or shift_along_m, not both")
        frak_A = float(shift_along_m) * m / np.linalg.norm(m)
    A = _target(target, m.size)
    direction = renewal.DirectionFunction(m, None if frak_A is None else np.asarray(frak_A, dtype=float))
    table = renewal.convergence_study(model, A, direction, [float(t) for t in taus], int(n_paths), int(seed),
                                      workers=workers, margin_sigmas=margin_sigmas, chunk_size=int(chunk_size),
                                      check_lattice=check_lattice)
    res.tables["renewal_convergence"] = Table(renewal.CSV_HEADER, table.rows())
    lo, hi = band
    top = table.estimates[-1]
    res.checks.append(Check(f"ratio at tau = {top.tau:g} inside [{lo}, {hi}]", lo <= top.ratio <= hi,
                            f"ratio {top.ratio:.4f} +- {top.std_err / top.theory:.4f}"))
    return res


# ----------------------------------------------------- oscillatory checks


I1_CONFIGS = (
    ("diagonal", np.array([1.0, 0.0]), np.array([[2.0, 0.0], [0.0, 1.0]])),
    ("non-diagonal", np.array([0.8, 0.5]),
     np.array([[1.2, 0.3], [0.3, 0.8]]) + np.outer([0.8, 0.5], [0.8, 0.5])),
)


def gauss_suite() -> ExperimentResult:
    res = ExperimentResult()
    rows = []
    gen = stream(0, 0)
    worst = 0.0
    for n in (1, 2, 3):
        for b in [np.zeros(n), np.ones(n), *gen.uniform(-3, 3, size=(4, n))]:
            r = oscillatory.gauss_fourier_identity_check(n, b)
            worst = max(worst, r)
            rows.append((n, float(np.linalg.norm(b)), r))
    res.tables["oscillatory_gauss"] = Table(("n", "norm_b", "residual"), rows)
    res.checks.append(Check("Gaussian Fourier identity for n <= 3", worst < 1e-10, f"max residual {worst:.2e}"))
    return res


def j_mu_suite(tau: float = 1e4) -> ExperimentResult:
    res = ExperimentResult()
    rows = []
    ok = True
    for d in (2, 3):
        for lp in (np.zeros(d - 1), np.eye(d - 1)[0]):
            J = oscillatory.J_mu_reduced(1.0, tau, uprime=lambda t, lp=lp: math.sqrt(t) * lp, d=d)
            lim = oscillatory.J_mu_limit(1.0, tau, lp, d)
            ratio = abs(J) / lim
            ok &= abs(ratio - 1) < 0.02
            rows.append((d, float(np.linalg.norm(lp)), tau, float(abs(J)), lim, ratio))
    res.tables["oscillatory_j_mu"] = Table(("d", "norm_ell_prime", "tau", "abs_J", "limit", "ratio"), rows)
    worst = max(abs(r[-1] - 1) for r in rows)
    res.checks.append(Check(f"J_1 matches its limit at tau = {tau:g}", ok, f"max deviation {worst:.2e} (< 0.02)"))
    return res


def i1_suite(taus=(50, 100, 200, 400)) -> ExperimentResult:
    res = ExperimentResult()
    chi = oscillatory.CutoffFunction(0.5, 1.0)
    rows = []
    ok = True
    worst = 0.0
    for name, m, sig in I1_CONFIGS:
        rep = oscillatory.i1_limit_check(1.0, m, sig, chi, taus=taus)
        rows += [(name,) + r for r in rep.rows()]
        dev = float(rep.deviations[-1])
        worst = max(worst, dev)
        ok &= dev < 0.05
    res.tables["oscillatory_i1"] = Table(("config", "tau", "scaled_abs_I1", "limit", "ratio"), rows)
    res.checks.append(Check("scaled main part approaches (2 pi)^((d+1)/2) C", ok,
                            f"top-of-ladder deviation {worst:.2e} (< 0.05)"))
    ident = []
    for _, m, sig in I1_CONFIGS:
        c = renewal.renewal_constant(1.0, m, sig, np.zeros(2))
        closed = 1.0 / (math.sqrt(np.linalg.det(sig)) * np.linalg.norm(np.linalg.solve(
            np.linalg.cholesky(sig), m)))
        ident.append(abs(c - closed) / closed)
    res.checks.append(Check("constant with zero shift equals 1/(sqrt(det Sigma) |Sigma^{-1/2} m|)",
                            max(ident) < 1e-12, f"relative error {max(ident):.1e}"))
    return res


def e1_suite(taus=(50, 100, 200, 400)) -> ExperimentResult:
    res = ExperimentResult()
    m = np.array([1.0, 0.3])
    sig = np.array([[1.5, 0.2], [0.2, 1.0]]) + np.outer(m, m)
    rep = oscillatory.E1_decay_check(oscillatory.GaussianSurrogate(m, sig),
                                     oscillatory.CutoffFunction(0.5, 1.0), taus=taus)
    res.tables["oscillatory_e1"] = Table(("tau", "scaled_abs_E1"), rep.rows())
    res.checks.append(Check("scaled error term decreases by at least 30%", rep.decrease >= 0.3,
                            f"decrease {100 * rep.decrease:.1f}%"))
    return res


def oscillatory_check(suite: str = "all", taus=(50, 100, 200, 400), j_tau: float = 1e4) -> ExperimentResult:
    runners = {"gauss": gauss_suite, "j-mu": lambda: j_mu_suite(j_tau), "i1": lambda: i1_suite(taus),
               "e1": lambda: e1_suite(taus)}
    names = list(runners) if suite == "all" else [suite]
    res = ExperimentResult()
    for name in names:
        if name not in runners:
            raise ConfigError(f"unknown oscillatory suite '{name}'; known: {', '.join(runners)}, all")
        res.merge(runners[name]())
    return res


# ----------------------------------------------------------- dyadic checks


def log_uniform_points(n: int, d: int, lo: float, hi: float, seed: int = 0) -> np.ndarray:
    """Points whose ``|w|`` is log-uniform in ``[lo, hi]`` (parabolic rescaling of Gaussians)."""
    gen = stream(seed, 0)
    x = gen.standard_normal((n, d))
    target = np.exp(gen.uniform(math.log(lo), math.log(hi), n))
    lam = np.sqrt(target / w_abs(x))
    return np.column_stack([x[:, 0] * lam ** 2, x[:, 1:] * lam[:, None]])


def partition_suite(n_points: int = 100_000, seed: int = 0) -> ExperimentResult:
    res = ExperimentResult()
    rows = []
    worst = 0.0
    census = 0
    for d in (2, 3):
        x = log_uniform_points(n_points, d, 1e-12, 1e6, seed)
        err = float(np.max(np.abs(dyadic.partition_sum(x) - 1.0)))
        c = int(dyadic.window_census(x).max())
        worst, census = max(worst, err), max(census, c)
        rows.append((d, n_points, err, c))
    res.tables["dyadic_partition"] = Table(("d", "n_points", "max_abs_error", "max_nonzero_terms"), rows)
    res.checks.append(Check("partition of unity", worst < 1e-10, f"max |sum - 1| = {worst:.2e} (< 1e-10)"))
    res.checks.append(Check("at most three window terms", census <= 3, f"max nonzero terms {census}"))
    return res


def dilation_suite(n_points: int = 100_000, seed: int = 0) -> ExperimentResult:
    res = ExperimentResult()
    rows = []
    rel = 0.0
    ineq = True
    for d in (2, 3):
        gen = stream(seed, d)
        x = gen.standard_normal((n_points, d)) * np.exp(gen.uniform(-5, 5, (n_points, 1)))
        ks = gen.integers(-10, 11, n_points)
        w = w_eval(x)
        wk = np.array([w_eval(dilate(x[i:i + 1], int(k)))[0] for i, k in enumerate(ks[:2000])])
        # the vectorized path below covers every point; the loop above audits the scalar API
        scale = np.ldexp(1.0, -2 * ks)
        xk = np.column_stack([x[:, 0] * scale, x[:, 1:] * np.ldexp(1.0, -ks)[:, None]])
        wk_all = w_eval(xk)
        err = float(np.max(np.abs(wk_all - scale * w) / np.abs(scale * w)))
        err = max(err, float(np.max(np.abs(wk - scale[:2000] * w[:2000]) / np.abs(scale[:2000] * w[:2000]))))
        rhs = np.abs(x[:, 0]) ** 0.75 * np.linalg.norm(x[:, 1:], axis=1) ** 0.5
        holds = bool(np.all(np.abs(w) >= rhs))
        rel, ineq = max(rel, err), ineq and holds
        rows.append((d, n_points, err, int(holds)))
    res.tables["dyadic_dilation"] = Table(("d", "n_points", "max_rel_error", "inequality_holds"), rows)
    res.checks.append(Check("w(D_k x) = 4^-k w(x)", rel < 1e-12, f"max relative error {rel:.2e}"))
    res.checks.append(Check("|w(x)| >= |x1|^(3/4) |x'|^(1/2)", ineq, "checked at every point"))
    return res


def scaling_suite(m: float = dyadic.DEFAULT_M, budget: int = 20000, seed: int = 0,
                  workers: int = 1) -> ExperimentResult:
    res = ExperimentResult()
    rows = []
    tables = []
    th2, v, _ = catalog.pair("x2/v", m)
    th3, _, vt = catalog.pair("x2^3/v^2", m)
    th3d, _, _ = catalog.pair("x2^2x3/v^2", m)
    ks = range(th2.meta["k0"], th2.meta["k0"] + 7)
    kw = dict(m=m, budget=budget, seed=seed, workers=workers)
    tables.append(("theta", 2, dyadic.scaled_norm_table(th2, "theta", ks, d=2, **kw)))
    tables.append(("theta2", 2, dyadic.scaled_norm_table(th3, "theta2", ks, d=2, **kw)))
    tables.append(("theta2", 3, dyadic.scaled_norm_table(th3d, "theta2", ks, d=3, **kw)))
    tables.append(("v", 2, dyadic.scaled_norm_table(v, "v", ks, d=2, **kw)))
    tables.append(("inv_v", 2, dyadic.scaled_norm_table(v, "inv_v", ks, d=2, **kw)))
    tables.append(("psi", 2, dyadic.psi_k_norm_law(th2, v, None, ks, d=2, **kw)))
    tables.append(("psi_tilde", 2, dyadic.psi_k_norm_law(th3, v, vt, ks, d=2, **kw)))
    th1, v1, _ = catalog.pair("x2/v", 1.0)
    tables.append(("psi_m1", 2, dyadic.psi_k_norm_law(th1, v1, None, ks, d=2, **{**kw, "m": 1.0})))
    for name, d, t in tables:
        rows += [(name, d, t.m) + r for r in t.rows()]
        res.checks.append(Check(f"{name} (d = {d}, m = {t.m:g}) slope", t.ok,
                                f"fitted {t.slope:.4f} <= {t.bound:g} + {dyadic.SLOPE_SLACK}"))
    res.tables["dyadic_scaling"] = Table(("law", "d", "m", "k", "norm", "sup_norm", "fitted_slope"), rows)
    return res


def fourier_suite(magnitudes=(50.0, 100.0, 200.0, 400.0), compare=(10.0, 25.0, 50.0)) -> ExperimentResult:
    res = ExperimentResult()
    th, v, vt = catalog.pair("(x1+x2)/v")
    q = dyadic.SingularQuotient(th, v, vt)
    eng = dyadic.DyadicFourier(q, d=2)
    rows = []
    worst = 0.0
    for r in compare:
        for u in (np.array([1.0, 0.0]), np.array([0.6, 0.8])):
            a = r * u
            dy = eng.transform(a).value
            di = dyadic.direct_fourier(q, a)
            err = abs(dy - di) / abs(di)
            worst = max(worst, err)
            rows.append((a[0], a[1], dy.real, dy.imag, di.real, di.imag, err))
    res.tables["dyadic_fourier_compare"] = Table(
        ("a1", "a2", "re_dyadic", "im_dyadic", "re_direct", "im_direct", "rel_diff"), rows)
    res.checks.append(Check("dyadic sum equals direct transform (|a| <= 50)", worst < 0.02,
                            f"max relative difference {worst:.2e} (< 0.02)"))
    rep = dyadic.fourier_decay_check(th, v, vt, [np.array([1.0, 0.0])], magnitudes, engine=eng)[0]
    res.tables["dyadic_fourier_decay"] = Table(("norm_a", "abs_q_hat", "scaled"), rep.rows())
    res.checks.append(Check("scaled transform drops by at least 30% along the drift ray", rep.ok,
                            f"decrease {100 * rep.decrease:.1f}%"))
    l1_dy, l1_di = eng.l1_mass(), dyadic.direct_l1(q)
    err = abs(l1_dy - l1_di) / l1_di
    res.tables["dyadic_l1"] = Table(("shell_sum", "direct", "rel_diff"), [(l1_dy, l1_di, err)])
    res.checks.append(Check("shell L1 masses add up to the L1 norm", err < 0.01, f"relative difference {err:.2e}"))
    return res


def product_suite(budget: int = 20000, seed: int = 0) -> ExperimentResult:
    res = ExperimentResult()
    cases = [
        ("x1*x1 on [0,1]", lambda x: x[:, 0], lambda x: x[:, 0], 1.0, dyadic.box([0.0], [1.0])),
        ("sin*cos on ball", lambda x: np.sin(3 * x[:, 0]), lambda x: np.cos(x[:, 0] + 2 * x[:, 1]), 0.5,
         dyadic.ball(2)),
        ("const*x2 on ball", lambda x: np.full(len(x), 2.5), lambda x: x[:, 1] ** 2, 1.0, dyadic.ball(2)),
    ]
    rows = []
    ok = True
    for name, f, g, sigma, region in cases:
        rep = dyadic.product_holder_check(f, g, sigma, region, budget, seed)
        ok &= rep.ok
        rows.append((name, sigma, rep.fg, rep.f_sup, rep.g_sup, rep.f_semi, rep.g_semi, rep.rhs))
    res.tables["dyadic_product"] = Table(("case", "sigma", "fg_semi", "f_sup", "g_sup", "f_semi", "g_semi",
                                          "rhs"), rows)
    res.checks.append(Check("product Hölder inequality", ok, f"{len(cases)} cases"))
    return res


def cm_suite() -> ExperimentResult:
    res = ExperimentResult()
    n = 80
    out = []
    for rmax in (200.0, 400.0):
        r = np.geomspace(1.0, rmax, n)
        ang = np.linspace(0.0, math.pi, n)
        a = np.column_stack([r * np.cos(ang), r * np.sin(ang)])
        out.append(dyadic.cm_fourier_bound_check(dyadic.bump_handle(), 2.0, a))
    rows = [(float(r), float(s)) for r, s in zip(out[1].magnitudes, out[1].scaled)]
    res.tables["dyadic_cm"] = Table(("norm_a", "scaled_abs_u_hat"), rows)
    c1, c2 = out[0].constant, out[1].constant
    res.checks.append(Check("|a|^2 |u_hat(a)| bounded and stable under range doubling",
                            math.isfinite(c1) and c2 <= 1.05 * c1, f"constants {c1:.4f}, {c2:.4f}"))
    return res


def dyadic_check(suite: str = "partition", n_points: int = 100_000, m: float = dyadic.DEFAULT_M,
                 budget: int = 20000, seed: int = 0, workers: int = 1,
                 magnitudes=(50.0, 100.0, 200.0, 400.0)) -> ExperimentResult:
    runners = {
        "partition": lambda: partition_suite(n_points, seed),
        "dilation": lambda: dilation_suite(n_points, seed),
        "scaling": lambda: scaling_suite(m, budget, seed, workers),
        "fourier": lambda: fourier_suite(tuple(magnitudes)),
        "product": lambda: product_suite(budget, seed),
        "cm": cm_suite,
    }
    names = list(runners) if suite == "all" else [suite]
    res = ExperimentResult()
    for name in names:
        if name not in runners:
            raise ConfigError(f"unknown dyadic suite '{name}'; known: {', '.join(runners)}, all")
        res.merge(runners[name]())
    return res


def run_experiment(cfg: ExperimentConfig, seed: int, workers: int) -> ExperimentResult:
    p = cfg.params
    if cfg.experiment == "model-info":
        return model_info(cfg.build_model())
    if cfg.experiment == "spectral-report":
        return spectral_report(cfg.build_model(), p["n_max"], p["t"], p["grid_radius"], p["grid_points"], workers)
    if cfg.experiment == "renewal-run":
        return renewal_run(cfg.build_model(), p["taus"], p["n_paths"], seed, p["target"], p["frak_A"],
                           p["margin_sigmas"], p["chunk_size"], p["check_lattice"], tuple(p["band"]), workers,
                           p["shift_along_m"])
    if cfg.experiment == "oscillatory-check":
        return oscillatory_check(p["suite"], tuple(p["taus"]), p["j_tau"])
    if cfg.experiment == "dyadic-check":
        return dyadic_check(p["suite"], p["n_points"], p["m"], p["budget"], seed, workers, p["magnitudes"])
    raise ConfigError(f"unknown experiment {cfg.experiment!r}")
