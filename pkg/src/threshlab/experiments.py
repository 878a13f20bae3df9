"""Experiment pipelines behind ``lab run`` and the checks behind ``lab verify``.

Every kind has a runner that writes CSV tables and a checker that reads the
tables back from disk and recomputes its verdicts from them, so a run and a
later verify go through the same code path.
"""
from dataclasses import dataclass, asdict
import math
import os

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .contours import ContourSpec
from .distortion import (DistortionSpec, barrier_resonance_root, distort, resonance_scan, sector_check)
from .errors import InvalidArgument, LabError, OracleUnavailable
from .grid import make_grid
from .operators import WeightSpec, assemble_hamiltonian, weight_vector, witten_splitting
from .output import read_csv, svg_chart, write_csv
from .potentials import PotentialSpec, SquareBarrier, WittenSpec, eval_potential
from .resolvent import (envelope_fit, gevrey_fit, gevrey_sequence, limiting_absorption_scan,
                        numerical_range_boundary, spectral_measure_estimate,
                        threshold_remainder_scan)
from .semigroup import EigenOracle, beta_expected, decay_fit, fit_window, schrodinger_via_contour
from .threshold import (build_riesz, fit_order, laurent_expand, omega_function, pole_convergence,
                        projection_representation_check, rank_one_check, _leading_coefficient)


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    limit: float
    passed: bool
    detail: str = ""

    def as_dict(self):
        d = asdict(self)
        d["passed"] = bool(d["passed"])
        return d


def _check(name, value, limit, passed, detail=""):
    return Check(name, float(value), float(limit), bool(passed), detail)


# ---------------------------------------------------------------- builders

def potential_from(cfg):
    p = cfg.section("potential")
    c = list(p.get("c", [1.0])) + [0.0] * 5
    return PotentialSpec(mu=p["mu"], mu_prime=p.get("mu_prime", 0.5), class_tag=p.get("class", "V"),
                         c=tuple(c[:5]), R=p.get("R", 0.0), w_radius=p.get("w_radius", 1.0),
                         w_amplitude=p.get("w_amplitude", 0.0))


def witten_from(cfg):
    w = cfg.section("witten")
    return WittenSpec(rho=w["rho"], u1_amplitude=w.get("u1_amplitude", 1.0),
                      u2_amplitude=w.get("u2_amplitude", 0.0), u2_radius=w.get("u2_radius", 1.0))


def grid_from(cfg):
    g = cfg.section("grid")
    return make_grid(g["L"], g["point_count"], n=g.get("n", 1), radial=g.get("radial", False))


def _smallest_eigenvalue(H):
    lo, d, up = H.tridiagonal()
    return float(eigh_tridiagonal(np.real(d), np.real(up), select="i", select_range=(0, 0),
                                  eigvals_only=True)[0])


# ---------------------------------------------------------------- pipelines

def heat_decay_series(spec, grid, a, t_min, t_count, box_factor=0.5, threshold=0.5):
    """|| w e^{-tH0} w || on a geometric t grid, w = e^{-a <x>^(1-mu)}, plus the decay fit."""
    H = assemble_hamiltonian(grid, eval_potential(spec, grid))
    if not H.hermitian_flag:
        raise InvalidArgument("the heat-decay pipeline uses the Hermitian spectral oracle")
    lam_min = _smallest_eigenvalue(H)
    t = np.geomspace(t_min, box_factor / lam_min, t_count)
    w = weight_vector(WeightSpec("subexp", a=a, mu=spec.mu), grid)
    norms = EigenOracle(H).weighted_norms(t, "heat", left=w, right=w)
    window = fit_window(t, norms, lam_min, threshold, box_factor)
    fit = decay_fit(t, norms, mu=spec.mu, window=window)
    return {"t": t, "norms": norms, "lambda_min": lam_min, "fit": fit}


def schrodinger_decay_series(spec, grid, R0, theta_im, delta, chi_radius, t_min, t_count,
                             box_factor=0.5, threshold=0.5, wedge_ratio=1.25, wedge_nodes=24,
                             error_estimate=False):
    """|| chi e^{-itH} chi || through the exterior-distorted operator and a wedge contour."""
    if not grid.radial:
        raise InvalidArgument("the Schrodinger pipeline runs on radial grids")
    H0 = distort(spec, grid, DistortionSpec(theta=0.0, R0=R0))
    lam_min = _smallest_eigenvalue(H0)
    Ht = distort(spec, grid, DistortionSpec(theta=1j * theta_im, R0=R0))
    r = grid.nodes
    chi = np.where(r < chi_radius, (1 - (r / chi_radius) ** 2) ** 3, 0.0)
    t = np.geomspace(t_min, box_factor / lam_min, t_count)
    wedge = ContourSpec.graded_wedge(delta, 40.0 / (t_min * math.sin(delta)), ratio=wedge_ratio,
                                     nodes_per_panel=wedge_nodes)
    samples = schrodinger_via_contour(Ht, chi, t, wedge, error_estimate=error_estimate)
    norms = np.array([s.norm() for s in samples])
    quad = np.array([s.quad_err for s in samples])
    window = fit_window(t, norms, lam_min, threshold, box_factor)
    fit = decay_fit(t, norms, mu=spec.mu, window=window)
    return {"t": t, "norms": norms, "quad_err": quad, "lambda_min": lam_min, "fit": fit}


def threshold_data(wspec, grid, radius, z):
    """Riesz data, chains and omega(z) for the Witten splitting H = H0 + W."""
    ws = witten_splitting(wspec, grid)
    h = grid.h
    K, rd = build_riesz(ws.H0, ws.W, h, radius)
    phi, chi = rd.phi_chain, rd.chi_chain
    T = K + np.eye(K.shape[0])
    chain_res = max([np.linalg.norm(T @ phi[0])] +
                    [np.linalg.norm(T @ phi[j] - phi[j - 1]) for j in range(1, len(phi))])
    chain_res /= max(np.linalg.norm(p) for p in phi)
    om = omega_function(ws.H0, ws.W, z, rd, h)
    probe = np.abs(grid.nodes) <= 3.0
    le = laurent_expand(ws.H, z, om.k, probe)
    return {"split": ws, "K": K, "riesz": rd, "omega": om, "laurent": le,
            "idempotent": float(np.linalg.norm(rd.pi1 @ rd.pi1 - rd.pi1, 2)),
            "commutator": float(np.linalg.norm(rd.pi1 @ K - K @ rd.pi1, 2)),
            "chain_residual": float(chain_res),
            "gram_error": float(np.abs(rd.gram - np.eye(rd.m)).max()),
            "representation": projection_representation_check(rd, phi, chi, ws.W, h)}


def witten_threshold_data(wspec, grid, z, probe_radius):
    """Pole convergence and the rank-one form of C_{-1} for the full Witten Laplacian."""
    ws = witten_splitting(wspec, grid)
    probe = np.abs(grid.nodes) <= probe_radius
    norms, slope = pole_convergence(ws.H, z, probe, ws.kernel, grid.h)
    le = laurent_expand(ws.H, z, 1, probe)
    return {"split": ws, "pole_norms": norms, "slope": slope, "laurent": le,
            "rank_one": rank_one_check(le, ws.kernel, grid.h), "rank": le.ranks[-1]}


def measure_slopes(spec, grid, lambdas, eps, a, s):
    """Spectral-measure norms on the lambda list and successive log-log slopes."""
    H = assemble_hamiltonian(grid, eval_potential(spec, grid))
    vals = np.array([spectral_measure_estimate(H, lam, eps, a, s, spec.mu) for lam in lambdas])
    slopes = np.diff(np.log(vals)) / np.diff(np.log(lambdas))
    return vals, slopes


def steepening(lambdas, values):
    """True when |slope| strictly grows as lambda decreases."""
    lam = np.asarray(lambdas, dtype=float)
    order = np.argsort(-lam)
    lam, v = lam[order], np.asarray(values, dtype=float)[order]
    slopes = np.diff(np.log(v)) / np.diff(np.log(lam))
    return bool(slopes.size >= 2 and np.all(np.diff(np.abs(slopes)) > 0)), slopes


# ---------------------------------------------------------------- runners

def _x(cfg, key, default=None):
    return cfg.get("experiment", key, default)


def _tol(cfg, key, default=None):
    return cfg.get("tolerances", key, default)


def run_numrange(cfg, out):
    spec, grid = potential_from(cfg), grid_from(cfg)
    H = assemble_hamiltonian(grid, eval_potential(spec, grid))
    nr = numerical_range_boundary(H, _x(cfg, "angle_count"))
    C0, min_re = envelope_fit(nr, spec.mu_prime)
    p = nr.points
    write_csv(os.path.join(out, "numrange.csv"), ["theta", "re", "im"],
              zip(nr.theta, p.real, p.imag))
    write_csv(os.path.join(out, "fit.csv"), ["C0", "min_re", "hermitian"],
              [(C0, min_re, int(H.hermitian_flag))])
    svg_chart(os.path.join(out, "numrange.svg"),
              [{"x": p.real, "y": p.imag, "label": "boundary points", "style": "points"}],
              title="numerical range boundary", xlabel="Re z", ylabel="Im z")
    return ["numrange.csv", "fit.csv", "numrange.svg"]


def check_numrange(cfg, out):
    t = read_csv(os.path.join(out, "numrange.csv"))
    f = read_csv(os.path.join(out, "fit.csv"))
    mu_p = cfg.get("potential", "mu_prime", 0.5)
    C0, min_re = envelope_fit(t["re"] + 1j * t["im"], mu_p)
    checks = [_check("re_lower_bound", min_re, -_tol(cfg, "re_floor"), min_re >= -_tol(cfg, "re_floor")),
              _check("C0_consistent", abs(C0 - f["C0"][0]), 1e-12,
                     abs(C0 - f["C0"][0]) <= 1e-12 * max(1.0, abs(C0)))]
    if f["hermitian"][0]:
        lim = _tol(cfg, "hermitian_imag", 1e-10)
        m = float(np.abs(t["im"]).max())
        checks.append(_check("hermitian_real", m, lim, m <= lim))
    return checks


def run_gevrey(cfg, out):
    spec, grid = potential_from(cfg), grid_from(cfg)
    H = assemble_hamiltonian(grid, eval_potential(spec, grid))
    chi = (np.abs(grid.interior) <= _x(cfg, "cutoff_radius")).astype(float)
    gs = gevrey_sequence(H, chi, _x(cfg, "N_max"), mu=spec.mu, M=_x(cfg, "M", 4.0),
                         two_sided=_x(cfg, "two_sided", True))
    write_csv(os.path.join(out, "gevrey.csv"), ["N", "norm", "log_norm", "gamma_hat_running"],
              zip(gs.N, gs.values, gs.log_values, gs.running_gamma))
    zs = -(10.0 ** -np.arange(1, 5))
    rem = threshold_remainder_scan(H, zs, weight=chi, right_weight=chi, series=gs)
    write_csv(os.path.join(out, "remainder.csv"), ["re_z", "im_z", "N", "norm"],
              [(z.real, z.imag, N, v) for z, N, v in rem])
    write_csv(os.path.join(out, "fit.csv"), ["gamma_hat", "gamma_expected", "log_C", "N_max"],
              [(gs.gamma_hat, gs.gamma_expected, gs.log_C, gs.N_max)])
    svg_chart(os.path.join(out, "gevrey.svg"),
              [{"x": gs.N, "y": gs.log_values, "label": "log ||chi G0^N chi||", "style": "points"}],
              title=f"Gevrey growth, gamma_hat = {gs.gamma_hat:.3f}", xlabel="N", ylabel="log norm")
    return ["gevrey.csv", "remainder.csv", "fit.csv", "gevrey.svg"]


def check_gevrey(cfg, out):
    t = read_csv(os.path.join(out, "gevrey.csv"))
    f = read_csv(os.path.join(out, "fit.csv"))
    mu = cfg.get("potential", "mu")
    g, _ = gevrey_fit(t["N"], t["log_norm"])
    gamma = 2 * mu / (1 - mu)
    lim = gamma + _tol(cfg, "gamma_excess")
    return [_check("gamma_upper_bound", g, lim, g <= lim),
            _check("window_size", t["N"].size, _tol(cfg, "min_window"), t["N"].size >= _tol(cfg, "min_window")),
            _check("fit_consistent", abs(g - f["gamma_hat"][0]), 1e-9, abs(g - f["gamma_hat"][0]) <= 1e-9)]


def _decay_outputs(out, name, series, mu, method):
    fit = series["fit"]
    quad = series.get("quad_err", np.zeros(series["t"].size))
    write_csv(os.path.join(out, "decay.csv"), ["t", "norm", "method", "quad_err"],
              [(t, v, method, q) for t, v, q in zip(series["t"], series["norms"], quad)])
    write_csv(os.path.join(out, "fit.csv"),
              ["beta_hat", "c_hat", "beta_expected", "residual", "t_lo", "t_hi", "count", "lambda_min"],
              [(fit.beta_hat, fit.c_hat, beta_expected(mu), fit.residual, fit.window[0], fit.window[1],
                fit.count, series["lambda_min"])])
    t, f = series["t"], series["norms"]
    ok = (f > 0) & (f < 1)
    X, Y = np.log10(t[ok]), np.log10(-np.log(f[ok]))
    svg_chart(os.path.join(out, "decay.svg"),
              [{"x": X, "y": Y, "label": name, "style": "points"}],
              title=f"beta_hat = {fit.beta_hat:.3f} (expected {beta_expected(mu):.3f})",
              xlabel="log10 t", ylabel="log10(-log norm)",
              ref_lines=[{"slope": fit.beta_hat, "intercept": math.log10(fit.c_hat), "label": "fit"}])
    return ["decay.csv", "fit.csv", "decay.svg"]


def run_heat_decay(cfg, out):
    spec, grid = potential_from(cfg), grid_from(cfg)
    s = heat_decay_series(spec, grid, _x(cfg, "a"), _x(cfg, "t_min"), _x(cfg, "t_count"),
                          _x(cfg, "box_factor", 0.5), _x(cfg, "threshold", 0.5))
    return _decay_outputs(out, "heat", s, spec.mu, "oracle")


def run_schrodinger_decay(cfg, out):
    spec, grid = potential_from(cfg), grid_from(cfg)
    s = schrodinger_decay_series(spec, grid, _x(cfg, "R0"), _x(cfg, "theta_im"), _x(cfg, "delta"),
                                 _x(cfg, "chi_radius"), _x(cfg, "t_min"), _x(cfg, "t_count"),
                                 _x(cfg, "box_factor", 0.5), _x(cfg, "threshold", 0.5),
                                 _x(cfg, "wedge_ratio", 1.25), _x(cfg, "wedge_nodes", 24))
    return _decay_outputs(out, "schrodinger", s, spec.mu, "contour")


def check_decay(cfg, out):
    t = read_csv(os.path.join(out, "decay.csv"))
    f = read_csv(os.path.join(out, "fit.csv"))
    mu = cfg.get("potential", "mu")
    try:
        window = fit_window(t["t"], t["norm"], f["lambda_min"][0], _x(cfg, "threshold", 0.5),
                            _x(cfg, "box_factor", 0.5))
        fit = decay_fit(t["t"], t["norm"], mu=mu, window=window)
    except LabError as exc:
        return [_check("beta_within_tolerance", float("nan"), _tol(cfg, "beta"), False, str(exc))]
    dev = abs(fit.beta_hat - beta_expected(mu))
    stored = abs(fit.beta_hat - f["beta_hat"][0])
    return [_check("beta_within_tolerance", dev, _tol(cfg, "beta"), dev <= _tol(cfg, "beta"),
                   f"beta_hat {fit.beta_hat:.4f}, expected {beta_expected(mu):.4f}"),
            _check("fit_consistent", stored, 1e-9, stored <= 1e-9)]


def run_las(cfg, out):
    spec, grid = potential_from(cfg), grid_from(cfg)
    H = assemble_hamiltonian(grid, eval_potential(spec, grid))
    scan = limiting_absorption_scan(H, _x(cfg, "lambdas"), _x(cfg, "eps"), _x(cfg, "s"),
                                    rel_change=_tol(cfg, "rel_change"), seed=cfg.seed)
    write_csv(os.path.join(out, "las.csv"), ["lambda", "eps", "norm"], scan.rows())
    files = ["las.csv"]
    series = [{"x": scan.eps, "y": scan.norms[i], "label": f"lambda = {lam:g}"}
              for i, lam in enumerate(scan.lambdas)]
    if _x(cfg, "measure_a") is not None:
        lams = np.asarray(_x(cfg, "lambdas"), dtype=float)
        vals, _ = measure_slopes(spec, grid, lams, _x(cfg, "measure_eps", 1e-3), _x(cfg, "measure_a"),
                                 _x(cfg, "s"))
        write_csv(os.path.join(out, "measure.csv"), ["lambda", "norm"], zip(lams, vals))
        svg_chart(os.path.join(out, "measure.svg"), [{"x": lams, "y": vals, "label": "smoothed measure"}],
                  title="spectral measure near threshold", xlabel="lambda", ylabel="norm",
                  logx=True, logy=True)
        files += ["measure.csv", "measure.svg"]
    svg_chart(os.path.join(out, "las.svg"), series, title="limiting absorption", xlabel="eps",
              ylabel="weighted resolvent norm", logx=True, logy=True)
    return files + ["las.svg"]


def check_las(cfg, out):
    t = read_csv(os.path.join(out, "las.csv"))
    checks = []
    worst = 0.0
    for lam in np.unique(t["lambda"]):
        m = t["lambda"] == lam
        e, v = t["eps"][m], t["norm"][m]
        v = v[np.argsort(-e)]
        ch = np.abs(np.diff(v)) / np.minimum(v[1:], v[:-1])
        worst = max(worst, float(ch[-1]) if ch.size else 0.0)
    checks.append(_check("las_converged", worst, _tol(cfg, "rel_change"),
                         np.isfinite(worst) and worst <= _tol(cfg, "rel_change")))
    path = os.path.join(out, "measure.csv")
    if _x(cfg, "measure_a") is not None:
        m = read_csv(path)
        ok, slopes = steepening(m["lambda"], m["norm"])
        checks.append(_check("measure_steepening", float(np.abs(slopes).min()) if slopes.size else 0.0,
                             0.0, ok, "slopes " + " ".join(f"{s:.3f}" for s in slopes)))
    return checks


def _resonance_target(cfg):
    if "barrier" in cfg.sections:
        b = cfg.section("barrier")
        return SquareBarrier(complex(b["V0_re"], b.get("V0_im", 0.0)), b["a"])
    return potential_from(cfg)


def _oracle_distance(target, nu):
    if not isinstance(target, SquareBarrier):
        return float("nan")
    best = float("inf")
    for parity in ("even", "odd"):
        try:
            root = barrier_resonance_root(target.V0, target.a, nu, parity)
        except OracleUnavailable:
            continue
        best = min(best, abs(root - nu))
    return best


def run_resonances(cfg, out):
    target, grid = _resonance_target(cfg), grid_from(cfg)
    re_w, im_w = _x(cfg, "re_window"), _x(cfg, "im_window")
    scan = resonance_scan(target, grid, [1j * t for t in _x(cfg, "thetas_im")],
                          window=(tuple(re_w), tuple(im_w)), R0=_x(cfg, "R0"),
                          drift_tol=_tol(cfg, "drift"), k=_x(cfg, "eig_count", 12), seed=cfg.seed)
    rows = [(r.nu.real, r.nu.imag, r.theta_residual, r.m_plus, int(r.real),
             _oracle_distance(target, r.nu)) for r in scan]
    write_csv(os.path.join(out, "resonances.csv"),
              ["re_nu", "im_nu", "theta_residual", "multiplicity", "real", "oracle_err"], rows)
    sec = []
    for t in _x(cfg, "thetas_im"):
        Ht = distort(target, grid, DistortionSpec(theta=1j * t, R0=_x(cfg, "R0")))
        r = sector_check(Ht, t, seed=cfg.seed)
        sec.append((t, r.c0, r.witness.real, r.witness.imag))
    write_csv(os.path.join(out, "sector.csv"), ["theta_im", "c0", "witness_re", "witness_im"], sec)
    write_csv(os.path.join(out, "census.csv"), ["count", "theta_count"],
              [(len(rows), len(_x(cfg, "thetas_im")))])
    svg_chart(os.path.join(out, "resonances.svg"),
              [{"x": [r[0] for r in rows], "y": [r[1] for r in rows], "label": "stable eigenvalues",
                "style": "points"}],
              title="resonances", xlabel="Re", ylabel="Im")
    return ["resonances.csv", "census.csv", "sector.csv", "resonances.svg"]


def check_resonances(cfg, out):
    t = read_csv(os.path.join(out, "resonances.csv"))
    re = np.atleast_1d(t.get("re_nu", np.zeros(0)))
    drift = np.atleast_1d(t.get("theta_residual", np.zeros(0)))
    d = float(drift.max()) if drift.size else 0.0
    checks = [_check("theta_drift", d, _tol(cfg, "drift"), d <= _tol(cfg, "drift"))]
    target = _resonance_target(cfg)
    if isinstance(target, SquareBarrier):
        nus = re + 1j * np.atleast_1d(t.get("im_nu", np.zeros(0)))
        errs = [_oracle_distance(target, nu) for nu in nus]
        e = max(errs) if errs else float("inf")
        lim = _tol(cfg, "oracle", 1e-4)
        checks.append(_check("barrier_oracle", e, lim, bool(errs) and e <= lim,
                             f"{len(errs)} resonance(s) compared with the transcendental root"))
    return checks


def run_threshold(cfg, out):
    grid = grid_from(cfg)
    z = np.asarray(_x(cfg, "z"), dtype=float)
    d = threshold_data(witten_from(cfg), grid, _x(cfg, "radius"), z)
    rd, om, le = d["riesz"], d["omega"], d["laurent"]
    write_csv(os.path.join(out, "threshold.csv"), ["z", "remainder_norm", "k", "m"],
              [(zz, r, om.k, rd.m) for zz, r in zip(le.z, le.remainder)])
    write_csv(os.path.join(out, "omega.csv"), ["z", "omega_re", "omega_im", "det_emp_re", "det_emp_im"],
              [(zz.real, w.real, w.imag, np.linalg.det(e).real, np.linalg.det(e).imag)
               for zz, w, e in zip(om.z, om.omega, om.e_minus_plus)])
    write_csv(os.path.join(out, "riesz.csv"), ["quantity", "value"],
              [("m", rd.m), ("idempotent", d["idempotent"]), ("commutator", d["commutator"]),
               ("chain_residual", d["chain_residual"]), ("gram_error", d["gram_error"]),
               ("representation", d["representation"]), ("k", om.k),
               ("omega_k_re", om.omega_k.real), ("omega_k_im", om.omega_k.imag),
               ("sigma_k_re", om.sigma_k.real), ("sigma_k_im", om.sigma_k.imag),
               ("b_m1_re", om.b_m1.real), ("b_m1_im", om.b_m1.imag),
               ("rank_C_minus_1", le.ranks[-1])])
    cols, data = ["x"], [grid.nodes]
    for j, (p, c) in enumerate(zip(rd.phi_chain, rd.chi_chain), 1):
        cols += [f"phi{j}_re", f"phi{j}_im", f"chi{j}_re", f"chi{j}_im"]
        data += [p.real, p.imag, c.real, c.imag]
    write_csv(os.path.join(out, "chains.csv"), cols, zip(*data))
    svg_chart(os.path.join(out, "omega.svg"),
              [{"x": -om.z.real, "y": np.abs(om.omega), "label": "|omega(z)|", "style": "points"}],
              title=f"omega(z), fitted k = {om.k}", xlabel="|z|", ylabel="|omega|", logx=True, logy=True)
    return ["threshold.csv", "omega.csv", "riesz.csv", "chains.csv", "omega.svg"]


def _kv(path):
    t = read_csv(path)
    return {q: float(v) for q, v in zip(t["quantity"], t["value"])}


def check_threshold(cfg, out):
    kv = _kv(os.path.join(out, "riesz.csv"))
    om = read_csv(os.path.join(out, "omega.csv"))
    z = om["z"].astype(complex)
    w = om["omega_re"] + 1j * om["omega_im"]
    k, _ = fit_order(z, w)
    wk = complex(_leading_coefficient(z, w, k))
    b = complex(kv["b_m1_re"], kv["b_m1_im"])
    sig = complex(kv["sigma_k_re"], kv["sigma_k_im"])
    T = lambda key: _tol(cfg, key)
    rel_w = abs(wk - b) / abs(b) if k == 1 else float("inf")
    rel_s = abs(sig + b) / abs(b) if k == 1 else float("inf")
    return [_check("order_k", k, 1, k == 1 and k == kv["k"]),
            _check("idempotent", kv["idempotent"], T("idempotent"), kv["idempotent"] <= T("idempotent")),
            _check("chain_residual", kv["chain_residual"], _tol(cfg, "chain", 1e-8),
                   kv["chain_residual"] <= _tol(cfg, "chain", 1e-8)),
            _check("gram", kv["gram_error"], T("gram"), kv["gram_error"] <= T("gram")),
            _check("representation", kv["representation"], T("representation"),
                   kv["representation"] <= T("representation")),
            _check("omega_matches_b", rel_w, T("omega"), rel_w <= T("omega"),
                   "omega_1 compared with +b_m1 (determinant convention)"),
            _check("sigma_matches_minus_b", rel_s, T("omega"), rel_s <= T("omega")),
            _check("rank_bound", kv["rank_C_minus_1"], kv["m"], kv["rank_C_minus_1"] <= kv["m"])]


def run_witten_threshold(cfg, out):
    grid = grid_from(cfg)
    z = np.asarray(_x(cfg, "z"), dtype=float)
    d = witten_threshold_data(witten_from(cfg), grid, z, _x(cfg, "probe_radius"))
    write_csv(os.path.join(out, "pole.csv"), ["z", "norm"], zip(z, d["pole_norms"]))
    write_csv(os.path.join(out, "witten.csv"), ["quantity", "value"],
              [("slope", d["slope"]), ("rank_one", d["rank_one"]), ("rank_C_minus_1", d["rank"])])
    svg_chart(os.path.join(out, "pole.svg"),
              [{"x": -z, "y": d["pole_norms"], "label": "||P(zR(z) + Pi0)P||", "style": "points"}],
              title=f"pole convergence, slope {d['slope']:.3f}", xlabel="|z|", ylabel="norm",
              logx=True, logy=True)
    return ["pole.csv", "witten.csv", "pole.svg"]


def check_witten_threshold(cfg, out):
    p = read_csv(os.path.join(out, "pole.csv"))
    kv = _kv(os.path.join(out, "witten.csv"))
    slope = float(np.polyfit(np.log(np.abs(p["z"])), np.log(p["norm"]), 1)[0])
    tol = _tol(cfg, "slope")
    return [_check("pole_slope", abs(slope - 1.0), tol, abs(slope - 1.0) <= tol, f"slope {slope:.4f}"),
            _check("slope_consistent", abs(slope - kv["slope"]), 1e-9, abs(slope - kv["slope"]) <= 1e-9),
            _check("rank_C_minus_1", kv["rank_C_minus_1"], 1, kv["rank_C_minus_1"] == 1),
            _check("rank_one_residual", kv["rank_one"], _tol(cfg, "rank_one"),
                   kv["rank_one"] <= _tol(cfg, "rank_one"))]


RUNNERS = {
    "numrange": (run_numrange, check_numrange),
    "gevrey": (run_gevrey, check_gevrey),
    "heat-decay": (run_heat_decay, check_decay),
    "schrodinger-decay": (run_schrodinger_decay, check_decay),
    "las": (run_las, check_las),
    "resonances": (run_resonances, check_resonances),
    "threshold": (run_threshold, check_threshold),
    "witten-threshold": (run_witten_threshold, check_witten_threshold),
}

OUTPUTS = {
    "numrange": ("numrange.csv", "fit.csv"),
    "gevrey": ("gevrey.csv", "fit.csv"),
    "heat-decay": ("decay.csv", "fit.csv"),
    "schrodinger-decay": ("decay.csv", "fit.csv"),
    "las": ("las.csv",),
    "resonances": ("resonances.csv", "census.csv"),
    "threshold": ("threshold.csv", "omega.csv", "riesz.csv"),
    "witten-threshold": ("pole.csv", "witten.csv"),
}


def metrics_rows(checks):
    return [(c.name, c.value, c.limit, int(c.passed), c.detail) for c in checks]


# ---------------------------------------------------------------- report

def build_report(run_dirs, out):
    """Cross-run summary from run.json files; failing runs are listed first."""
    import json
    records = []
    for d in run_dirs:
        path = os.path.join(d, "run.json")
        with open(path) as fh:
            rec = json.load(fh)
        rec["_dir"] = d
        records.append(rec)
    if not records:
        raise InvalidArgument("report needs at least one run")
    records.sort(key=lambda r: (bool(r.get("passed")), r["_dir"]))
    lines = ["run summary", ""]
    for r in records:
        flag = "PASS" if r.get("passed") else "FAIL"
        lines.append(f"{flag}  {r['kind']:<18} {r['_dir']}")
        for c in r.get("checks", []):
            if not c["passed"]:
                lines.append(f"      failed: {c['name']} value={c['value']:.6g} limit={c['limit']:.6g}")
    beta_rows, gamma_rows, census_rows, thr_rows = [], [], [], []
    for r in records:
        d, kind = r["_dir"], r["kind"]
        if kind in ("heat-decay", "schrodinger-decay") and os.path.exists(os.path.join(d, "fit.csv")):
            f = read_csv(os.path.join(d, "fit.csv"))
            mu = r["config"]["potential"]["mu"]
            beta_rows.append((kind, mu, f["beta_hat"][0], f["beta_expected"][0], int(r["passed"])))
        elif kind == "gevrey" and os.path.exists(os.path.join(d, "fit.csv")):
            f = read_csv(os.path.join(d, "fit.csv"))
            mu = r["config"]["potential"]["mu"]
            gamma_rows.append((mu, f["gamma_hat"][0], f["gamma_expected"][0], int(f["N_max"][0]),
                               int(r["passed"])))
        elif kind == "resonances" and os.path.exists(os.path.join(d, "census.csv")):
            f = read_csv(os.path.join(d, "census.csv"))
            census_rows.append((d, int(f["count"][0]), int(r["passed"])))
        elif kind == "threshold" and os.path.exists(os.path.join(d, "riesz.csv")):
            kv = _kv(os.path.join(d, "riesz.csv"))
            thr_rows.append((d, int(kv["k"]), int(kv["m"]), int(r["passed"])))
    if not census_rows:
        census_rows.append(("none", 0, 1))
    write_csv(os.path.join(out, "beta.csv"), ["kind", "mu", "beta_hat", "beta_expected", "passed"], beta_rows)
    write_csv(os.path.join(out, "gamma.csv"), ["mu", "gamma_hat", "gamma_expected", "N_max", "passed"],
              gamma_rows)
    write_csv(os.path.join(out, "census.csv"), ["run", "resonances", "passed"], census_rows)
    write_csv(os.path.join(out, "threshold.csv"), ["run", "k", "m", "passed"], thr_rows)
    lines += ["", "kind               mu     beta_hat   expected"]
    lines += [f"{k:<18} {m:<6g} {b:<10.4f} {e:.4f}" for k, m, b, e, _ in beta_rows]
    lines += ["", "mu     gamma_hat  expected  N_max"]
    lines += [f"{m:<6g} {g:<10.4f} {e:<9.4f} {n}" for m, g, e, n, _ in gamma_rows]
    lines += ["", "resonance census"] + [f"{d}: {c}" for d, c, _ in census_rows]
    lines += ["", "threshold k / m"] + [f"{d}: k={k} m={m}" for d, k, m, _ in thr_rows]
    with open(os.path.join(out, "summary.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    files = ["summary.txt", "beta.csv", "gamma.csv", "census.csv", "threshold.csv"]
    if beta_rows:
        mus = np.linspace(0.05, 0.95, 50)
        svg_chart(os.path.join(out, "beta.svg"),
                  [{"x": [b[1] for b in beta_rows], "y": [b[2] for b in beta_rows], "label": "beta_hat",
                    "style": "points"},
                   {"x": mus, "y": (1 - mus) / (1 + mus), "label": "(1 - mu)/(1 + mu)"}],
                  title="decay exponent", xlabel="mu", ylabel="beta")
        files.append("beta.svg")
    return records, files
