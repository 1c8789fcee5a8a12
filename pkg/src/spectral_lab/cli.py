"""Command-line experiment runner.

Usage::

    spectral-lab <experiment> --config PATH --out PREFIX [--threads N]

Writes ``PREFIX.manifest.txt``, ``PREFIX.verdict.txt`` and one or more
``PREFIX.<name>.csv`` files.  Exit status is 0 on success (whatever the
verdicts say), 1 on numeric failure and 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import os
import sys
from io import StringIO

import numpy as np
from scipy.integrate import quad

from . import __version__
from .asymptotics import (
    cauchy_spread,
    jl_bracket,
    perturbation_expansion,
    pk_comparison_grid,
    pk_family,
    psi_sup,
    sandwich_sweep,
)
from .config import EXPERIMENTS, Config, ConfigError, parse_config
from .dynamics import decay_curve, decay_fit, example31_measure, log_time_grid, strichartz_classify
from .errors import NumericFailure, UnsupportedSpec
from .free import free_density
from .lattice import BoundaryCondition, DecayEnvelope, Perturbed, Zero
from .measure import (
    STANDARD_BUMPS,
    ThetaGrid,
    build_measure,
    domination_ratio,
    holder_modulus,
    reference_measure,
    weak_integral,
    write_measure_csv,
)
from .parallel import map_chunks
from .quasiperiodic import (
    DiophantineParams,
    almost_mathieu_spec,
    approximant_band_energies,
    diophantine_check,
    exp_decay_perturbation,
)


class Run:
    """Collects verdict lines and CSV payloads for one experiment."""

    def __init__(self, cfg: Config, threads: int):
        self.cfg = cfg
        self.threads = threads
        self.manifest = (f"# spectral-lab manifest\nversion = {__version__}\n" + cfg.render())
        self.digest = hashlib.sha256(self.manifest.encode()).hexdigest()[:16]
        self.verdicts: list[str] = []
        self.files: dict[str, str] = {}

    def check(self, name: str, ok: bool, measured: str, params: str) -> None:
        self.verdicts.append(f"{name}: {'PASS' if ok else 'FAIL'} ({measured}; {params})")

    def csv(self, name: str, columns, rows, extra: dict | None = None) -> None:
        buf = StringIO()
        self._header(buf, extra)
        buf.write(",".join(columns) + "\n")
        for r in rows:
            buf.write(",".join(_fmt(v) for v in r) + "\n")
        self.files[f"{name}.csv"] = buf.getvalue()

    def _header(self, buf, extra=None):
        buf.write(f"# manifest_digest: {self.digest}\n")
        buf.write(f"# experiment: {self.cfg.experiment}\n")
        for k, v in (extra or {}).items():
            buf.write(f"# {k}: {v}\n")

    def text(self, name: str, body: str) -> None:
        self.files[name] = body


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


# -- operator assembly --------------------------------------------------------


def _base(cfg: Config):
    if cfg["operator.potential"] == "zero":
        return Zero(), 0.0
    lam = cfg["operator.lambda"]
    return almost_mathieu_spec(lam, cfg["operator.alpha"], cfg["operator.theta"]), 2.0


def _perturbation(cfg: Config, required: bool = False):
    base, vnorm = _base(cfg)
    if cfg["perturbation.kind"] == "none":
        if required:
            raise ConfigError(f"experiment '{cfg.experiment}' needs perturbation.kind = exponential",
                              field="perturbation.kind")
        return base, None, 0.0, None
    lam = cfg["operator.lambda"] if cfg["operator.potential"] == "almost_mathieu" else 0.0
    p = cfg.section("perturbation")
    b = exp_decay_perturbation(p["gamma"], p["a"], p["tau"], lam, vnorm, p["seed"], p["n_range"],
                               p["fraction"], relaxed=p["relaxed"])
    env = DecayEnvelope(p["gamma"], p["a"], p["tau"], abs(lam) * vnorm, relaxed=p["relaxed"])
    kappa = p["kappa"]
    bn = max(abs(v) for v in b.values)
    if bn > 0 and abs(kappa) > 1.0 / bn:
        raise ConfigError(f"|kappa| must not exceed 1/||b|| = {1.0 / bn:g}", field="perturbation.kappa")
    return base, b, kappa, env


def _operator_spec(cfg: Config):
    base, b, kappa, _ = _perturbation(cfg)
    return base if b is None else Perturbed(base, kappa, b)


def _op_params(cfg: Config) -> str:
    op = cfg.section("operator")
    s = f"potential={op['potential']}, beta={op['beta']:.6g}"
    if op["potential"] == "almost_mathieu":
        s += f", lambda={op['lambda']:g}, alpha={op['alpha']:.10g}, theta={op['theta']:g}"
    p = cfg.section("perturbation")
    if p["kind"] != "none":
        s += f", kappa={p['kappa']:g}, a={p['a']:g}, tau={p['tau']:g}, gamma={p['gamma']:g}, seed={p['seed']}"
    return s


def _measure(cfg: Config, eps: float, default_method: str | None = None):
    m = cfg.section("measure")
    if m["source"] == "power":
        return example31_measure(m["power_beta"], m["nodes"])
    method = m["method"]
    if default_method and "measure.method" not in cfg.explicit:
        method = default_method
    return build_measure(_operator_spec(cfg), cfg["operator.beta"], m["n"],
                         ThetaGrid(m["nodes"], eps), method, threads=1)


# -- experiments --------------------------------------------------------------


def run_density(run: Run) -> None:
    cfg = run.cfg
    if cfg["measure.source"] != "operator":
        raise ConfigError("density needs measure.source = operator", field="measure.source")
    beta = cfg["operator.beta"]
    m = cfg.section("measure")
    tol = cfg["density.tol"]
    spec = _operator_spec(cfg)
    for eps in m["eps"]:
        grid = ThetaGrid(m["nodes"], eps)
        mu = build_measure(spec, beta, m["n"], grid, m["method"], run.threads)
        mu2 = None
        if m["method"] == "approximant" and cfg["density.cauchy"]:
            mu2 = build_measure(spec, beta, 2 * m["n"], grid, m["method"], run.threads)
        tag = f"eps{eps!r}"
        buf = StringIO()
        run._header(buf)
        write_measure_csv(mu, buf)
        run.files[f"measure.{tag}.csv"] = buf.getvalue()
        rows = []
        for f in STANDARD_BUMPS:
            lo, hi = max(f.center - f.radius, -2 + eps), min(f.center + f.radius, 2 - eps)
            oracle = quad(lambda x: f(np.array([x]))[0] * free_density(x, beta), lo, hi,
                          limit=400, epsabs=1e-14, epsrel=1e-12)[0]
            val = weak_integral(mu, f)
            rel = abs(val - oracle) / abs(oracle)
            row = [f.center, f.radius, val, oracle, rel]
            params = (f"{_op_params(cfg)}, n={m['n']}, method={m['method']}, nodes={m['nodes']}, "
                      f"eps={eps:g}, bump=({f.center:g},{f.radius:g})")
            run.check("weak integral vs free closed form", rel <= tol,
                      f"rel_err={rel:.3e} (tol {tol:g})", params)
            if mu2 is not None:
                val2 = weak_integral(mu2, f)
                drift = abs(val2 - val) / abs(val)
                row.append(val2)
                run.check("weak integral Cauchy n vs 2n", drift <= tol,
                          f"rel_change={drift:.3e} (tol {tol:g})", params)
            rows.append(row)
        cols = ["bump_center", "bump_radius", "integral", "oracle", "rel_err"]
        if mu2 is not None:
            cols.append("integral_2n")
        run.csv(f"bumps.{tag}", cols, rows)


def _edge_for(beta: float):
    if beta > 0:
        return -2.0
    if beta < 0:
        return 2.0
    return None


def run_holder(run: Run) -> None:
    cfg = run.cfg
    h = cfg.section("holder")
    m = cfg.section("measure")
    beta = cfg["operator.beta"]
    tol = h["stability_tol"]
    rows, dom_rows = [], []
    alphas = sorted(set(h["alphas"]) | {h["stable_alpha"]}
                    | ({h["growth_alpha"]} if h["growth_alpha"] >= 0 else set()))
    for eps in m["eps"]:
        mu = _measure(cfg, eps, default_method="limit")
        reports = {}
        for a in alphas:
            rep = holder_modulus(mu, a, h["depth_max"])
            reports[a] = rep
            for p in rep.per_depth:
                rows.append([eps, a, p.depth, p.sup_ratio, p.interval[0], p.interval[1]])
        base = (f"{_op_params(cfg)}, source={m['source']}, nodes={m['nodes']}, eps={eps:g}")
        if h["stable_from"] <= h["depth_max"]:
            rep = reports[h["stable_alpha"]]
            sups = [rep.at_depth(d).sup_ratio for d in range(h["stable_from"], h["depth_max"] + 1)]
            spread = (max(sups) - min(sups)) / min(sups) if min(sups) > 0 else math.inf
            run.check(f"M_{h['stable_alpha']:g} depth-stable", spread <= tol,
                      f"spread={spread:.3e} (tol {tol:g}), M={sups[-1]:.6g}",
                      f"{base}, depths={h['stable_from']}..{h['depth_max']}")
        if h["growth_alpha"] >= 0 and h["growth_from"] <= h["depth_max"]:
            rep = reports[h["growth_alpha"]]
            s0 = rep.at_depth(h["growth_from"]).sup_ratio
            top = rep.at_depth(h["depth_max"])
            factor = top.sup_ratio / s0 if s0 > 0 else math.inf
            run.check(f"M_{h['growth_alpha']:g} grows", factor >= h["growth_factor"],
                      f"factor={factor:.4f} (need >= {h['growth_factor']:g})",
                      f"{base}, depths={h['growth_from']}..{h['depth_max']}")
            edge = _edge_for(beta) if m["source"] == "operator" else 0.0
            if edge is not None:
                width = top.interval[1] - top.interval[0]
                adjacent = min(abs(top.interval[0] - edge), abs(top.interval[1] - edge)) <= width * 1e-9
                run.check(f"M_{h['growth_alpha']:g} maximizer at edge {edge:g}", adjacent,
                          f"interval=[{top.interval[0]!r}, {top.interval[1]!r}]",
                          f"{base}, depth={h['depth_max']}")
        if h["domination"] and m["source"] == "operator":
            ref = reference_measure(beta, ThetaGrid(m["nodes"], eps))
            d = domination_ratio(mu, ref, h["domination_to"], h["domination_from"])
            vals = [r for _, r in d.per_depth if not math.isnan(r)]
            for dep, r in d.per_depth:
                dom_rows.append([eps, dep, r])
            spread = (max(vals) - min(vals)) / min(vals)
            params = f"{base}, depths={h['domination_from']}..{h['domination_to']}"
            run.check("domination ratio bounded", d.ratio <= h["domination_max"],
                      f"ratio={d.ratio:.6g} (max {h['domination_max']:g}), excluded={d.excluded}", params)
            run.check("domination ratio depth-stable", spread <= tol,
                      f"spread={spread:.3e} (tol {tol:g})", params)
    run.csv("holder", ["eps", "alpha", "depth", "sup_ratio", "left", "right"], rows)
    if dom_rows:
        run.csv("domination", ["eps", "depth", "ratio"], dom_rows)


def _auto_rho(cfg: Config) -> float:
    if cfg["measure.source"] == "power":
        return cfg["measure.power_beta"]
    beta = cfg["operator.beta"]
    return 0.5 if abs(abs(beta) - math.pi / 4) < 1e-12 else 0.0


def run_dynamics(run: Run) -> None:
    cfg = run.cfg
    dyn = cfg.section("dynamics")
    m = cfg.section("measure")
    mu = _measure(cfg, m["eps"][0], default_method="limit")
    ts = log_time_grid(dyn["t_min"], dyn["t_max"], dyn["per_decade"])
    curve = decay_curve(mu, ts, dyn["kernel"], run.threads, dyn["eta"])
    fit = decay_fit(curve, dyn["t_min"], dyn["t_max"])
    rho = dyn["rho"] if dyn["rho"] >= 0 else _auto_rho(cfg)
    cls = strichartz_classify(rho)
    buf = StringIO()
    run._header(buf, {"kernel": dyn["kernel"], "nodes": m["nodes"], "source": m["source"]})
    curve.write_csv(buf)
    run.files["decay.csv"] = buf.getvalue()
    side = StringIO()
    side.write(f"manifest_digest: {run.digest}\n")
    side.write(f"rho: {rho!r}\nregime: {cls.regime}\n")
    curve.write_sidecar(side)
    run.text("fit.txt", side.getvalue())
    params = (f"{_op_params(cfg)}, source={m['source']}, nodes={m['nodes']}, "
              f"t=[{dyn['t_min']:g},{dyn['t_max']:g}], per_decade={dyn['per_decade']}, "
              f"kernel={dyn['kernel']}, rho={rho:g}")
    if m["source"] == "power":
        params += f", power_beta={m['power_beta']:g}"
    if cls.regime == "inverse_t":
        ok = abs(fit.exponent + 1.0) <= dyn["slope_tol"]
        run.check("inverse_t regime", ok,
                  f"slope={fit.exponent:.4f} (target -1 +/- {dyn['slope_tol']:g})", params)
    elif cls.regime == "log_over_t":
        ok = fit.log_r_squared >= dyn["r2_min"]
        run.check("log_over_t regime", ok,
                  f"r²={fit.log_r_squared:.6f} (min {dyn['r2_min']:g}), "
                  f"relative log slope={fit.log_relative_slope:.4f}", params)
    else:
        ok = abs(fit.exponent - cls.exponent) <= dyn["power_tol"]
        run.check("power_2_1mrho regime", ok,
                  f"slope={fit.exponent:.4f} (target {cls.exponent:g} +/- {dyn['power_tol']:g})", params)


def run_asymptotics(run: Run) -> None:
    cfg = run.cfg
    base, b, kappa, env = _perturbation(cfg, required=True)
    a = cfg.section("asymptotics")
    xs = np.linspace(a["e_min"], a["e_max"], a["energies"])
    n_max = a["n_max"]

    def one(chunk):
        out = []
        for x in chunk:
            ex = perturbation_expansion(float(x), base, b, kappa, env, n_max, tol=a["tol"])
            ex.require_converged()
            rates = [ex.residual_rate(n) for n in range(a["rate_from"], n_max + 1)]
            ident = max(max(ex.identity_residual(n), ex.dual_identity_residual(n))
                        for n in range(n_max + 1))
            out.append((float(x), ex, rates, ident))
        return out

    res = map_chunks(one, list(xs), run.threads, chunk=8)
    sand, gamma_hat = sandwich_sweep(xs, base, b, kappa, env, a["sandwich_n"], run.threads)
    target = env.base ** (3.0 - env.tau) + a["rate_slack"]
    rows = []
    for (x, ex, rates, ident), s in zip(res, sand):
        q = ex.Q
        rows.append([x, ex.terms, ex.tail_bound, q.m11, q.m12, q.m21, q.m22, max(rates), ident,
                     s.gamma, s.ratio])
    run.csv("expansion", ["energy", "terms", "tail_bound", "q11", "q12", "q21", "q22",
                          "max_rate", "identity_residual", "gamma_x", "norm_ratio"], rows)
    by_n = np.max(np.array([r[2] for r in res]), axis=0)
    series_exp = env.base ** (2.0 - env.tau)
    run.csv("rates", ["n", "max_rate"],
            [[n, by_n[i]] for i, n in enumerate(range(a["rate_from"], n_max + 1))],
            {"series_tail_exponent": repr(series_exp), "residual_envelope_exponent": repr(target - a["rate_slack"])})
    params = (f"{_op_params(cfg)}, energies={a['energies']} in [{a['e_min']:g},{a['e_max']:g}], "
              f"n={a['rate_from']}..{n_max}")
    worst = float(by_n.max())
    run.check("residual rate ||R_n||^(1/n)", worst <= target,
              f"max={worst:.4e} (bound a^(3-tau)+slack={target:.4g}, series tail a^(2-tau)={series_exp:.4g})",
              params)
    ident = max(r[3] for r in res)
    run.check("expansion identity", ident <= a["identity_tol"],
              f"max residual={ident:.3e} (tol {a['identity_tol']:g})", params)
    sp = f"{_op_params(cfg)}, energies={a['energies']}, n={a['sandwich_n']}"
    run.check("sandwich constant", gamma_hat <= a["gamma_max"],
              f"gamma_hat={gamma_hat:.8f} (max {a['gamma_max']:g})", sp)
    bad = sum(1 for s in sand if not s.holds)
    gx = max(s.gamma for s in sand)
    run.check("sandwich holds with gamma_x", bad == 0 and gx <= a["gamma_max"],
              f"violations={bad} of {len(sand)}, max gamma_x={gx:.8f}", sp)


def run_pk(run: Run) -> None:
    cfg = run.cfg
    base, b, kappa, env = _perturbation(cfg)
    p = cfg.section("pk")
    if p["energy_source"] == "bands" and cfg["operator.potential"] == "almost_mathieu":
        xs = approximant_band_energies(cfg["operator.lambda"], cfg["operator.alpha"],
                                       cfg["operator.theta"], p["energies"], q_max=p["q_max"])
        src = f"bands(q_max={p['q_max']})"
    else:
        lo, hi = p["e_min"], p["e_max"]
        if p["energy_source"] == "bands":
            lo, hi = max(lo, -1.99), min(hi, 1.99)
        xs = np.linspace(lo, hi, p["energies"])
        src = f"uniform[{lo:g},{hi:g}]"
    k_max = p["k_max"]
    params = f"{_op_params(cfg)}, energies={p['energies']} {src}, k_max={k_max}"
    if b is not None:
        nr, dr = pk_comparison_grid(xs, base, b, kappa, env, k_max, run.threads)
        rows = []
        for i, x in enumerate(xs):
            for k in range(k_max):
                rows.append([float(x), k + 1, nr[i, k], dr[i, k]])
        run.csv("pk", ["energy", "k", "norm_ratio", "det_ratio"], rows)
        lo, hi = p["bracket_lo"], p["bracket_hi"]
        for name, arr in (("norm", nr), ("det", dr)):
            run.check(f"{name} ratio in bracket", bool(np.all((arr >= lo) & (arr <= hi))),
                      f"range=[{arr.min():.6g}, {arr.max():.6g}] (bracket [{lo:g}, {hi:g}])", params)
            spread = max(cauchy_spread(r[p["cauchy_from"] - 1:]) for r in arr)
            run.check(f"{name} ratio Cauchy", spread <= p["cauchy_tol"],
                      f"max spread={spread:.3e} over k={p['cauchy_from']}..{k_max} "
                      f"(tol {p['cauchy_tol']:g})", params)
    if p["jl"]:
        spec = _operator_spec(cfg)
        kj = p["jl_k_max"]

        def one(chunk):
            out = []
            for x in chunk:
                fam = pk_family(float(x), spec, kj)
                for k in range(1, kj + 1):
                    out.append(jl_bracket(float(x), spec, k, fam))
            return out

        try:
            vals = map_chunks(one, list(xs), run.threads, chunk=4)
        except UnsupportedSpec as exc:
            raise ConfigError(str(exc), field="pk.jl") from None
        rows = [[v.energy, v.k, v.eps, v.norm, v.m.real, v.m.imag, v.psi, v.ratio] for v in vals]
        run.csv("jl", ["energy", "k", "eps", "norm", "m_re", "m_im", "psi", "ratio"], rows)
        ratios = np.array([v.ratio for v in vals])
        jp = f"{_op_params(cfg)}, energies={p['energies']} {src}, k<={kj}"
        run.check("JL ratio in bracket", bool(np.all((ratios >= p["jl_lo"]) & (ratios <= p["jl_hi"]))),
                  f"range=[{ratios.min():.6g}, {ratios.max():.6g}] "
                  f"(bracket [{p['jl_lo']:g}, {p['jl_hi']:g}])", jp)
        viol = sum(1 for v in vals if not (1.0 / v.psi <= v.m.imag <= abs(v.m) <= v.psi * (1 + 1e-12)))
        run.check("psi sandwich", viol == 0, f"violations={viol} of {len(vals)}", jp)
        pi = psi_sup(1j)
        run.check("psi(i) = 1", abs(pi - 1.0) <= 1e-6, f"psi(i)={pi!r}", "grid=1024, refine=40")


def run_diophantine(run: Run) -> None:
    cfg = run.cfg
    d = cfg.section("diophantine")
    params = DiophantineParams(d["eta"], d["tau_dc"], d["alpha"])
    rep = diophantine_check(params, d["n_max"])
    n = np.arange(1, d["n_max"] + 1)
    na = n * d["alpha"]
    gap = np.abs(na - np.rint(na))
    scaled = gap * n.astype(float) ** d["tau_dc"]
    rows, best = [], math.inf
    for i in range(n.size):
        if scaled[i] < best:
            best = scaled[i]
            rows.append([int(n[i]), int(np.rint(na[i])), float(gap[i]), float(scaled[i])])
    run.csv("diophantine", ["n", "j", "gap", "gap_times_n_tau"], rows)
    run.check("Diophantine condition", rep.holds,
              f"worst n={rep.worst[0]}, j={rep.worst[1]}, gap={rep.worst[2]:.6g}, "
              f"gap*n^tau={rep.margin:.6g} vs eta={d['eta']:g} (checked n<={d['n_max']})",
              f"alpha={d['alpha']!r}, eta={d['eta']:g}, tau_dc={d['tau_dc']:g}")


RUNNERS = {
    "density": run_density,
    "holder": run_holder,
    "dynamics": run_dynamics,
    "asymptotics": run_asymptotics,
    "pk": run_pk,
    "diophantine": run_diophantine,
}


def _write(prefix: str, run: Run) -> None:
    d = os.path.dirname(prefix)
    if d:
        os.makedirs(d, exist_ok=True)
    with open(f"{prefix}.manifest.txt", "w", newline="\n") as fh:
        fh.write(run.manifest)
        fh.write(f"digest = {run.digest}\n")
    for name in sorted(run.files):
        with open(f"{prefix}.{name}", "w", newline="\n") as fh:
            fh.write(run.files[name])
    with open(f"{prefix}.verdict.txt", "w", newline="\n") as fh:
        fh.write(f"# manifest_digest: {run.digest}\n")
        fh.write(f"# experiment: {run.cfg.experiment}\n")
        for line in run.verdicts:
            fh.write(line + "\n")


def run_experiment(experiment: str, config_text: str, prefix: str, threads: int = 1) -> Run:
    """Parse, run and write one experiment; raises ConfigError or NumericFailure."""
    cfg = parse_config(config_text, experiment)
    run = Run(cfg, threads)
    try:
        RUNNERS[experiment](run)
    except (ValueError, UnsupportedSpec) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    except (OverflowError, FloatingPointError) as exc:
        raise NumericFailure(experiment, str(exc)) from None
    _write(prefix, run)
    return run


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spectral-lab", description=__doc__.split("\n")[0])
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", required=True, help="path to the key = value config file")
    ap.add_argument("--out", required=True, help="output path prefix")
    ap.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("config error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"config error: cannot read {args.config}: {exc.strerror}", file=sys.stderr)
        return 2
    try:
        run = run_experiment(args.experiment, text, args.out, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericFailure as exc:
        print(f"numeric failure in {exc.operation}: {exc.reason}", file=sys.stderr)
        return 1
    n_fail = sum(1 for v in run.verdicts if ": FAIL (" in v)
    print(f"{args.experiment}: {len(run.verdicts) - n_fail} PASS, {n_fail} FAIL "
          f"-> {args.out}.verdict.txt")
    return 0


if __name__ == "__main__":
    sys.exit(main())
