"""Command-line front end.

Usage::

    python -m mie_dispersion <subcommand> [--config FILE] [--key value ...]

Every table is written as CSV with ``#`` comment lines carrying the resolved
configuration.  Exit codes: 0 pass, 1 check failure, 2 usage or hypothesis
error, 3 numerical-budget error.  ``MIE_DISPERSION_THREADS`` caps the BLAS
and OpenMP thread pools.
"""

import argparse
import csv
import math
import os
import sys
from dataclasses import dataclass, field as dc_field, replace

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from . import field as fl
from . import kernel as kn
from . import mie, specfun as sf, vsh

__all__ = ["RunConfig", "UsageError", "parse_config", "emit_csv", "run_verify", "main"]

THREADS_ENV = "MIE_DISPERSION_THREADS"
EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Parameters
# ---------------------------------------------------------------------------

def _lmax_value(s):
    s = str(s).strip()
    if s.lower() == "auto":
        return "auto"
    v = int(s)
    if v < 0:
        raise ValueError("lmax must be >= 0 or 'auto'")
    return v


def _bool_value(s):
    if isinstance(s, bool):
        return s
    s = str(s).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _float_list(s):
    s = str(s).strip()
    if s.lower() == "default":
        return "default"
    out = []
    for tok in s.split(","):
        tok = tok.strip()
        out.append(float(tok) if "/" not in tok else float(tok.split("/")[0]) / float(tok.split("/")[1]))
    return tuple(out)


# name -> (parser, default, help)
COMMON = {
    "rho": (float, 1.0, "obstacle radius"),
    "a": (float, 4.0, "cutoff centre"),
    "h": (float, 0.125, "semiclassical parameter"),
    "R": (float, 2.0, "spatial radius of the decay estimate"),
    "lmax": (_lmax_value, "auto", "maximal degree, or 'auto'"),
    "seed": (int, 0, "seed for random and quasi-random sampling"),
    "out": (str, "-", "output path ('-' for stdout)"),
}

COMMANDS = {
    "specfun": {
        "z_min": (float, 0.5, "smallest argument"),
        "z_max": (float, 20.0, "largest argument"),
        "n_z": (int, 40, "number of arguments"),
    },
    "vsh-gram": {},
    "mie": {
        "x_min": (float, 0.5, "smallest size parameter"),
        "x_max": (float, 20.0, "largest size parameter"),
        "n_x": (int, 40, "number of size parameters"),
    },
    "field": {
        "lam": (float, 4.0, "frequency"),
        "r_min": (float, None, "smallest radius (default rho)"),
        "r_max": (float, 3.0, "largest radius"),
        "n_r": (int, 3, "radial grid size"),
        "n_theta": (int, 4, "polar grid size"),
        "n_phi": (int, 4, "azimuthal grid size"),
        "zero_scattering": (_bool_value, False, "debug: drop the scattered part"),
    },
    "kernel": {
        "t": (_float_list, (0.0, 1.0, 2.0, 4.0), "comma-separated times"),
        "n_pairs": (int, 4, "number of point pairs"),
        "n_diagonal": (int, 1, "coincident pairs among them"),
        "max_panels": (int, 200_000, "fine-panel budget per evaluation"),
    },
    "sweep": {
        "h_values": (_float_list, "default", "comma-separated h values (default: h)"),
        "t_grid": (_float_list, "default", "comma-separated times (default grid on [0, 40R])"),
        "n_pairs": (int, 256, "number of point pairs"),
        "n_diagonal": (int, 16, "coincident pairs among them"),
        "abort_rel": (float, 0.01, "abort when quad_est exceeds this fraction of |K|"),
        "max_panels": (int, 200_000, "fine-panel budget per evaluation"),
        "summary": (str, "", "summary CSV path (default: next to --out)"),
    },
    "verify": {
        "zero_scattering": (_bool_value, False, "debug: force A = 0 (boundary check fails)"),
    },
}

DEFAULT_LMAX = {"specfun": 10, "vsh-gram": 4, "mie": 10, "field": 4}


@dataclass
class RunConfig:
    subcommand: str
    params: dict
    unsafe: bool = False
    config_path: str = None
    violations: list = dc_field(default_factory=list)

    def __getitem__(self, key):
        return self.params[key]

    @property
    def lmax(self):
        L = self.params["lmax"]
        if L == "auto":
            return DEFAULT_LMAX.get(self.subcommand)
        return L

    def kernel_config(self, h=None):
        cut = kn.CutoffSpec(self["a"])
        quad = kn.QuadSpec(max_panels=self.params.get("max_panels", kn.QuadSpec.max_panels))
        L = None if self.params["lmax"] == "auto" else self.params["lmax"]
        return kn.KernelConfig(rho=self["rho"], h=self["h"] if h is None else h, cutoff=cut,
                               lmax=L, quad=quad, R=self["R"], unsafe=self.unsafe)

    def header(self):
        lines = [f"mie_dispersion {__version__}", f"subcommand = {self.subcommand}"]
        for key, val in self.params.items():
            val = ",".join(_fmt(v) for v in val) if isinstance(val, tuple) else _fmt(val)
            lines.append(f"{key} = {val}")
        if self.unsafe:
            lines.append("UNSAFE-PARAMS: hypothesis checks bypassed; violations: "
                         + ("; ".join(self.violations) or "none"))
        return lines


def _keys(sub):
    return {**COMMON, **COMMANDS[sub]}


def _build_parser():
    p = argparse.ArgumentParser(prog="mie_dispersion", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    subs = p.add_subparsers(dest="subcommand", required=True)
    for name in COMMANDS:
        sp = subs.add_parser(name)
        sp.add_argument("--config", help="flat key = value file; flags override it")
        sp.add_argument("--unsafe-params", action="store_true",
                        help="run even when hypotheses fail (output is watermarked)")
        for key, (conv, default, hlp) in _keys(name).items():
            flag = "--" + key.replace("_", "-")
            sp.add_argument(flag, dest=key, type=str, default=None,
                            help=f"{hlp} (default {default})")
    return p


def _read_config_file(path, allowed):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc.strerror}") from None
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{n}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in allowed:
            raise UsageError(f"{path}:{n}: unknown config key {key!r}")
        out[key] = val
    return out


def parse_config(argv, config_text_path=None):
    """Resolve defaults, then the config file, then flags into a :class:`RunConfig`.

    Raises :class:`UsageError` on unknown keys, bad values or hypothesis
    violations (unless ``--unsafe-params``).
    """
    args = _build_parser().parse_args(argv)
    sub = args.subcommand
    keys = _keys(sub)
    raw = {}
    path = args.config or config_text_path
    if path:
        raw.update(_read_config_file(path, keys))
    raw.update({k: getattr(args, k) for k in keys if getattr(args, k) is not None})
    params = {}
    for key, (conv, default, _) in keys.items():
        if key in raw:
            try:
                params[key] = conv(raw[key])
            except (TypeError, ValueError) as exc:
                raise UsageError(f"bad value for {key}: {raw[key]!r} ({exc})") from None
        else:
            params[key] = default
    if sub == "field" and params["r_min"] is None:
        params["r_min"] = params["rho"]
    if sub == "sweep" and params["h_values"] == "default":
        params["h_values"] = (params["h"],)
    cfg = RunConfig(sub, params, bool(args.unsafe_params), path)
    hs = params["h_values"] if sub == "sweep" else (params["h"],)
    viol = []
    for h in hs:
        for msg in kn.hypothesis_violations(params["rho"], params["a"], h, params["R"]):
            if msg not in viol:
                viol.append(msg)
    cfg.violations = viol
    if viol and not cfg.unsafe:
        raise UsageError("hypothesis violated: " + "; ".join(viol))
    return cfg


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % float(v)
    return str(v)


def emit_csv(table, path, header=()):
    """Write ``(columns, rows)`` as CSV with ``#`` header lines and LF endings."""
    columns, rows = table

    def write(fh):
        for line in header:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(v) for v in row])

    if path in (None, "-"):
        write(sys.stdout)
        sys.stdout.flush()
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            write(fh)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc.strerror}") from None


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _grid(lo, hi, n):
    if n < 1 or not (0 < lo <= hi):
        raise UsageError("grid needs n >= 1 and 0 < min <= max")
    return np.linspace(lo, hi, n)


def run_specfun(cfg):
    z = _grid(cfg["z_min"], cfg["z_max"], cfg["n_z"])
    L = cfg.lmax
    j, y = sf.spherical_jn_all(L, z), sf.spherical_yn_all(L, z)
    rows = []
    for ell in range(L + 1):
        if ell == 0:
            dj, dy = np.cos(z), np.sin(z)
        else:
            dj = z * j[ell - 1] - ell * j[ell]
            with np.errstate(invalid="ignore"):
                dy = z * y[ell - 1] - ell * y[ell]
        rows += [(ell, z[i], j[ell, i], y[ell, i], dj[i], dy[i]) for i in range(z.size)]
    return ("ell", "z", "j", "y", "zj_prime", "zy_prime"), rows


def run_vsh_gram(cfg):
    L = cfg.lmax
    g = vsh.SphereGrid.for_degree(L)
    modes, psi = vsh.vsh_all(L, *g.mesh)
    G = vsh.gram_matrix(psi, g)
    rows = [(a.j, a.ell, a.m, b.j, b.ell, b.m, float(np.real(G[i, k])), float(np.imag(G[i, k])))
            for i, a in enumerate(modes) for k, b in enumerate(modes)]
    return ("j", "ell", "m", "j2", "ell2", "m2", "re", "im"), rows


def run_mie(cfg):
    x = _grid(cfg["x_min"], cfg["x_max"], cfg["n_x"])
    L = cfg.lmax
    te, tm = mie.mie_all(L, x)
    rows = []
    for ell in range(1, L + 1):
        for pol, a in (("TE", te), ("TM", tm)):
            for i in range(x.size):
                v = complex(a[ell, i])
                rows.append((ell, pol, x[i], v.real, v.imag, abs(1 + v) - 1))
    return ("ell", "pol", "x", "re_a", "im_a", "abs_s_minus_1"), rows


def run_field(cfg):
    rng = np.random.default_rng(cfg["seed"])
    coeffs = fl.ModalCoefficients.random(cfg.lmax, rng)
    spec = fl.EigenfunctionSpec(cfg["lam"], cfg["rho"], coeffs, zero_scattering=cfg["zero_scattering"])
    if cfg["r_min"] < cfg["rho"]:
        raise UsageError("r_min must be >= rho")
    r = _grid(cfg["r_min"], cfg["r_max"], cfg["n_r"])
    g = vsh.SphereGrid(cfg["n_theta"], cfg["n_phi"])
    rr, th, ph = np.meshgrid(r, g.theta, g.phi, indexing="ij")
    sp = np.stack([rr.ravel(), th.ravel(), ph.ravel()], axis=1)
    pts = np.stack([sp[:, 0] * np.sin(sp[:, 1]) * np.cos(sp[:, 2]),
                    sp[:, 0] * np.sin(sp[:, 1]) * np.sin(sp[:, 2]),
                    sp[:, 0] * np.cos(sp[:, 1])], axis=1)
    E, H = fl.eigenfunction_E(spec, pts), fl.magnetic_H(spec, pts)
    cols = ["r", "theta", "phi"]
    for name in ("E", "H"):
        for c in "xyz":
            cols += [f"re_{name}{c}", f"im_{name}{c}"]
    rows = []
    for k in range(len(pts)):
        vals = []
        for F in (E, H):
            for c in range(3):
                vals += [F[k, c].real, F[k, c].imag]
        rows.append(tuple(sp[k]) + tuple(vals))
    return tuple(cols), rows


KERNEL_COLUMNS = ("t", "h", "r", "theta", "phi", "r2", "theta2", "phi2", "norm", "trunc_err", "quad_est")
SUMMARY_COLUMNS = ("h", "t", "sup_norm", "fitted_slope", "envelope_C")


def _plan(cfg):
    if not 0 <= cfg["n_diagonal"] <= cfg["n_pairs"]:
        raise UsageError("need 0 <= n_diagonal <= n_pairs")
    return kn.PointPlan(cfg["n_pairs"], cfg["n_diagonal"], cfg["seed"])


def run_kernel(cfg):
    kc = cfg.kernel_config()
    t = np.asarray(cfg["t"], float)
    if np.any(np.abs(t) > 40 * kc.R):
        raise UsageError("times must satisfy |t| <= 40 R")
    y1, y2 = _plan(cfg).pairs(kc.rho, 3 * kc.R)
    rows = []
    for a, b in zip(y1, y2):
        sa, sb = kn._sph(a), kn._sph(b)
        for tt in t:
            res = kn.kernel_K(a, b, tt, kc)
            rows.append((float(tt), kc.h) + sa + sb + (res.norm, res.trunc_err, res.quad_est))
    return KERNEL_COLUMNS, rows


def run_sweep(cfg):
    kc = cfg.kernel_config()
    t = None if cfg["t_grid"] == "default" else np.asarray(cfg["t_grid"], float)
    try:
        res = kn.decay_sweep(kc, t, _plan(cfg), h_values=cfg["h_values"], abort_rel=cfg["abort_rel"])
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    summary = (SUMMARY_COLUMNS, res.summary_rows())
    return (KERNEL_COLUMNS, res.rows), summary, res


# ---------------------------------------------------------------------------
# Verification suite
# ---------------------------------------------------------------------------

@dataclass
class Check:
    name: str
    measured: float
    tol: float
    kind: str = "max"         # max: measured <= tol; min: measured >= tol; range: tol = (lo, hi)

    @property
    def passed(self):
        m = self.measured
        if not np.isfinite(m):
            return False
        if self.kind == "max":
            return m <= self.tol
        if self.kind == "min":
            return m >= self.tol
        return self.tol[0] <= m <= self.tol[1]

    def row(self):
        tol = self.tol if self.kind != "range" else f"[{_fmt(self.tol[0])}, {_fmt(self.tol[1])}]"
        op = {"max": "<=", "min": ">=", "range": "in"}[self.kind]
        return (self.name, op, tol, self.measured, "pass" if self.passed else "FAIL")


def _rel_max(a, b, floor=0.0):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), floor)))


def _checks_specfun():
    out = []
    z = np.geomspace(0.5, 200, 200)
    L = 60
    j, y = sf.spherical_jn_all(L, z), sf.spherical_yn_all(L, z)
    ell = np.arange(1, L + 1)[:, None]
    dj = j[:-1] - (ell + 1) / z * j[1:]
    dy = y[:-1] - (ell + 1) / z * y[1:]
    w = (j[1:] * dy - dj * y[1:]) * z**2
    out.append(Check("specfun.wronskian", float(np.max(np.abs(w - 1))), 1e-10))
    errs = [abs(abs(sf.spherical_hankel1(l, zz)) ** 2 / sf.hankel_abs_sq_oracle(l, zz) - 1)
            for l in range(0, 61, 6) for zz in (0.5, 1.3, 7.0, 40.0, 200.0)]
    out.append(Check("specfun.magnitude_identity", max(errs), 1e-10))
    errs = [abs(sf.spherical_hankel1(l, zz) / sf.explicit_hankel1(l, zz) - 1)
            for l in range(0, 41, 5) for zz in (0.5, 2.0, 11.0, 100.0)]
    out.append(Check("specfun.explicit_hankel", max(errs), 1e-12))
    out.append(Check("specfun.j0_closed_form", _rel_max(j[0], np.sin(z) / z, 1e-3), 1e-14))
    out.append(Check("specfun.y0_closed_form", _rel_max(y[0], -np.cos(z) / z, 1e-3), 1e-14))
    mid = np.arange(1, L)[:, None]
    lhs = j[:-2] + j[2:]
    rhs = (2 * mid + 1) / z * j[1:-1]
    scale = np.abs(j[:-2]) + np.abs(j[2:]) + np.abs(rhs)
    out.append(Check("specfun.recurrence_residual", float(np.max(np.abs(lhs - rhs) / scale)), 1e-13))
    nu = np.arange(0, L + 1)[:, None] + 0.5
    J = np.sqrt(2 * z / np.pi) * np.abs(j)
    K = np.array([[sf.kapteyn_bound(n, zz) for zz in z] for n in nu[:, 0]])
    out.append(Check("specfun.kapteyn_bound_ratio", float(np.max(J / K)), 1 + 1e-12))
    return out


def _checks_vsh(rng):
    out = []
    L = 10
    g = vsh.SphereGrid.for_degree(L)
    modes, psi = vsh.vsh_all(L, *g.mesh)
    G = vsh.gram_matrix(psi, g)
    out.append(Check("vsh.gram_identity", float(np.max(np.abs(G - np.eye(len(modes))))), 1e-10))
    x = g.points()
    tang = [k for k, m in enumerate(modes) if m.j in (1, 2)]
    rad = [k for k, m in enumerate(modes) if m.j == 3]
    out.append(Check("vsh.tangency", float(np.max(np.abs(np.einsum("ktpc,tpc->ktp", psi[tang], x)))), 1e-13))
    out.append(Check("vsh.psi3_radial", float(np.max(np.linalg.norm(np.cross(psi[rad], x), axis=-1))), 1e-13))
    sign = np.array([(-1) ** m.ell if m.j == 1 else (-1) ** (m.ell + 1) for m in modes])
    anti = max(float(np.max(np.abs(vsh.antipodal_pullback(v, g) - s * v))) for v, s in zip(psi, sign))
    out.append(Check("vsh.antipodal_parity", anti, 1e-12))
    tmodes = [modes[k] for k in tang]
    c = rng.standard_normal(len(tmodes)) + 1j * rng.standard_normal(len(tmodes))
    f = vsh.synthesize(tmodes, c, g)
    m2, c2 = vsh.expand_tangential(f, g, L)
    back = dict(zip(m2, c2))
    out.append(Check("vsh.expand_round_trip",
                     float(max(abs(back[m] - v) for m, v in zip(tmodes, c))), 1e-12))
    return out


def _checks_mie():
    out = []
    x = np.linspace(0.5, 100, 250)
    te, tm = mie.mie_all(40, x)
    out.append(Check("mie.unitarity_te", float(np.max(np.abs(np.abs(1 + te[1:]) - 1))), 1e-12))
    out.append(Check("mie.unitarity_tm", float(np.max(np.abs(np.abs(1 + tm[1:]) - 1))), 1e-12))
    xs = np.array([0.7, 2.0, 9.0])
    j1 = np.sin(xs) / xs**2 - np.cos(xs) / xs
    y1 = -np.cos(xs) / xs**2 - np.sin(xs) / xs
    out.append(Check("mie.te_closed_form", _rel_max(mie.mie_all(1, xs)[0][1], -2 * j1 / (j1 + 1j * y1)), 1e-13))
    rep = mie.verify_bound_lemma(mie.SamplePlan(n_points=32))
    out.append(Check("mie.b1_violations", rep.b1_violations, 0))
    out.append(Check("mie.db1_violations", rep.db1_violations, 0))
    out.append(Check("mie.max_abs_b1", rep.max_abs_b1, 1 + 1e-12))
    out.append(Check("mie.b_derivative_fd_vs_analytic", rep.fd_vs_analytic_max_rel, 1e-6))
    for name in ("B2", "B3"):
        out.append(Check(f"mie.{name}_lemma_constant_stability", rep.stability(name), 2.0))
    return out


def _checks_field(rng, zero_scattering):
    out = []
    g = vsh.SphereGrid.for_degree(20)
    x = g.points(1.0)
    worst, control = 0.0, np.inf
    for _ in range(4):
        spec = fl.EigenfunctionSpec(rng.uniform(1, 8), 1.0, fl.ModalCoefficients.random(20, rng))
        free = replace(spec, zero_scattering=True)
        E = fl.eigenfunction_E(free if zero_scattering else spec, x)
        worst = max(worst, float(np.max(np.linalg.norm(np.cross(x, E), axis=-1))
                                 / np.max(np.linalg.norm(E, axis=-1))))
        E0 = fl.eigenfunction_E(free, x)
        control = min(control, float(np.max(np.linalg.norm(np.cross(x, E0), axis=-1))
                                     / np.max(np.linalg.norm(E0, axis=-1))))
    out.append(Check("field.boundary_residual", worst, 1e-9))
    out.append(Check("field.boundary_negative_control", control, 1e-2, "min"))

    def point():
        d = rng.standard_normal(3)
        return d / np.linalg.norm(d) * rng.uniform(1.3, 3.0)

    div_orders, helm_orders = [], []
    for _ in range(3):
        spec = fl.EigenfunctionSpec(rng.uniform(1, 8), 1.0, fl.ModalCoefficients.random(int(rng.integers(1, 8)), rng))
        p = point()
        s = 0.04 / spec.lam
        a, b = (fl.divergence_residual(spec, p, s / k) for k in (1, 2))
        div_orders.append(math.log2(a / b))
        a, b = (fl.helmholtz_residual(spec, p, s / k) for k in (1, 2))
        helm_orders.append(math.log2(a / b))
    out.append(Check("field.divergence_order_min", min(div_orders), (1.8, 2.2), "range"))
    out.append(Check("field.divergence_order_max", max(div_orders), (1.8, 2.2), "range"))
    out.append(Check("field.helmholtz_order_min", min(helm_orders), (1.8, 2.2), "range"))
    out.append(Check("field.helmholtz_order_max", max(helm_orders), (1.8, 2.2), "range"))

    spec = fl.EigenfunctionSpec(2.5, 1.0, fl.ModalCoefficients.random(4, rng))
    p = point()
    H = fl.magnetic_H(spec, p)
    curl = fl.fd_curl(lambda q: fl.eigenfunction_E(spec, q), p, 1e-4)
    out.append(Check("field.curl_E_equals_i_lam_H", float(np.max(np.abs(curl - 1j * spec.lam * H))
                                                         / np.max(np.abs(spec.lam * H))), 1e-6))
    curlH = fl.fd_curl(lambda q: fl.magnetic_H(spec, q), p, 1e-4)
    E = fl.eigenfunction_E(spec, p)
    out.append(Check("field.curl_H_plus_i_lam_E", float(np.max(np.abs(curlH + 1j * spec.lam * E))
                                                       / np.max(np.abs(spec.lam * E))), 1e-6))
    a, b = fl.ModalCoefficients.random(5, rng), fl.ModalCoefficients.random(5, rng)
    pts = np.array([point() for _ in range(4)])
    s = 0.7 - 1.1j
    Ef = lambda c: fl.eigenfunction_E(fl.EigenfunctionSpec(2.3, 1.0, c), pts)
    lhs, rhs = Ef(a + b.scale(s)), Ef(a) + s * Ef(b)
    out.append(Check("field.linearity", float(np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs))), 1e-13))
    c = fl.ModalCoefficients.random(6, rng)
    d = fl.tilde_series("H1", c, 3.1, pts) - fl.tilde_series("H2", c, 3.1, pts)
    y = 2j * fl.tilde_series("Y", c, 3.1, pts)
    out.append(Check("field.h1_minus_h2_is_2iY", float(np.max(np.abs(d - y)) / np.max(np.abs(y))), 1e-13))
    spec = fl.EigenfunctionSpec(1.0, 1.0, fl.ModalCoefficients.from_dict(
        {(1, 2, 1): 1.0, (2, 3, -2): 0.5 - 0.2j, (2, 1, 0): 0.3}))
    g6 = vsh.SphereGrid.for_degree(6)
    pred = fl.far_field_prediction(spec, g6)
    errs = [float(np.max(np.abs(fl.far_field_extract(spec, r, g6).outgoing - pred.outgoing)))
            for r in (200.0, 400.0)]
    out.append(Check("field.far_field_error_r400", errs[1], 1e-2))
    out.append(Check("field.far_field_halving_ratio", errs[0] / errs[1], (1.8, 2.2), "range"))
    return out


def _checks_kernel(rc, rng):
    out = []
    cfg = rc.kernel_config()
    hi = min(3 * cfg.R, 6.0)

    def point(lo=cfg.rho, top=hi):
        d = rng.standard_normal(3)
        return d / np.linalg.norm(d) * rng.uniform(lo, top)

    herm, dbl, shrink, trunc = 0.0, 0.0, np.inf, 0.0
    fine = replace(cfg, quad=replace(cfg.quad, panel_factor=2.0))
    for t in (1.5, 7.0):
        y1, y2 = point(), point()
        a = kn.kernel_K(y1, y2, t, cfg)
        b = kn.kernel_K(y2, y1, -t, cfg)
        herm = max(herm, float(np.max(np.abs(a.value.conj().T - b.value)))
                   / (10 * a.quad_est + 1e-15 * a.scale))
        f = kn.kernel_K(y1, y2, t, fine)
        dbl = max(dbl, float(np.max(np.abs(f.value - a.value))) / max(a.quad_est, 1e-300))
        if a.quad_est >= 1e-12 * a.scale:
            shrink = min(shrink, a.quad_est / max(f.quad_est, 1e-300))
        L = a.lmax
        added = kn.kernel_K(y1, y2, t, replace(cfg, lmax=L + 10), degrees=(L + 1, L + 10))
        base = kn.kernel_K(y1, y2, t, replace(cfg, lmax=L))
        trunc = max(trunc, added.norm / base.trunc_err)
    out.append(Check("kernel.hermitian_over_10_quad_est", herm, 1.0))
    out.append(Check("kernel.doubling_change_over_quad_est", dbl, 1.0))
    out.append(Check("kernel.quad_est_shrink_per_doubling", shrink if np.isfinite(shrink) else 3.0, 3.0, "min"))
    out.append(Check("kernel.truncation_change_over_trunc_err", trunc, 1.0))

    y = point(cfg.rho, min(hi, 2.0))
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    k0 = np.trace(kn.kernel_K(y, y, 0.3, cfg).value)
    k1 = np.trace(kn.kernel_K(q @ y, q @ y, 0.3, cfg).value)
    out.append(Check("kernel.rotation_invariance", float(abs(k1 - k0) / abs(k0)), 1e-10))

    lo, top = cfg.cutoff.support
    nodes, weights = np.polynomial.legendre.leggauss(400)
    lam = 0.5 * (top - lo) * nodes + 0.5 * (top + lo)
    moment = 0.5 * (top - lo) * float(np.sum(weights * kn.cutoff_eval(cfg.cutoff, lam) * lam**2))
    want = moment / (math.pi**2 * cfg.h**3)
    free = kn.kernel_free(y, y, 0.0, cfg)
    out.append(Check("kernel.free_trace_closed_form", abs(np.trace(free.value).real / want - 1), 1e-8))

    norm = kn.kernel_K(np.array([0.0, 0.0, cfg.rho]), np.array([0.0, 0.0, cfg.rho]), 0.0, cfg)
    tr = np.trace(norm.value)
    out.append(Check("kernel.normalization_positive", float(tr.real), 0.0, "min"))
    out.append(Check("kernel.normalization_imag_over_real", float(abs(tr.imag) / abs(tr.real)), 1e-12))

    y1, y2 = point(), point()
    a, b = kn.kernel_free(y1, y2, 3.3, cfg), kn.kernel_free(y1, y2, -3.3, cfg)
    out.append(Check("kernel.free_time_reversal", float(np.max(np.abs(b.value - a.value.conj())) / a.scale), 1e-14))

    half = cfg.with_h(cfg.h / 2)
    yc = np.array([0.0, 1.1 * cfg.rho, 0.0])
    ratio = (np.trace(kn.kernel_K(yc, yc, 0.0, half).value).real
             / np.trace(kn.kernel_K(yc, yc, 0.0, cfg).value).real)
    out.append(Check("kernel.h_halving_growth", float(ratio), 2.0**5 * 1.1))
    return out


def run_verify(cfg):
    """Run the cross-module check suite; returns ``(checks, table)``."""
    rng = np.random.default_rng(cfg["seed"])
    checks = (_checks_specfun() + _checks_vsh(rng) + _checks_mie()
              + _checks_field(rng, cfg["zero_scattering"]) + _checks_kernel(cfg, rng))
    table = (("check", "op", "tolerance", "measured", "status"), [c.row() for c in checks])
    return checks, table


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _thread_cap():
    raw = os.environ.get(THREADS_ENV)
    if raw in (None, ""):
        return None
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def _summary_path(cfg):
    if cfg["summary"]:
        return cfg["summary"]
    out = cfg["out"]
    if out in ("", "-"):
        return None
    stem, ext = os.path.splitext(out)
    return stem + ".summary" + (ext or ".csv")


def _dispatch(cfg):
    header = cfg.header()
    sub = cfg.subcommand
    if sub == "verify":
        checks, table = run_verify(cfg)
        emit_csv(table, cfg["out"], header)
        failed = [c for c in checks if not c.passed]
        print(f"{len(checks) - len(failed)}/{len(checks)} checks passed", file=sys.stderr)
        if failed:
            c = failed[0]
            print(f"first failure: {c.name} measured {_fmt(c.measured)} vs tolerance {c.row()[2]}",
                  file=sys.stderr)
            return EXIT_FAIL
        return EXIT_OK
    if sub == "sweep":
        table, summary, res = run_sweep(cfg)
        emit_csv(table, cfg["out"], header)
        path = _summary_path(cfg)
        if path:
            emit_csv(summary, path, header)
        for h in res.h_values:
            print(f"h={_fmt(h)} slope={res.slope[h]:.4f} plateau={res.plateau_ratio(h):.4f} "
                  f"envelope_C={res.envelope_C[h]:.6g}", file=sys.stderr)
        if len(res.h_values) > 1:
            print(f"h exponent={res.h_exponent():.4f}", file=sys.stderr)
        return EXIT_OK
    runner = {"specfun": run_specfun, "vsh-gram": run_vsh_gram, "mie": run_mie,
              "field": run_field, "kernel": run_kernel}[sub]
    emit_csv(runner(cfg), cfg["out"], header)
    return EXIT_OK


def main(argv=None):
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
        cap = _thread_cap()
        with threadpool_limits(cap) if cap else _nullcontext():
            return _dispatch(cfg)
    except SystemExit as exc:  # argparse usage errors
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except (UsageError, kn.HypothesisError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (kn.BudgetError, kn.SweepAborted, FloatingPointError) as exc:
        print(f"numerical budget error: {exc}", file=sys.stderr)
        return EXIT_BUDGET


class _nullcontext:
    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False
