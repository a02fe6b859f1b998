"""Batch command-line front end.

Commands
--------
kernel    build the kernel coefficients, dump them as CSV, report the
          truncation residuals (optionally cross-checked against the
          formal-powers route with --oracle mapping)
solve     evaluate initial-value solutions for a list of spectral
          parameters, one CSV per lambda
spectrum  scan a real window for eigenvalues, write index/lambda CSV
validate  run the built-in consistency suite, nonzero exit on failure

Problems are described by a flat key=value config file (plus --set
overrides).  Recognized keys:

    b, M, N, tol, p_expr, q_expr, nu_expr, potential_file, gauge_phi,
    bc_left, bc_right, lambda_min, lambda_max, scan_step, out

Exactly one potential source must be present: p_expr+q_expr (expressions
in x), potential_file (CSV, either x,p_re,p_im,q_re,q_im or x,nu_re,nu_im
with nodes matching the active grid), or nu_expr (a ZS potential routed
through the canonical form).  With gauge_phi set, p_expr and q_expr are
reinterpreted as the diagonal entries m1, m2 of a system B Z' +
diag(m1, m2) Z = lambda Z, which is rotated to canonical form by the
angle expression gauge_phi; boundary blocks are rotated along.  N is an
integer or "auto" (tol-driven).  All CSV output uses 17-significant-digit
values, comma delimiters and LF line endings, so identical configs yield
byte-identical files.
"""

import argparse
import hashlib
import os
import sys
import time

import numpy as np

from .dirac import HomogeneousSolution, Potential, fundamental_solution_zero
from .exprparse import ParseError, evaluate, evaluate_on_grid, parse
from .gauge import diagonal_to_canonical, rotate_boundary_blocks
from .grid import Grid, indefinite_integral
from .kernel import (
    DEFAULT_TRUNCATION,
    KernelCoefficients,
    auto_truncation,
    build_coefficients,
    goursat_residuals,
)
from .solution import build_evaluator, evaluate_dU_dlambda, evaluate_U, solve_ivp
from .spectral import BoundaryCondition, ScanOptions, scan_eigenvalues
from .zs import ZsPotential, zs_to_dirac

_KEYS = {
    "b",
    "M",
    "N",
    "tol",
    "p_expr",
    "q_expr",
    "nu_expr",
    "potential_file",
    "gauge_phi",
    "bc_left",
    "bc_right",
    "lambda_min",
    "lambda_max",
    "scan_step",
    "out",
}


class ConfigError(Exception):
    pass


def _fmt(v):
    return "%.17g" % v


def load_config(path):
    cfg = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(
                        "%s:%d: expected key=value, got %r" % (path, lineno, line)
                    )
                key, value = (s.strip() for s in line.split("=", 1))
                if key not in _KEYS:
                    raise ConfigError(
                        "%s:%d: unknown key %r (known: %s)"
                        % (path, lineno, key, ", ".join(sorted(_KEYS)))
                    )
                cfg[key] = value
    except OSError as exc:
        raise ConfigError("cannot read config: %s" % exc)
    return cfg


def apply_overrides(cfg, sets):
    for item in sets or []:
        if "=" not in item:
            raise ConfigError("--set needs key=value, got %r" % item)
        key, value = (s.strip() for s in item.split("=", 1))
        if key not in _KEYS:
            raise ConfigError("--set: unknown key %r" % key)
        cfg[key] = value
    return cfg


def _get_float(cfg, key, default=None):
    if key not in cfg:
        if default is None:
            raise ConfigError("missing required key %r" % key)
        return default
    try:
        return float(cfg[key])
    except ValueError:
        raise ConfigError("key %r must be a number, got %r" % (key, cfg[key]))


def _parse_constant(text, what):
    try:
        value = evaluate(parse(text))
    except (ParseError, ValueError) as exc:
        raise ConfigError("bad %s %r: %s" % (what, text, exc))
    return complex(value)


def _parse_block(text, name):
    entries = [t for t in text.replace(";", ",").split(",") if t.strip()]
    if len(entries) != 4:
        raise ConfigError(
            "%s must hold 4 entries (row-major 2x2), got %d" % (name, len(entries))
        )
    vals = [_parse_constant(t, name + " entry") for t in entries]
    return np.array(vals, dtype=complex).reshape(2, 2)


def _read_potential_file(path, grid):
    try:
        with open(path) as fh:
            header = fh.readline().strip().lower().split(",")
            rows = np.loadtxt(fh, delimiter=",", ndmin=2)
    except OSError as exc:
        raise ConfigError("cannot read potential file: %s" % exc)
    if rows.shape[0] != grid.size:
        raise ConfigError(
            "potential file has %d rows; the active grid needs %d"
            % (rows.shape[0], grid.size)
        )
    if np.max(np.abs(rows[:, 0] - grid.nodes)) > 1e-12 * max(1.0, grid.b):
        raise ConfigError("potential file nodes do not match the active grid")
    if header == ["x", "p_re", "p_im", "q_re", "q_im"]:
        p = rows[:, 1] + 1j * rows[:, 2]
        q = rows[:, 3] + 1j * rows[:, 4]
        return Potential(grid, p, q), None
    if header == ["x", "nu_re", "nu_im"]:
        zs = ZsPotential(grid, rows[:, 1] + 1j * rows[:, 2])
        return zs_to_dirac(zs), zs
    raise ConfigError(
        "unrecognized potential file header %r" % ",".join(header)
    )


class Problem:
    """Validated config plus lazily built solver objects."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.b = _get_float(cfg, "b", 1.0)
        m = int(_get_float(cfg, "M", 2000.0))
        try:
            self.grid = Grid(self.b, m)
        except ValueError as exc:
            raise ConfigError(str(exc))
        self.tol = _get_float(cfg, "tol", 1e-10)
        nspec = cfg.get("N", str(DEFAULT_TRUNCATION)).strip()
        if nspec == "auto":
            self.N = "auto"
        else:
            try:
                self.N = int(nspec)
            except ValueError:
                raise ConfigError("N must be an integer or 'auto', got %r" % nspec)
            if self.N < 0:
                raise ConfigError("N must be >= 0")
        self.out = cfg.get("out", "out")
        self.gauge_defect = None
        self.zs = None
        self._load_potential()
        self._load_boundary()

    def _load_potential(self):
        cfg = self.cfg
        sources = [
            "p_expr" in cfg or "q_expr" in cfg,
            "potential_file" in cfg,
            "nu_expr" in cfg,
        ]
        if sum(sources) != 1:
            raise ConfigError(
                "exactly one potential source required: p_expr+q_expr, "
                "potential_file, or nu_expr"
            )
        if "gauge_phi" in cfg and not sources[0]:
            raise ConfigError("gauge_phi needs p_expr/q_expr (the diagonal entries)")
        if sources[0]:
            if not ("p_expr" in cfg and "q_expr" in cfg):
                raise ConfigError("both p_expr and q_expr are required")
            try:
                p_tree = parse(cfg["p_expr"])
                q_tree = parse(cfg["q_expr"])
            except ParseError as exc:
                raise ConfigError("bad potential expression: %s" % exc)
            if "gauge_phi" in cfg:
                try:
                    phi_tree = parse(cfg["gauge_phi"])
                except ParseError as exc:
                    raise ConfigError("bad gauge_phi: %s" % exc)
                self.potential, self.gauge_defect = diagonal_to_canonical(
                    self.grid,
                    lambda x: evaluate(p_tree, x),
                    lambda x: evaluate(q_tree, x),
                    lambda x: np.real(evaluate(phi_tree, x)),
                )
                self._phi_tree = phi_tree
            else:
                evaluate_on_grid(p_tree, self.grid)  # surfaces bad nodes early
                evaluate_on_grid(q_tree, self.grid)
                self.potential = Potential.from_functions(
                    self.grid,
                    lambda x: evaluate(p_tree, x),
                    lambda x: evaluate(q_tree, x),
                )
        elif sources[1]:
            self.potential, self.zs = _read_potential_file(
                cfg["potential_file"], self.grid
            )
        else:
            try:
                nu_tree = parse(cfg["nu_expr"])
            except ParseError as exc:
                raise ConfigError("bad nu_expr: %s" % exc)
            self.zs = ZsPotential.from_function(
                self.grid, lambda x: evaluate(nu_tree, x)
            )
            self.potential = zs_to_dirac(self.zs)

    def _load_boundary(self):
        cfg = self.cfg
        self.bc = None
        if "bc_left" in cfg or "bc_right" in cfg:
            if not ("bc_left" in cfg and "bc_right" in cfg):
                raise ConfigError("both bc_left and bc_right are required")
            left = _parse_block(cfg["bc_left"], "bc_left")
            right = _parse_block(cfg["bc_right"], "bc_right")
            if not (np.any(left) or np.any(right)):
                raise ConfigError("boundary blocks are both zero")
            if self.gauge_defect is not None:
                phi0 = float(np.real(evaluate(self._phi_tree, 0.0)))
                phib = float(np.real(evaluate(self._phi_tree, self.b)))
                left, right = rotate_boundary_blocks(left, right, phi0, phib)
            self.bc = BoundaryCondition(left=left, right=right)

    # -- coefficient cache ------------------------------------------------

    def _cache_token(self):
        cfg = self.cfg
        parts = ["b=%r" % self.b, "M=%d" % self.grid.M, "N=%r" % self.N]
        if self.N == "auto":
            parts.append("tol=%r" % self.tol)
        for key in ("p_expr", "q_expr", "nu_expr", "gauge_phi"):
            if key in cfg:
                parts.append("%s=%s" % (key, cfg[key]))
        if "potential_file" in cfg:
            with open(cfg["potential_file"], "rb") as fh:
                parts.append("file_sha=%s" % hashlib.sha256(fh.read()).hexdigest())
        return hashlib.sha256("|".join(parts).encode()).hexdigest()[:24]

    def _cache_path(self):
        base = os.path.dirname(self.out) or "."
        return os.path.join(base, ".nsbf_cache", self._cache_token() + ".npz")

    def coefficients(self, report_sink=None):
        """Kernel coefficients, from the on-disk cache when unchanged."""
        t0 = time.perf_counter()
        path = self._cache_path()
        if os.path.exists(path):
            data = np.load(path)
            hom = HomogeneousSolution(grid=self.grid, U=data["U"], Uinv=data["Uinv"])
            coeffs = KernelCoefficients(
                grid=self.grid,
                potential=self.potential,
                hom=hom,
                N=int(data["N"]),
                theta=data["theta"],
                K=data["K"],
            )
            print("coefficients: cache hit (%.3fs)" % (time.perf_counter() - t0))
            return coeffs
        hom = fundamental_solution_zero(self.potential)
        if self.N == "auto":
            coeffs, report = auto_truncation(self.potential, hom, self.tol)
            if report_sink is not None:
                report_sink.append(report)
            if not report.converged:
                print(
                    "warning: auto truncation stopped at N=%d above tol=%g"
                    % (report.N, self.tol),
                    file=sys.stderr,
                )
        else:
            coeffs = build_coefficients(self.potential, hom, self.N)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        np.savez(
            path, N=coeffs.N, K=coeffs.K, theta=coeffs.theta, U=hom.U, Uinv=hom.Uinv
        )
        print("coefficients: built in %.3fs" % (time.perf_counter() - t0))
        return coeffs


def _write_csv(path, header, rows):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _write_coeff_csv(path, grid, matrices_by_order, orders):
    rows = []
    for n, mats in zip(orders, matrices_by_order):
        for i, x in enumerate(grid.nodes):
            m = mats[i]
            rows.append(
                ["%d" % n, _fmt(x)]
                + [
                    _fmt(v)
                    for entry in (m[0, 0], m[0, 1], m[1, 0], m[1, 1])
                    for v in (entry.real, entry.imag)
                ]
            )
    _write_csv(
        path, "n,x,re11,im11,re12,im12,re21,im21,re22,im22", rows
    )


def cmd_kernel(problem, args):
    reports = []
    coeffs = problem.coefficients(report_sink=reports)
    path = problem.out + "_coeffs.csv"
    orders = list(range(-1, coeffs.N + 1))
    _write_coeff_csv(path, problem.grid, [coeffs.coeff(n) for n in orders], orders)
    print("coefficients written to %s" % path)
    if reports and reports[0].probes:
        for N, sup_q, sup_0 in reports[0].probes:
            print("%d,%s,%s" % (N, _fmt(sup_q), _fmt(sup_0)))
    res = goursat_residuals(coeffs)
    print("%d,%s,%s" % (coeffs.N, _fmt(res.sup_Q_outer), _fmt(res.sup_0_outer)))
    if args.oracle == "mapping":
        from .formal_powers import (
            build_formal_powers,
            build_particular_solution,
            kernel_coeffs_via_mapping,
            sign_calibration,
        )
        from .special import LEGENDRE_DEGREE_CAP, legendre_monomial_coeffs

        n_map = min(coeffs.N, LEGENDRE_DEGREE_CAP)
        ps = build_particular_solution(problem.potential, coeffs.hom)
        fp = build_formal_powers(ps, problem.potential, n_map)
        table = legendre_monomial_coeffs(n_map)
        mapped = [
            kernel_coeffs_via_mapping(fp, ps, n, table) for n in range(n_map + 1)
        ]
        map_path = problem.out + "_coeffs_mapping.csv"
        map_orders = [-1] + list(range(n_map + 1))
        _write_coeff_csv(
            map_path, problem.grid, [-mapped[0]] + mapped, map_orders
        )
        diff = max(
            float(np.max(np.abs(mapped[n] - coeffs.coeff(n))))
            for n in range(n_map + 1)
        )
        cal = sign_calibration()
        print("mapping oracle written to %s" % map_path)
        print(
            "sign_calibration,phi_odd=%d,phi_even=%d,psi_odd=%d,psi_even=%d"
            % (
                cal[("phi", "odd")],
                cal[("phi", "even")],
                cal[("psi", "odd")],
                cal[("psi", "even")],
            )
        )
        print("max_coeff_difference,%s" % _fmt(diff))
    return 0


def _parse_lambdas(text):
    vals = []
    for tok in text.split(","):
        tok = tok.strip()
        if tok:
            vals.append(_parse_constant(tok, "lambda"))
    if not vals:
        raise ConfigError("no lambda values supplied")
    return vals


def cmd_solve(problem, args):
    from .dirac import dirac_residual_nodes

    lams = _parse_lambdas(args.lambdas)
    c = _parse_block_vector(args.c)
    coeffs = problem.coefficients()
    ev = build_evaluator(coeffs)
    t0 = time.perf_counter()
    for k, lam in enumerate(lams):
        sol = solve_ivp(ev, lam, c)
        resid = dirac_residual_nodes(sol.Y, problem.potential, lam)
        rows = [
            [
                _fmt(x),
                _fmt(sol.Y[i, 0].real),
                _fmt(sol.Y[i, 0].imag),
                _fmt(sol.Y[i, 1].real),
                _fmt(sol.Y[i, 1].imag),
                _fmt(resid[i]),
            ]
            for i, x in enumerate(problem.grid.nodes)
        ]
        path = "%s_solution_%03d.csv" % (problem.out, k)
        _write_csv(path, "x,re_y1,im_y1,re_y2,im_y2,residual", rows)
    dt = time.perf_counter() - t0
    print("solve: %d lambda values in %.3fs" % (len(lams), dt))
    return 0


def _parse_block_vector(text):
    vals = [_parse_constant(t, "initial value") for t in text.split(",") if t.strip()]
    if len(vals) != 2:
        raise ConfigError("initial value needs 2 components, got %d" % len(vals))
    return np.array(vals, dtype=complex)


def cmd_spectrum(problem, args):
    if problem.bc is None:
        raise ConfigError("spectrum needs bc_left and bc_right")
    lam_min = _get_float(problem.cfg, "lambda_min")
    lam_max = _get_float(problem.cfg, "lambda_max")
    if not lam_min < lam_max:
        raise ConfigError("need lambda_min < lambda_max")
    step = None
    if "scan_step" in problem.cfg:
        step = _get_float(problem.cfg, "scan_step")
        if step <= 0:
            raise ConfigError("scan_step must be positive")
    coeffs = problem.coefficients()
    ev = build_evaluator(coeffs)
    opts = ScanOptions(step=step, workers=args.workers)
    t0 = time.perf_counter()
    records = scan_eigenvalues(ev, problem.bc, lam_min, lam_max, opts)
    dt = time.perf_counter() - t0
    rows = [
        ["%d" % r.index, _fmt(r.lam), _fmt(r.residual), "%d" % r.iterations]
        for r in records
    ]
    path = problem.out + "_eigs.csv"
    _write_csv(path, "index,lambda,residual,iterations", rows)
    max_resid = max((r.residual for r in records), default=0.0)
    print("eigenvalues written to %s" % path)
    print("count=%d,max_residual=%s,wall_time=%.3fs" % (len(records), _fmt(max_resid), dt))
    return 0


def _run_checks(problem):
    """The built-in consistency suite; returns a list of result dicts."""
    checks = []

    def record(name, value, threshold):
        checks.append(
            {
                "name": name,
                "value": float(value),
                "threshold": float(threshold),
                "passed": bool(value <= threshold),
            }
        )

    grid = problem.grid
    Q = problem.potential
    # quadrature on a closed form
    F = indefinite_integral(grid, np.cos(grid.nodes))
    record(
        "quadrature_cosine",
        np.max(np.abs(F - np.sin(grid.nodes))),
        1e-10 * max(1.0, grid.b),
    )
    try:
        hom = fundamental_solution_zero(Q)
        record("fundamental_det_one", hom.det_defect, 1e-10)
        from .dirac import homogeneous_residual

        record(
            "fundamental_ode_residual",
            homogeneous_residual(hom, Q),
            1e-8 * (1.0 + Q.sup_norm * grid.b),
        )
    except Exception as exc:  # checks must report, not crash
        checks.append(
            {
                "name": "fundamental_solution",
                "value": float("nan"),
                "threshold": 0.0,
                "passed": False,
                "error": str(exc),
            }
        )
        return checks
    N = problem.N if problem.N != "auto" else DEFAULT_TRUNCATION
    N = max(4, min(N, 24))
    coeffs = build_coefficients(Q, hom, N)
    record(
        "lambda0_closure",
        np.max(np.abs(np.eye(2) + 2.0 * coeffs.coeff(0) - hom.U)),
        1e-12,
    )
    Q0 = Potential.zero(grid)
    hom0 = fundamental_solution_zero(Q0)
    coeffs0 = build_coefficients(Q0, hom0, N)
    ev0 = build_evaluator(coeffs0)
    record("free_coefficients_vanish", np.max(np.abs(coeffs0.K)), 1e-13)
    from .dirac import free_solution

    record(
        "free_solution_exact",
        np.max(np.abs(evaluate_U(ev0, 3.3, grid.b) - free_solution(3.3, grid.b))),
        1e-13,
    )
    # recursion vs mapping, small orders
    from .formal_powers import (
        build_formal_powers,
        build_particular_solution,
        kernel_coeffs_via_mapping,
    )
    from .special import legendre_monomial_coeffs

    n_map = min(8, N)
    ps = build_particular_solution(Q, hom)
    fp = build_formal_powers(ps, Q, n_map)
    table = legendre_monomial_coeffs(n_map)
    eta_scale = np.sqrt(2.0 * grid.size)
    eps = np.finfo(float).eps
    worst = 0.0
    for n in range(n_map + 1):
        ref = coeffs.coeff(n)
        alt = kernel_coeffs_via_mapping(fp, ps, n, table)
        num = np.sqrt(np.sum(np.abs(alt - ref) ** 2))
        den = np.sqrt(np.sum(np.abs(ref) ** 2))
        # conditioning floor of the monomial-basis assembly; the 200x
        # margin absorbs the quadrature component on coarse grids
        floor = 200 * eps * (n + 0.5) * np.sum(np.abs(table.coeffs[n])) * eta_scale
        worst = max(worst, num / max(1e-8 * den, floor))
    record("recursion_vs_mapping", worst, 1.0)
    # derivative against central differences
    ev = build_evaluator(coeffs)
    worst = 0.0
    for lam, x in ((0.0, grid.b), (2.5, 0.5 * grid.b), (-11.0, grid.b)):
        fd = (evaluate_U(ev, lam + 1e-5, x) - evaluate_U(ev, lam - 1e-5, x)) / 2e-5
        worst = max(worst, np.max(np.abs(evaluate_dU_dlambda(ev, lam, x) - fd)))
    record("derivative_vs_fd", worst, 1e-6)
    return checks


def cmd_validate(problem, args):
    checks = _run_checks(problem)
    ok = all(c["passed"] for c in checks)
    if args.json:
        import json

        print(json.dumps({"passed": ok, "checks": checks}, indent=2))
    else:
        for c in checks:
            status = "PASS" if c["passed"] else "FAIL"
            print(
                "%-26s %s  (%.3e vs %.3e)"
                % (c["name"], status, c["value"], c["threshold"])
            )
        print("validate: %s" % ("all checks passed" if ok else "FAILURES present"))
    return 0 if ok else 1


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="diracnsbf",
        description="Dirac-system solver based on Neumann series of Bessel functions",
    )
    ap.add_argument("command", choices=["kernel", "solve", "spectrum", "validate"])
    ap.add_argument("--config", help="flat key=value problem description")
    ap.add_argument(
        "--set",
        dest="sets",
        action="append",
        metavar="KEY=VALUE",
        help="override a config key (repeatable)",
    )
    ap.add_argument(
        "--oracle",
        choices=["mapping", "none"],
        default="none",
        help="kernel: also compute coefficients via the formal-powers route",
    )
    ap.add_argument("--json", action="store_true", help="validate: machine-readable report")
    ap.add_argument("--lambdas", help="solve: comma-separated spectral parameters")
    ap.add_argument("--c", default="1,0", help="solve: initial value c1,c2")
    ap.add_argument("--workers", type=int, default=1, help="spectrum: scan workers")
    args = ap.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else {}
        apply_overrides(cfg, args.sets)
        if args.command == "validate" and not any(
            k in cfg for k in ("p_expr", "q_expr", "nu_expr", "potential_file")
        ):
            cfg.setdefault("p_expr", "sin(pi*x)")
            cfg.setdefault("q_expr", "cos(pi*x)")
        problem = Problem(cfg)
        if problem.gauge_defect is not None and problem.gauge_defect > 1e-6:
            print(
                "warning: gauge angle inconsistent with diagonal entries "
                "(defect %.3e); the transformed system is not trace-free"
                % problem.gauge_defect,
                file=sys.stderr,
            )
        if args.command == "kernel":
            return cmd_kernel(problem, args)
        if args.command == "solve":
            if not args.lambdas:
                raise ConfigError("solve needs --lambdas")
            return cmd_solve(problem, args)
        if args.command == "spectrum":
            return cmd_spectrum(problem, args)
        return cmd_validate(problem, args)
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
