"""Experiment driver: single runs, quadrature and convergence sweeps, adaptive refinement."""
from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from scipy import stats

from .basis import build_filter_bank, make_space
from .baselines import fem_solve
from .diffnet import DiffNet, NetConfig, dof_count, init_network, save_checkpoint
from .io import write_history_csv, write_json, write_solution_csv, write_table
from .mesh import Mesh, coarsen, refine, uniform_mesh
from .optim import MACHINE_EPS, Schedule, TrainingDiverged, train
from .problems import PROBLEMS, ProblemSpec, get_problem, pendulum_energy
from .quadrature import gauss_legendre, min_points_for_degree
from .weakform import LossState, WeakFormLoss

log = logging.getLogger(__name__)

# probe points for relative errors, per problem
PROBES = {
    "equilibrium": (1.5,),
    "beam": (1.0,),
    "poisson-discontinuous": (0.5,),
}


@dataclass(frozen=True)
class RunConfig:
    problem: str
    n_elements: int | None = None
    boundaries: tuple[float, ...] | None = None
    space: str = "lagrange"
    degree: int = 4
    quad_points: int = 10
    net: NetConfig = field(default_factory=NetConfig)
    adam_epochs: int = 10000
    lbfgs_epochs: int = 10000
    lr: float = 1e-3
    eta_tau: float | None = None
    eps: float = MACHINE_EPS
    seeds: tuple[int, ...] = (0,)
    output_dir: str | None = None
    grid_points: int = 1001

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}; choose from {sorted(PROBLEMS)}")
        if not self.seeds:
            raise ValueError("seeds must be nonempty")
        if self.n_elements is None and self.boundaries is None:
            raise ValueError("give n_elements or boundaries")
        if self.grid_points < 2:
            raise ValueError("grid_points must be at least 2")
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.boundaries is not None:
            object.__setattr__(self, "boundaries", tuple(float(b) for b in self.boundaries))

    @classmethod
    def for_problem(cls, name: str, **overrides) -> "RunConfig":
        """Configuration from the problem's recommended settings."""
        rec = get_problem(name).recommended
        base = dict(problem=name, n_elements=rec.n_elements, boundaries=rec.boundaries,
                    space=rec.space, degree=rec.degree, quad_points=rec.quad_points,
                    net=rec.net, adam_epochs=rec.adam_epochs, lbfgs_epochs=rec.lbfgs_epochs)
        base.update(overrides)
        return cls(**base)

    @property
    def schedule(self) -> Schedule:
        return Schedule(self.adam_epochs, self.lbfgs_epochs, self.lr, self.eta_tau, self.eps)

    def mesh(self, problem: ProblemSpec) -> Mesh:
        if self.boundaries is not None:
            mesh = Mesh(np.array(self.boundaries))
        else:
            mesh = uniform_mesh(*problem.domain, self.n_elements)
        problem.check_mesh(mesh)
        return mesh

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seeds"] = list(self.seeds)
        if self.boundaries is not None:
            d["boundaries"] = list(self.boundaries)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown config keys: {sorted(extra)}")
        d = dict(d)
        if "problem" not in d:
            raise ValueError("config needs a 'problem' key")
        if d["problem"] not in PROBLEMS:
            raise ValueError(f"unknown problem {d['problem']!r}; choose from {sorted(PROBLEMS)}")
        net = d.get("net")
        if isinstance(net, dict):
            bad = set(net) - {f.name for f in fields(NetConfig)}
            if bad:
                raise ValueError(f"unknown net keys: {sorted(bad)}")
            d["net"] = NetConfig(**net)
        rec = cls.for_problem(d["problem"]).to_dict()
        rec["net"] = cls.for_problem(d["problem"]).net
        if "boundaries" in d and "n_elements" not in d:
            rec["n_elements"] = None
        if "n_elements" in d and "boundaries" not in d:
            rec["boundaries"] = None
        rec.update(d)
        if rec.get("eps") is not None and isinstance(rec["eps"], str):
            rec["eps"] = float(rec["eps"])
        return cls(**rec)

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def save(self, path) -> None:
        write_json(path, self.to_dict())


@dataclass
class RunReport:
    config: RunConfig
    seed: int
    x: np.ndarray
    u_nn: np.ndarray
    oracle: np.ndarray
    pwe: np.ndarray
    history: list
    metrics: dict
    mesh: Mesh
    net: DiffNet | None = None
    state: LossState | None = None
    adam_iterations: int = 0
    diverged: bool = False
    mesh_history: list = field(default_factory=list)

    def write(self, out) -> Path:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        write_solution_csv(out / "solution.csv", self.x, self.u_nn, self.oracle)
        write_history_csv(out / "history.csv", self.history)
        metrics = dict(self.metrics, seed=self.seed, diverged=self.diverged,
                       adam_iterations=self.adam_iterations,
                       lbfgs_iterations=max(len(self.history) - 1 - self.adam_iterations, 0))
        write_json(out / "metrics.json", metrics)
        self.mesh.save(out / "mesh.txt")
        if self.mesh_history:
            write_json(out / "mesh_history.json",
                       [list(map(float, m.boundaries)) for m in self.mesh_history])
        if self.net is not None:
            save_checkpoint(self.net, out / "network.bin")
        self.config.save(out / "config.json")
        return out


def compute_metrics(x, u, oracle, probes=()) -> dict:
    """Error summary of samples u against oracle values on the grid x."""
    x, u, oracle = (np.asarray(a, dtype=float) for a in (x, u, oracle))
    pwe = np.abs(u - oracle)
    out = {
        "avg_abs_error": float(np.mean(pwe)),
        "max_abs_error": float(np.max(pwe)),
        "pwe": pwe,
        "rel_error_at_point": {},
    }
    for p in probes:
        up = np.interp(p, x, u)
        op = np.interp(p, x, oracle)
        out["rel_error_at_point"][f"{p:g}"] = float(abs(up - op) / abs(op)) if op else float(abs(up))
    return out


def strong_residual_per_element(problem: ProblemSpec, mesh: Mesh, rule, net: DiffNet):
    """Mean |strong-form residual| over each element's Gauss points."""
    if problem.strong is None:
        return None
    xq = mesh.quadrature_positions(rule)
    jets, _ = net.jets(np.ascontiguousarray(xq.ravel()), problem.strong_order)
    r = problem.strong(xq.ravel(), jets)
    return np.mean(np.abs(r).reshape(xq.shape), axis=1)


def element_energy(problem: ProblemSpec, mesh: Mesh, rule, net: DiffNet):
    """Quadrature average of the pendulum energy per unit mass over each element."""
    xq = mesh.quadrature_positions(rule)
    jets, _ = net.jets(np.ascontiguousarray(xq.ravel()), 1)
    g, length = problem.constants["g"], problem.constants["L"]
    e = pendulum_energy(jets[0], jets[1], g, length).reshape(xq.shape)
    return e @ rule.weights / 2.0


def _evaluate(problem, config, mesh, bank, net, seed, history, state, adam_its, diverged):
    x = np.linspace(*problem.domain, config.grid_points)
    if net is not None and not diverged:
        u = net(x)
    else:
        u = np.full_like(x, np.nan)
    oracle = problem.oracle(x)
    metrics = compute_metrics(x, u, oracle, PROBES.get(problem.name, ()))
    pwe = metrics.pop("pwe")
    metrics["n_elements"] = mesh.n_elements
    metrics["dof"] = net.dof if net is not None else None
    metrics["bank_degraded"] = bank.degraded
    if history:
        metrics["final_loss_r"] = history[-1]["loss_r"]
        metrics["final_loss_b"] = history[-1]["loss_b"]
        metrics["final_total"] = history[-1]["total"]
    if not diverged:
        res = strong_residual_per_element(problem, mesh, bank.rule, net)
        if res is not None:
            metrics["strong_residual_per_element"] = res.tolist()
            metrics["peak_strong_residual"] = float(res.max())
        if problem.name.startswith("pendulum"):
            energy = element_energy(problem, mesh, bank.rule, net)
            metrics["energy_per_element"] = energy.tolist()
            xm = 0.5 * (mesh.boundaries[:-1] + mesh.boundaries[1:])
            metrics["energy_time"] = xm.tolist()
    return RunReport(config, seed, x, u, oracle, pwe, history, metrics, mesh, net, state,
                     adam_its, diverged)


def _bank(config: RunConfig):
    return build_filter_bank(make_space(config.space, config.degree),
                             gauss_legendre(config.quad_points))


def run_case(config: RunConfig, seed: int | None = None, net: DiffNet | None = None,
             state: LossState | None = None, mesh: Mesh | None = None,
             write: bool = True) -> RunReport:
    """Build mesh, bank and network, train, evaluate and (optionally) write the files."""
    problem = get_problem(config.problem)
    seed = config.seeds[0] if seed is None else seed
    mesh = config.mesh(problem) if mesh is None else mesh
    bank = _bank(config)
    if net is None:
        net = init_network(replace(config.net, seed=seed))
    diverged = False
    try:
        res = train(problem, mesh, bank, net, config.schedule, state=state)
        history, state, adam_its = res.history, res.state, res.adam_iterations
    except TrainingDiverged as exc:
        log.warning("training diverged: %s", exc)
        history, adam_its, diverged = exc.history, len(exc.history), True
    report = _evaluate(problem, config, mesh, bank, net, seed, history, state, adam_its,
                       diverged)
    if write and config.output_dir:
        out = Path(config.output_dir)
        if len(config.seeds) > 1:
            out = out / f"seed_{seed}"
        report.write(out)
    return report


def run_seeds(config: RunConfig, write: bool = True) -> list[RunReport]:
    return [run_case(config, s, write=write) for s in config.seeds]


def _median(vals):
    vals = np.asarray(vals, dtype=float)
    vals = vals[np.isfinite(vals)]
    return float(np.median(vals)) if vals.size else float("nan")


def saturation_q(qs, errors, ratio=0.9):
    """First Q beyond which the next Q improves the error by less than 10%."""
    for i in range(len(qs) - 1):
        if errors[i + 1] >= ratio * errors[i]:
            return qs[i]
    return None


def quadrature_sweep(problem: str, space_degrees, q_range, config: RunConfig | None = None,
                     seeds=None, out=None) -> dict:
    """avg_abs_error over (degree, Q) on a single element."""
    base = config or RunConfig.for_problem(problem)
    base = replace(base, problem=problem, n_elements=1, boundaries=None, space="lagrange",
                   output_dir=None)
    seeds = tuple(seeds if seeds is not None else base.seeds)
    rows = []
    saturation = {}
    for p in space_degrees:
        meds = []
        for q in q_range:
            cfg = replace(base, degree=p, quad_points=q)
            errs = [run_case(cfg, s, write=False).metrics["avg_abs_error"] for s in seeds]
            med = _median(errs)
            meds.append(med)
            rows.append({"degree": p, "q": q, "median_avg_abs_error": med,
                         "below_min_points": q < min_points_for_degree(p), "errors": errs})
        saturation[p] = saturation_q(list(q_range), meds)
    table = {"rows": rows, "saturation_q": saturation, "seeds": list(seeds)}
    if out is not None:
        write_table(Path(out) / "quadrature_sweep.csv",
                    ("degree", "q", "median_avg_abs_error", "below_min_points"),
                    ([r["degree"], r["q"], r["median_avg_abs_error"], int(r["below_min_points"])]
                     for r in rows))
        write_json(Path(out) / "quadrature_sweep.json", table)
    return table


def confidence_interval(values, level=0.95):
    """Student-t interval for the mean of the values."""
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size < 2:
        m = float(v.mean()) if v.size else float("nan")
        return m, m
    half = stats.t.ppf(0.5 + level / 2, v.size - 1) * v.std(ddof=1) / np.sqrt(v.size)
    return float(v.mean() - half), float(v.mean() + half)


def pre_plateau_slope(h, errors, plateau_factor=2.0):
    """Log-log slope of error against element size before the error plateaus.

    The fit uses the coarse meshes up to the first one whose error is within
    ``plateau_factor`` of the smallest error in the sweep (at least two points).
    """
    h = np.asarray(h, dtype=float)
    e = np.asarray(errors, dtype=float)
    order = np.argsort(-h)  # coarse to fine
    h, e = h[order], e[order]
    floor = np.nanmin(e)
    stop = next((i for i, v in enumerate(e) if v <= plateau_factor * floor), len(e) - 1)
    stop = max(stop, 1)
    return float(np.polyfit(np.log(h[: stop + 1]), np.log(e[: stop + 1]), 1)[0])


# quadrature points per element for each degree in the convergence study
CONVERGENCE_Q = {1: 3, 2: 4, 3: 5, 4: 6}


def convergence_sweep(problem: str, degrees, mesh_sizes, seeds, config: RunConfig | None = None,
                      probe: float = 1.5, out=None) -> dict:
    """Median and 95% CI of the relative error at the probe over seeds, per (degree, N_el)."""
    if len(mesh_sizes) < 2:
        raise ValueError("need at least two mesh sizes")
    prob = get_problem(problem)
    base = config or RunConfig.for_problem(problem)
    base = replace(base, problem=problem, space="lagrange", boundaries=None, output_dir=None)
    exact = float(prob.oracle(probe)[0])
    rows = []
    slopes = {}
    for p in degrees:
        meds, hs = [], []
        for n in mesh_sizes:
            cfg = replace(base, degree=p, n_elements=n, quad_points=CONVERGENCE_Q.get(p, p + 2))
            errs = []
            dof = None
            for s in seeds:
                rep = run_case(cfg, s, write=False)
                errs.append(float(abs(rep.net(probe)[0] - exact) / abs(exact))
                            if not rep.diverged else float("nan"))
                dof = rep.metrics["dof"]
            lo, hi = confidence_interval(errs)
            row = {"degree": p, "n_elements": n, "h": (prob.domain[1] - prob.domain[0]) / n,
                   "median_rel_error": _median(errs), "ci_low": lo, "ci_high": hi,
                   "fennm_dof": dof, "fem_dof": p * n + 1, "errors": errs}
            if p in (1, 2) and prob.name in ("equilibrium", "transport"):
                fem = fem_solve(prob, uniform_mesh(*prob.domain, n), p)
                row["fem_rel_error"] = float(abs(fem(probe)[0] - exact) / abs(exact))
            rows.append(row)
            meds.append(row["median_rel_error"])
            hs.append(row["h"])
        slopes[p] = pre_plateau_slope(hs, meds)
    table = {"rows": rows, "slopes": slopes, "seeds": list(seeds), "probe": probe,
             "fennm_dof": dof_count(base.net.sizes)}
    if out is not None:
        cols = ("degree", "n_elements", "h", "median_rel_error", "ci_low", "ci_high",
                "fennm_dof", "fem_dof", "fem_rel_error")
        write_table(Path(out) / "convergence_sweep.csv", cols,
                    ([r.get(c, float("nan")) for c in cols] for r in rows))
        write_json(Path(out) / "convergence_sweep.json", table)
    return table


def _protected_nodes(problem: ProblemSpec) -> set[float]:
    return set(problem.required_nodes) | {c.x for c in problem.natural}


def adapt_mesh(mesh: Mesh, indicator, beta: float = 2.0, gamma: float = 0.2,
               protected=()) -> tuple[Mesh, list[int], list[int]]:
    """Bisect elements above beta * mean, merge equal-length sibling pairs below gamma * mean.

    Returns (new mesh, refined element indices, left indices of merged pairs),
    indices referring to the input mesh.
    """
    ind = np.asarray(indicator, dtype=float)
    mean = float(np.mean(ind))
    marks = [int(i) for i in np.flatnonzero(ind > beta * mean)]
    low = ind < gamma * mean
    sizes = mesh.sizes
    b = mesh.boundaries
    pairs = []
    i = 0
    while i < mesh.n_elements - 1:
        shared = b[i + 1]
        if (low[i] and low[i + 1] and abs(sizes[i] - sizes[i + 1]) <= 1e-12 * sizes[i]
                and not any(abs(shared - p) <= 1e-12 * max(1.0, abs(p)) for p in protected)):
            pairs.append(i)
            i += 2
        else:
            i += 1
    merged = coarsen(mesh, pairs)
    shift = np.zeros(mesh.n_elements, dtype=int)
    for left in pairs:
        shift[left + 1:] += 1
    new = refine(merged, [m - shift[m] for m in marks])
    return new, marks, pairs


def refine_loop(config: RunConfig, max_cycles: int = 3, beta: float = 2.0, gamma: float = 0.2,
                seed: int | None = None, min_size: float = 1e-6) -> RunReport:
    """Train, mark by the strong-form residual, adapt the mesh, retrain warm-started."""
    problem = get_problem(config.problem)
    if problem.strong is None:
        raise ValueError(f"{problem.name} has no strong-form residual evaluator")
    seed = config.seeds[0] if seed is None else seed
    report = run_case(config, seed, write=False)
    cycles = [{"cycle": 0, "n_elements": report.mesh.n_elements,
               "peak_strong_residual": report.metrics.get("peak_strong_residual")}]
    meshes = [report.mesh]
    history = list(report.history)
    stop_reason = "max_cycles"
    for cycle in range(1, max_cycles + 1):
        if report.diverged:
            stop_reason = "diverged"
            break
        ind = np.asarray(report.metrics["strong_residual_per_element"])
        if not np.any(ind > beta * ind.mean()):
            stop_reason = "no element above threshold"
            break
        mesh, marks, pairs = adapt_mesh(report.mesh, ind, beta, gamma, _protected_nodes(problem))
        if mesh.sizes.min() < min_size:
            stop_reason = f"element size below {min_size:g}"
            log.warning("refinement stopped: %s", stop_reason)
            break
        offset = history[-1]["iter"]
        report = run_case(config, seed, net=report.net, state=report.state, mesh=mesh,
                          write=False)
        for row in report.history[1:]:
            history.append(dict(row, iter=row["iter"] + offset))
        meshes.append(mesh)
        cycles.append({"cycle": cycle, "n_elements": mesh.n_elements, "refined": marks,
                       "coarsened": pairs,
                       "peak_strong_residual": report.metrics.get("peak_strong_residual")})
    report.history = history
    report.mesh_history = meshes
    report.metrics["cycles"] = cycles
    report.metrics["stop_reason"] = stop_reason
    if config.output_dir:
        report.write(config.output_dir)
    return report
