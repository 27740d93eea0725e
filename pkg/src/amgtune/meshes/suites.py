"""Declarative problem suites and the built-in desk-scale ones.

A suite is the product of mesh families, refinements, degrees and
coefficient settings, optionally repeated with different seeds.  Suites
can be read from an INI file with a ``[suite]`` section::

    [suite]
    name = my-suite
    discretization = DG
    families = tri quad
    refinements = 1 2
    degrees = 1 2
    patterns = random-cellwise
    eps_max = 1 4
    gamma_range = 5 20
    metric = time
    seed = 3
"""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from amgtune.meshes.coefficients import PATTERNS
from amgtune.meshes.mesh import FAMILIES, generate_mesh
from amgtune.meshes.problems import DISCRETIZATIONS, build_problem

TWO_REGION = ("checkerboard", "stripes", "quadrant", "inclusion")


class SuiteError(ValueError):
    pass


@dataclass(frozen=True)
class ProblemSpec:
    problem_id: str
    discretization: str
    family: str
    refinement: int
    degree: int
    pattern: str
    eps: float | None
    eps_max: float | None
    seed: int
    base: int
    growth: float
    gamma_range: tuple | None

    def build(self):
        prob = build_problem(self.discretization, self.family, self.refinement, pattern=self.pattern,
                             eps=self.eps, eps_max=self.eps_max, degree=self.degree, seed=self.seed,
                             base=self.base, growth=self.growth, gamma_range=self.gamma_range)
        prob.metadata["problem_id"] = self.problem_id
        return prob


@dataclass
class SuiteSpec:
    """Product definition of a problem suite.

    With ``pattern_mode = "draw"`` each problem picks one pattern from
    ``patterns`` and, for two-region patterns, an exponent from
    ``eps_range``; with ``"each"`` patterns are a product axis.
    ``min_n`` and ``max_n`` drop problems by predicted system size.
    """

    name: str
    discretization: str
    families: tuple
    refinements: tuple
    degrees: tuple = (1,)
    patterns: tuple = ("random-cellwise",)
    pattern_mode: str = "each"
    eps_max: tuple = (1.0,)
    eps_range: tuple = (-4.0, 4.0)
    gamma_range: tuple | None = None
    metric: str = "rho"
    seed: int = 0
    replicas: int = 1
    base: int = 4
    growth: float = 2.0
    min_n: int = 0
    max_n: int = 20_000

    def __post_init__(self):
        self.families = tuple(self.families)
        self.refinements = tuple(int(r) for r in self.refinements)
        self.degrees = tuple(int(p) for p in self.degrees)
        self.patterns = tuple(self.patterns)
        self.eps_max = tuple(float(e) for e in self.eps_max)
        self.eps_range = tuple(float(e) for e in self.eps_range)
        if self.gamma_range is not None:
            self.gamma_range = tuple(float(g) for g in self.gamma_range)
        self.validate()

    def validate(self) -> None:
        if self.discretization not in DISCRETIZATIONS:
            raise SuiteError(f"unknown discretization '{self.discretization}'")
        if not self.families or any(f not in FAMILIES for f in self.families):
            raise SuiteError(f"families must be a non-empty subset of {FAMILIES}")
        if not self.refinements or any(r < 0 for r in self.refinements):
            raise SuiteError("refinement list must be non-empty and non-negative")
        if not self.degrees or any(p < 1 for p in self.degrees):
            raise SuiteError("degrees must be positive")
        if self.discretization in ("FEM-P1", "VEM1") and self.degrees != (1,):
            raise SuiteError(f"{self.discretization} supports degree 1 only")
        if not self.patterns or any(p not in PATTERNS for p in self.patterns):
            raise SuiteError(f"patterns must be a non-empty subset of {PATTERNS}")
        if self.pattern_mode not in ("each", "draw"):
            raise SuiteError("pattern_mode must be 'each' or 'draw'")
        if "random-cellwise" in self.patterns and (not self.eps_max or min(self.eps_max) < 0):
            raise SuiteError("random-cellwise needs non-negative eps_max values")
        if len(self.eps_range) != 2 or self.eps_range[0] > self.eps_range[1]:
            raise SuiteError("eps_range must be 'lo hi' with lo <= hi")
        if self.gamma_range is not None and not (len(self.gamma_range) == 2 and 0 < self.gamma_range[0] <= self.gamma_range[1]):
            raise SuiteError("gamma_range must be 'lo hi' with 0 < lo <= hi")
        if self.metric not in ("rho", "time"):
            raise SuiteError("metric must be 'rho' or 'time'")
        if self.replicas < 1:
            raise SuiteError("replicas must be at least 1")
        if self.min_n > self.max_n:
            raise SuiteError("min_n exceeds max_n")

    # ------------------------------------------------------------------
    def problems(self) -> list:
        """Problem descriptions in generation order, filtered by size."""
        out = []
        idx = 0
        pattern_axis = self.patterns if self.pattern_mode == "each" else (None,)
        for fam in self.families:
            for r in self.refinements:
                for p in self.degrees:
                    for pat in pattern_axis:
                        emax_axis = self.eps_max if (pat == "random-cellwise" or pat is None) else (None,)
                        for emax in emax_axis:
                            for rep in range(self.replicas):
                                spec = self._problem(idx, fam, r, p, pat, emax, rep)
                                idx += 1
                                if spec is not None:
                                    out.append(spec)
        return out

    def _problem(self, idx, fam, r, p, pat, emax, rep):
        rng = np.random.default_rng([int(self.seed), idx])
        seed = int(rng.integers(2 ** 31))
        if pat is None:
            pat = self.patterns[int(rng.integers(len(self.patterns)))]
        eps = None
        if pat == "random-cellwise":
            if emax is None:
                emax = self.eps_max[int(rng.integers(len(self.eps_max)))]
        else:
            eps = round(float(rng.uniform(*self.eps_range)), 6)
            emax = None
        n = predicted_size(self.discretization, fam, r, p, self.base, self.growth, seed)
        if not self.min_n <= n <= self.max_n:
            return None
        parts = [self.name, fam, f"r{r}"]
        if len(self.degrees) > 1 or self.discretization.startswith("DG"):
            parts.append(f"p{p}")
        if self.pattern_mode == "each" and len(self.patterns) > 1:
            parts.append(pat)
        if emax is not None and len(self.eps_max) > 1:
            parts.append(f"e{emax:g}")
        if self.replicas > 1:
            parts.append(f"s{rep}")
        return ProblemSpec("_".join(parts), self.discretization, fam, r, p, pat, eps,
                           emax, seed, self.base, self.growth, self.gamma_range)

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp["suite"] = {f.name: _fmt(getattr(self, f.name)) for f in fields(self)}
        import io

        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, tuple):
        return " ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def predicted_size(discretization: str, family: str, refinement: int, degree: int = 1, base: int = 4,
                   growth: float = 2.0, seed: int = 0) -> int:
    """System size a problem will have, without assembling it."""
    from amgtune.meshes.dg import basis_size

    mesh = generate_mesh(family, refinement, base=base, growth=growth, seed=seed)
    if discretization in ("FEM-P1", "VEM1"):
        return mesh.n_vertices - len(mesh.boundary_vertices())
    nb = basis_size(degree, mesh.dim)
    return mesh.n_cells * nb * (mesh.dim if discretization == "DG-elasticity" else 1)


# --------------------------------------------------------------------------
# built-in suites
# --------------------------------------------------------------------------

BUILTIN = {
    # sanity suite: Poisson on uniform triangles
    "poisson": SuiteSpec("poisson", "FEM-P1", ("tri",), (1, 2, 3, 4), patterns=("checkerboard",),
                         eps_range=(0.0, 0.0), base=8),
    # VEM diffusion with two-region coefficients, 4 families x 6 refinements
    "tc1-mini": SuiteSpec("tc1-mini", "VEM1", ("tri", "quad", "hex", "voro"), (1, 2, 3, 4, 5, 6),
                          patterns=TWO_REGION, pattern_mode="draw", eps_range=(-4.0, 4.0),
                          base=8, growth=math.sqrt(2.0), seed=1, max_n=10_000),
    # DG diffusion with cell-wise random coefficients
    "tc2-mini": SuiteSpec("tc2-mini", "DG", ("tri", "quad", "hex", "voro"), (1, 2, 3, 4), degrees=(1, 2, 3, 4),
                          eps_max=(1.0, 2.0, 4.0), metric="time", seed=2),
    # cheaper DG training set for the large-contrast rescue study
    "dg-train": SuiteSpec("dg-train", "DG", ("tri", "quad", "hex", "voro"), (1, 2), degrees=(1, 2, 3),
                          eps_max=(4.0,), seed=3, max_n=1_000),
    # larger high-order DG problems where the default configuration struggles
    "dg-rescue": SuiteSpec("dg-rescue", "DG", ("tri", "quad", "hex", "voro"), (3, 4), degrees=(2, 3),
                           eps_max=(4.0,), seed=4, replicas=2, min_n=2_000, max_n=13_000),
    # 3D DG diffusion and 2D DG elasticity on small grids
    "tc3-mini": SuiteSpec("tc3-mini", "DG", ("cart3d",), (1, 2, 3), degrees=(1, 2), eps_max=(1.0, 2.0, 4.0),
                          metric="time", seed=5),
    "tc4-mini": SuiteSpec("tc4-mini", "DG-elasticity", ("tri", "quad", "hex", "voro"), (1, 2, 3),
                          degrees=(1, 2), eps_max=(1.0, 2.0, 4.0), metric="time", seed=6),
}


def builtin_suite(name: str) -> SuiteSpec:
    try:
        return replace(BUILTIN[name])
    except KeyError:
        raise SuiteError(f"unknown suite '{name}'; built-in suites: {', '.join(sorted(BUILTIN))}") from None


_FIELD_TYPES = {f.name: f.type for f in fields(SuiteSpec)}


def suite_from_mapping(d: dict) -> SuiteSpec:
    """Build a suite from string values (INI section); a ``base_suite`` key starts from a built-in."""
    d = {k.strip().replace("-", "_"): v.strip() for k, v in d.items()}
    start = {}
    base_name = d.pop("base_suite", "")
    if base_name:
        base = builtin_suite(base_name)
        start = {f.name: getattr(base, f.name) for f in fields(SuiteSpec)}
    unknown = set(d) - set(_FIELD_TYPES)
    if unknown:
        raise SuiteError(f"unknown suite keys: {', '.join(sorted(unknown))}")
    kw = dict(start)
    for k, v in d.items():
        kw[k] = _parse(k, v)
    missing = [k for k in ("name", "discretization", "families", "refinements") if k not in kw]
    if missing:
        raise SuiteError(f"suite is missing keys: {', '.join(missing)}")
    return SuiteSpec(**kw)


def _parse(key: str, v: str):
    items = v.replace(",", " ").split()
    try:
        if key in ("families", "patterns"):
            return tuple(items)
        if key in ("refinements", "degrees"):
            return tuple(int(x) for x in items)
        if key in ("eps_max", "eps_range"):
            return tuple(float(x) for x in items)
        if key == "gamma_range":
            return tuple(float(x) for x in items) if items else None
        if key in ("seed", "replicas", "base", "min_n", "max_n"):
            return int(v)
        if key == "growth":
            return float(v)
    except ValueError as exc:
        raise SuiteError(f"bad value for '{key}': {v!r}") from exc
    return v


def load_suite(path) -> SuiteSpec:
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise SuiteError(f"cannot read suite file '{path}'")
    if "suite" not in cp:
        raise SuiteError(f"{path}: no [suite] section")
    return suite_from_mapping(dict(cp["suite"]))


def resolve_suite(name_or_path: str) -> SuiteSpec:
    if name_or_path in BUILTIN:
        return builtin_suite(name_or_path)
    return load_suite(name_or_path)


def generate_suite(suite: SuiteSpec, directory, progress=None, jobs: int = 1) -> list:
    """Assemble every problem of ``suite`` into ``directory``; returns the ids."""
    from amgtune.dataset import save_problem

    specs = suite.problems()
    if not specs:
        raise SuiteError(f"suite '{suite.name}' contains no problems after size filtering")

    def one(ps):
        prob = ps.build()
        prob.metadata["suite"] = suite.name
        prob.metadata["metric"] = suite.metric
        save_problem(prob, directory, ps.problem_id)
        return ps.problem_id

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(jobs) as ex:
            ids = list(ex.map(one, specs))
    else:
        ids = []
        for ps in specs:
            ids.append(one(ps))
            if progress:
                progress(ps.problem_id)
    return ids
