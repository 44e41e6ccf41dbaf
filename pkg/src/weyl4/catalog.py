"""Built-in manifold specifications and config-file ingestion.

A :class:`ManifoldSpec` is a single 4-dimensional chart: metric entries as
expressions over the chart coordinates, an optional almost complex structure
J given the same way, a sampling domain, and ground-truth tags that the
conditions module re-verifies numerically.

Kahler entries are written in real coordinates (u, v, p, q) =
(Re z1, Im z1, Re z2, Im z2); the metric components were derived offline
from the potentials and entered as explicit expressions, so the engine never
differentiates potentials symbolically.  Correctness is caught downstream by
the nabla-J = 0 invariant.
"""

from __future__ import annotations

import configparser
import io
import unicodedata
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import exprjet
from .exprjet import Expr, eval_values, expr_to_string, parse_expression
from .pointgeom import MetricPoint, adjoint_endo

KNOWN_TAGS = ("flat", "einstein", "kahler", "almost-kahler", "constant-s", "conformally-flat")


class CatalogError(Exception):
    """Config parsing or manifold validation failure."""


def normalize_tag(tag: str) -> str:
    decomposed = unicodedata.normalize("NFD", tag.strip().lower())
    return "".join(c for c in decomposed if not unicodedata.combining(c))


@dataclass(frozen=True)
class ManifoldSpec:
    id: str
    coords: tuple[str, str, str, str]
    metric_exprs: tuple  # 4x4 nested tuple of Expr
    j_exprs: Optional[tuple]  # 4x4 nested tuple of Expr, or None
    domain: tuple  # 4 pairs (lo, hi)
    compact: bool
    tags: frozenset
    notes: str = ""

    @property
    def has_j(self) -> bool:
        return self.j_exprs is not None

    def metric_point(self, point: Sequence[float], order: int) -> MetricPoint:
        nc = exprjet.tables(order).ncoef
        jets = np.zeros((4, 4, nc))
        for i in range(4):
            for j in range(i, 4):
                jets[i, j] = exprjet.eval_jet(self.metric_exprs[i][j], point, order).coeffs
                jets[j, i] = jets[i, j]
        return MetricPoint.from_jets(point, jets, order)

    def j_jets(self, point: Sequence[float], order: int = 2) -> np.ndarray:
        if self.j_exprs is None:
            raise CatalogError(f"manifold '{self.id}' carries no almost complex structure")
        nc = exprjet.tables(order).ncoef
        jets = np.zeros((4, 4, nc))
        for i in range(4):
            for j in range(4):
                jets[i, j] = exprjet.eval_jet(self.j_exprs[i][j], point, order).coeffs
        return jets

    def j_matrix(self, point: Sequence[float]) -> np.ndarray:
        if self.j_exprs is None:
            raise CatalogError(f"manifold '{self.id}' carries no almost complex structure")
        return np.array(
            [[float(eval_values(self.j_exprs[i][j], list(point))) for j in range(4)] for i in range(4)]
        )

    def metric_values(self, coords: Sequence[np.ndarray]) -> np.ndarray:
        """Vectorized metric matrices; trailing axes are (4, 4)."""
        shape = np.broadcast(*[np.asarray(c) for c in coords]).shape
        out = np.zeros(shape + (4, 4))
        for i in range(4):
            for j in range(i, 4):
                vals = eval_values(self.metric_exprs[i][j], list(coords))
                out[..., i, j] = vals
                out[..., j, i] = vals
        return out

    def volume_density(self, coords: Sequence[np.ndarray]) -> np.ndarray:
        g = self.metric_values(coords)
        return np.sqrt(np.linalg.det(g))

    def sample_points(self, n: int, rng: np.random.Generator, margin: float = 0.1) -> np.ndarray:
        los = np.array([lo + margin * (hi - lo) for lo, hi in self.domain])
        his = np.array([hi - margin * (hi - lo) for lo, hi in self.domain])
        return rng.uniform(los, his, size=(n, 4))


# ---------------------------------------------------------------------------
# Builtins
# ---------------------------------------------------------------------------

_J_STANDARD = (
    ("0", "-1", "0", "0"),
    ("1", "0", "0", "0"),
    ("0", "0", "0", "-1"),
    ("0", "0", "1", "0"),
)


def _parse_grid(entries: dict, coords, default: str = "0"):
    grid = []
    for i in range(4):
        row = []
        for j in range(4):
            text = entries.get((i, j), entries.get((j, i), default))
            row.append(parse_expression(text, coords))
        grid.append(tuple(row))
    return tuple(grid)


def _metric_from_upper(entries: dict, coords):
    return _parse_grid(entries, coords)


def _j_from_rows(rows, coords):
    return tuple(tuple(parse_expression(t, coords) for t in row) for row in rows)


def _diag_metric(diag: Sequence[str], coords):
    return _metric_from_upper({(i, i): d for i, d in enumerate(diag)}, coords)


def builtin_manifolds() -> list[ManifoldSpec]:
    """The catalog: flat baselines, Kahler potentials, and the strictly
    almost Kahler nilmanifold, plus conformal and perturbed-J foils."""
    xyzt = ("x", "y", "z", "t")
    uvpq = ("u", "v", "p", "q")
    specs = []

    flat_metric = _diag_metric(["1", "1", "1", "1"], xyzt)
    j_std = _j_from_rows(_J_STANDARD, xyzt)

    specs.append(
        ManifoldSpec(
            id="euclidean_flat",
            coords=xyzt,
            metric_exprs=flat_metric,
            j_exprs=j_std,
            domain=((-1.0, 1.0),) * 4,
            compact=False,
            tags=frozenset({"flat", "einstein", "kahler", "constant-s", "conformally-flat"}),
            notes="flat chart with the standard parallel complex structure",
        )
    )

    two_pi = 2.0 * np.pi
    specs.append(
        ManifoldSpec(
            id="flat_torus",
            coords=xyzt,
            metric_exprs=flat_metric,
            j_exprs=j_std,
            domain=((0.0, two_pi),) * 4,
            compact=True,
            tags=frozenset({"flat", "einstein", "kahler", "constant-s", "conformally-flat"}),
            notes="flat metric on [0, 2pi)^4 with periodic identifications",
        )
    )

    # Fubini-Study on the affine chart of CP^2, potential log(1+|z|^2),
    # realified with g = 2 Re(h_ab dz^a dzbar^b).
    d2 = "(1 + u^2 + v^2 + p^2 + q^2)^2"
    fs = {
        (0, 0): f"2*(1 + p^2 + q^2)/{d2}",
        (1, 1): f"2*(1 + p^2 + q^2)/{d2}",
        (2, 2): f"2*(1 + u^2 + v^2)/{d2}",
        (3, 3): f"2*(1 + u^2 + v^2)/{d2}",
        (0, 2): f"-2*(u*p + v*q)/{d2}",
        (1, 3): f"-2*(u*p + v*q)/{d2}",
        (0, 3): f"-2*(u*q - v*p)/{d2}",
        (1, 2): f"2*(u*q - v*p)/{d2}",
    }
    j_std_uv = _j_from_rows(_J_STANDARD, uvpq)
    specs.append(
        ManifoldSpec(
            id="fubini_study_cp2",
            coords=uvpq,
            metric_exprs=_metric_from_upper(fs, uvpq),
            j_exprs=j_std_uv,
            domain=((-0.8, 0.8),) * 4,
            compact=False,
            tags=frozenset({"einstein", "kahler", "constant-s"}),
            notes="Kahler-Einstein, S > 0 constant",
        )
    )

    # Complex hyperbolic ball, potential -log(1-|z|^2); chart box inside the
    # ball of radius 0.7.
    e2 = "(1 - u^2 - v^2 - p^2 - q^2)^2"
    ch = {
        (0, 0): f"2*(1 - p^2 - q^2)/{e2}",
        (1, 1): f"2*(1 - p^2 - q^2)/{e2}",
        (2, 2): f"2*(1 - u^2 - v^2)/{e2}",
        (3, 3): f"2*(1 - u^2 - v^2)/{e2}",
        (0, 2): f"2*(u*p + v*q)/{e2}",
        (1, 3): f"2*(u*p + v*q)/{e2}",
        (0, 3): f"2*(u*q - v*p)/{e2}",
        (1, 2): f"-2*(u*q - v*p)/{e2}",
    }
    specs.append(
        ManifoldSpec(
            id="complex_hyperbolic_ch2",
            coords=uvpq,
            metric_exprs=_metric_from_upper(ch, uvpq),
            j_exprs=j_std_uv,
            domain=((-0.34, 0.34),) * 4,
            compact=False,
            tags=frozenset({"einstein", "kahler", "constant-s"}),
            notes="Kahler-Einstein, S < 0 constant",
        )
    )

    # Generic Kahler potential (u^2+v^2+p^2+q^2)/2 + 0.1 u^4 + 0.05 uvp;
    # nonconstant scalar curvature.
    kp = {
        (0, 0): "1 + 0.6*u^2",
        (1, 1): "1 + 0.6*u^2",
        (2, 2): "1",
        (3, 3): "1",
        (0, 2): "0.025*v",
        (1, 3): "0.025*v",
        (0, 3): "-0.025*u",
        (1, 2): "0.025*u",
    }
    specs.append(
        ManifoldSpec(
            id="kahler_potential_generic",
            coords=uvpq,
            metric_exprs=_metric_from_upper(kp, uvpq),
            j_exprs=j_std_uv,
            domain=((-0.9, 0.9),) * 4,
            compact=False,
            tags=frozenset({"kahler"}),
            notes="Kahler with nonconstant S",
        )
    )

    # Kodaira-Thurston nilmanifold: dx^2 + dy^2 + (dz - x dy)^2 + dt^2 with
    # J mapping the left-invariant frame e1 -> e3, e2 -> e4.
    kt_metric = {
        (0, 0): "1",
        (1, 1): "1 + x^2",
        (2, 2): "1",
        (3, 3): "1",
        (1, 2): "-x",
    }
    kt_j = (
        ("0", "x", "-1", "0"),
        ("0", "0", "0", "-1"),
        ("1", "0", "0", "-x"),
        ("0", "1", "0", "0"),
    )
    specs.append(
        ManifoldSpec(
            id="kodaira_thurston",
            coords=xyzt,
            metric_exprs=_metric_from_upper(kt_metric, xyzt),
            j_exprs=_j_from_rows(kt_j, xyzt),
            domain=((0.0, 1.0),) * 4,
            compact=True,
            tags=frozenset({"almost-kahler", "constant-s"}),
            notes="strictly almost Kahler (d Omega = 0, N_J != 0); left-invariant",
        )
    )

    # Round-sphere conformal factor exp(2f) delta with f = log(2/(1+r^2)).
    rc_diag = "4/(1 + x^2 + y^2 + z^2 + t^2)^2"
    specs.append(
        ManifoldSpec(
            id="round_conformal",
            coords=xyzt,
            metric_exprs=_diag_metric([rc_diag] * 4, xyzt),
            j_exprs=j_std,
            domain=((-0.8, 0.8),) * 4,
            compact=False,
            tags=frozenset({"einstein", "constant-s", "conformally-flat"}),
            notes="round S^4 in stereographic chart; standard J is Hermitian non-Kahler here",
        )
    )

    # Flat metric with a compatible but non-closed, non-integrable J:
    # rotate the standard J toward I by angle 0.3 sin(x).
    th = "0.3*sin(x)"
    pj = (
        ("0", f"-cos({th})", f"-sin({th})", "0"),
        (f"cos({th})", "0", "0", f"sin({th})"),
        (f"sin({th})", "0", "0", f"-cos({th})"),
        ("0", f"-sin({th})", f"cos({th})", "0"),
    )
    specs.append(
        ManifoldSpec(
            id="perturbed_j",
            coords=xyzt,
            metric_exprs=flat_metric,
            j_exprs=_j_from_rows(pj, xyzt),
            domain=((-1.0, 1.0),) * 4,
            compact=False,
            tags=frozenset({"flat", "constant-s"}),
            notes="generic almost Hermitian: d Omega != 0 and N_J != 0",
        )
    )
    return specs


def get_manifold(name: str) -> ManifoldSpec:
    for spec in builtin_manifolds():
        if spec.id == name:
            return spec
    raise CatalogError(f"unknown manifold '{name}'")


def conformally_rescaled(spec: ManifoldSpec, f_text: str, new_id: Optional[str] = None) -> ManifoldSpec:
    """Spec for gbar = exp(f) g with f given as an expression string."""
    f = parse_expression(f_text, spec.coords)
    factor = exprjet.Call("exp", f)
    new_metric = tuple(
        tuple(exprjet.BinOp("*", factor, e) for e in row) for row in spec.metric_exprs
    )
    return replace(
        spec,
        id=new_id or f"{spec.id}_conformal",
        metric_exprs=new_metric,
        tags=frozenset(),
        notes=f"conformal rescaling of {spec.id} by exp({f_text})",
    )


# ---------------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------------


def load_manifold_config(path: str) -> ManifoldSpec:
    """Load and eagerly validate a manifold config file.

    Raises :class:`CatalogError` with every violated invariant (and the
    worst sample points) rather than stopping at the first problem.
    """
    parser = configparser.ConfigParser(delimiters=("=",), inline_comment_prefixes=("#", ";"))
    parser.optionxform = str  # keys are case sensitive (coordinate names)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except FileNotFoundError:
        raise CatalogError(f"config file not found: {path}")
    except configparser.Error as exc:
        raise CatalogError(f"config parse error in {path}: {exc}")

    if "manifold" not in parser:
        raise CatalogError("config missing [manifold] section")
    man = parser["manifold"]
    mid = man.get("id", "").strip()
    if not mid:
        raise CatalogError("[manifold] must set 'id'")
    coords = tuple(c.strip() for c in man.get("coords", "").split(",") if c.strip())
    if len(coords) != 4:
        raise CatalogError(f"exactly 4 coordinates required, got {len(coords)} ({coords})")
    compact = man.get("compact", "false").strip().lower() in ("true", "yes", "1")

    domain_text = man.get("domain", "")
    intervals = [part.strip() for part in domain_text.split(",") if part.strip()]
    if len(intervals) != 4:
        raise CatalogError(f"'domain' must give 4 intervals 'lo..hi', got {domain_text!r}")
    domain = []
    for part in intervals:
        try:
            lo_s, hi_s = part.split("..")
            lo, hi = float(lo_s), float(hi_s)
        except ValueError:
            raise CatalogError(f"bad domain interval {part!r} (expected 'lo..hi')")
        if not lo < hi:
            raise CatalogError(f"empty domain interval {part!r}")
        domain.append((lo, hi))

    if "metric" not in parser:
        raise CatalogError("config missing [metric] section")

    def parse_entry(section: str, key: str, text: str) -> Expr:
        try:
            return parse_expression(text, coords)
        except exprjet.ExpressionError as exc:
            raise CatalogError(f"[{section}] {key}: {exc}")

    metric_entries: dict[tuple[int, int], Expr] = {}
    for key, text in parser["metric"].items():
        idx = _metric_key(key)
        if idx is None:
            raise CatalogError(f"[metric] unrecognized key '{key}' (expected g_11 .. g_44)")
        metric_entries[idx] = parse_entry("metric", key, text)
    for i in range(4):
        if (i, i) not in metric_entries:
            raise CatalogError(f"[metric] missing diagonal entry g_{i+1}{i+1}")

    zero = exprjet.Num(0.0)
    metric_grid = []
    sym_conflicts = []
    for i in range(4):
        row = []
        for j in range(4):
            a = metric_entries.get((i, j))
            b = metric_entries.get((j, i))
            if a is not None and b is not None and i != j and a != b:
                sym_conflicts.append((i, j, a, b))
            row.append(a if a is not None else (b if b is not None else zero))
        metric_grid.append(tuple(row))
    metric_grid = tuple(metric_grid)

    j_grid = None
    if "structure" in parser and list(parser["structure"].keys()):
        j_entries: dict[tuple[int, int], Expr] = {}
        for key, text in parser["structure"].items():
            idx = _structure_key(key)
            if idx is None:
                raise CatalogError(f"[structure] unrecognized key '{key}' (expected J_1_1 .. J_4_4)")
            j_entries[idx] = parse_entry("structure", key, text)
        j_grid = tuple(tuple(j_entries.get((i, j), zero) for j in range(4)) for i in range(4))

    tags: frozenset = frozenset()
    if "tags" in parser and parser["tags"].get("tags", "").strip():
        tags = frozenset(normalize_tag(t) for t in parser["tags"]["tags"].split(",") if t.strip())
        unknown = tags - set(KNOWN_TAGS)
        if unknown:
            raise CatalogError(f"[tags] unknown tags {sorted(unknown)}; known: {KNOWN_TAGS}")

    spec = ManifoldSpec(
        id=mid,
        coords=coords,
        metric_exprs=metric_grid,
        j_exprs=j_grid,
        domain=tuple(domain),
        compact=compact,
        tags=tags,
        notes=f"loaded from {path}",
    )

    violations = [
        f"metric entries g_{i+1}{j+1} and g_{j+1}{i+1} differ textually "
        f"({expr_to_string(a)!r} vs {expr_to_string(b)!r})"
        for i, j, a, b in sym_conflicts
        if not _numerically_equal(a, b, spec)
    ]
    violations += validate_spec(spec)
    if violations:
        raise CatalogError(
            f"manifold '{mid}' failed validation:\n  - " + "\n  - ".join(violations)
        )
    return spec


def _metric_key(key: str):
    key = key.strip()
    if key.startswith("g_"):
        digits = key[2:].replace("_", "")
        if len(digits) == 2 and digits.isdigit():
            i, j = int(digits[0]) - 1, int(digits[1]) - 1
            if 0 <= i < 4 and 0 <= j < 4:
                return (i, j)
    return None


def _structure_key(key: str):
    key = key.strip()
    if key.startswith("J_") or key.startswith("j_"):
        digits = key[2:].replace("_", "")
        if len(digits) == 2 and digits.isdigit():
            i, j = int(digits[0]) - 1, int(digits[1]) - 1
            if 0 <= i < 4 and 0 <= j < 4:
                return (i, j)
    return None


def _numerically_equal(a: Expr, b: Expr, spec: ManifoldSpec, n: int = 20) -> bool:
    rng = np.random.default_rng(0)
    pts = spec.sample_points(n, rng)
    va = np.array([eval_values(a, list(p)) for p in pts], dtype=float)
    vb = np.array([eval_values(b, list(p)) for p in pts], dtype=float)
    scale = max(np.abs(va).max(), np.abs(vb).max(), 1.0)
    return bool(np.abs(va - vb).max() <= 1e-10 * scale)


def validate_spec(spec: ManifoldSpec, n_samples: int = 20, seed: int = 0) -> list[str]:
    """Numeric invariants at random domain points; returns all violations."""
    rng = np.random.default_rng(seed)
    pts = spec.sample_points(n_samples, rng)
    violations = []

    worst_sym, worst_sym_pt = 0.0, None
    worst_spd_pt = None
    for p in pts:
        try:
            g = np.array(
                [
                    [float(eval_values(spec.metric_exprs[i][j], list(p))) for j in range(4)]
                    for i in range(4)
                ]
            )
        except exprjet.ExpressionError as exc:
            violations.append(f"metric evaluation failed at {p.tolist()}: {exc}")
            return violations
        scale = max(np.abs(g).max(), 1.0)
        asym = np.abs(g - g.T).max() / scale
        if asym > worst_sym:
            worst_sym, worst_sym_pt = asym, p
        eig = np.linalg.eigvalsh(0.5 * (g + g.T))
        if eig[0] <= 1e-12 * max(eig[-1], 1e-300) and worst_spd_pt is None:
            worst_spd_pt = (p, eig)
    if worst_sym > 1e-10:
        violations.append(
            f"metric not symmetric: residual {worst_sym:.3e} at {np.asarray(worst_sym_pt).tolist()}"
        )
    if worst_spd_pt is not None:
        p, eig = worst_spd_pt
        violations.append(f"metric not positive definite at {p.tolist()}: eigenvalues {eig}")

    if spec.has_j and worst_spd_pt is None:
        worst_sq, worst_sq_pt = 0.0, None
        worst_ad, worst_ad_pt = 0.0, None
        for p in pts:
            mp = spec.metric_point(p, order=0)
            J = spec.j_matrix(p)
            r_sq = np.abs(J @ J + np.eye(4)).max()
            r_ad = np.abs(adjoint_endo(J, mp) + J).max()
            if r_sq > worst_sq:
                worst_sq, worst_sq_pt = r_sq, p
            if r_ad > worst_ad:
                worst_ad, worst_ad_pt = r_ad, p
        if worst_sq > 1e-10:
            violations.append(
                f"J^2 != -1: residual {worst_sq:.3e} at {np.asarray(worst_sq_pt).tolist()}"
            )
        if worst_ad > 1e-10:
            violations.append(
                f"J not g-skew: residual {worst_ad:.3e} at {np.asarray(worst_ad_pt).tolist()}"
            )
    return violations


def spec_to_config(spec: ManifoldSpec) -> str:
    """Render a spec in the config-file format (round-trip convenience)."""
    buf = io.StringIO()
    buf.write("[manifold]\n")
    buf.write(f"id = {spec.id}\n")
    buf.write(f"coords = {', '.join(spec.coords)}\n")
    buf.write(f"compact = {str(spec.compact).lower()}\n")
    buf.write("domain = " + ", ".join(f"{lo}..{hi}" for lo, hi in spec.domain) + "\n\n")
    buf.write("[metric]\n")
    for i in range(4):
        for j in range(i, 4):
            text = expr_to_string(spec.metric_exprs[i][j])
            if text != "0.0" or i == j:
                buf.write(f"g_{i+1}{j+1} = {text}\n")
    if spec.has_j:
        buf.write("\n[structure]\n")
        for i in range(4):
            for j in range(4):
                text = expr_to_string(spec.j_exprs[i][j])
                if text != "0.0":
                    buf.write(f"J_{i+1}_{j+1} = {text}\n")
    if spec.tags:
        buf.write("\n[tags]\n")
        buf.write("tags = " + ", ".join(sorted(spec.tags)) + "\n")
    return buf.getvalue()
