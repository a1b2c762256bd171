"""Box-regression loss components, the composite MKS loss, and baselines.

Component formulas for a prediction p against a ground truth g, written in
center-size coordinates (Δcx = cx_g − cx_p, etc.):

  angle       Λ = cos(2·(arcsin(x) − π/4)),  x = |Δcy| / σ  (σ = center
              distance; x clamped below 1 before arcsin)
  distance    Δ = 2 − e^{−γ·ρx} − e^{−γ·ρy},  γ = 2 − Λ,
              ρx = (Δcx / c_w)², ρy = (Δcy / c_h)² with c_w, c_h the
              smallest-enclosing-box width/height
  shape       Ω = (1 − e^{−ωw})^θ + (1 − e^{−ωh})^θ,
              ωw = |w − w_g| / max(w, w_g), ωh likewise; θ defaults to 4
  iou cost    1 − IoU

The composite ("mks") total weights the IoU cost by a negative-IoU factor
coming from the transport-matching stage:

  total = negative_iou · (1 − IoU) + (Δ + Ω) / 2

On the equal-cardinality uniform matching problems produced here the
negative-IoU factor collapses to 1 − IoU, making the first term a squared
IoU gap. The conventional additive form 1 − IoU + (Δ + Ω)/2 is available as
baseline kind "siou", next to "giou", "diou", and "ciou".

Gradients are forward-mode algorithmic derivatives over (cx, cy, w, h) of
the prediction box; non-differentiable configurations (branch ties,
coincident centers, the arcsin clamp) are detected and flagged rather than
returning NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import dual as dm
from .boxes import AABox, iou as _box_iou

__all__ = [
    "DEFAULT_THETA", "GRADIENT_KINDS", "BASELINE_KINDS",
    "LossBreakdown", "GradientResult",
    "angle_cost", "distance_cost", "shape_cost", "mks_loss",
    "baseline_loss", "loss_value", "loss_gradient", "singularity_reasons",
]

DEFAULT_THETA = 4.0

_SIGMA_TINY = 1e-9
_X_CLAMP = 1.0 - 1e-7

BASELINE_KINDS = ("giou", "diou", "ciou", "siou")
GRADIENT_KINDS = ("angle", "distance", "shape", "iou_cost", "mks") + BASELINE_KINDS

# kinds whose surface contains each family of branch points
_ANGLE_KINDS = frozenset({"angle", "distance", "mks", "siou"})
_CORNER_KINDS = frozenset({"distance", "iou_cost", "mks", "siou", "giou", "diou", "ciou"})
_OVERLAP_KINDS = frozenset({"iou_cost", "mks", "siou", "giou", "diou", "ciou"})
_SHAPE_KINDS = frozenset({"shape", "mks", "siou"})


@dataclass(frozen=True)
class LossBreakdown:
    """Per-component view of one mks_loss evaluation.

    gamma_dist is the distance-cost exponent γ = 2 − Λ (unrelated to any
    other γ in this package).
    """

    angle_cost: float
    distance_cost: float
    shape_cost: float
    iou_cost: float
    negative_iou: float
    total: float
    gamma_dist: float


@dataclass(frozen=True)
class GradientResult:
    """Value and d/d(cx, cy, w, h) of the prediction box for one loss kind.

    singular is True when the pair sits within singular_tol of a branch
    point; the gradient then is the one-sided derivative of the branch the
    primal values select (the zero vector for exactly identical boxes).
    """

    value: float
    grad: tuple[float, float, float, float]
    singular: bool
    reasons: tuple[str, ...]


def _check_theta(theta: float) -> float:
    theta = float(theta)
    if not math.isfinite(theta) or theta < 1.0:
        raise ValueError(f"theta must be >= 1, got {theta!r}")
    return theta


def _fields(b: AABox) -> tuple[float, float, float, float]:
    return (b.cx, b.cy, b.w, b.h)


def _corners(f):
    cx, cy, w, h = f
    return cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0


# ---------------------------------------------------------------------------
# generic cores: work on plain floats or dual numbers alike
# ---------------------------------------------------------------------------

def _angle_core(pf, gf):
    dx = gf[0] - pf[0]
    dy = gf[1] - pf[1]
    sigma = dm.sqrt(dx * dx + dy * dy)
    if dm.value(sigma) < _SIGMA_TINY:
        # coincident centers: x = 0/0 is undefined; 0 is the limit along
        # axis-aligned approach paths and the distance cost vanishes here
        # anyway, so Λ's value is inert
        return 0.0
    x = dm.fabs(dy) / sigma
    x = dm.vmin(x, _X_CLAMP)  # keep arcsin' finite at the x = 1 endpoint
    return dm.cos(2.0 * (dm.arcsin(x) - math.pi / 4.0))


def _distance_core(pf, gf, lam):
    px1, py1, px2, py2 = _corners(pf)
    gx1, gy1, gx2, gy2 = _corners(gf)
    cw = dm.vmax(px2, gx2) - dm.vmin(px1, gx1)
    ch = dm.vmax(py2, gy2) - dm.vmin(py1, gy1)
    gamma = 2.0 - lam
    tx = (gf[0] - pf[0]) / cw
    ty = (gf[1] - pf[1]) / ch
    return 2.0 - dm.exp(-(gamma * (tx * tx))) - dm.exp(-(gamma * (ty * ty)))


def _shape_core(pf, gf, theta):
    pw, ph, gw, gh = pf[2], pf[3], gf[2], gf[3]
    ww = dm.fabs(pw - gw) / dm.vmax(pw, gw)
    wh = dm.fabs(ph - gh) / dm.vmax(ph, gh)
    return (1.0 - dm.exp(-ww)) ** theta + (1.0 - dm.exp(-wh)) ** theta


def _overlap_terms(pf, gf):
    """(iou, union); mirrors boxes.iou operation for operation."""
    px1, py1, px2, py2 = _corners(pf)
    gx1, gy1, gx2, gy2 = _corners(gf)
    iw = dm.vmin(px2, gx2) - dm.vmax(px1, gx1)
    ih = dm.vmin(py2, gy2) - dm.vmax(py1, gy1)
    if dm.value(iw) <= 0.0 or dm.value(ih) <= 0.0:
        inter = 0.0
    else:
        inter = iw * ih
    area_p = (px2 - px1) * (py2 - py1)
    area_g = (gx2 - gx1) * (gy2 - gy1)
    union = area_p + area_g - inter
    return inter / union, union


def _iou_core(pf, gf):
    return _overlap_terms(pf, gf)[0]


def _mks_core(pf, gf, theta, negative_iou):
    lam = _angle_core(pf, gf)
    delta = _distance_core(pf, gf, lam)
    omega = _shape_core(pf, gf, theta)
    iuc = 1.0 - _iou_core(pf, gf)
    niou = iuc if negative_iou is None else negative_iou
    return niou * iuc + (delta + omega) / 2.0


def _siou_core(pf, gf, theta):
    lam = _angle_core(pf, gf)
    delta = _distance_core(pf, gf, lam)
    omega = _shape_core(pf, gf, theta)
    return 1.0 - _iou_core(pf, gf) + (delta + omega) / 2.0


def _giou_core(pf, gf):
    iou_v, union = _overlap_terms(pf, gf)
    px1, py1, px2, py2 = _corners(pf)
    gx1, gy1, gx2, gy2 = _corners(gf)
    hull = (dm.vmax(px2, gx2) - dm.vmin(px1, gx1)) * (dm.vmax(py2, gy2) - dm.vmin(py1, gy1))
    return 1.0 - iou_v + (hull - union) / hull


def _diou_core(pf, gf):
    iou_v, _ = _overlap_terms(pf, gf)
    px1, py1, px2, py2 = _corners(pf)
    gx1, gy1, gx2, gy2 = _corners(gf)
    cw = dm.vmax(px2, gx2) - dm.vmin(px1, gx1)
    ch = dm.vmax(py2, gy2) - dm.vmin(py1, gy1)
    dx = gf[0] - pf[0]
    dy = gf[1] - pf[1]
    return 1.0 - iou_v + (dx * dx + dy * dy) / (cw * cw + ch * ch)


def _ciou_core(pf, gf):
    base = _diou_core(pf, gf)
    iou_v = _iou_core(pf, gf)
    k = 4.0 / (math.pi * math.pi)
    t = dm.atan(gf[2] / gf[3]) - dm.atan(pf[2] / pf[3])
    v = k * (t * t)
    denom = (1.0 - iou_v) + v
    if dm.value(denom) < 1e-12:
        # p ≅ g: the aspect term α·v = v²/denom is 0/0; both gaps vanish,
        # so the term is dropped (flagged singular by the gradient path)
        return base
    return base + (v * v) / denom


def _dispatch(kind, pf, gf, theta, negative_iou):
    if kind == "angle":
        return _angle_core(pf, gf)
    if kind == "distance":
        return _distance_core(pf, gf, _angle_core(pf, gf))
    if kind == "shape":
        return _shape_core(pf, gf, theta)
    if kind == "iou_cost":
        return 1.0 - _iou_core(pf, gf)
    if kind == "mks":
        return _mks_core(pf, gf, theta, negative_iou)
    if kind == "siou":
        return _siou_core(pf, gf, theta)
    if kind == "giou":
        return _giou_core(pf, gf)
    if kind == "diou":
        return _diou_core(pf, gf)
    if kind == "ciou":
        return _ciou_core(pf, gf)
    raise ValueError(f"unknown loss kind {kind!r}; expected one of {GRADIENT_KINDS}")


def _norm_kind(kind: str) -> str:
    k = str(kind).strip().lower().replace("_", "-")
    if k in ("siou-standard", "siou-std"):
        k = "siou"
    k = k.replace("iou-cost", "iou_cost")
    if k not in GRADIENT_KINDS:
        raise ValueError(f"unknown loss kind {kind!r}; expected one of {GRADIENT_KINDS}")
    return k


# ---------------------------------------------------------------------------
# public component / loss values
# ---------------------------------------------------------------------------

def angle_cost(p: AABox, g: AABox) -> float:
    """Angle cost Λ ∈ [0, 1]; 0 at axis alignment, 1 at 45° alignment."""
    return float(_angle_core(_fields(p), _fields(g)))


def distance_cost(p: AABox, g: AABox, lam: float) -> float:
    """Distance cost Δ ∈ [0, 2) given the precomputed angle cost lam."""
    lam = float(lam)
    if not (-1e-12 <= lam <= 1.0 + 1e-12):
        raise ValueError(f"lam must be an angle cost in [0, 1], got {lam!r}")
    return float(_distance_core(_fields(p), _fields(g), lam))


def shape_cost(p: AABox, g: AABox, theta: float = DEFAULT_THETA) -> float:
    """Shape cost Ω ∈ [0, 2); symmetric in the two boxes' sizes."""
    theta = _check_theta(theta)
    return float(_shape_core(_fields(p), _fields(g), theta))


def mks_loss(p: AABox, g: AABox, negative_iou: float,
             theta: float = DEFAULT_THETA) -> LossBreakdown:
    """Composite loss with full per-component breakdown.

    negative_iou is supplied by the matching stage (or the caller); on
    equal-cardinality uniform matching it equals 1 − IoU(p, g).
    """
    theta = _check_theta(theta)
    negative_iou = float(negative_iou)
    if not math.isfinite(negative_iou):
        raise ValueError(f"negative_iou must be finite, got {negative_iou!r}")
    pf, gf = _fields(p), _fields(g)
    lam = float(_angle_core(pf, gf))
    delta = float(_distance_core(pf, gf, lam))
    omega = float(_shape_core(pf, gf, theta))
    iuc = 1.0 - _box_iou(p, g)
    total = negative_iou * iuc + (delta + omega) / 2.0
    return LossBreakdown(angle_cost=lam, distance_cost=delta, shape_cost=omega,
                         iou_cost=iuc, negative_iou=negative_iou, total=total,
                         gamma_dist=2.0 - lam)


def baseline_loss(kind: str, p: AABox, g: AABox, theta: float = DEFAULT_THETA) -> float:
    """One of the comparison losses: giou, diou, ciou, or siou (additive)."""
    k = _norm_kind(kind)
    if k not in BASELINE_KINDS:
        raise ValueError(f"unknown baseline kind {kind!r}; expected one of {BASELINE_KINDS}")
    return loss_value(k, p, g, theta=theta)


def loss_value(kind: str, p: AABox, g: AABox, *,
               theta: float = DEFAULT_THETA, negative_iou=None) -> float:
    """Scalar value of any gradient-checkable kind (components included).

    For kind "mks" with negative_iou=None the factor is the collapsed
    self-consistent 1 − IoU(p, g); passing a number treats it as a constant.
    """
    k = _norm_kind(kind)
    theta = _check_theta(theta)
    return float(_dispatch(k, _fields(p), _fields(g), theta, negative_iou))


# ---------------------------------------------------------------------------
# gradients
# ---------------------------------------------------------------------------

def singularity_reasons(kind: str, p: AABox, g: AABox, tol: float = 1e-9) -> tuple[str, ...]:
    """Branch points of the given kind within tol of this pair.

    The loss surfaces are piecewise smooth; listed here are the boundaries
    (min/max/abs ties, the arcsin clamp, coincident centers, the edge of
    the zero-overlap plateau, the ciou aspect-term pole) where one-sided
    derivatives disagree. Distances are in the boxes' coordinate units.
    """
    k = _norm_kind(kind)
    out = []

    def near(margin, name):
        if margin < tol:
            out.append(name)

    dx = g.cx - p.cx
    dy = g.cy - p.cy
    sigma = math.hypot(dx, dy)
    if k in _ANGLE_KINDS:
        near(sigma, "coincident-centers")
        if sigma >= tol:
            near(abs(dy), "angle-x-zero")
            near(sigma - abs(dy), "angle-x-one")
    if k in _CORNER_KINDS:
        near(abs(p.x1 - g.x1), "corner-tie-x1")
        near(abs(p.x2 - g.x2), "corner-tie-x2")
        near(abs(p.y1 - g.y1), "corner-tie-y1")
        near(abs(p.y2 - g.y2), "corner-tie-y2")
    if k in _OVERLAP_KINDS:
        near(abs(min(p.x2, g.x2) - max(p.x1, g.x1)), "overlap-x-edge")
        near(abs(min(p.y2, g.y2) - max(p.y1, g.y1)), "overlap-y-edge")
    if k in _SHAPE_KINDS:
        near(abs(p.w - g.w), "equal-widths")
        near(abs(p.h - g.h), "equal-heights")
    if k == "ciou":
        t = math.atan(g.w / g.h) - math.atan(p.w / p.h)
        v = 4.0 / (math.pi * math.pi) * t * t
        near((1.0 - _box_iou(p, g)) + v, "ciou-alpha-pole")
    return tuple(out)


def loss_gradient(kind: str, p: AABox, g: AABox, *,
                  theta: float = DEFAULT_THETA, negative_iou=None,
                  singular_tol: float = 1e-9) -> GradientResult:
    """Analytic d/d(cx, cy, w, h) of the prediction box for one loss kind.

    Forward-mode duals through the same formulas as loss_value, so value
    and gradient always describe the same function. At exactly identical
    boxes the (sub)gradient convention is the zero vector, flagged
    singular; near-branch-point pairs (within singular_tol) keep their
    one-sided derivative but are flagged so callers can exclude them from
    finite-difference comparisons.
    """
    k = _norm_kind(kind)
    theta = _check_theta(theta)
    if negative_iou is not None:
        negative_iou = float(negative_iou)
        if not math.isfinite(negative_iou):
            raise ValueError(f"negative_iou must be finite, got {negative_iou!r}")
    if p == g:
        val = loss_value(k, p, g, theta=theta, negative_iou=negative_iou)
        return GradientResult(val, (0.0, 0.0, 0.0, 0.0), True, ("identical-boxes",))
    reasons = singularity_reasons(k, p, g, tol=singular_tol)
    pd = dm.seed(_fields(p))
    out = _dispatch(k, pd, _fields(g), theta, negative_iou)
    return GradientResult(dm.value(out), dm.grad(out), bool(reasons), reasons)
