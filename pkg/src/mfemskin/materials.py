"""Material energy models over the symmetric deformation 6-vector.

Energies are expressed directly in the 6-vector parameterization of the
symmetric stretch, so with the rotation supplied by the rig both shipped
models are quadratic: their 6x6 Hessian blocks are constant across frames and
the whole solve stays linear.  The interface (value, gradient, hessian, all
vectorized over elements) accepts other models too; a non-quadratic one just
loses the Hessian-reuse fast path.

Energy forms, with S = mat(s):
    arap:          mu * ||S - I||_F^2
    corotational:  mu * ||S - I||_F^2 + (lambda/2) * tr(S - I)^2
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .geometry import TetMesh
from .symvec import SYM_IDENTITY, SYM_WEIGHTS

TRACE_VECTOR = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])


class MaterialConfigError(Exception):
    """Bad material configuration or override table."""


class MaterialModel:
    """Energy in 6-vector space; subclasses supply value/gradient/hessian.

    All three methods are vectorized: s has shape (..., 6) and mu/lam
    broadcast against its leading dimensions.
    """

    name: str = "base"
    is_quadratic: bool = False

    def energy(self, s, mu, lam):
        raise NotImplementedError

    def gradient(self, s, mu, lam):
        raise NotImplementedError

    def hessian(self, s, mu, lam):
        raise NotImplementedError


class ArapModel(MaterialModel):
    """mu * ||mat(s) - I||_F^2; off-diagonals carry their factor-2 weight."""

    name = "arap"
    is_quadratic = True

    def energy(self, s, mu, lam):
        d = np.asarray(s) - SYM_IDENTITY
        return np.asarray(mu) * (d * d * SYM_WEIGHTS).sum(axis=-1)

    def gradient(self, s, mu, lam):
        d = np.asarray(s) - SYM_IDENTITY
        return 2.0 * np.asarray(mu)[..., None] * SYM_WEIGHTS * d

    def hessian(self, s, mu, lam):
        s = np.asarray(s)
        base = 2.0 * np.diag(SYM_WEIGHTS)
        return np.asarray(mu)[..., None, None] * base


class CorotationalModel(MaterialModel):
    """ARAP term plus (lambda/2) tr(mat(s) - I)^2 volumetric stiffening."""

    name = "corotational"
    is_quadratic = True

    def energy(self, s, mu, lam):
        d = np.asarray(s) - SYM_IDENTITY
        dev = np.asarray(mu) * (d * d * SYM_WEIGHTS).sum(axis=-1)
        tr = d @ TRACE_VECTOR
        return dev + 0.5 * np.asarray(lam) * tr * tr

    def gradient(self, s, mu, lam):
        d = np.asarray(s) - SYM_IDENTITY
        tr = d @ TRACE_VECTOR
        return (
            2.0 * np.asarray(mu)[..., None] * SYM_WEIGHTS * d
            + np.asarray(lam * tr)[..., None] * TRACE_VECTOR
        )

    def hessian(self, s, mu, lam):
        s = np.asarray(s)
        base = 2.0 * np.diag(SYM_WEIGHTS)
        vol = np.outer(TRACE_VECTOR, TRACE_VECTOR)
        return (
            np.asarray(mu)[..., None, None] * base
            + np.asarray(lam)[..., None, None] * vol
        )


MODELS: dict[str, MaterialModel] = {
    ArapModel.name: ArapModel(),
    CorotationalModel.name: CorotationalModel(),
}


@dataclass
class MaterialOverride:
    """Replacement parameters for an explicit set of elements."""

    elements: np.ndarray
    mu: float | None = None
    lam: float | None = None


@dataclass
class MaterialParams:
    """Base parameters plus optional per-element overrides.

    mu must be positive; lam is only meaningful for models with a volumetric
    term and must be non-negative.
    """

    model: str = "arap"
    mu: float = 1e3
    lam: float = 0.0
    overrides: list[MaterialOverride] = field(default_factory=list)

    def __post_init__(self):
        if self.model not in MODELS:
            raise MaterialConfigError(
                f"unknown material model {self.model!r}; choose from {sorted(MODELS)}"
            )
        if self.mu <= 0:
            raise MaterialConfigError("mu must be positive")
        if self.lam < 0:
            raise MaterialConfigError("lambda must be non-negative")

    @property
    def model_impl(self) -> MaterialModel:
        return MODELS[self.model]

    def per_element(self, num_tets: int) -> tuple[np.ndarray, np.ndarray]:
        """Resolve (mu, lam) arrays of length num_tets, applying overrides."""
        mu = np.full(num_tets, self.mu)
        lam = np.full(num_tets, self.lam)
        for ov in self.overrides:
            el = np.asarray(ov.elements, dtype=np.int64)
            if el.size and (el.min() < 0 or el.max() >= num_tets):
                raise MaterialConfigError(
                    f"override references element {int(el.max())} outside mesh of {num_tets} tets"
                )
            if ov.mu is not None:
                if ov.mu <= 0:
                    raise MaterialConfigError("override mu must be positive")
                mu[el] = ov.mu
            if ov.lam is not None:
                lam[el] = ov.lam
        return mu, lam


@dataclass
class ElementEnergyData:
    """Volume-scaled per-element Hessian block and gradient."""

    hessian: np.ndarray  # (6, 6)
    gradient: np.ndarray  # (6,)


def energy_value(params: MaterialParams, s: np.ndarray) -> float:
    """Energy density of one symmetric 6-vector under the base parameters."""
    return float(params.model_impl.energy(np.asarray(s), params.mu, params.lam))


def element_gradient_hessian(
    params: MaterialParams, s: np.ndarray, w_k: float
) -> ElementEnergyData:
    """Exact analytic gradient and Hessian at s, scaled by element volume."""
    if w_k <= 0:
        raise MaterialConfigError("element volume must be positive")
    model = params.model_impl
    s = np.asarray(s, dtype=np.float64)
    return ElementEnergyData(
        hessian=w_k * model.hessian(s, params.mu, params.lam),
        gradient=w_k * model.gradient(s, params.mu, params.lam),
    )


def element_blocks(
    mesh: TetMesh, params: MaterialParams, s_values: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Volume-scaled Hessian blocks (m, 6, 6) and gradients (m, 6) for all elements.

    s_values defaults to the rest stretch (identity) per element, the
    linearization point at which quadratic models are exact for all frames.
    """
    m = mesh.num_tets
    if s_values is None:
        s_values = np.tile(SYM_IDENTITY, (m, 1))
    s_values = np.asarray(s_values, dtype=np.float64)
    if s_values.shape != (m, 6):
        raise MaterialConfigError(f"s_values must be ({m}, 6), got {s_values.shape}")
    mu, lam = params.per_element(m)
    model = params.model_impl
    w = mesh.volumes
    H = model.hessian(s_values, mu, lam) * w[:, None, None]
    g = model.gradient(s_values, mu, lam) * w[:, None]
    return H, g


def assemble_global_Hs_gs(
    mesh: TetMesh, params: MaterialParams, s_values: np.ndarray | None = None
) -> tuple[sp.csr_matrix, np.ndarray]:
    """Block-diagonal global Hessian (6m, 6m) and stacked gradient (6m,).

    Blocks sit in element order.  For quadratic models evaluated at the rest
    stretch the result is reusable across every frame.
    """
    H, g = element_blocks(mesh, params, s_values)
    return sp.block_diag(list(H), format="csr"), g.ravel()


# ---------------------------------------------------------------------------
# Material config JSON
# ---------------------------------------------------------------------------

def material_from_dict(data: dict, base_dir=None) -> MaterialParams:
    """Parse {"model", "mu", "lambda", "overrides": [...]}.

    Each override names its elements either inline ("elements": [ints]) or via
    "region_file", a JSON file holding the index array.
    """
    overrides = []
    for i, ov in enumerate(data.get("overrides", [])):
        if "elements" in ov:
            elements = np.asarray(ov["elements"], dtype=np.int64)
        elif "region_file" in ov:
            path = ov["region_file"]
            if base_dir is not None:
                import os

                path = os.path.join(base_dir, path)
            with open(path) as fh:
                elements = np.asarray(json.load(fh), dtype=np.int64)
        else:
            raise MaterialConfigError(f"override {i} needs 'elements' or 'region_file'")
        overrides.append(
            MaterialOverride(
                elements=elements,
                mu=ov.get("mu"),
                lam=ov.get("lambda"),
            )
        )
    return MaterialParams(
        model=data.get("model", "arap"),
        mu=float(data.get("mu", 1e3)),
        lam=float(data.get("lambda", 0.0)),
        overrides=overrides,
    )


def load_material(path) -> MaterialParams:
    import os

    with open(path) as fh:
        data = json.load(fh)
    return material_from_dict(data, base_dir=os.path.dirname(os.fspath(path)))


def material_to_dict(params: MaterialParams) -> dict:
    out = {"model": params.model, "mu": params.mu, "lambda": params.lam}
    if params.overrides:
        out["overrides"] = [
            {
                "elements": [int(e) for e in ov.elements],
                **({"mu": ov.mu} if ov.mu is not None else {}),
                **({"lambda": ov.lam} if ov.lam is not None else {}),
            }
            for ov in params.overrides
        ]
    return out
