"""Mixed diffuse/specular reflectance with an isotropic gaussian-roughness lobe.

The reflectance is

    f = mu * kd / pi  +  (1 - mu) * ks * S

where S is the isotropic specular lobe

    S = exp(-tan^2(delta) / sigma^2) / (4 pi sigma^2 sqrt(cos_i cos_o))

and delta is the angle between the half vector h = wi + wo and the surface
normal.  The sqrt(cos_i cos_o) normalisation makes the lobe
Helmholtz-reciprocal.  For unit directions the half-vector geometry reduces
to dot products (|h|^2 = 2 + 2 wi.wo and h.n = cos_i + cos_o), which is how
it is evaluated here; all direction arguments must therefore be unit length.

An energy-bounded variant ("balanced") is available behind a flag:

    S = exp(-tan^2(delta) / sigma^2) * |h|^2 / (pi sigma^2 (h . n)^4)
"""

from __future__ import annotations

import numpy as np

from .errors import BelowHorizon
from .scene import WardMaterial

# A perfect-mirror delta lobe is not representable in a sampled integrator.
SIGMA_FLOOR = 1e-3

_COS_EPS = 1e-9


def ward_reflectance(
    material: WardMaterial,
    normal: np.ndarray,
    incoming: np.ndarray,
    outgoing: np.ndarray,
    variant: str = "classic",
) -> np.ndarray:
    """Vectorised reflectance; broadcasts over leading axes.

    Directions are unit vectors pointing away from the surface.  Geometry
    with either direction at or below the horizon contributes zero instead
    of raising, which is what the renderer needs when it clamps grazing
    bounce paths.
    """
    n = np.asarray(normal, dtype=np.float64)
    wi = np.asarray(incoming, dtype=np.float64)
    wo = np.asarray(outgoing, dtype=np.float64)

    cos_i = np.sum(wi * n, axis=-1)
    cos_o = np.sum(wo * n, axis=-1)
    ok = (cos_i > _COS_EPS) & (cos_o > _COS_EPS)

    sigma = max(material.sigma, SIGMA_FLOOR)
    s2 = sigma * sigma

    h_dot_n = cos_i + cos_o
    h_sq = 2.0 + 2.0 * np.sum(wi * wo, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        tan2 = h_sq / (h_dot_n * h_dot_n) - 1.0
        gauss = np.exp(-tan2 / s2)
        if variant == "classic":
            lobe = gauss / (4.0 * np.pi * s2 * np.sqrt(cos_i * cos_o))
        elif variant == "balanced":
            lobe = gauss * h_sq / (np.pi * s2 * h_dot_n**4)
        else:
            raise ValueError(f"unknown reflectance variant {variant!r}")
        f = material.mu * material.kd / np.pi + (1.0 - material.mu) * material.ks * lobe
    return np.where(ok, f, 0.0)


def eval_brdf(
    material: WardMaterial,
    normal: np.ndarray,
    incoming: np.ndarray,
    outgoing: np.ndarray,
    variant: str = "classic",
) -> float:
    """Scalar reflectance for unit direction vectors in the upper hemisphere.

    Raises BelowHorizon when either direction has non-positive projection on
    the normal.
    """
    n = np.asarray(normal, dtype=np.float64)
    wi = np.asarray(incoming, dtype=np.float64)
    wo = np.asarray(outgoing, dtype=np.float64)
    if float(wi @ n) <= 0.0 or float(wo @ n) <= 0.0:
        raise BelowHorizon("direction at or below the surface horizon")
    return float(ward_reflectance(material, n, wi, wo, variant=variant))
