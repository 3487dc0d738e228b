"""Corner-scene definitions, dataset samplers, and world-space geometry.

A scene is a 2- or 3-plane concave corner observed by a pinhole camera that
always looks at the corner centre (the origin).  World frame:

  * the corner spine is the z axis;
  * wall A lies in the yz plane (its in-plane outward direction is +y);
  * wall B is rotated by the dihedral angle alpha away from wall A, at
    azimuth (pi/2 - alpha), so the open wedge spans azimuths
    (pi/2 - alpha, pi/2) and the bisector sits at azimuth (pi - alpha) / 2;
  * three-plane corners add a floor in z = 0 covering the wedge sector
    (its normal is +z, perpendicular to both walls for every alpha).

The camera pose uses intrinsic Z-Y-Z Euler angles (theta, phi, gamma) applied
to a reference camera sitting on the spine axis:

  R = Rz(theta) @ Ry(phi) @ Rz(gamma)
  position  = camera_distance * R @ ez
  [right, up, view] = R @ [-ey, -ex, -ez]

so theta is the azimuth of the camera around the spine, phi is the polar
angle from the spine, and gamma is roll about the boresight.  The reference
direction ez lies in the corner's bisector plane.  Under this convention the
simple-dataset rule theta = (pi - alpha) / 2 places the camera exactly on the
corner bisector for every alpha.

All plane parameters are metres; the walls extend WALL_EXTENT units outward
from the spine and along it, which keeps every one-bounce path comfortably
inside the 20 MHz unambiguous range of ~7.49 m.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import DegenerateScene

WALL_EXTENT = 3.0
CAMERA_DISTANCE = 3.0
DEFAULT_RESOLUTION = (200, 200)
DEFAULT_FOV = math.radians(60.0)

_EX = np.array([1.0, 0.0, 0.0])
_EY = np.array([0.0, 1.0, 0.0])
_EZ = np.array([0.0, 0.0, 1.0])


class SceneKind(str, Enum):
    TWO_PLANE = "two_plane"
    THREE_PLANE = "three_plane"


@dataclass(frozen=True)
class WardMaterial:
    """Four-parameter mixed diffuse/specular material.

    sigma is the specular roughness, mu weights the lambertian term
    (mu = 1 is pure diffuse), kd and ks are the diffuse and specular colours.
    All parameters live in [0, 1].
    """

    sigma: float
    mu: float
    kd: float
    ks: float = 1.0

    def __post_init__(self):
        for name in ("sigma", "mu", "kd", "ks"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name}={v} outside [0, 1]")

    def to_dict(self) -> dict:
        return {"sigma": self.sigma, "mu": self.mu, "kd": self.kd, "ks": self.ks}

    @classmethod
    def from_dict(cls, d: dict) -> "WardMaterial":
        return cls(sigma=d["sigma"], mu=d["mu"], kd=d["kd"], ks=d["ks"])


# Named materials used by the simple dataset (sigma, mu, kd; ks is 1.0).
_BUILTIN_MATERIALS = (
    ("Concrete", 0.600672, 0.668533, 0.994044),
    ("Wood", 0.598438, 0.132031, 0.965061),
    ("Rough Plastic", 0.278057, 0.480943, 0.969021),
    ("Limestone", 0.413544, 0.292841, 0.972684),
    ("Rough Paper", 0.311376, 0.644926, 0.937665),
    ("Foil", 0.252702, 0.581514, 0.891302),
)


def builtin_materials() -> list[tuple[str, WardMaterial]]:
    """The six named materials, in fixed order."""
    return [
        (name, WardMaterial(sigma=s, mu=m, kd=kd, ks=1.0))
        for name, s, m, kd in _BUILTIN_MATERIALS
    ]


@dataclass(frozen=True)
class CornerScene:
    kind: SceneKind
    alpha: float
    theta: float
    phi: float
    gamma: float
    camera_distance: float
    materials: tuple[WardMaterial, ...]
    resolution: tuple[int, int] = DEFAULT_RESOLUTION
    fov: float = DEFAULT_FOV
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.alpha < math.pi):
            raise ValueError(f"alpha={self.alpha} outside (0, pi)")
        if self.camera_distance <= 0.0:
            raise ValueError("camera_distance must be positive")
        w, h = self.resolution
        if w < 8 or h < 8:
            raise ValueError(f"resolution {self.resolution} below 8 x 8")
        expected = 2 if self.kind == SceneKind.TWO_PLANE else 3
        if len(self.materials) != expected:
            raise ValueError(
                f"{self.kind.value} needs {expected} materials, got {len(self.materials)}"
            )
        object.__setattr__(self, "materials", tuple(self.materials))
        object.__setattr__(self, "resolution", (int(w), int(h)))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "alpha": self.alpha,
            "theta": self.theta,
            "phi": self.phi,
            "gamma": self.gamma,
            "camera_distance": self.camera_distance,
            "materials": [m.to_dict() for m in self.materials],
            "resolution": list(self.resolution),
            "fov": self.fov,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CornerScene":
        return cls(
            kind=SceneKind(d["kind"]),
            alpha=d["alpha"],
            theta=d["theta"],
            phi=d["phi"],
            gamma=d["gamma"],
            camera_distance=d["camera_distance"],
            materials=tuple(WardMaterial.from_dict(m) for m in d["materials"]),
            resolution=tuple(d["resolution"]),
            fov=d["fov"],
            seed=d["seed"],
        )


def save_manifest(path, scenes) -> None:
    """Write one scene (or a list of scenes) as a UTF-8 JSON manifest."""
    if isinstance(scenes, CornerScene):
        payload = scenes.to_dict()
    else:
        payload = [s.to_dict() for s in scenes]
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_manifest(path) -> list[CornerScene]:
    """Read a manifest holding a single scene object or an array of them."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(payload, dict):
        payload = [payload]
    return [CornerScene.from_dict(d) for d in payload]


# ---------------------------------------------------------------------------
# sampling


def _rng(seed: int) -> np.random.Generator:
    # PCG64 is the documented, portable generator behind default_rng.
    return np.random.Generator(np.random.PCG64(seed))


def sample_simple_scene(rng_seed: int, resolution=DEFAULT_RESOLUTION) -> CornerScene:
    """Draw one scene from the simple dataset distribution.

    Two planes sharing a single builtin material; alpha and phi uniform on
    [pi/6, 2pi/3]; theta = (pi - alpha) / 2 (camera on the corner bisector);
    gamma = 0; camera 3 units from the corner centre.
    """
    rng = _rng(rng_seed)
    mat = builtin_materials()[int(rng.integers(len(_BUILTIN_MATERIALS)))][1]
    alpha = rng.uniform(math.pi / 6.0, 2.0 * math.pi / 3.0)
    phi = rng.uniform(math.pi / 6.0, 2.0 * math.pi / 3.0)
    return CornerScene(
        kind=SceneKind.TWO_PLANE,
        alpha=alpha,
        theta=(math.pi - alpha) / 2.0,
        phi=phi,
        gamma=0.0,
        camera_distance=CAMERA_DISTANCE,
        materials=(mat, mat),
        resolution=resolution,
        fov=DEFAULT_FOV,
        seed=rng_seed,
    )


def _camera_direction(theta: float, phi: float) -> np.ndarray:
    return np.array(
        [
            math.sin(phi) * math.cos(theta),
            math.sin(phi) * math.sin(theta),
            math.cos(phi),
        ]
    )


def _wall_normals(alpha: float) -> tuple[np.ndarray, np.ndarray]:
    # Inward normals (pointing into the open wedge).
    n_a = _EX.copy()
    n_b = np.array([-math.cos(alpha), math.sin(alpha), 0.0])
    return n_a, n_b


def sample_challenging_scene(
    rng_seed: int, kind: SceneKind, resolution=DEFAULT_RESOLUTION
) -> CornerScene:
    """Draw one scene from the challenging dataset distribution.

    Every plane gets its own material (sigma, mu, kd uniform on [0, 1],
    ks = 1).  Angles are uniform over their full domains: alpha on (0, pi),
    theta on [0, pi), phi and gamma on [0, 2pi).  Poses that put the camera
    behind both walls are rejection-sampled away.
    """
    kind = SceneKind(kind)
    rng = _rng(rng_seed)
    n_planes = 2 if kind == SceneKind.TWO_PLANE else 3
    materials = tuple(
        WardMaterial(
            sigma=rng.uniform(0.0, 1.0),
            mu=rng.uniform(0.0, 1.0),
            kd=rng.uniform(0.0, 1.0),
            ks=1.0,
        )
        for _ in range(n_planes)
    )
    while True:
        alpha = rng.uniform(0.0, math.pi)
        theta = rng.uniform(0.0, math.pi)
        phi = rng.uniform(0.0, 2.0 * math.pi)
        gamma = rng.uniform(0.0, 2.0 * math.pi)
        if alpha <= 0.0:
            continue
        v = _camera_direction(theta, phi)
        n_a, n_b = _wall_normals(alpha)
        if float(v @ n_a) > 0.0 or float(v @ n_b) > 0.0:
            break
    return CornerScene(
        kind=kind,
        alpha=alpha,
        theta=theta,
        phi=phi,
        gamma=gamma,
        camera_distance=CAMERA_DISTANCE,
        materials=materials,
        resolution=resolution,
        fov=DEFAULT_FOV,
        seed=rng_seed,
    )


# ---------------------------------------------------------------------------
# world-space geometry


@dataclass(frozen=True)
class Plane:
    """A finite scene plane through the origin.

    Walls span u in [0, extent] along u_dir and v in [-extent, extent] along
    v_dir; the floor spans the wedge sector of radius extent (membership is
    tested against the wall half-spaces, so no sector bounds are stored).
    """

    name: str
    normal: np.ndarray
    u_dir: np.ndarray
    v_dir: np.ndarray
    material: WardMaterial
    extent: float
    is_floor: bool = False


@dataclass(frozen=True)
class SceneGeometry:
    planes: tuple[Plane, ...]
    camera_origin: np.ndarray
    right: np.ndarray
    up: np.ndarray
    view: np.ndarray
    look_at: np.ndarray
    alpha: float

    @property
    def wall_normals(self) -> tuple[np.ndarray, np.ndarray]:
        return self.planes[0].normal, self.planes[1].normal

    def camera_inside_wedge(self) -> bool:
        """True when the camera sees both wall front faces (convex region,
        so no occlusion checks are needed for bounce paths)."""
        n_a, n_b = self.wall_normals
        c = self.camera_origin
        inside = float(c @ n_a) > 0.0 and float(c @ n_b) > 0.0
        if len(self.planes) == 3:
            inside = inside and float(c[2]) > 0.0
        return inside


def _rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def scene_geometry(scene: CornerScene) -> SceneGeometry:
    """Explicit plane equations and camera pose in world coordinates."""
    if not (0.0 < scene.alpha < math.pi):
        raise DegenerateScene(f"alpha={scene.alpha} outside (0, pi)")

    alpha = scene.alpha
    n_a, n_b = _wall_normals(alpha)
    u_a = _EY.copy()
    u_b = np.array([math.sin(alpha), math.cos(alpha), 0.0])

    planes = [
        Plane("wall_a", n_a, u_a, _EZ.copy(), scene.materials[0], WALL_EXTENT),
        Plane("wall_b", n_b, u_b, _EZ.copy(), scene.materials[1], WALL_EXTENT),
    ]
    if scene.kind == SceneKind.THREE_PLANE:
        bis = (math.pi - alpha) / 2.0
        u_f = np.array([math.cos(bis), math.sin(bis), 0.0])
        v_f = np.cross(_EZ, u_f)
        planes.append(
            Plane("floor", _EZ.copy(), u_f, v_f, scene.materials[2], WALL_EXTENT, True)
        )

    rot = _rot_z(scene.theta) @ _rot_y(scene.phi) @ _rot_z(scene.gamma)
    origin = scene.camera_distance * (rot @ _EZ)
    right = rot @ (-_EY)
    up = rot @ (-_EX)
    view = rot @ (-_EZ)
    return SceneGeometry(
        planes=tuple(planes),
        camera_origin=origin,
        right=right,
        up=up,
        view=view,
        look_at=np.zeros(3),
        alpha=alpha,
    )
