"""Synthetic face generator: latent space, parameter decoding, SVG rendering.

The generator maps a D-dimensional latent through a fixed orthonormal mixing
matrix and a sigmoid squash to named semantic parameters in [0, 1], then
renders them as a deterministic SVG scene. Identity parameters drive face
geometry; nuisance parameters only touch background, tilt, lighting and
framing, so they never affect perceived identity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

IDENTITY_FEATURES = (
    "face_width",
    "face_height",
    "eye_size",
    "eye_spacing",
    "eye_height",
    "eyebrow_angle",
    "eyebrow_thickness",
    "nose_width",
    "nose_length",
    "mouth_width",
    "lip_thickness",
    "chin_length",
    "sex_code",
    "age_code",
)
NUISANCE_FEATURES = ("background_hue", "head_tilt", "lighting", "framing_offset")

# sex/age are fixed by the category choice, so they are not user sliders
SLIDER_FEATURES = tuple(f for f in IDENTITY_FEATURES if f not in ("sex_code", "age_code"))

N_IDENTITY = len(IDENTITY_FEATURES)
N_NUISANCE = len(NUISANCE_FEATURES)

AUX_SET_SIZE = 6
AUX_SETS_PER_CATEGORY = 20
SAMPLING_BUDGET = 10_000


class SamplingBudgetError(RuntimeError):
    """Rejection sampling exhausted its draw budget without a category match."""


class UnknownFeatureError(KeyError):
    """A feature name does not refer to an identity slot."""


class SliderRangeError(ValueError):
    """Slider target outside the open interval (0, 1)."""


@dataclass(frozen=True)
class GeneratorConfig:
    dim: int = 32
    mixing_seed: int = 7313
    squash_gain: float = 1.5

    def __post_init__(self):
        if N_IDENTITY + N_NUISANCE > self.dim:
            raise ValueError("latent dim must cover identity + nuisance rows")
        if self.squash_gain <= 0:
            raise ValueError("squash_gain must be positive")

    def to_dict(self) -> dict:
        return {"dim": self.dim, "mixing_seed": self.mixing_seed, "squash_gain": self.squash_gain}

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        return cls(dim=int(d["dim"]), mixing_seed=int(d["mixing_seed"]), squash_gain=float(d["squash_gain"]))


@dataclass(frozen=True)
class Category:
    sex_bit: int
    age_bit: int

    def __post_init__(self):
        if self.sex_bit not in (0, 1) or self.age_bit not in (0, 1):
            raise ValueError("category bits must be 0 or 1")

    @classmethod
    def all(cls) -> tuple["Category", ...]:
        return tuple(cls(s, a) for s in (0, 1) for a in (0, 1))

    def key(self) -> str:
        return f"{self.sex_bit}{self.age_bit}"


@dataclass(frozen=True)
class FaceParams:
    identity: np.ndarray
    nuisance: np.ndarray

    def __post_init__(self):
        if self.identity.shape != (N_IDENTITY,) or self.nuisance.shape != (N_NUISANCE,):
            raise ValueError("bad parameter vector shapes")

    def observable(self) -> np.ndarray:
        """Concatenated [identity; nuisance] vector, the embedding-net input."""
        return np.concatenate([self.identity, self.nuisance])

    def get(self, feature: str) -> float:
        if feature in IDENTITY_FEATURES:
            return float(self.identity[IDENTITY_FEATURES.index(feature)])
        if feature in NUISANCE_FEATURES:
            return float(self.nuisance[NUISANCE_FEATURES.index(feature)])
        raise UnknownFeatureError(feature)


@dataclass(frozen=True)
class FaceImage:
    svg: str
    params: FaceParams
    latent: np.ndarray


@dataclass
class AuxiliarySet:
    iteration: int  # 1-based
    latents: list = field(default_factory=list)  # list of np.ndarray
    images: list = field(default_factory=list)  # list of FaceImage


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _logit(p):
    return np.log(p) - np.log1p(-p)


class FaceGenerator:
    """Deterministic latent -> FaceParams -> SVG pipeline."""

    def __init__(self, config: GeneratorConfig | None = None):
        self.config = config or GeneratorConfig()
        rng = np.random.default_rng(self.config.mixing_seed)
        a = rng.standard_normal((self.config.dim, self.config.dim))
        q, r = np.linalg.qr(a)
        # fix QR sign ambiguity so the matrix is a stable function of the seed
        q = q * np.sign(np.diag(r))
        self.mixing = q.T[: N_IDENTITY + N_NUISANCE].copy()
        self.mixing.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.config.dim

    # -- sampling ----------------------------------------------------------

    def sample_latent(self, rng: np.random.Generator, category: Category | None = None) -> np.ndarray:
        for _ in range(SAMPLING_BUDGET):
            w = rng.standard_normal(self.dim)
            if category is None or self.category_of(w) == category:
                return w
        raise SamplingBudgetError(f"no latent matching {category} in {SAMPLING_BUDGET} draws")

    # -- decoding ----------------------------------------------------------

    def decode_params(self, latent: np.ndarray) -> FaceParams:
        latent = np.asarray(latent, dtype=float)
        if latent.shape != (self.dim,):
            raise ValueError(f"latent must have shape ({self.dim},), got {latent.shape}")
        mixed = self.mixing @ latent
        squashed = _sigmoid(self.config.squash_gain * mixed)
        return FaceParams(identity=squashed[:N_IDENTITY], nuisance=squashed[N_IDENTITY:])

    def category_of(self, latent: np.ndarray) -> Category:
        p = self.decode_params(latent)
        sex = p.get("sex_code")
        age = p.get("age_code")
        return Category(sex_bit=int(sex > 0.5), age_bit=int(age > 0.5))

    # -- sliders -----------------------------------------------------------

    def feature_direction(self, feature: str) -> np.ndarray:
        if feature not in IDENTITY_FEATURES:
            raise UnknownFeatureError(feature)
        return self.mixing[IDENTITY_FEATURES.index(feature)].copy()

    def apply_slider(self, latent: np.ndarray, feature: str, target: float) -> np.ndarray:
        if not 0.0 < target < 1.0:
            raise SliderRangeError(f"slider target must be in (0, 1), got {target}")
        direction = self.feature_direction(feature)
        current = self.decode_params(latent).get(feature)
        step = (_logit(target) - _logit(current)) / self.config.squash_gain
        return np.asarray(latent, dtype=float) + direction * step

    # -- rendering ---------------------------------------------------------

    def render(self, params: FaceParams, latent: np.ndarray | None = None) -> FaceImage:
        return FaceImage(svg=render_svg(params), params=params, latent=latent)

    def render_latent(self, latent: np.ndarray) -> FaceImage:
        latent = np.asarray(latent, dtype=float)
        return self.render(self.decode_params(latent), latent=latent)

    # -- auxiliary pools ---------------------------------------------------

    def build_aux_pools(self, rng: np.random.Generator) -> dict:
        """20 fixed sets of 6 faces for each of the four categories."""
        pools = {}
        for cat in Category.all():
            sets = []
            for i in range(1, AUX_SETS_PER_CATEGORY + 1):
                latents = [self.sample_latent(rng, cat) for _ in range(AUX_SET_SIZE)]
                images = [self.render_latent(w) for w in latents]
                sets.append(AuxiliarySet(iteration=i, latents=latents, images=images))
            pools[cat.key()] = sets
        return pools

    def save_pools(self, pools: dict, path: str | Path) -> None:
        doc = {
            "format_version": "1",
            "generator": self.config.to_dict(),
            "pools": {
                key: [[w.tolist() for w in s.latents] for s in sets]
                for key, sets in pools.items()
            },
        }
        Path(path).write_text(json.dumps(doc), encoding="utf-8")

    def load_pools(self, path: str | Path) -> dict:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if doc.get("format_version") != "1":
            raise ValueError("unsupported pool manifest version")
        if doc["generator"] != self.config.to_dict():
            raise ValueError("pool manifest was built with a different generator config")
        pools = {}
        for key, sets in doc["pools"].items():
            pools[key] = [
                AuxiliarySet(
                    iteration=i + 1,
                    latents=[np.asarray(w, dtype=float) for w in latents],
                    images=[self.render_latent(np.asarray(w, dtype=float)) for w in latents],
                )
                for i, latents in enumerate(sets)
            ]
        return pools


# -- SVG scene ---------------------------------------------------------------

_CANVAS = 200.0


def _f(x: float) -> str:
    return f"{x:.4f}"


def render_svg(params: FaceParams) -> str:
    iv = {name: float(params.identity[i]) for i, name in enumerate(IDENTITY_FEATURES)}
    nv = {name: float(params.nuisance[i]) for i, name in enumerate(NUISANCE_FEATURES)}

    cx = _CANVAS / 2

    # head: an ellipse whose radii follow face width/height; the jaw narrows
    # with sex_code to give the category a visible footprint
    head_rx = 42.0 + 28.0 * iv["face_width"] - 6.0 * iv["sex_code"]
    head_ry = 52.0 + 30.0 * iv["face_height"]
    head_cy = 96.0

    chin_y = head_cy + head_ry * 0.55 + 18.0 * iv["chin_length"]
    chin_half = head_rx * 0.45

    eye_dx = 14.0 + 24.0 * iv["eye_spacing"]
    eye_cy = head_cy - 2.0 - 16.0 * iv["eye_height"]
    eye_r = 3.0 + 6.0 * iv["eye_size"]

    brow_y = eye_cy - eye_r - 6.0
    brow_half = eye_r + 4.0
    brow_tilt = (iv["eyebrow_angle"] - 0.5) * 10.0  # vertical offset of outer end
    brow_w = 1.0 + 3.5 * iv["eyebrow_thickness"]

    nose_w = 3.0 + 9.0 * iv["nose_width"]
    nose_len = 10.0 + 18.0 * iv["nose_length"]
    nose_top = eye_cy + eye_r + 2.0

    mouth_y = nose_top + nose_len + 10.0
    mouth_half = 8.0 + 14.0 * iv["mouth_width"]
    lip_h = 1.5 + 4.5 * iv["lip_thickness"]

    age_opacity = iv["age_code"]  # wrinkle visibility grows with age

    identity_body = (
        f'<g id="identity">'
        f'<ellipse id="head" cx="{_f(cx)}" cy="{_f(head_cy)}" rx="{_f(head_rx)}" ry="{_f(head_ry)}" '
        f'fill="#f2d6bd" stroke="#5a4632" stroke-width="2"/>'
        f'<path id="chin" d="M {_f(cx - chin_half)} {_f(head_cy + head_ry * 0.5)} '
        f'Q {_f(cx)} {_f(chin_y)} {_f(cx + chin_half)} {_f(head_cy + head_ry * 0.5)}" '
        f'fill="none" stroke="#5a4632" stroke-width="2"/>'
        f'<ellipse id="eye_l" cx="{_f(cx - eye_dx)}" cy="{_f(eye_cy)}" rx="{_f(eye_r)}" ry="{_f(eye_r * 0.75)}" '
        f'fill="#ffffff" stroke="#303030" stroke-width="1.5"/>'
        f'<ellipse id="eye_r" cx="{_f(cx + eye_dx)}" cy="{_f(eye_cy)}" rx="{_f(eye_r)}" ry="{_f(eye_r * 0.75)}" '
        f'fill="#ffffff" stroke="#303030" stroke-width="1.5"/>'
        f'<circle id="pupil_l" cx="{_f(cx - eye_dx)}" cy="{_f(eye_cy)}" r="{_f(eye_r * 0.35)}" fill="#303030"/>'
        f'<circle id="pupil_r" cx="{_f(cx + eye_dx)}" cy="{_f(eye_cy)}" r="{_f(eye_r * 0.35)}" fill="#303030"/>'
        f'<line id="brow_l" x1="{_f(cx - eye_dx - brow_half)}" y1="{_f(brow_y + brow_tilt)}" '
        f'x2="{_f(cx - eye_dx + brow_half)}" y2="{_f(brow_y - brow_tilt)}" '
        f'stroke="#3c2e1e" stroke-width="{_f(brow_w)}"/>'
        f'<line id="brow_r" x1="{_f(cx + eye_dx - brow_half)}" y1="{_f(brow_y - brow_tilt)}" '
        f'x2="{_f(cx + eye_dx + brow_half)}" y2="{_f(brow_y + brow_tilt)}" '
        f'stroke="#3c2e1e" stroke-width="{_f(brow_w)}"/>'
        f'<path id="nose" d="M {_f(cx)} {_f(nose_top)} L {_f(cx - nose_w)} {_f(nose_top + nose_len)} '
        f'L {_f(cx + nose_w)} {_f(nose_top + nose_len)} Z" fill="none" stroke="#8a6b4f" stroke-width="1.5"/>'
        f'<ellipse id="mouth" cx="{_f(cx)}" cy="{_f(mouth_y)}" rx="{_f(mouth_half)}" ry="{_f(lip_h)}" '
        f'fill="#b5574e" stroke="#7e3a34" stroke-width="1"/>'
        f'<g id="age_lines" opacity="{_f(age_opacity)}">'
        f'<line x1="{_f(cx - eye_dx - eye_r)}" y1="{_f(eye_cy + eye_r + 3.0)}" '
        f'x2="{_f(cx - eye_dx + eye_r)}" y2="{_f(eye_cy + eye_r + 4.5)}" stroke="#a08060" stroke-width="1"/>'
        f'<line x1="{_f(cx + eye_dx - eye_r)}" y1="{_f(eye_cy + eye_r + 4.5)}" '
        f'x2="{_f(cx + eye_dx + eye_r)}" y2="{_f(eye_cy + eye_r + 3.0)}" stroke="#a08060" stroke-width="1"/>'
        f'</g>'
        f'</g>'
    )

    hue = nv["background_hue"] * 360.0
    tilt = (nv["head_tilt"] - 0.5) * 24.0
    brightness = 0.7 + 0.6 * nv["lighting"]
    offset_x = (nv["framing_offset"] - 0.5) * 24.0

    svg = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{int(_CANVAS)}" height="{int(_CANVAS)}" '
        f'viewBox="0 0 {int(_CANVAS)} {int(_CANVAS)}">'
        f'<defs><filter id="lighting"><feComponentTransfer>'
        f'<feFuncR type="linear" slope="{_f(brightness)}"/>'
        f'<feFuncG type="linear" slope="{_f(brightness)}"/>'
        f'<feFuncB type="linear" slope="{_f(brightness)}"/>'
        f'</feComponentTransfer></filter></defs>'
        f'<rect id="background" width="100%" height="100%" fill="hsl({_f(hue)}, 45%, 82%)"/>'
        f'<g id="frame" filter="url(#lighting)" '
        f'transform="translate({_f(offset_x)} 0) rotate({_f(tilt)} {_f(cx)} {_f(cx)})">'
        f'{identity_body}'
        f'</g>'
        f'</svg>'
    )
    return svg


def identity_svg_fragment(svg: str) -> str:
    """The identity-layer markup, used to check nuisance isolation."""
    return svg[svg.index('<g id="identity">') : svg.index("</g></svg>")]
