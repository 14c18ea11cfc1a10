"""Application configuration settings"""

from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

# VisDrone fine classes evaluated by the MOT challenge
PEDESTRIAN, CAR, VAN, TRUCK, BUS = 1, 4, 5, 6, 9

DEFAULT_ROUGH_CLASSES: dict[int, str] = {
    PEDESTRIAN: "person",
    CAR: "vehicle",
    VAN: "vehicle",
    TRUCK: "vehicle",
    BUS: "vehicle",
}


class NoiseConfig(BaseModel):
    """Kalman noise: constant base diagonals plus height-proportional terms"""

    # R_k diagonal over (cx, cy, a, h)
    measurement_base: list[float] = [1.0, 1.0, 1e-2, 1.0]
    # Q diagonal over (cx, cy, a, h, v_cx, v_cy, v_a, v_h)
    process_base: list[float] = [1e-2, 1e-2, 1e-4, 1e-2, 1e-3, 1e-3, 1e-10, 1e-3]
    position_std_factor: float = Field(default=1.0 / 20, ge=0.0)
    velocity_std_factor: float = Field(default=1.0 / 160, ge=0.0)

    @field_validator("measurement_base")
    @classmethod
    def _measurement_positive(cls, v: list[float]) -> list[float]:
        if len(v) != 4 or any(x <= 0 for x in v):
            raise ValueError("measurement_base needs 4 positive entries")
        return v

    @field_validator("process_base")
    @classmethod
    def _process_positive(cls, v: list[float]) -> list[float]:
        if len(v) != 8 or any(x <= 0 for x in v):
            raise ValueError("process_base needs 8 positive entries")
        return v


class MotionModel(BaseModel):
    """Motion model and unscented transform spread parameters"""

    kind: Literal["cv", "ctrv"] = "cv"
    dt: Literal[1] = 1
    turn_rate: float = 0.0  # rad/frame, used by ctrv
    alpha: float = Field(default=1e-3, gt=0.0)
    beta: float = 2.0
    kappa: float = 0.0


class FilterMode(BaseModel):
    """State estimator used for one rough class"""

    update: Literal["vanilla", "nsa"] = "nsa"
    estimator: Literal["kf", "ukf"] = "kf"
    motion: MotionModel = MotionModel()


class OnlineConfig(BaseModel):
    """Stage 1: online tracking"""

    n_init: int = Field(default=3, ge=1)
    max_age: int = Field(default=30, ge=0)
    min_len: int = Field(default=2, ge=1)
    gate_threshold: float = Field(default=9.4877, gt=0.0)  # chi2 0.95, 4 dof
    appearance_threshold: float = Field(default=0.3, gt=0.0)
    iou_fallback_threshold: float = Field(default=0.7, gt=0.0)
    bank_size: int = Field(default=100, ge=1)
    momentum: float = Field(default=0.9, ge=0.0, le=1.0)
    rough_classes: dict[int, str] = DEFAULT_ROUGH_CLASSES
    filters: dict[str, FilterMode] = {
        "person": FilterMode(update="nsa", estimator="kf"),
        "vehicle": FilterMode(update="nsa", estimator="ukf"),
    }
    vote_mode: Literal["none", "hard", "soft"] = "soft"
    vote_floor: float = Field(default=0.2, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _filters_cover_classes(self) -> "OnlineConfig":
        missing = set(self.rough_classes.values()) - set(self.filters)
        if missing:
            raise ValueError(f"no filter configured for rough classes {sorted(missing)}")
        return self

    def filter_for(self, rough_class: str) -> FilterMode:
        return self.filters[rough_class]


class LinkConfig(BaseModel):
    """Stage 2: global tracklet link"""

    th_a: float = Field(default=0.4, gt=0.0)
    th_t: float = Field(default=200.0, gt=0.0)  # frames
    th_s: float = Field(default=150.0, gt=0.0)  # pixels
    lambda_a: float = Field(default=40.0, ge=0.0)
    lambda_t: float = Field(default=1.0, ge=0.0)
    lambda_s: float = Field(default=1.0, ge=0.0)
    clip_len: int = Field(default=4, ge=1)
    camera_aligned: bool = True


class PostConfig(BaseModel):
    """Stage 3: trajectory post-processing and fusion"""

    steps: list[Literal["denoise", "interpolate", "rescore"]] = [
        "denoise",
        "interpolate",
        "rescore",
    ]
    max_gap: int = Field(default=60, ge=0)
    tau: float = Field(default=25.0, gt=0.0)
    nms_overlap_floor: float = Field(default=0.3, ge=0.0, le=1.0)
    score_drop_floor: float = Field(default=0.05, ge=0.0)


class EvalConfig(BaseModel):
    """Trajectory mAP protocol"""

    thresholds: list[float] = [0.25, 0.5, 0.75]
    classes: Optional[list[int]] = None  # default: every class of ONLINE.rough_classes


class SimConfig(BaseModel):
    """Synthetic scenario generation"""

    num_frames: int = Field(default=300, ge=2)
    num_objects: int = Field(default=10, ge=1)
    classes: list[int] = [PEDESTRIAN, CAR]
    max_speed: float = Field(default=0.5, ge=0.0)  # px/frame
    process_sigma: float = Field(default=0.05, ge=0.0)
    miss_prob: float = Field(default=0.1, ge=0.0, le=1.0)
    duplicate_prob: float = Field(default=0.05, ge=0.0, le=1.0)
    loc_sigma: float = Field(default=0.05, ge=0.0)
    conf_kappa: float = 2.0
    conf_noise: float = Field(default=0.05, ge=0.0)
    class_flip: dict[int, tuple[int, float]] = {}
    occlusion_prob: float = Field(default=0.0, ge=0.0, le=1.0)
    occlusion_min: int = Field(default=40, ge=1)
    occlusion_max: int = Field(default=150, ge=1)
    embedding_dim: int = Field(default=32, ge=2)
    embedding_sigma: float = Field(default=0.05, ge=0.0)
    drift_x: float = 1.0
    drift_y: float = 0.0
    camera_jitter: float = Field(default=0.0, ge=0.0)


class Settings(BaseSettings):
    """Run configuration with config-file and environment variable support"""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_nested_delimiter="__",
        extra="forbid",
    )

    # Stage settings
    ONLINE: OnlineConfig = OnlineConfig()
    NOISE: NoiseConfig = NoiseConfig()
    LINK: LinkConfig = LinkConfig()
    POST: PostConfig = PostConfig()
    EVAL: EvalConfig = EvalConfig()
    SIM: SimConfig = SimConfig()

    # Input/output paths (flags override)
    DETECTIONS: Optional[Path] = None
    EMBEDDINGS: Optional[Path] = None
    TRANSFORMS: Optional[Path] = None
    OUTPUT: Optional[Path] = None

    SEED: int = 7
    LOG_LEVEL: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "INFO"

    def eval_classes(self) -> list[int]:
        if self.EVAL.classes is not None:
            return sorted(self.EVAL.classes)
        return sorted(self.ONLINE.rough_classes)


def get_settings(config_path: Optional[Path] = None, **overrides) -> Settings:
    """
    Get settings instance

    Args:
        config_path: KEY=VALUE config file; the default .env is used when None
        **overrides: Values that take precedence over the file (CLI flags)

    Returns:
        Settings object
    """
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if config_path is not None:
        return Settings(_env_file=config_path, **overrides)
    return Settings(**overrides)


def ensure_directories(settings: Settings) -> None:
    """Create the output directory if it doesn't exist"""
    if settings.OUTPUT is not None:
        target = settings.OUTPUT if not settings.OUTPUT.suffix else settings.OUTPUT.parent
        target.mkdir(parents=True, exist_ok=True)
