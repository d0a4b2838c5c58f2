import json
import logging
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from models import FitConfig

logger = logging.getLogger(__name__)


class Settings(BaseModel):
    model_config = ConfigDict(extra='forbid')

    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "INFO"
    progress: bool = False
    step_size: float = Field(1.0, gt=0)
    tol: float = Field(1e-4, ge=0)
    pd_floor: float = Field(1e-10, gt=0)
    max_halvings: int = Field(20, ge=0)
    power_tol: float = Field(1e-10, gt=0)
    power_max_iter: int = Field(1000, ge=1)
    max_rejections: int = Field(10_000, ge=1)

    def fit_config(self, **overrides) -> FitConfig:
        values = dict(step_size=self.step_size, tol=self.tol, pd_floor=self.pd_floor,
                      max_halvings=self.max_halvings, power_tol=self.power_tol,
                      power_max_iter=self.power_max_iter, progress=self.progress)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return FitConfig(**values)


class ConfigManager:
    def __init__(self, config_file: Optional[str] = None):
        self.config_file = config_file

    def load_config(self) -> Settings:
        if self.config_file is None:
            return Settings()
        try:
            with open(self.config_file, 'r') as f:
                return Settings(**json.load(f))
        except FileNotFoundError:
            return self.create_default_config()

    def create_default_config(self) -> Settings:
        default_config = Settings()
        self.save_config(default_config)
        logger.info(f"Wrote default settings to {self.config_file}")
        return default_config

    def save_config(self, config: Settings):
        with open(self.config_file, 'w') as f:
            json.dump(config.model_dump(), f, indent=2)
