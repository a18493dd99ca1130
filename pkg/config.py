"""
Configuration settings for zxcc.
"""
from pathlib import Path
from typing import List, Optional, Tuple

from pydantic import Field
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource

from utils.phase import Phase

BASE_DIR = Path(__file__).resolve().parent


class Settings(BaseSettings):
    """Bounds and locations used by the engine and the verifier."""

    # Rewriting
    step_budget: int = Field(default=10000, ge=1)
    box_max: int = Field(default=8, ge=0)
    expansion_candidates: List[str] = Field(
        default_factory=lambda: ["green_id", "red_id", "gen_bialg_simp", "hopf", "green_sp", "red_sp"]
    )
    expansion_limit: int = Field(default=400, ge=0)

    # Semantics
    dimension_cap: int = Field(default=2 ** 22, ge=1)
    certify_max_wires: int = Field(default=11, ge=0)
    float_tolerance: float = 1e-9

    # Soundness suite
    soundness_arity: int = Field(default=4, ge=0)
    soundness_phases: List[str] = Field(default_factory=lambda: ["0", "1/4", "1/2", "1"])

    # Files
    rules_dir: Path = BASE_DIR / "rules"
    fixtures_dir: Path = BASE_DIR / "fixtures" / "v1"
    trace_dir: Optional[Path] = None

    # Application
    workers: int = Field(default=1, ge=1)
    log_level: str = "INFO"

    @property
    def sample_phases(self) -> Tuple[Phase, ...]:
        """Soundness phase samples parsed into exact phases."""
        return tuple(Phase.parse(p) for p in self.soundness_phases)

    def with_overrides(self, **overrides: Optional[object]) -> "Settings":
        """Return a copy with every non-None override applied."""
        changes = {key: value for key, value in overrides.items() if value is not None}
        if not changes:
            return self
        return Settings(**{**self.model_dump(), **changes})

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        # Flags only: the environment never changes a run.
        return (init_settings,)

    model_config = {
        "case_sensitive": True,
        "extra": "ignore",
    }


settings = Settings()
