import os
import logging
from typing import Optional

from dotenv import load_dotenv

from .errors import ConfigurationError

logger = logging.getLogger(__name__)

DEFAULT_SEED = 20240601
DEFAULT_TAIL = 1e-12


class Settings:
    """Process-wide settings read from the environment (and a .env file)."""

    _instance = None

    @classmethod
    def get_instance(cls) -> "Settings":
        if cls._instance is None:
            cls._instance = cls()
        return cls._instance

    @classmethod
    def reset(cls) -> None:
        """Forget the cached instance so the environment is read again."""
        cls._instance = None

    def __init__(self):
        load_dotenv()
        self.seed = self._read_int("FRACPOISSON_SEED", DEFAULT_SEED, minimum=0, maximum=2**64 - 1)
        self.workers = self._read_int("FRACPOISSON_WORKERS", 1, minimum=1)
        self.tail = self._read_float("FRACPOISSON_TAIL", DEFAULT_TAIL)
        if not 0.0 < self.tail < 1e-6:
            raise ConfigurationError("FRACPOISSON_TAIL must lie in (0, 1e-6)")
        self.log_level = os.getenv("FRACPOISSON_LOG_LEVEL", "").upper() or None
        if self.log_level is not None and not isinstance(logging.getLevelName(self.log_level), int):
            raise ConfigurationError(f"FRACPOISSON_LOG_LEVEL has unknown level: {self.log_level}")
        logger.debug("Loaded settings: seed=%s workers=%s tail=%s", self.seed, self.workers, self.tail)

    @staticmethod
    def _read_int(name: str, default: int, minimum: int, maximum: Optional[int] = None) -> int:
        raw = os.getenv(name)
        if raw is None or raw.strip() == "":
            return default
        try:
            value = int(raw)
        except ValueError:
            raise ConfigurationError(f"{name} must be an integer, got {raw!r}")
        if value < minimum or (maximum is not None and value > maximum):
            raise ConfigurationError(f"{name}={value} is out of range")
        return value

    @staticmethod
    def _read_float(name: str, default: float) -> float:
        raw = os.getenv(name)
        if raw is None or raw.strip() == "":
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigurationError(f"{name} must be a number, got {raw!r}")


def configure_logging(default_level: str = "WARNING") -> None:
    """Configure root logging for an entry point (CLI or service)."""
    level = Settings.get_instance().log_level or default_level
    logging.basicConfig(level=level, format="%(asctime)s %(name)s %(levelname)s %(message)s")
