"""
Run service for writing the output files of one CLI run.
"""

import hashlib
import json
import logging
import os
from typing import Dict, List, Optional

import pandas as pd

from app import __version__
from app.models.params import ObservationSeries

logger = logging.getLogger(__name__)


def canonical_json(data: Dict) -> str:
    return json.dumps(data, sort_keys=True, separators=(",", ":"))


def config_hash(config: Dict) -> str:
    """sha256 of the canonical JSON form of a resolved run configuration"""
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


class RunService:
    """
    Owns one output directory and stamps every JSON it writes with the
    reproducibility header ``{seed, config_hash, version, config}``.
    """

    def __init__(self, output_dir: str, config: Dict, seed: Optional[int] = None):
        self.output_dir = output_dir
        self.config = config
        self.seed = seed

        os.makedirs(self.output_dir, exist_ok=True)

    @property
    def header(self) -> Dict:
        return {
            "seed": self.seed,
            "config_hash": config_hash(self.config),
            "version": __version__,
            "config": self.config,
        }

    def path(self, filename: str) -> str:
        return os.path.join(self.output_dir, filename)

    def write_json(self, filename: str, payload: Dict) -> str:
        """
        Write ``payload`` under the key ``result`` next to the header.

        Args:
            filename: File name inside the output directory
            payload: JSON-serializable result

        Returns:
            str: Path of the written file
        """
        path = self.path(filename)
        with open(path, "w") as f:
            json.dump({"header": self.header, "result": payload}, f, indent=2, sort_keys=True)
        logger.info("wrote %s", path)
        return path

    def write_csv(self, filename: str, df: pd.DataFrame) -> str:
        path = self.path(filename)
        df.to_csv(path, index=False, float_format="%.17g")
        logger.info("wrote %s", path)
        return path

    def write_series(self, filename: str, series: ObservationSeries) -> str:
        path = self.path(filename)
        series.save_csv(path)
        logger.info("wrote %s", path)
        return path

    def list_outputs(self) -> List[str]:
        return sorted(os.listdir(self.output_dir))

    @staticmethod
    def read_json(path: str) -> Dict:
        """Load a file written by ``write_json`` and return its ``result`` payload."""
        with open(path, "r") as f:
            data = json.load(f)
        return data.get("result", data)
