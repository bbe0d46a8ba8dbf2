"""CSV outputs for analysis; plots are produced externally"""

import logging
from pathlib import Path
from typing import Union

import pandas as pd

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.10g"


def write_csv(table: pd.DataFrame, path: Union[str, Path]) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(target, index=False, float_format=FLOAT_FORMAT)
    logger.info("Wrote %d rows to %s", len(table), target)
    return target


def read_csv(path: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(path)
