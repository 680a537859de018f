import os
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
from wasabi import Printer, format_repr

ENV_PREFIX = "SPIKESIM"
# Environment variables
ENV_DATA_DIR = "{}_DATA".format(ENV_PREFIX)  # dataset directory

msg = Printer(env_prefix=ENV_PREFIX)


def get_data_dir(path: Optional[Union[str, Path]] = None) -> Path:
    """Resolve the MNIST directory. An explicit path wins over the
    environment, and the current working directory is the last resort.

    path (Optional[Union[str, Path]]): Explicit dataset directory.
    RETURNS (Path): The directory to read the IDX files from.
    """
    if path:
        return Path(path)
    env_path = os.getenv(ENV_DATA_DIR)
    if env_path:
        return Path(env_path)
    return Path.cwd()


def ensure_path(path: Union[str, Path]) -> Path:
    """Ensure a string is converted to a Path.

    path (Union[str, Path]): The path to convert.
    RETURNS (Path): The converted path.
    """
    return Path(path) if isinstance(path, str) else path


def format_value(value: Any, max_len: int = 50) -> str:
    """Format a value for console and error messages. Arrays are shown by
    shape and dtype instead of their contents.

    value (Any): The value to format.
    max_len (int): Maximum length, see wasabi.format_repr.
    RETURNS (str): The formatted value.
    """
    if isinstance(value, np.ndarray):
        return "array(shape={}, dtype={})".format(list(value.shape), value.dtype)
    if isinstance(value, float):
        return "{:.6g}".format(value)
    return format_repr(value, max_len=max_len)


def format_percent(rate: float, digits: int = 2) -> str:
    """Format an error rate in [0, 1] as a percentage string.

    rate (float): The rate.
    digits (int): Digits after the decimal point.
    RETURNS (str): The formatted percentage, e.g. "4.25%".
    """
    return "{:.{}f}%".format(100.0 * rate, digits)
