"""Result tables: CSV files plus a JSON metadata sidecar that records
everything needed to produce the same table again."""
import csv
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from .errors import DataError
from .util import ensure_path

SIDECAR_SUFFIX = ".meta.json"
COMMENT_CHAR = "#"


def sidecar_path(path: Union[str, Path]) -> Path:
    """RETURNS (Path): Location of the metadata sidecar of a table."""
    path = ensure_path(path)
    return path.with_name(path.name + SIDECAR_SUFFIX)


def format_cell(value: Any) -> str:
    """Format one cell. Floats use repr() so that they read back exactly."""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_table(
    path: Union[str, Path],
    data: Iterable[Sequence[Any]],
    header: Sequence[str],
    meta: Optional[Dict[str, Any]] = None,
) -> Path:
    """Write rows to a CSV file, and the metadata to its sidecar.

    path (Union[str, Path]): The CSV file to write.
    data (Iterable[Sequence[Any]]): The rows, one sequence per row.
    header (Sequence[str]): The column names.
    meta (Optional[Dict[str, Any]]): Optional metadata for the sidecar.
    RETURNS (Path): The path of the written table.
    """
    path = ensure_path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True)
    with path.open("w", encoding="utf8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in data:
            if len(row) != len(header):
                err = "Row has {} columns, header has {}: {}"
                raise ValueError(err.format(len(row), len(header), list(row)))
            writer.writerow([format_cell(value) for value in row])
    if meta is not None:
        write_metadata(path, meta)
    return path


def read_table(path: Union[str, Path]) -> Tuple[List[str], List[List[str]]]:
    """Read a CSV file written by write_table. Blank lines and lines starting
    with '#' are skipped.

    path (Union[str, Path]): The CSV file.
    RETURNS (Tuple[List[str], List[List[str]]]): The header and the rows.
    """
    path = ensure_path(path)
    with path.open("r", encoding="utf8", newline="") as f:
        lines = [
            line for line in f if line.strip() and not line.lstrip().startswith(COMMENT_CHAR)
        ]
    rows = [[cell.strip() for cell in row] for row in csv.reader(lines)]
    if not rows:
        raise DataError("Table {} has no header".format(path))
    header, body = rows[0], rows[1:]
    for row in body:
        if len(row) != len(header):
            err = "Table {} has a row with {} columns, header has {}"
            raise DataError(err.format(path, len(row), len(header)))
    return header, body


def write_metadata(path: Union[str, Path], meta: Dict[str, Any]) -> Path:
    """Write the metadata sidecar of a table.

    path (Union[str, Path]): The table the metadata describes.
    meta (Dict[str, Any]): JSON-serializable metadata.
    RETURNS (Path): The path of the sidecar.
    """
    target = sidecar_path(path)
    target.write_text(json.dumps(meta, indent=2, sort_keys=True), encoding="utf8")
    return target


def read_metadata(path: Union[str, Path]) -> Dict[str, Any]:
    """RETURNS (Dict[str, Any]): The metadata sidecar of a table."""
    return json.loads(sidecar_path(path).read_text(encoding="utf8"))
