"""Plain-text file formats: density matrices, process tensors, quadrature
datasets, probe manifests, key=value configs, Wigner grids and analysis
reports.

All floats are written with ``%.17g`` so every file round-trips through its
reader bit-exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ConfigError, FileFormatError
from .fock import DensityMatrix, ProcessTensor, WignerGrid
from .homodyne import QuadratureDataset

__all__ = [
    "write_density_matrix",
    "read_density_matrix",
    "write_process_tensor",
    "read_process_tensor",
    "write_dataset",
    "read_dataset",
    "write_manifest",
    "read_manifest",
    "write_wigner_grid",
    "read_wigner_grid",
    "read_config",
    "write_report",
    "sniff_format",
]

_F = "%.17g"

# Recognized configuration keys and their parsers; anything else is a typo.
CONFIG_SCHEMA = {
    "max_iter": int,
    "rel_tol": float,
    "dilution": float,
    "dim_rec": int,
    "phase_sections": int,
    "x_bins": int,
    "x_min": float,
    "x_max": float,
    "seed": int,
}

DENSITY_HEADER = "# density-matrix"
TENSOR_HEADER = "# process-tensor"
DATASET_HEADER = "# quadrature-dataset"
MANIFEST_HEADER = "# manifest"
WIGNER_HEADER = "# wigner-grid"


def _fmt(x: float) -> str:
    return _F % x


def _parse_header_fields(line: str, path, expected: str) -> dict:
    if not line.startswith(expected):
        raise FileFormatError(f"{path}:1: expected header starting with '{expected}', got {line!r}")
    fields = {}
    for tok in line[len(expected):].split():
        if "=" not in tok:
            raise FileFormatError(f"{path}:1: malformed header field {tok!r}")
        key, val = tok.split("=", 1)
        fields[key] = val
    return fields


def _data_lines(path: Path):
    """Yield (line_number, stripped_line) for non-header, non-blank lines."""
    with open(path, "r") as fh:
        for i, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            yield i, line


def sniff_format(path) -> str:
    """Identify a file by its header: 'density-matrix', 'process-tensor', ..."""
    path = Path(path)
    with open(path, "r") as fh:
        first = fh.readline().strip()
    for header, name in (
        (DENSITY_HEADER, "density-matrix"),
        (TENSOR_HEADER, "process-tensor"),
        (DATASET_HEADER, "quadrature-dataset"),
        (MANIFEST_HEADER, "manifest"),
        (WIGNER_HEADER, "wigner-grid"),
    ):
        if first.startswith(header):
            return name
    raise FileFormatError(f"{path}:1: unrecognized header {first!r}")


def write_density_matrix(path, rho: DensityMatrix) -> None:
    path = Path(path)
    with open(path, "w") as fh:
        fh.write(f"{DENSITY_HEADER} dim={rho.dim}\n")
        for m in range(rho.dim):
            for n in range(rho.dim):
                val = rho.entries[m, n]
                fh.write(f"{m},{n},{_fmt(val.real)},{_fmt(val.imag)}\n")


def read_density_matrix(path) -> DensityMatrix:
    path = Path(path)
    with open(path, "r") as fh:
        header = fh.readline().strip()
    fields = _parse_header_fields(header, path, DENSITY_HEADER)
    try:
        dim = int(fields["dim"])
    except (KeyError, ValueError) as exc:
        raise FileFormatError(f"{path}:1: missing or malformed dim field") from exc
    entries = np.zeros((dim, dim), dtype=np.complex128)
    for lineno, line in _data_lines(path):
        parts = line.split(",")
        if len(parts) != 4:
            raise FileFormatError(f"{path}:{lineno}: expected 'm,n,re,im', got {line!r}")
        try:
            m, n = int(parts[0]), int(parts[1])
            re, im = float(parts[2]), float(parts[3])
        except ValueError as exc:
            raise FileFormatError(f"{path}:{lineno}: malformed number in {line!r}") from exc
        if not (0 <= m < dim and 0 <= n < dim):
            raise FileFormatError(f"{path}:{lineno}: index ({m},{n}) outside dim {dim}")
        entries[m, n] = re + 1j * im
    return DensityMatrix(entries)


def write_process_tensor(path, tensor: ProcessTensor) -> None:
    """One 'k,l,m,n,re,im' line per nonzero element."""
    path = Path(path)
    d = tensor.dim
    with open(path, "w") as fh:
        fh.write(f"{TENSOR_HEADER} dim={d}\n")
        for k in range(d):
            for l in range(d):
                for m in range(d):
                    for n in range(d):
                        val = tensor.entries[k, l, m, n]
                        if val != 0:
                            fh.write(f"{k},{l},{m},{n},{_fmt(val.real)},{_fmt(val.imag)}\n")


def read_process_tensor(path, tp_tol: float = 0.02) -> ProcessTensor:
    path = Path(path)
    with open(path, "r") as fh:
        header = fh.readline().strip()
    fields = _parse_header_fields(header, path, TENSOR_HEADER)
    try:
        dim = int(fields["dim"])
    except (KeyError, ValueError) as exc:
        raise FileFormatError(f"{path}:1: missing or malformed dim field") from exc
    entries = np.zeros((dim, dim, dim, dim), dtype=np.complex128)
    for lineno, line in _data_lines(path):
        parts = line.split(",")
        if len(parts) != 6:
            raise FileFormatError(f"{path}:{lineno}: expected 'k,l,m,n,re,im', got {line!r}")
        try:
            k, l, m, n = (int(p) for p in parts[:4])
            re, im = float(parts[4]), float(parts[5])
        except ValueError as exc:
            raise FileFormatError(f"{path}:{lineno}: malformed number in {line!r}") from exc
        if not all(0 <= i < dim for i in (k, l, m, n)):
            raise FileFormatError(f"{path}:{lineno}: index outside dim {dim}")
        entries[k, l, m, n] = re + 1j * im
    return ProcessTensor(entries, tp_tol=tp_tol)


def write_dataset(path, ds: QuadratureDataset) -> None:
    path = Path(path)
    header = (
        f"{DATASET_HEADER} alpha_re={_fmt(ds.probe_alpha.real)} "
        f"alpha_im={_fmt(ds.probe_alpha.imag)} seed={ds.seed}\n"
    )
    with open(path, "w") as fh:
        fh.write(header)
        np.savetxt(fh, ds.samples, fmt=_F, delimiter=",")


def read_dataset(path) -> QuadratureDataset:
    path = Path(path)
    with open(path, "r") as fh:
        header = fh.readline().strip()
    fields = _parse_header_fields(header, path, DATASET_HEADER)
    try:
        alpha = complex(float(fields["alpha_re"]), float(fields["alpha_im"]))
        seed = int(fields["seed"])
    except (KeyError, ValueError) as exc:
        raise FileFormatError(f"{path}:1: malformed dataset header {header!r}") from exc
    rows = []
    for lineno, line in _data_lines(path):
        parts = line.split(",")
        if len(parts) != 2:
            raise FileFormatError(f"{path}:{lineno}: expected 'theta,x', got {line!r}")
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise FileFormatError(f"{path}:{lineno}: malformed number in {line!r}") from exc
    if not rows:
        raise FileFormatError(f"{path}: dataset contains no samples")
    return QuadratureDataset(np.asarray(rows), probe_alpha=alpha, seed=seed)


def write_manifest(path, entries, metadata: dict | None = None) -> None:
    """``entries`` pairs each probe alpha with its dataset path (kept as
    given, normally relative to the manifest)."""
    path = Path(path)
    with open(path, "w") as fh:
        fh.write(f"{MANIFEST_HEADER}\n")
        for key, val in (metadata or {}).items():
            fh.write(f"# {key}={val}\n")
        for alpha, ds_path in entries:
            alpha = complex(alpha)
            fh.write(f"{_fmt(alpha.real)},{_fmt(alpha.imag)},{ds_path}\n")


def read_manifest(path) -> list[tuple[complex, Path]]:
    """Probe entries with paths resolved relative to the manifest location."""
    path = Path(path)
    with open(path, "r") as fh:
        header = fh.readline().strip()
    if header != MANIFEST_HEADER:
        raise FileFormatError(f"{path}:1: expected '{MANIFEST_HEADER}' header, got {header!r}")
    out = []
    for lineno, line in _data_lines(path):
        parts = line.split(",")
        if len(parts) != 3:
            raise FileFormatError(f"{path}:{lineno}: expected 'alpha_re,alpha_im,path', got {line!r}")
        try:
            alpha = complex(float(parts[0]), float(parts[1]))
        except ValueError as exc:
            raise FileFormatError(f"{path}:{lineno}: malformed number in {line!r}") from exc
        rel = Path(parts[2])
        out.append((alpha, rel if rel.is_absolute() else path.parent / rel))
    if not out:
        raise FileFormatError(f"{path}: manifest lists no probes")
    return out


def write_wigner_grid(path, grid: WignerGrid) -> None:
    path = Path(path)
    with open(path, "w") as fh:
        fh.write(f"{WIGNER_HEADER} nx={grid.x_axis.size} ny={grid.y_axis.size}\n")
        for i, x in enumerate(grid.x_axis):
            for j, y in enumerate(grid.y_axis):
                fh.write(f"{_fmt(x)},{_fmt(y)},{_fmt(grid.values[i, j])}\n")


def read_wigner_grid(path) -> WignerGrid:
    path = Path(path)
    with open(path, "r") as fh:
        header = fh.readline().strip()
    fields = _parse_header_fields(header, path, WIGNER_HEADER)
    try:
        nx, ny = int(fields["nx"]), int(fields["ny"])
    except (KeyError, ValueError) as exc:
        raise FileFormatError(f"{path}:1: malformed wigner-grid header") from exc
    xs = np.empty(nx)
    ys = np.empty(ny)
    vals = np.empty((nx, ny))
    count = 0
    for lineno, line in _data_lines(path):
        parts = line.split(",")
        if len(parts) != 3:
            raise FileFormatError(f"{path}:{lineno}: expected 'x,y,w', got {line!r}")
        try:
            x, y, w = (float(p) for p in parts)
        except ValueError as exc:
            raise FileFormatError(f"{path}:{lineno}: malformed number in {line!r}") from exc
        i, j = divmod(count, ny)
        if i >= nx:
            raise FileFormatError(f"{path}:{lineno}: more than nx*ny data lines")
        xs[i], ys[j], vals[i, j] = x, y, w
        count += 1
    if count != nx * ny:
        raise FileFormatError(f"{path}: expected {nx * ny} data lines, found {count}")
    return WignerGrid(xs, ys, vals)


def read_config(path) -> dict:
    """Parse a key = value config file against CONFIG_SCHEMA.

    Unknown keys are an error (they are almost always typos); missing keys
    are simply absent from the returned dict.
    """
    path = Path(path)
    out = {}
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
            key, val = (part.strip() for part in line.split("=", 1))
            if key not in CONFIG_SCHEMA:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            if key in out:
                raise ConfigError(f"{path}:{lineno}: duplicate config key {key!r}")
            try:
                out[key] = CONFIG_SCHEMA[key](val)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: cannot parse {key!r} value {val!r}") from exc
    return out


def write_report(path, sections: dict[str, list[str]]) -> None:
    """Write a sectioned plain-text report: '[name]' then one row per line."""
    path = Path(path)
    with open(path, "w") as fh:
        for name, rows in sections.items():
            fh.write(f"[{name}]\n")
            for row in rows:
                fh.write(row + "\n")
            fh.write("\n")
