"""Plain-text data formats: two-column series CSV, the headered streak-camera
grid, and long-form tuning-map CSV.

Parsers reject rather than coerce: non-numeric cells, NaN/inf, negative
counts, ragged rows and unknown headers are all errors naming file, line and
column.  Writers emit decimal text with 17 significant digits, so
write -> read -> write round-trips are byte-exact.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .dynamics import DecayTrace
from .errors import ConfigurationError, ParseError, ValidationError
from .spectra import SpectrumSeries, TuningPoint


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def _parse_cell(token: str, path: str, line: int, column: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"non-numeric value {token!r}", path, line, column)
    if not np.isfinite(value):
        raise ValidationError(f"non-finite value {token!r}", path, line, column)
    return value


# ---------------------------------------------------------------------------
# streak-camera grid


@dataclass(frozen=True)
class StreakImage:
    """Time x wavelength photon-count grid with axis calibration."""

    rows: int
    cols: int
    t0: float        # ns
    dt: float        # ns
    lambda0: float   # nm
    dlambda: float   # nm, may be negative (reversed dispersion)
    counts: np.ndarray

    def __post_init__(self):
        if self.dt <= 0:
            raise ConfigurationError("dt must be > 0")
        if self.dlambda == 0:
            raise ConfigurationError("dlambda must be nonzero")
        counts = np.asarray(self.counts, dtype=float)
        if counts.shape != (self.rows, self.cols):
            raise ConfigurationError("counts shape does not match rows x cols")
        if not np.all(np.isfinite(counts)):
            raise ConfigurationError("counts must be finite")
        if np.any(counts < 0):
            raise ConfigurationError("counts must be >= 0")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.rows)

    @property
    def wavelengths(self) -> np.ndarray:
        return self.lambda0 + self.dlambda * np.arange(self.cols)


_STREAK_KEYS = ("rows", "cols", "t0_ns", "dt_ns", "lambda0_nm", "dlambda_nm")


def parse_streak_text(text: str, path: str = "<buffer>") -> StreakImage:
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty file", path, 1)
    header = lines[0].split()
    if not header or header[0] != "#":
        raise ParseError("header must start with '# '", path, 1)
    fields = {}
    for i, token in enumerate(header[1:], start=1):
        if "=" not in token:
            raise ParseError(f"expected key=value, got {token!r}", path, 1, i)
        key, _, raw = token.partition("=")
        fields[key] = (raw, i)
    if tuple(fields) != _STREAK_KEYS:
        raise ParseError(
            f"header keys must be {' '.join(_STREAK_KEYS)}", path, 1)

    def num(key, as_int=False):
        raw, col = fields[key]
        value = _parse_cell(raw, path, 1, col)
        if as_int:
            if value != int(value):
                raise ParseError(f"{key} must be an integer", path, 1, col)
            return int(value)
        return value

    rows, cols = num("rows", as_int=True), num("cols", as_int=True)
    if rows < 1 or cols < 1:
        raise ValidationError("rows and cols must be >= 1", path, 1)
    grid = np.empty((rows, cols))
    data_lines = [(n, ln) for n, ln in enumerate(lines[1:], start=2)
                  if ln.strip()]
    if len(data_lines) > rows:
        extra_line = data_lines[rows][0]
        raise ParseError(f"expected {rows} data rows", path, extra_line)
    if len(data_lines) < rows:
        raise ParseError(f"expected {rows} data rows, found {len(data_lines)}",
                         path, len(lines) + 1)
    for r, (lineno, ln) in enumerate(data_lines):
        cells = ln.split()
        if len(cells) != cols:
            raise ParseError(f"expected {cols} columns, found {len(cells)}",
                             path, lineno)
        for c, token in enumerate(cells):
            value = _parse_cell(token, path, lineno, c + 1)
            if value < 0:
                raise ValidationError(f"negative count {token}", path, lineno,
                                      c + 1)
            grid[r, c] = value
    return StreakImage(rows=rows, cols=cols, t0=num("t0_ns"), dt=num("dt_ns"),
                       lambda0=num("lambda0_nm"), dlambda=num("dlambda_nm"),
                       counts=grid)


def read_streak(path) -> StreakImage:
    with open(path, "r", encoding="ascii") as fh:
        return parse_streak_text(fh.read(), str(path))


def write_streak(img: StreakImage, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"# rows={img.rows} cols={img.cols} t0_ns={_fmt(img.t0)}"
                 f" dt_ns={_fmt(img.dt)} lambda0_nm={_fmt(img.lambda0)}"
                 f" dlambda_nm={_fmt(img.dlambda)}\n")
        for row in img.counts:
            fh.write(" ".join(_fmt(v) for v in row) + "\n")


def bin_streak_region(img: StreakImage, lambda_min: float,
                      lambda_max: float) -> DecayTrace:
    """Sum counts over the wavelength window into a time-binned counts trace."""
    if lambda_min >= lambda_max:
        raise ConfigurationError("need lambda_min < lambda_max")
    wl = img.wavelengths
    mask = (wl >= lambda_min) & (wl <= lambda_max)
    if not mask.any():
        raise ConfigurationError(
            f"window [{lambda_min:g}, {lambda_max:g}] nm selects no columns "
            f"(image spans [{wl.min():g}, {wl.max():g}] nm)")
    return DecayTrace(t0=img.t0, dt=img.dt,
                      values=img.counts[:, mask].sum(axis=1), kind="counts")


# ---------------------------------------------------------------------------
# column CSV


def read_columns(path_or_text, path: str | None = None):
    """Strict numeric CSV: returns (column names, list of float arrays)."""
    if path is None:
        path = str(path_or_text)
        with open(path_or_text, "r", encoding="ascii") as fh:
            text = fh.read()
    else:
        text = path_or_text
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise ParseError("missing header row", path, 1)
    names = tuple(lines[0].strip().split(","))
    ncols = len(names)
    rows = []
    for lineno, ln in enumerate(lines[1:], start=2):
        if not ln.strip():
            continue
        cells = ln.split(",")
        if len(cells) != ncols:
            raise ParseError(f"expected {ncols} columns, found {len(cells)}",
                             path, lineno)
        rows.append([_parse_cell(tok.strip(), path, lineno, c + 1)
                     for c, tok in enumerate(cells)])
    if not rows:
        raise ParseError("no data rows", path, len(lines) + 1)
    data = np.asarray(rows, dtype=float)
    return names, [data[:, i] for i in range(ncols)]


def write_columns(path, names, columns) -> None:
    columns = [np.asarray(col, dtype=float) for col in columns]
    if len(columns) != len(names) or not columns:
        raise ConfigurationError("one name per column required")
    length = columns[0].size
    if any(col.size != length for col in columns) or length == 0:
        raise ConfigurationError("columns must be nonempty and equal length")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(names) + "\n")
        for i in range(length):
            fh.write(",".join(_fmt(col[i]) for col in columns) + "\n")


# header -> (axis_kind, value_kind) for spectrum-series CSV
_SERIES_HEADERS = {
    ("freq_ghz", "transmission"): ("freq_ghz", "transmission"),
    ("wavelength_nm", "counts"): ("wavelength_nm", "counts"),
}
_TRACE_HEADER = ("time_ns", "value")
TUNING_HEADER = ("cavity_pos", "line", "intensity_rel")


def read_series(path):
    """Read a spectrum or decay-trace CSV, dispatching on the header row."""
    names, columns = read_columns(path)
    if names in _SERIES_HEADERS:
        axis, values = columns
        _check_series_semantics(path, names, axis, values)
        axis_kind, value_kind = _SERIES_HEADERS[names]
        return SpectrumSeries(axis, values, axis_kind, value_kind, {})
    if names == _TRACE_HEADER:
        times, values = columns
        return _trace_from_columns(path, times, values)
    raise ParseError(f"unknown header {','.join(names)!r}", str(path), 1)


def _check_series_semantics(path, names, axis, values):
    d = np.diff(axis)
    if axis.size > 1 and not (np.all(d > 0) or np.all(d < 0)):
        increasing = d[0] > 0
        bad = int(np.argmax(d <= 0 if increasing else d >= 0))
        raise ValidationError("axis not strictly monotone", str(path),
                              bad + 3, 1)
    negative = np.where(values < 0)[0]
    if negative.size:
        raise ValidationError(f"negative {names[1]} value", str(path),
                              int(negative[0]) + 2, 2)


def _trace_from_columns(path, times, values) -> DecayTrace:
    if times.size < 2:
        raise ValidationError("need at least two rows to fix the time step",
                              str(path), 2)
    dt = _recover_time_step(times)
    if dt <= 0:
        raise ValidationError("time axis must increase", str(path), 3, 1)
    expected = times[0] + dt * np.arange(times.size)
    bad = np.where(np.abs(times - expected) > 1e-9 * max(abs(dt), 1.0))[0]
    if bad.size:
        raise ValidationError("time bins are not uniform", str(path),
                              int(bad[0]) + 2, 1)
    negative = np.where(values < 0)[0]
    if negative.size:
        raise ValidationError("negative trace value", str(path),
                              int(negative[0]) + 2, 2)
    return DecayTrace(t0=float(times[0]), dt=float(dt), values=values,
                      kind="counts" if np.all(values == np.round(values))
                      else "population")


def _recover_time_step(times: np.ndarray) -> float:
    """Time step whose regenerated grid t0 + k dt matches the parsed column.

    Files written by this module encode times as t0 + k dt; the naive
    difference times[1] - times[0] can land a couple of ulps off that dt, so
    search its ulp neighborhood for a bit-exact reproduction (keeps
    write -> read -> write byte-identical).
    """
    t0 = times[0]
    seeds = (times[1] - times[0], (times[-1] - times[0]) / (times.size - 1))
    k = np.arange(times.size)
    for seed in seeds:
        dt = seed
        for _ in range(4):
            dt = np.nextafter(dt, -np.inf)
        for _ in range(9):
            if np.array_equal(t0 + dt * k, times):
                return float(dt)
            dt = np.nextafter(dt, np.inf)
    return float(seeds[0])


def write_series(obj, path) -> None:
    """Write a SpectrumSeries or DecayTrace to its canonical CSV form."""
    if isinstance(obj, SpectrumSeries):
        key = (obj.axis_kind, obj.value_kind)
        if key not in _SERIES_HEADERS:
            raise ConfigurationError(
                f"no CSV header registered for series kind {key}")
        write_columns(path, key, (obj.axis, obj.values))
    elif isinstance(obj, DecayTrace):
        write_columns(path, _TRACE_HEADER, (obj.times, obj.values))
    else:
        raise ConfigurationError(f"cannot serialize {type(obj).__name__}")


def write_tuning_map(points, path) -> None:
    """Long-form tuning map CSV: cavity_pos,line,intensity_rel."""
    if not points:
        raise ConfigurationError("tuning map is empty")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(TUNING_HEADER) + "\n")
        for p in points:
            fh.write(f"{_fmt(p.cavity_pos)},{p.line},{_fmt(p.intensity_rel)}\n")


def read_tuning_map(path) -> list[TuningPoint]:
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or tuple(lines[0].split(",")) != TUNING_HEADER:
        raise ParseError(f"expected header {','.join(TUNING_HEADER)!r}",
                         str(path), 1)
    points = []
    for lineno, ln in enumerate(lines[1:], start=2):
        if not ln.strip():
            continue
        cells = ln.split(",")
        if len(cells) != 3:
            raise ParseError("expected 3 columns", str(path), lineno)
        pos = _parse_cell(cells[0], str(path), lineno, 1)
        value = _parse_cell(cells[2], str(path), lineno, 3)
        if value < 0:
            raise ValidationError("negative intensity", str(path), lineno, 3)
        points.append(TuningPoint(pos, cells[1], value))
    if not points:
        raise ParseError("no data rows", str(path), 2)
    return points


def write_fit_report_csv(result, path, units: dict | None = None) -> None:
    """Machine-readable fit report: label,value,sigma,unit per line."""
    units = units or {}
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("label,value,sigma,unit\n")
        for name in result.free_names:
            m = result.params[name]
            fh.write(f"{name},{_fmt(m.value)},{_fmt(m.sigma)},"
                     f"{units.get(name, m.unit)}\n")
        fh.write(f"chi2_reduced,{_fmt(result.chi2_reduced)},0,\n")
        fh.write(f"converged,{int(result.converged)},0,\n")
