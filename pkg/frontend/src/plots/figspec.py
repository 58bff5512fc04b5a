"""Figure specifications in the same flat key=value format as run configs.

A figure spec names input CSV(s), a figure kind, an output image path, and
the column bindings.  Recognized keys:

    kind      ladder | plateau | histogram-vs-exponential | ratio-band
    input     CSV path (relative paths resolve against the spec file)
    output    image path (.png or .svg; relative to the working directory)
    x, y, se  column names (se optional; x unused by the histogram kind)
    reference named constant or literal float, drawn as a horizontal line
              (required for ratio-band, optional elsewhere)
    scale     none | x | x_over_logx - presentation rescaling of y and se
              by the x column (ratio-band only)
    band      half-width of the uncertainty band in SEs (default 2)
    bins      histogram bin count (default 30)
    title, xlabel, ylabel   axis labels
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from plots.constants import resolve_reference

KINDS = ("ladder", "plateau", "histogram-vs-exponential", "ratio-band")
SCALES = ("none", "x", "x_over_logx")


class SpecError(ValueError):
    """Malformed figure specification."""


def parse_flat_config(text: str) -> dict:
    """Flat ``key = value`` lines; '#' starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise SpecError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = stripped.split("=", 1)
        key = key.strip()
        if not key:
            raise SpecError(f"line {lineno}: empty key")
        if key in out:
            raise SpecError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


@dataclass
class FigureSpec:
    kind: str
    input: Path
    output: Path
    x: str = "t"
    y: str = "value"
    se: str | None = None
    reference: float | None = None
    scale: str = "none"
    band: float = 2.0
    bins: int = 30
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    raw: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"unknown kind {self.kind!r}; expected one of {KINDS}")
        if self.scale not in SCALES:
            raise SpecError(f"unknown scale {self.scale!r}; expected one of {SCALES}")
        if self.kind == "ratio-band" and self.reference is None:
            raise SpecError("ratio-band figures require a 'reference' constant")
        if self.output.suffix not in (".png", ".svg"):
            raise SpecError("output must end in .png or .svg")

    @property
    def required_columns(self) -> list:
        if self.kind == "histogram-vs-exponential":
            return [self.y]
        cols = [self.x, self.y]
        if self.se:
            cols.append(self.se)
        return cols


def load_figure_spec(path) -> FigureSpec:
    path = Path(path)
    if not path.is_file():
        raise SpecError(f"figure spec not found: {path}")
    raw = parse_flat_config(path.read_text())
    for key in ("kind", "input", "output"):
        if key not in raw:
            raise SpecError(f"missing required key {key!r}")
    unknown = set(raw) - {
        "kind", "input", "output", "x", "y", "se", "reference", "scale",
        "band", "bins", "title", "xlabel", "ylabel",
    }
    if unknown:
        raise SpecError(f"unknown keys: {sorted(unknown)}")
    input_path = Path(raw["input"])
    if not input_path.is_absolute():
        input_path = path.parent / input_path
    try:
        return FigureSpec(
            kind=raw["kind"],
            input=input_path,
            output=Path(raw["output"]),
            x=raw.get("x", "t"),
            y=raw.get("y", "value"),
            se=raw.get("se") or None,
            reference=(
                resolve_reference(raw["reference"]) if "reference" in raw else None
            ),
            scale=raw.get("scale", "none"),
            band=float(raw.get("band", "2")),
            bins=int(raw.get("bins", "30")),
            title=raw.get("title", ""),
            xlabel=raw.get("xlabel", ""),
            ylabel=raw.get("ylabel", ""),
            raw=raw,
        )
    except ValueError as exc:
        if isinstance(exc, SpecError):
            raise
        raise SpecError(str(exc)) from exc
