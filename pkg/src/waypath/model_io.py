"""Reading and writing models and toolpaths.

Supported inputs are a small G-code subset and the native JSON document::

    {"schema_version": 1, "name": "...",
     "contours": [{"layer_z": 0.2, "closed": true, "points": [[x, y], ...]}, ...]}

A closed contour lists each vertex once; the closing segment is implied.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Mapping, NamedTuple

from .depgraph import DependencyGraph
from .exceptions import (EmptyModel, InfeasibleToolpath, InvalidGeometry, LayerOutOfRange, MalformedLine,
                         SchemaError, UnsupportedMode)
from .geometry import TOL, Contour, LineSegment, Model, Point3, dist
from .objective import Toolpath
from .validation import check_order

SCHEMA_VERSION = 1

# ---------------------------------------------------------------- G-code in

_COMMENT = re.compile(r"\([^()]*\)|;.*$")
_WORD = re.compile(r"\s*([A-Za-z])\s*([-+]?(?:\d+\.?\d*|\.\d+))")


class GcodeMove(NamedTuple):
    kind: str  # "travel" or "extrude"
    target: Point3
    extrusion_delta: float
    line_no: int


def _words(line: str, line_no: int) -> list[tuple[str, float]]:
    text = _COMMENT.sub("", line)
    star = text.find("*")
    if star >= 0:
        text = text[:star]
    text = text.strip()
    out, pos = [], 0
    while pos < len(text):
        m = _WORD.match(text, pos)
        if m is None:
            raise MalformedLine(line_no, line)
        out.append((m.group(1).upper(), float(m.group(2))))
        pos = m.end()
        if pos < len(text) and not text[pos].isspace() and text[pos - 1].isdigit() and text[pos].isdigit():
            raise MalformedLine(line_no, line)
    return out


def iter_moves(text: str) -> Iterator[GcodeMove]:
    """Interpret G-code and yield every positioning move.

    Moves that add filament are ``extrude``; anything else that carries an
    X/Y/Z/E word (including retractions) is ``travel``.
    """
    x = y = z = e = 0.0
    relative = False
    for line_no, raw in enumerate(text.splitlines(), start=1):
        if not raw.isascii():
            raise MalformedLine(line_no, raw, "non-ASCII text")
        words = _words(raw, line_no)
        if not words:
            continue
        letters = [w for w, _ in words]
        if words[0][0] == "N":
            words = words[1:]
            if not words:
                continue
        head, num = words[0]
        if head in ("M", "T"):
            continue
        if head != "G":
            raise MalformedLine(line_no, raw, "line does not start with a G, M or T command")
        if len(set(letters)) != len(letters):
            raise MalformedLine(line_no, raw, "repeated word")
        args = dict(words[1:])
        if num in (0, 1):
            if any(k not in "XYZEF" for k in args):
                raise MalformedLine(line_no, raw, "unexpected word in move")
            if not any(k in args for k in "XYZE"):
                continue
            nx, ny, nz, ne = (args.get(k) for k in "XYZE")
            if relative:
                nx = x + (nx or 0.0)
                ny = y + (ny or 0.0)
                nz = z + (nz or 0.0)
                ne = e + (ne or 0.0)
            else:
                nx = x if nx is None else nx
                ny = y if ny is None else ny
                nz = z if nz is None else nz
                ne = e if ne is None else ne
            de = ne - e
            kind = "extrude" if de > 0 else "travel"
            yield GcodeMove(kind, Point3(nx, ny, nz), de, line_no)
            x, y, z, e = nx, ny, nz, ne
        elif num in (2, 3):
            raise UnsupportedMode(line_no, "arc moves (G2/G3)")
        elif num == 20:
            raise UnsupportedMode(line_no, "inch units (G20)")
        elif num == 90:
            relative = False
        elif num == 91:
            relative = True
        elif num == 92:
            if any(k not in "XYZE" for k in args):
                raise MalformedLine(line_no, raw, "unexpected word in G92")
            if not args:
                x = y = z = e = 0.0
            x, y, z, e = (args.get(k, v) for k, v in zip("XYZE", (x, y, z, e)))
        elif num == 28:
            axes = [k for k in "XYZ" if k in args] or list("XYZ")
            x, y, z = (0.0 if k in axes else v for k, v in zip("XYZ", (x, y, z)))
            yield GcodeMove("travel", Point3(x, y, z), 0.0, line_no)
        # remaining G codes (G4 dwell, G21, G29 ...) do not move the head


def parse_gcode(text: str | bytes, name: str = "gcode") -> Model:
    """Build a model from G-code: each unbroken run of planar extrusions is one contour."""
    if isinstance(text, bytes):
        try:
            text = text.decode("ascii")
        except UnicodeDecodeError as exc:
            line_no = text[:exc.start].count(b"\n") + 1
            raise MalformedLine(line_no, "", "non-ASCII text") from None
    runs: list[list[Point3]] = []
    current: list[Point3] | None = None
    pos = Point3(0.0, 0.0, 0.0)
    for mv in iter_moves(text):
        if mv.kind == "extrude":
            if abs(mv.target.z - pos.z) > TOL:
                raise UnsupportedMode(mv.line_no, "extrusion while changing Z")
            if dist(mv.target, pos) > TOL:
                if current is None:
                    current = [pos]
                    runs.append(current)
                current.append(mv.target)
        else:
            current = None
        pos = mv.target
    if not runs:
        raise EmptyModel("no extruding moves found")
    heights = sorted({run[0].z for run in runs})
    layer = {z: k for k, z in enumerate(heights)}
    contours = []
    for i, run in enumerate(runs):
        segs = tuple(LineSegment(a, b) for a, b in zip(run, run[1:]))
        closed = len(segs) >= 3 and dist(run[0], run[-1]) <= TOL
        if closed:
            segs = segs[:-1] + (LineSegment(segs[-1].start, run[0]),)
        contours.append(Contour(i, segs, layer[run[0].z], closed))
    return Model(tuple(contours), tuple(heights), name)


# ---------------------------------------------------------------- native JSON

def _number(v, path):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise SchemaError(path, f"expected a finite number, got {v!r}")
    return float(v)


def model_from_document(doc) -> Model:
    if not isinstance(doc, Mapping):
        raise SchemaError("$", "document must be an object")
    version = doc.get("schema_version")
    if isinstance(version, bool) or version != SCHEMA_VERSION:
        raise SchemaError("$.schema_version", f"expected {SCHEMA_VERSION}, got {version!r}")
    name = doc.get("name")
    if not isinstance(name, str):
        raise SchemaError("$.name", "expected a string")
    raw = doc.get("contours")
    if not isinstance(raw, list) or not raw:
        raise SchemaError("$.contours", "expected a non-empty list")
    extra = set(doc) - {"schema_version", "name", "contours"}
    if extra:
        raise SchemaError("$", f"unexpected keys {sorted(extra)}")
    items = []
    for i, c in enumerate(raw):
        path = f"$.contours[{i}]"
        if not isinstance(c, Mapping):
            raise SchemaError(path, "expected an object")
        extra = set(c) - {"layer_z", "closed", "points"}
        if extra:
            raise SchemaError(path, f"unexpected keys {sorted(extra)}")
        z = _number(c.get("layer_z"), path + ".layer_z")
        closed = c.get("closed")
        if not isinstance(closed, bool):
            raise SchemaError(path + ".closed", "expected true or false")
        pts = c.get("points")
        if not isinstance(pts, list):
            raise SchemaError(path + ".points", "expected a list")
        need = 3 if closed else 2
        if len(pts) < need:
            raise SchemaError(path + ".points", f"{'closed' if closed else 'open'} contour needs at least {need} points")
        xy = []
        for k, p in enumerate(pts):
            ppath = f"{path}.points[{k}]"
            if not isinstance(p, list) or len(p) != 2:
                raise SchemaError(ppath, "expected an [x, y] pair")
            xy.append((_number(p[0], ppath + "[0]"), _number(p[1], ppath + "[1]")))
            if k and math.dist(xy[-1], xy[-2]) <= TOL:
                raise SchemaError(ppath, "zero-length segment")
        if closed and math.dist(xy[0], xy[-1]) <= TOL:
            raise SchemaError(path + ".points", "closed contour must not repeat its first point")
        items.append((xy, z, closed))
    try:
        return Model.from_contours(items, name)
    except InvalidGeometry as exc:
        raise SchemaError("$.contours", str(exc)) from None


def parse_native(text: str | bytes) -> Model:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON: {exc}") from None
    return model_from_document(doc)


def model_to_document(m: Model) -> dict:
    contours = []
    for c in m.contours:
        pts = c.points[:-1] if c.closed else c.points
        contours.append({"layer_z": c.z, "closed": c.closed, "points": [[p.x, p.y] for p in pts]})
    return {"schema_version": SCHEMA_VERSION, "name": m.name, "contours": contours}


def emit_native(m: Model) -> str:
    """Serialise to native JSON, one contour per line."""
    doc = model_to_document(m)
    body = ",\n".join("    " + json.dumps(c) for c in doc["contours"])
    return ('{\n'
            f'  "schema_version": {SCHEMA_VERSION},\n'
            f'  "name": {json.dumps(m.name)},\n'
            f'  "contours": [\n{body}\n  ]\n'
            '}\n')


def load_model(path: str | Path) -> Model:
    """Read ``.json`` as native format and ``.gcode``/``.gco``/``.g`` as G-code."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".json":
        return parse_native(path.read_bytes())
    if suffix in (".gcode", ".gco", ".g", ".nc"):
        return parse_gcode(path.read_bytes(), name=path.stem)
    raise ValueError(f"cannot tell the format of {path.name}: use .json or .gcode")


# ---------------------------------------------------------------- G-code out

@dataclass(frozen=True)
class GcodeParams:
    travel_feed: float = 6000.0
    print_feed: float = 1800.0
    extrude_per_mm: float = 0.05


def _fmt(v: float, places: int = 9) -> str:
    s = f"{v:.{places}f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def _checked_order(t: Toolpath, m: Model, d: DependencyGraph | None) -> tuple[int, ...]:
    try:
        order = check_order(t.order, len(m))
    except ValueError as exc:
        raise InfeasibleToolpath(str(exc)) from None
    if d is not None and not d.is_feasible_order(order):
        raise InfeasibleToolpath("toolpath violates the dependency graph")
    return order


def emit_gcode(t: Toolpath, m: Model, params: GcodeParams | None = None, d: DependencyGraph | None = None) -> str:
    """Absolute-coordinate G-code: a G0 to each contour start, then one G1 per segment."""
    params = params or GcodeParams()
    order = _checked_order(t, m, d)
    out = [
        "; generated by waypath",
        f"; model: {m.name}",
        f"; planner: {t.planner or 'unknown'}",
        f"; contours: {len(order)}",
        f"; travel_mm: {_fmt(t.travel, 6)}",
        "G21",
        "G90",
        "M82",
        "G92 E0",
    ]
    e = 0.0
    tf, pf = _fmt(params.travel_feed, 3), _fmt(params.print_feed, 3)
    for k in order:
        c = m.contours[k]
        s = c.start
        out.append(f"G0 X{_fmt(s.x)} Y{_fmt(s.y)} Z{_fmt(s.z)} F{tf}")
        for seg in c.segments:
            e += params.extrude_per_mm * seg.length
            out.append(f"G1 X{_fmt(seg.end.x)} Y{_fmt(seg.end.y)} E{_fmt(e, 6)} F{pf}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------- SVG out

def emit_layer_svg(t: Toolpath, m: Model, layer: int, colors: Mapping[int, str] | None = None,
                   d: DependencyGraph | None = None) -> str:
    """Top view of one layer: printed contours in black, travel entering or within it in red.

    ``colors`` optionally maps contour id to a stroke colour (e.g. per cluster).
    """
    if not 0 <= layer < len(m.layer_heights):
        raise LayerOutOfRange(f"layer {layer} not in 0..{len(m.layer_heights) - 1}")
    order = _checked_order(t, m, d)
    xs = [p.x for c in m.contours for p in c.points]
    ys = [p.y for c in m.contours for p in c.points]
    margin = 2.0
    x0, x1 = min(xs) - margin, max(xs) + margin
    y0, y1 = min(ys) - margin, max(ys) + margin
    w, h = x1 - x0, y1 - y0
    stroke = _fmt(max(w, h) / 400.0, 4)

    def pts(points):
        return " ".join(f"{_fmt(p[0] - x0, 4)},{_fmt(y1 - p[1], 4)}" for p in points)

    body = []
    prev = None
    for k in order:
        c = m.contours[k]
        if c.layer == layer:
            if prev is not None:
                body.append(f'<polyline class="travel" stroke="#ff0000" points="{pts([prev.end, c.start])}"/>')
            color = (colors or {}).get(k, "#000000")
            body.append(f'<polyline class="print" data-contour="{k}" stroke="{color}" points="{pts(c.points)}"/>')
        prev = c
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_fmt(w, 4)}mm" height="{_fmt(h, 4)}mm" '
        f'viewBox="0 0 {_fmt(w, 4)} {_fmt(h, 4)}">\n'
        f'<title>{m.name} layer {layer} z={_fmt(m.layer_heights[layer], 6)}</title>\n'
        f'<g fill="none" stroke-width="{stroke}" stroke-linecap="round" stroke-linejoin="round">\n'
        + "".join(line + "\n" for line in body)
        + "</g>\n</svg>\n"
    )


def svg_filename(m: Model, layer: int) -> str:
    return f"{m.name}_L{layer}.svg"
