"""Diagram drawing: SVG emission and a small deterministic rasterizer for it.

The rasterizer only understands what :func:`render_svg` writes (rect, circle,
line, polygon, single-letter text) and samples each pixel at its center with
no anti-aliasing, so identical SVG always yields identical bytes.
"""

from __future__ import annotations

import math
import struct
import xml.etree.ElementTree as ET
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import MissingPosition, UnsupportedElement
from .graph import DirectedGraph
from .layout import Layout

SVG_NS = "http://www.w3.org/2000/svg"

# 5x7 bitmap glyphs for the node alphabet
GLYPHS = {
    "A": [".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"],
    "B": ["####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."],
    "C": [".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."],
    "D": ["###..", "#..#.", "#...#", "#...#", "#...#", "#..#.", "###.."],
    "E": ["#####", "#....", "#....", "####.", "#....", "#....", "#####"],
    "F": ["#####", "#....", "#....", "####.", "#....", "#....", "#...."],
    "G": [".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".####"],
    "H": ["#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"],
}
GLYPH_W, GLYPH_H = 5, 7
_GLYPH_MASKS = {c: np.array([[ch == "#" for ch in row] for row in rows]) for c, rows in GLYPHS.items()}


@dataclass(frozen=True)
class RenderConfig:
    image_side: int = 224
    node_radius: float = 10.0
    font_size: float = 14.0
    stroke_width: float = 2.0
    arrowhead_length: float = 7.0
    arrowhead_width: float = 6.0
    arrow_gap: float = 1.0
    background: str = "#ffffff"
    node_fill: str = "#ffffff"
    node_stroke: str = "#000000"
    edge_color: str = "#000000"
    text_color: str = "#000000"

    def __post_init__(self):
        if self.image_side < 1:
            raise ValueError("image_side must be positive")
        for name in ("node_radius", "font_size", "stroke_width", "arrowhead_length", "arrowhead_width"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.node_radius <= self.font_size / 2:
            raise ValueError("node_radius must exceed font_size / 2")

    @property
    def margin(self) -> float:
        return self.node_radius + self.stroke_width

    def to_pixels(self, point, canvas) -> tuple[float, float]:
        span = self.image_side - 2 * self.margin
        return (self.margin + point[0] / canvas[0] * span, self.margin + point[1] / canvas[1] * span)


def _fmt(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


def edge_geometry(src_px, dst_px, config: RenderConfig):
    """Return (line_start, line_end, arrow_polygon) in pixels for one edge.

    The arrow tip sits ``arrow_gap`` px outside the target's stroke; the line
    runs from the source's stroke to the arrowhead base.
    """
    dx, dy = dst_px[0] - src_px[0], dst_px[1] - src_px[1]
    d = math.hypot(dx, dy)
    ux, uy = dx / d, dy / d
    nx, ny = -uy, ux
    outer = config.node_radius + config.stroke_width / 2
    start = (src_px[0] + ux * outer, src_px[1] + uy * outer)
    tip_off = outer + config.arrow_gap
    tip = (dst_px[0] - ux * tip_off, dst_px[1] - uy * tip_off)
    base = (tip[0] - ux * config.arrowhead_length, tip[1] - uy * config.arrowhead_length)
    hw = config.arrowhead_width / 2
    polygon = [tip, (base[0] + nx * hw, base[1] + ny * hw), (base[0] - nx * hw, base[1] - ny * hw)]
    return start, base, polygon


def render_svg(g: DirectedGraph, layout: Layout, config: RenderConfig = RenderConfig()) -> str:
    """Draw ``g`` at ``layout`` as an SVG document.

    Edges (sorted by source, target) are painted first, each as a line plus a
    filled triangular arrowhead, then the nodes (sorted by label) as circles
    with centered labels.
    """
    missing = [v for v in g.nodes if v not in layout.positions]
    if missing:
        raise MissingPosition(f"layout has no position for node(s) {', '.join(missing)}")
    side = config.image_side
    px = {v: config.to_pixels(layout.positions[v], layout.canvas) for v in g.nodes}
    sw = _fmt(config.stroke_width)
    out = [
        f'<svg xmlns="{SVG_NS}" version="1.1" width="{side}" height="{side}" viewBox="0 0 {side} {side}">',
        f'<rect x="0" y="0" width="{side}" height="{side}" fill="{config.background}"/>',
    ]
    for s, t in g.edges:
        start, end, poly = edge_geometry(px[s], px[t], config)
        out.append(
            f'<line x1="{_fmt(start[0])}" y1="{_fmt(start[1])}" x2="{_fmt(end[0])}" y2="{_fmt(end[1])}" '
            f'stroke="{config.edge_color}" stroke-width="{sw}"/>'
        )
        points = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in poly)
        out.append(f'<polygon points="{points}" fill="{config.edge_color}"/>')
    for v in g.nodes:
        x, y = px[v]
        out.append(
            f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(config.node_radius)}" fill="{config.node_fill}" '
            f'stroke="{config.node_stroke}" stroke-width="{sw}"/>'
        )
        out.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-size="{_fmt(config.font_size)}" text-anchor="middle" '
            f'dominant-baseline="central" fill="{config.text_color}">{v}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _color(value: str | None):
    if value is None or value == "none":
        return None
    if len(value) == 7 and value.startswith("#"):
        return np.array([int(value[i : i + 2], 16) for i in (1, 3, 5)], dtype=np.uint8)
    raise UnsupportedElement(f"unsupported color {value!r}")


class _Canvas:
    def __init__(self, side: int):
        self.side = side
        self.pixels = np.zeros((side, side, 3), dtype=np.uint8)

    def window(self, x0, y0, x1, y1):
        """Integer pixel window covering [x0, x1] x [y0, y1] plus pixel-center grids."""
        c0 = max(int(math.floor(x0)) - 1, 0)
        c1 = min(int(math.ceil(x1)) + 1, self.side)
        r0 = max(int(math.floor(y0)) - 1, 0)
        r1 = min(int(math.ceil(y1)) + 1, self.side)
        if c0 >= c1 or r0 >= r1:
            return None
        ys, xs = np.mgrid[r0:r1, c0:c1]
        return (slice(r0, r1), slice(c0, c1)), xs + 0.5, ys + 0.5

    def paint(self, region, mask, color):
        if color is not None:
            self.pixels[region][mask] = color

    def rect(self, x, y, w, h, fill):
        # pixel centers c + 0.5 with x <= c + 0.5 < x + w
        c0 = max(int(math.ceil(x - 0.5)), 0)
        c1 = min(int(math.ceil(x + w - 0.5)), self.side)
        r0 = max(int(math.ceil(y - 0.5)), 0)
        r1 = min(int(math.ceil(y + h - 0.5)), self.side)
        if fill is not None and c0 < c1 and r0 < r1:
            self.pixels[r0:r1, c0:c1] = fill

    def circle(self, cx, cy, r, fill, stroke, sw):
        reach = r + sw / 2
        win = self.window(cx - reach, cy - reach, cx + reach, cy + reach)
        if win is None:
            return
        region, xs, ys = win
        d = np.hypot(xs - cx, ys - cy)
        inner = r - sw / 2 if stroke is not None else r
        self.paint(region, d <= inner, fill)
        if stroke is not None:
            self.paint(region, (d > inner) & (d <= reach), stroke)

    def line(self, x1, y1, x2, y2, stroke, sw):
        hw = sw / 2
        win = self.window(min(x1, x2) - hw, min(y1, y2) - hw, max(x1, x2) + hw, max(y1, y2) + hw)
        if win is None:
            return
        region, xs, ys = win
        vx, vy = x2 - x1, y2 - y1
        seg2 = vx * vx + vy * vy
        if seg2 == 0:
            return
        t = ((xs - x1) * vx + (ys - y1) * vy) / seg2
        cross = np.abs((xs - x1) * vy - (ys - y1) * vx) / math.sqrt(seg2)
        self.paint(region, (t >= 0) & (t <= 1) & (cross <= hw), stroke)

    def polygon(self, points, fill):
        xs_p = [p[0] for p in points]
        ys_p = [p[1] for p in points]
        win = self.window(min(xs_p), min(ys_p), max(xs_p), max(ys_p))
        if win is None:
            return
        region, xs, ys = win
        inside = np.zeros(xs.shape, dtype=bool)
        n = len(points)
        for i in range(n):
            (ax, ay), (bx, by) = points[i], points[(i + 1) % n]
            if ay == by:
                continue
            crosses = (ay > ys) != (by > ys)
            x_at = ax + (ys - ay) * (bx - ax) / (by - ay)
            inside ^= crosses & (xs < x_at)
        self.paint(region, inside, fill)

    def text(self, x, y, content, size, fill):
        scale = max(int(round(size / GLYPH_H)), 1)
        gw, gh = GLYPH_W * scale, GLYPH_H * scale
        total_w = gw * len(content) + scale * (len(content) - 1)
        left = int(math.floor(x - total_w / 2 + 0.5))
        top = int(math.floor(y - gh / 2 + 0.5))
        for i, ch in enumerate(content):
            if ch not in _GLYPH_MASKS:
                raise UnsupportedElement(f"no glyph for character {ch!r}")
            mask = np.kron(_GLYPH_MASKS[ch], np.ones((scale, scale), dtype=bool))
            gx = left + i * (gw + scale)
            r0, c0 = max(top, 0), max(gx, 0)
            r1, c1 = min(top + gh, self.side), min(gx + gw, self.side)
            if r0 >= r1 or c0 >= c1:
                continue
            sub = mask[r0 - top : r1 - top, c0 - gx : c1 - gx]
            self.paint((slice(r0, r1), slice(c0, c1)), sub, fill)


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _num(el, name, default=None) -> float:
    value = el.get(name)
    if value is None:
        if default is None:
            raise UnsupportedElement(f"<{_local(el.tag)}> is missing attribute {name!r}")
        return default
    return float(value)


def rasterize_array(svg: str, image_side: int | None = None) -> np.ndarray:
    """Rasterize ``svg`` into an ``image_side x image_side x 3`` uint8 array."""
    root = ET.fromstring(svg)
    if _local(root.tag) != "svg":
        raise UnsupportedElement(f"root element must be <svg>, got <{_local(root.tag)}>")
    width = _num(root, "width")
    height = _num(root, "height")
    side = int(image_side if image_side is not None else width)
    sx, sy = side / width, side / height
    s = min(sx, sy)
    canvas = _Canvas(side)
    for el in root:
        tag = _local(el.tag)
        if tag == "rect":
            canvas.rect(_num(el, "x", 0.0) * sx, _num(el, "y", 0.0) * sy,
                        _num(el, "width") * sx, _num(el, "height") * sy, _color(el.get("fill")))
        elif tag == "circle":
            canvas.circle(_num(el, "cx") * sx, _num(el, "cy") * sy, _num(el, "r") * s,
                          _color(el.get("fill")), _color(el.get("stroke")), _num(el, "stroke-width", 1.0) * s)
        elif tag == "line":
            canvas.line(_num(el, "x1") * sx, _num(el, "y1") * sy, _num(el, "x2") * sx, _num(el, "y2") * sy,
                        _color(el.get("stroke")), _num(el, "stroke-width", 1.0) * s)
        elif tag == "polygon":
            pts = [tuple(float(c) for c in pair.split(",")) for pair in el.get("points", "").split()]
            if len(pts) < 3:
                raise UnsupportedElement("polygon needs at least three points")
            canvas.polygon([(x * sx, y * sy) for x, y in pts], _color(el.get("fill")))
        elif tag == "text":
            if len(el):
                raise UnsupportedElement("nested elements inside <text> are not supported")
            canvas.text(_num(el, "x") * sx, _num(el, "y") * sy, (el.text or "").strip(),
                        _num(el, "font-size", 14.0) * s, _color(el.get("fill")))
        else:
            raise UnsupportedElement(f"unsupported SVG element <{tag}>")
    return canvas.pixels


def _png_chunk(kind: bytes, data: bytes) -> bytes:
    return struct.pack(">I", len(data)) + kind + data + struct.pack(">I", zlib.crc32(kind + data) & 0xFFFFFFFF)


def encode_png(pixels: np.ndarray, metadata: dict[str, str] | None = None) -> bytes:
    h, w, _ = pixels.shape
    raw = np.zeros((h, 1 + w * 3), dtype=np.uint8)
    raw[:, 1:] = pixels.reshape(h, w * 3)
    parts = [b"\x89PNG\r\n\x1a\n", _png_chunk(b"IHDR", struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0))]
    for key, value in sorted((metadata or {}).items()):
        parts.append(_png_chunk(b"tEXt", key.encode("latin-1") + b"\x00" + str(value).encode("latin-1")))
    parts.append(_png_chunk(b"IDAT", zlib.compress(raw.tobytes(), 6)))
    parts.append(_png_chunk(b"IEND", b""))
    return b"".join(parts)


def encode_ppm(pixels: np.ndarray) -> bytes:
    h, w, _ = pixels.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + pixels.tobytes()


def decode_png(data: bytes) -> np.ndarray:
    """Read back an 8-bit RGB, filter-0 PNG as written by :func:`encode_png`."""
    if data[:8] != b"\x89PNG\r\n\x1a\n":
        raise ValueError("not a PNG file")
    pos, idat, w, h = 8, b"", 0, 0
    while pos < len(data):
        (length,) = struct.unpack(">I", data[pos : pos + 4])
        kind = data[pos + 4 : pos + 8]
        body = data[pos + 8 : pos + 8 + length]
        if kind == b"IHDR":
            w, h = struct.unpack(">II", body[:8])
        elif kind == b"IDAT":
            idat += body
        pos += 12 + length
    raw = np.frombuffer(zlib.decompress(idat), dtype=np.uint8).reshape(h, 1 + w * 3)
    if np.any(raw[:, 0] != 0):
        raise ValueError("only filter type 0 is supported")
    return raw[:, 1:].reshape(h, w, 3).copy()


def rasterize(svg: str, image_side: int | None = None, fmt: str = "png", metadata: dict[str, str] | None = None) -> bytes:
    pixels = rasterize_array(svg, image_side)
    if fmt == "png":
        return encode_png(pixels, metadata)
    if fmt == "ppm":
        return encode_ppm(pixels)
    raise ValueError(f"unknown raster format {fmt!r}")
