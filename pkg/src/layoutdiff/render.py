"""Deterministic SVG rendering of layouts.

One labeled rectangle per object at exact pixel coordinates, a canvas
border, and (optionally) labeled arrows for the graph's relation edges.
Output is byte-identical for identical inputs: fixed 2-decimal coordinate
formatting, colors from a stable hash of the object id, canonical element
order.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass

from .scene import Layout, SceneGraph


@dataclass(frozen=True)
class RenderOptions:
    draw_edges: bool = True
    font_size: int = 14
    stroke_width: float = 2.0


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def object_color(object_id: str) -> str:
    """Stable fill color: first 3 bytes of the id's md5, lightened."""
    digest = hashlib.md5(object_id.encode("utf-8")).digest()
    r, g, b = (128 + d // 2 for d in digest[:3])
    return f"#{r:02x}{g:02x}{b:02x}"


def render_svg(g: SceneGraph, layout: Layout,
               options: RenderOptions = RenderOptions()) -> str:
    if not layout.covers(g):
        missing = [oid for oid in g.object_ids if oid not in layout]
        raise ValueError(f"layout does not cover graph; missing {missing}")
    W, H = g.canvas.width, g.canvas.height
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}">',
        f'  <rect x="0" y="0" width="{W}" height="{H}" fill="white" '
        f'stroke="black" stroke-width="{_fmt(options.stroke_width)}"/>',
    ]
    if g.scene_label:
        lines.append(f'  <title>{g.scene_label}</title>')
    for oid in g.object_ids:  # canonical order
        box = layout[oid]
        left, top, right, bottom = box.pixel_corners(g.canvas)
        lines.append(
            f'  <rect x="{_fmt(left)}" y="{_fmt(top)}" '
            f'width="{_fmt(right - left)}" height="{_fmt(bottom - top)}" '
            f'fill="{object_color(oid)}" fill-opacity="0.7" stroke="black" '
            f'stroke-width="{_fmt(options.stroke_width)}"/>')
        lines.append(
            f'  <text x="{_fmt(left + 4)}" y="{_fmt(top + options.font_size + 2)}" '
            f'font-size="{options.font_size}" font-family="monospace">{oid}</text>')
    if options.draw_edges:
        for e in g.edges:
            if e.relation.is_unary:
                continue
            a = layout[e.subject]
            b = layout[e.object]
            x1, y1 = a.center[0] * W, a.center[1] * H
            x2, y2 = b.center[0] * W, b.center[1] * H
            mx, my = (x1 + x2) / 2, (y1 + y2) / 2
            lines.append(
                f'  <line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" '
                f'y2="{_fmt(y2)}" stroke="#444444" stroke-width="1.00" '
                f'marker-end="url(#arrow)"/>')
            lines.append(
                f'  <text x="{_fmt(mx)}" y="{_fmt(my - 4)}" font-size="11" '
                f'font-family="monospace" fill="#444444">{e.relation.value}</text>')
    has_arrows = options.draw_edges and any(e.relation.is_binary for e in g.edges)
    if has_arrows:
        lines.insert(1, '  <defs><marker id="arrow" viewBox="0 0 10 10" '
                        'refX="9" refY="5" markerWidth="7" markerHeight="7" '
                        'orient="auto-start-reverse">'
                        '<path d="M 0 0 L 10 5 L 0 10 z" fill="#444444"/>'
                        '</marker></defs>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
