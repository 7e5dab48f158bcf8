"""2-D frame rendering: the top-down world view and per-agent egocentric crops.

Frames render from replay snapshots, so the same implementation serves live
review and post-mission scrubbing.  The egocentric view is a square crop
centered on the agent, rotated in quarter turns so the agent's travel heading
points up — the desk-scale stand-in for first-person footage.
"""

from __future__ import annotations

from PIL import Image, ImageDraw

from .errors import CobuildError
from .replay import Snapshot

CELL_PX = 16
EGO_RADIUS_CELLS = 7

BACKGROUND = (214, 207, 192)
OUT_OF_WORLD = (34, 34, 34)
GRID_LINE = (196, 189, 174)

MATERIAL_COLORS = {
    "wood": (139, 90, 43),
    "stone": (127, 140, 141),
    "brick": (178, 57, 57),
}
_FALLBACK_COLORS = [(86, 130, 89), (130, 86, 125), (86, 104, 130), (130, 118, 86)]

BLOCK_COLORS = {
    "air": (233, 228, 216),
    "ground": BACKGROUND,
    "crafting_table": (107, 79, 29),
    "chest": (201, 162, 39),
}

AGENT_COLORS = {"human": (31, 111, 235), "ai": (217, 63, 63)}


class UnknownViewpoint(CobuildError):
    default_code = "unknown-viewpoint"


def material_color(material: str) -> tuple[int, int, int]:
    if material in MATERIAL_COLORS:
        return MATERIAL_COLORS[material]
    index = sum(material.encode()) % len(_FALLBACK_COLORS)
    return _FALLBACK_COLORS[index]


def _blend(a, b, f):
    return tuple(round(a[i] + (b[i] - a[i]) * f) for i in range(3))


def _block_color(block: dict) -> tuple[int, int, int]:
    kind = block["kind"]
    if kind in BLOCK_COLORS:
        return BLOCK_COLORS[kind]
    color = material_color(block.get("material", ""))
    if kind == "marker":
        return _blend(BACKGROUND, color, 0.35)  # pale outline of the plan
    if kind == "tower_block":
        return _blend(color, (0, 0, 0), 0.25)
    return color  # placed


def render_topdown(snapshot: Snapshot, cell_px: int = CELL_PX) -> Image.Image:
    state = snapshot.state
    width, height = state["width"], state["height"]
    image = Image.new("RGB", (width * cell_px, height * cell_px), BACKGROUND)
    draw = ImageDraw.Draw(image)
    for x in range(width):
        for y in range(height):
            draw.rectangle(
                (x * cell_px, y * cell_px, (x + 1) * cell_px - 1, (y + 1) * cell_px - 1),
                outline=GRID_LINE,
            )
    for cell, block in state["blocks"]:
        x, y = cell
        draw.rectangle(
            (x * cell_px + 1, y * cell_px + 1, (x + 1) * cell_px - 2, (y + 1) * cell_px - 2),
            fill=_block_color(block),
        )
        if block["kind"] == "tower_block":
            remaining = block.get("remaining", 0)
            bar = max(0, min(cell_px - 4, remaining))
            draw.line(
                (x * cell_px + 2, (y + 1) * cell_px - 3,
                 x * cell_px + 2 + bar, (y + 1) * cell_px - 3),
                fill=(240, 240, 240),
            )
    for agent_id in sorted(snapshot.display):
        pose = snapshot.display[agent_id]
        kind = state["agents"].get(agent_id, {}).get("kind", "ai")
        _draw_agent(draw, pose.x, pose.y, pose.heading, AGENT_COLORS[kind], cell_px)
    return image


def _draw_agent(draw, x, y, heading, color, cell_px):
    cx, cy = x * cell_px, y * cell_px
    r = cell_px * 0.45
    hx, hy = heading
    # Triangle pointing along the heading.
    tip = (cx + hx * r, cy + hy * r)
    left = (cx - hy * r * 0.7 - hx * r * 0.5, cy + hx * r * 0.7 - hy * r * 0.5)
    right = (cx + hy * r * 0.7 - hx * r * 0.5, cy - hx * r * 0.7 - hy * r * 0.5)
    draw.polygon([tip, left, right], fill=color, outline=(20, 20, 20))


_QUARTER_TURNS = {
    (0, -1): None,  # already facing up
    (1, 0): Image.Transpose.ROTATE_90,
    (0, 1): Image.Transpose.ROTATE_180,
    (-1, 0): Image.Transpose.ROTATE_270,
}


def render_egocentric(
    snapshot: Snapshot,
    agent_id: str,
    cell_px: int = CELL_PX,
    radius_cells: int = EGO_RADIUS_CELLS,
) -> Image.Image:
    if agent_id not in snapshot.display:
        raise UnknownViewpoint(detail=agent_id)
    pose = snapshot.display[agent_id]
    topdown = render_topdown(snapshot, cell_px)
    half = radius_cells * cell_px + cell_px // 2
    cx, cy = round(pose.x * cell_px), round(pose.y * cell_px)
    side = 2 * half
    crop = Image.new("RGB", (side, side), OUT_OF_WORLD)
    left, top = cx - half, cy - half
    src = topdown.crop(
        (max(0, left), max(0, top), min(topdown.width, cx + half), min(topdown.height, cy + half))
    )
    crop.paste(src, (max(0, -left), max(0, -top)))
    turn = _QUARTER_TURNS.get(tuple(pose.heading))
    return crop.transpose(turn) if turn else crop


def render_frame(snapshot: Snapshot, viewpoint: str, cell_px: int = CELL_PX) -> Image.Image:
    """PNG-ready raster for a snapshot: ``topdown`` or an agent id."""
    if viewpoint == "topdown":
        return render_topdown(snapshot, cell_px)
    return render_egocentric(snapshot, viewpoint, cell_px)
