"""Static SVG pictures of laminations."""
import math

FILLS = ("#dce8f5", "#f5e6cf")
POLY_FILL = "#2b2b2b"
STROKE = "#2b2b2b"


def _fmt(v):
    s = f"{v:.3f}"
    return "0.000" if s == "-0.000" else s


class _Canvas:
    def __init__(self, size, margin=8):
        self.c = size / 2
        self.R = size / 2 - margin

    def point(self, pos):
        t = 2 * math.pi * pos
        return self.c + self.R * math.cos(t), self.c - self.R * math.sin(t)

    def pt(self, pos):
        x, y = self.point(pos)
        return f"{_fmt(x)} {_fmt(y)}"

    def circle_arc(self, start, end):
        """Path command along the circle, counterclockwise from start to end."""
        large = 1 if (end - start) % 1.0 > 0.5 else 0
        R = _fmt(self.R)
        return f"A {R} {R} 0 {large} 0 {self.pt(end)}"

    def chord(self, p, q, hyperbolic):
        """Path command from point p to point q (p is the current point)."""
        if not hyperbolic:
            return f"L {self.pt(q)}"
        d = (q - p) % 1.0
        short = min(d, 1.0 - d)
        if abs(short - 0.5) < 1e-9:
            return f"L {self.pt(q)}"
        half = math.pi * short  # half the central angle
        r = self.R * math.tan(half)
        mid = p + d / 2 if d <= 0.5 else q + (1.0 - d) / 2
        dist = self.R / math.cos(half)
        t = 2 * math.pi * mid
        cx, cy = self.c + dist * math.cos(t), self.c - dist * math.sin(t)
        ax, ay = self.point(p)
        bx, by = self.point(q)
        cross = (ax - cx) * (by - cy) - (ay - cy) * (bx - cx)
        sweep = 1 if cross > 0 else 0
        return f"A {_fmt(r)} {_fmt(r)} 0 0 {sweep} {self.pt(q)}"


def render_lamination(lam, hyperbolic=False, size=512):
    """SVG text for ``lam``; fragments are shaded by depth parity."""
    cv = _Canvas(size)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">']
    for frag in lam.live():
        fill = FILLS[int(lam.depth[frag]) % 2]
        arcs = lam.arcs(frag)
        if lam.pts.size == 0:
            out.append(f'<circle cx="{_fmt(cv.c)}" cy="{_fmt(cv.c)}" r="{_fmt(cv.R)}" '
                       f'class="fragment" fill="{fill}"/>')
            continue
        parts = [f"M {cv.pt(arcs[0][0])}"]
        for i, (s, e) in enumerate(arcs):
            parts.append(cv.circle_arc(s, e))
            nxt = arcs[(i + 1) % len(arcs)][0]
            parts.append(cv.chord(e % 1.0, nxt, hyperbolic))
        parts.append("Z")
        out.append(f'<path class="fragment" d="{" ".join(parts)}" fill="{fill}" stroke="none"/>')
    for poly in lam.polygons:
        verts = [float(v) for v in poly]
        if lam.k == 2:
            d = f"M {cv.pt(verts[0])} {cv.chord(verts[0], verts[1], hyperbolic)}"
            out.append(f'<path class="chord" d="{d}" fill="none" stroke="{STROKE}" '
                       'stroke-width="1"/>')
            continue
        parts = [f"M {cv.pt(verts[0])}"]
        for i, v in enumerate(verts):
            parts.append(cv.chord(v, verts[(i + 1) % len(verts)], hyperbolic))
        parts.append("Z")
        out.append(f'<path class="polygon" d="{" ".join(parts)}" fill="{POLY_FILL}" '
                   f'stroke="{STROKE}" stroke-width="0.5"/>')
    out.append(f'<circle cx="{_fmt(cv.c)}" cy="{_fmt(cv.c)}" r="{_fmt(cv.R)}" '
               f'fill="none" stroke="{STROKE}" stroke-width="1.5"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
