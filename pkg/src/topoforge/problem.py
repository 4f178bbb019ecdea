"""Problem definitions: anchor sites, supports, loads, volume fraction.

Anchors live at eight canonical boundary sites (four corners, four edge
midpoints) and are either fixed points or fixed segments joining two sites
on the same edge. Fixing a node always clamps both of its DOFs.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fem import DesignDomain, LoadSpec, Supports

CORNER_SITES = ("BL", "BR", "TL", "TR")
MIDPOINT_SITES = ("MB", "MT", "ML", "MR")
ANCHOR_SITES = CORNER_SITES + MIDPOINT_SITES

# sites making up each boundary edge, in walking order
EDGE_SITES = {
    "bottom": ("BL", "MB", "BR"),
    "top": ("TL", "MT", "TR"),
    "left": ("BL", "ML", "TL"),
    "right": ("BR", "MR", "TR"),
}

# the 12 legal segments: any two distinct sites of one edge
SEGMENT_PAIRS = tuple(
    (a, b)
    for sites in EDGE_SITES.values()
    for i, a in enumerate(sites)
    for b in sites[i + 1:]
)

VF_RANGE = (0.3, 0.5)   # sampled volume-fraction range


class ProblemError(ValueError):
    """Invalid problem definition."""


def site_node(domain: DesignDomain, site: str) -> int:
    nx, ny = domain.nx, domain.ny
    grid = {
        "BL": (0, 0), "BR": (nx, 0), "TL": (0, ny), "TR": (nx, ny),
        "MB": (nx // 2, 0), "MT": (nx // 2, ny),
        "ML": (0, ny // 2), "MR": (nx, ny // 2),
    }
    if site not in grid:
        raise ProblemError(f"unknown anchor site {site!r}; "
                           f"valid sites: {', '.join(ANCHOR_SITES)}")
    return domain.node_index(*grid[site])


def _segment_nodes(domain: DesignDomain, a: str, b: str) -> list[int]:
    na, nb = site_node(domain, a), site_node(domain, b)
    ax, ay = domain.node_coords(na)
    bx, by = domain.node_coords(nb)
    h = domain.elem_size
    nodes = []
    if ay == by:          # horizontal edge
        iy = round(ay / h)
        lo, hi = sorted((round(ax / h), round(bx / h)))
        nodes = [domain.node_index(ix, iy) for ix in range(lo, hi + 1)]
    elif ax == bx:        # vertical edge
        ix = round(ax / h)
        lo, hi = sorted((round(ay / h), round(by / h)))
        nodes = [domain.node_index(ix, iy) for iy in range(lo, hi + 1)]
    else:                 # unreachable for legal segments
        raise ProblemError(f"segment {a}-{b} is not along one edge")
    return nodes


@dataclass(frozen=True)
class AnchorSpec:
    """One boundary constraint: a fixed point or a fixed segment."""

    kind: str                     # "corner-point" | "edge-midpoint" | "segment"
    location: str                 # anchor site name
    segment_end: str | None = None

    def __post_init__(self):
        if self.location not in ANCHOR_SITES:
            raise ProblemError(f"unknown anchor site {self.location!r}")
        if self.kind == "corner-point":
            if self.location not in CORNER_SITES:
                raise ProblemError(f"{self.location} is not a corner")
            if self.segment_end is not None:
                raise ProblemError("point anchors take no segment end")
        elif self.kind == "edge-midpoint":
            if self.location not in MIDPOINT_SITES:
                raise ProblemError(f"{self.location} is not an edge midpoint")
            if self.segment_end is not None:
                raise ProblemError("point anchors take no segment end")
        elif self.kind == "segment":
            pair = (self.location, self.segment_end)
            if pair not in SEGMENT_PAIRS and pair[::-1] not in SEGMENT_PAIRS:
                raise ProblemError(
                    f"segment {self.location}-{self.segment_end} does not join "
                    "two distinct sites on one edge")
        else:
            raise ProblemError(f"unknown anchor kind {self.kind!r}")

    @staticmethod
    def point(site: str) -> "AnchorSpec":
        kind = "corner-point" if site in CORNER_SITES else "edge-midpoint"
        return AnchorSpec(kind=kind, location=site)

    @staticmethod
    def segment(a: str, b: str) -> "AnchorSpec":
        return AnchorSpec(kind="segment", location=a, segment_end=b)

    def nodes(self, domain: DesignDomain) -> list[int]:
        if self.kind == "segment":
            return _segment_nodes(domain, self.location, self.segment_end)
        return [site_node(domain, self.location)]


def supports_from_anchors(domain: DesignDomain,
                          anchors: tuple[AnchorSpec, ...]) -> Supports:
    dofs = set()
    for anchor in anchors:
        for node in anchor.nodes(domain):
            dofs.add(2 * node)
            dofs.add(2 * node + 1)
    return Supports(frozenset(dofs))


@lru_cache(maxsize=32)
def _boundary_nodes(nx: int, ny: int) -> np.ndarray:
    nodes = []
    for iy in range(ny + 1):
        for ix in range(nx + 1):
            if ix in (0, nx) or iy in (0, ny):
                nodes.append(iy * (nx + 1) + ix)
    arr = np.array(nodes, dtype=np.int64)
    arr.setflags(write=False)
    return arr


def boundary_nodes(domain: DesignDomain) -> np.ndarray:
    """All boundary node indices, ascending."""
    return _boundary_nodes(domain.nx, domain.ny)


def has_sufficient_supports(domain: DesignDomain, supports: Supports) -> bool:
    """Exact well-posedness test: the supports must block all three
    in-plane rigid motions.

    Every element keeps stiffness >= Emin > 0, so the global stiffness is
    singular iff some rigid-body motion vanishes on every fixed DOF; that
    is a rank test on the three rigid modes restricted to the fixed DOFs.
    """
    fixed = supports.sorted_dofs()
    if fixed.size < 3:
        return False
    nodes = fixed // 2
    axes = fixed % 2
    xs = (nodes % (domain.nx + 1)) / max(domain.nx, 1)
    ys = (nodes // (domain.nx + 1)) / max(domain.ny, 1)
    modes = np.zeros((3, fixed.size))
    modes[0] = axes == 0                      # x translation
    modes[1] = axes == 1                      # y translation
    modes[2] = np.where(axes == 0, -ys, xs)   # rotation about the origin
    sv = np.linalg.svd(modes, compute_uv=False)
    return bool(sv[-1] > 1e-8 * max(sv[0], 1.0))


@dataclass(frozen=True)
class Problem:
    """One complete optimization task."""

    domain: DesignDomain
    supports: Supports
    load: LoadSpec
    volume_fraction: float
    seed: int = 0
    anchors: tuple[AnchorSpec, ...] | None = None

    def __post_init__(self):
        if not (0.0 < self.volume_fraction < 1.0):
            raise ProblemError("volume fraction must lie in (0, 1)")
        self.supports.validate(self.domain)
        if not (0 <= self.load.node < self.domain.n_nodes):
            raise ProblemError("load node outside the domain")

    def load_coords_normalized(self) -> tuple[float, float]:
        """Load position scaled to [0, 1] x [0, 1] over the domain."""
        x, y = self.domain.node_coords(self.load.node)
        return (x / (self.domain.nx * self.domain.elem_size),
                y / (self.domain.ny * self.domain.elem_size))


def cantilever(nx: int = 64, ny: int = 64, volume_fraction: float = 0.4,
               load_angle_deg: float = 270.0) -> Problem:
    """Left edge clamped, unit load at the right edge midpoint."""
    domain = DesignDomain(nx=nx, ny=ny)
    anchors = (AnchorSpec.segment("BL", "TL"),)
    theta = np.deg2rad(load_angle_deg)
    load = LoadSpec(node=site_node(domain, "MR"),
                    fx=float(np.cos(theta)), fy=float(np.sin(theta)))
    return Problem(domain=domain,
                   supports=supports_from_anchors(domain, anchors),
                   load=load, volume_fraction=volume_fraction,
                   anchors=anchors)


def mbb_beam(nx: int = 64, ny: int = 64, volume_fraction: float = 0.4) -> Problem:
    """Simply supported span: bottom corners pinned, downward load at the
    top edge midpoint."""
    domain = DesignDomain(nx=nx, ny=ny)
    anchors = (AnchorSpec.point("BL"), AnchorSpec.point("BR"))
    load = LoadSpec(node=site_node(domain, "MT"), fx=0.0, fy=-1.0)
    return Problem(domain=domain,
                   supports=supports_from_anchors(domain, anchors),
                   load=load, volume_fraction=volume_fraction,
                   anchors=anchors)


PRESETS = {"cantilever": cantilever, "mbb": mbb_beam}
