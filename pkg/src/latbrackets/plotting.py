"""SVG scatter rendering for section records and shell slices.

Deliberately minimal: two figure builders, rendered headlessly to SVG with
a fixed hash salt and no timestamp metadata so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .poincare import SectionResult, ShellSlice

__all__ = ["save_svg", "section_figure", "shell_figure"]

plt.rcParams["svg.hashsalt"] = "latbrackets"


def section_figure(result: SectionResult, spec=None):
    """Scatter of the projected crossings, one color per trajectory."""
    fig, ax = plt.subplots(figsize=(6.0, 6.0))
    cycle = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for k, tid in enumerate(result.trajectory_ids()):
        pts = result.projected_points(tid)
        ax.scatter(pts[:, 0], pts[:, 1], s=2.0, color=cycle[k % len(cycle)], linewidths=0)
    if spec is not None:
        ax.set_xlabel(spec.projection[0])
        ax.set_ylabel(spec.projection[1])
        ax.set_title(f"section {spec.coordinate} = {spec.level:g} ({spec.direction})")
    ax.set_aspect("equal", adjustable="datalim")
    return fig


def shell_figure(cloud: ShellSlice):
    """3-D scatter of the shell band points."""
    fig = plt.figure(figsize=(6.0, 6.0))
    ax = fig.add_subplot(projection="3d")
    pts = cloud.band_points
    if len(pts):
        ax.scatter(pts[:, 0], pts[:, 1], pts[:, 2], s=2.0, linewidths=0)
    names = cloud.spec.free_coordinates
    ax.set_xlabel(names[0])
    ax.set_ylabel(names[1])
    ax.set_zlabel(names[2])
    ax.set_title(
        f"|H - {cloud.spec.energy:g}| < {cloud.spec.half_width:g}, "
        f"{cloud.spec.fixed_coordinate} = {cloud.spec.fixed_value:g}"
    )
    return fig


def save_svg(fig, path) -> None:
    """Write a figure as SVG without volatile metadata, then release it."""
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
