"""Power-curve figures.

Two renderings of the same curves: a plain SVG line chart written with
``xml.etree`` (one ``<polyline>`` per statistic and horizon, solid for the
smallest horizon, dashed otherwise) and a matplotlib PNG for reports.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from pathlib import Path

COLORS = {"Q2": "#1f77b4", "Q1": "#d62728", "T_SN": "#2ca02c", "T_GW": "#9467bd",
          "T_DM": "#ff7f0e"}
WIDTH, HEIGHT = 640, 420
MARGIN = {"left": 60, "right": 110, "top": 30, "bottom": 50}


def _dash(tau: int, taus: list[int]) -> str | None:
    return None if tau == min(taus) else "6,4"


def power_svg(curves: list[dict], title: str = "") -> str:
    """SVG document for curves with keys ``statistic, tau, n, power``."""
    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg",
                     width=str(WIDTH), height=str(HEIGHT), viewBox=f"0 0 {WIDTH} {HEIGHT}")
    ns = [n for c in curves for n in c["n"]]
    lo, hi = (min(ns), max(ns)) if ns else (0, 1)
    span = (hi - lo) or 1
    plot_w = WIDTH - MARGIN["left"] - MARGIN["right"]
    plot_h = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def x(n):
        return MARGIN["left"] + plot_w * (n - lo) / span

    def y(p):
        return MARGIN["top"] + plot_h * (1.0 - p)

    ET.SubElement(svg, "rect", x=str(MARGIN["left"]), y=str(MARGIN["top"]),
                  width=str(plot_w), height=str(plot_h), fill="none", stroke="#444")
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        ET.SubElement(svg, "line", x1=str(MARGIN["left"] - 4), x2=str(MARGIN["left"]),
                      y1=f"{y(tick):.2f}", y2=f"{y(tick):.2f}", stroke="#444")
        label = ET.SubElement(svg, "text", x=str(MARGIN["left"] - 8), y=f"{y(tick) + 4:.2f}",
                              **{"text-anchor": "end", "font-size": "11"})
        label.text = f"{tick:g}"
    for n in sorted(set(ns)):
        label = ET.SubElement(svg, "text", x=f"{x(n):.2f}", y=str(HEIGHT - MARGIN["bottom"] + 16),
                              **{"text-anchor": "middle", "font-size": "11"})
        label.text = str(n)
    nominal = ET.SubElement(svg, "line", x1=str(MARGIN["left"]), x2=str(WIDTH - MARGIN["right"]),
                            y1=f"{y(0.05):.2f}", y2=f"{y(0.05):.2f}", stroke="#999")
    nominal.set("stroke-dasharray", "2,3")
    xlabel = ET.SubElement(svg, "text", x=str(MARGIN["left"] + plot_w / 2), y=str(HEIGHT - 10),
                           **{"text-anchor": "middle", "font-size": "12"})
    xlabel.text = "n"
    if title:
        head = ET.SubElement(svg, "text", x=str(WIDTH / 2), y="18",
                             **{"text-anchor": "middle", "font-size": "13"})
        head.text = title

    taus = sorted({c["tau"] for c in curves}) or [0]
    for i, c in enumerate(curves):
        points = " ".join(f"{x(n):.2f},{y(p):.2f}" for n, p in zip(c["n"], c["power"]))
        line = ET.SubElement(svg, "polyline", points=points, fill="none",
                             stroke=COLORS.get(c["statistic"], "#000"))
        line.set("stroke-width", "1.8")
        dash = _dash(c["tau"], taus)
        if dash:
            line.set("stroke-dasharray", dash)
        line.set("data-statistic", c["statistic"])
        line.set("data-tau", str(c["tau"]))
        ly = MARGIN["top"] + 14 * i + 10
        legend = ET.SubElement(svg, "text", x=str(WIDTH - MARGIN["right"] + 8), y=str(ly),
                               fill=COLORS.get(c["statistic"], "#000"), **{"font-size": "11"})
        legend.text = f"{c['statistic']} tau={c['tau']}"
    return ET.tostring(svg, encoding="unicode", xml_declaration=True) + "\n"


def power_png(curves: list[dict], path, title: str = "") -> Path:
    """Matplotlib rendering of the same curves."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    taus = sorted({c["tau"] for c in curves}) or [0]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for c in curves:
        style = "-" if c["tau"] == min(taus) else "--"
        ax.plot(c["n"], c["power"], style, color=COLORS.get(c["statistic"], "k"),
                marker="o", markersize=3, label=f"{c['statistic']} tau={c['tau']}")
    ax.axhline(0.05, color="0.6", lw=0.8, ls=":")
    ax.set_ylim(0, 1)
    ax.set_xlabel("n")
    ax.set_ylabel("rejection frequency at 5%")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    path = Path(path)
    # no version stamp, so the bytes do not depend on the matplotlib release
    fig.savefig(path, dpi=110, metadata={"Software": None} if path.suffix == ".png" else None)
    plt.close(fig)
    return path
