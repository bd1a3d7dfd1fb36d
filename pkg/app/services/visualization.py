"""
Static SVG figures of observed series and one-step model predictions.
"""

import logging
import os
from typing import Dict, Optional, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import networkx as nx  # noqa: E402
import numpy as np  # noqa: E402
import seaborn as sns  # noqa: E402

from app.core.inference import predict_one_step  # noqa: E402
from app.models.fit import GlvFit, SglvFit  # noqa: E402
from app.models.params import ObservationSeries  # noqa: E402

logger = logging.getLogger(__name__)

# deterministic element ids
plt.rcParams["svg.hashsalt"] = "sglv"
plt.rcParams["svg.fonttype"] = "none"


class SeriesVisualization:
    """
    Renders abundance figures for a run directory.

    Every species curve carries the SVG group id ``species-<k>`` (1-based) and
    every prediction curve ``prediction-<k>``. Network figures use ``node-<k>``
    and ``edge-<i>-<j>`` for an edge from species i to species j.
    """

    def __init__(self, output_dir: str = "./data/figures"):
        self.output_dir = output_dir
        os.makedirs(output_dir, exist_ok=True)

    def _palette(self, n_species: int):
        return sns.color_palette("colorblind", n_species)

    def _save(self, fig, filename: str) -> str:
        path = os.path.join(self.output_dir, filename)
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        logger.info("wrote %s", path)
        return path

    def plot_proportions(self, series: ObservationSeries,
                         filename: str = "proportions.svg") -> str:
        """One line per species of the observed values against time."""
        with sns.axes_style("whitegrid"):
            fig, ax = plt.subplots(figsize=(8, 4.5))
        colors = self._palette(series.n_species)
        for k, name in enumerate(series.labels):
            (line,) = ax.plot(series.times, series.values[:, k], color=colors[k],
                              label=name, linewidth=1.2)
            line.set_gid(f"species-{k + 1}")
        ax.set_xlabel("time")
        ax.set_ylabel("proportion")
        ax.legend(loc="upper right", fontsize="small")
        fig.tight_layout()
        return self._save(fig, filename)

    def plot_log_predictions(self, series: ObservationSeries,
                             fit: Optional[Union[SglvFit, GlvFit]] = None,
                             filename: str = "log_predictions.svg") -> str:
        """
        Observed log values per species, one panel each, with the one-step
        prediction of every point from its predecessor overlaid when a fit is given.
        """
        n = series.n_species
        u = series.log_values
        predicted = None
        if fit is not None and series.n_obs > 1:
            series.check_species(fit.n_species)
            predicted = predict_one_step(fit, u[:-1], series.gaps)

        colors = self._palette(n)
        with sns.axes_style("whitegrid"):
            fig, axes = plt.subplots(n, 1, figsize=(8, 2.2 * n), sharex=True, squeeze=False)
        for k, (ax, name) in enumerate(zip(axes[:, 0], series.labels)):
            (line,) = ax.plot(series.times, u[:, k], color=colors[k], marker="o",
                              markersize=2, linewidth=0.8, label="observed")
            line.set_gid(f"species-{k + 1}")
            if predicted is not None:
                (pred,) = ax.plot(series.times[1:], predicted[:, k], color="tab:blue",
                                  linewidth=1.2, label="one-step prediction")
                pred.set_gid(f"prediction-{k + 1}")
            ax.set_ylabel(f"log {name}")
        axes[-1, 0].set_xlabel("time")
        axes[0, 0].legend(loc="upper right", fontsize="small")
        fig.tight_layout()
        return self._save(fig, filename)

    def plot_all(self, series: ObservationSeries,
                 fit: Optional[Union[SglvFit, GlvFit]] = None) -> dict:
        paths = {"proportions": self.plot_proportions(series)}
        paths["log_predictions"] = self.plot_log_predictions(series, fit)
        return paths


    def plot_network(self, network: Dict, filename: str = "network.svg") -> str:
        """
        Draws a significant-interaction network on a circular layout.

        Node area grows with |growth_rate| when the network carries growth rates.
        Positive edges are green and negative edges red.
        """
        names = [node["id"] for node in network["nodes"]]
        index = {name: k + 1 for k, name in enumerate(names)}
        graph = nx.DiGraph()
        graph.add_nodes_from(names)
        for edge in network["edges"]:
            graph.add_edge(edge["from"], edge["to"], weight=edge["weight"], sign=edge["sign"])
        pos = nx.circular_layout(graph)

        growth = np.array([abs(node.get("growth_rate", 1.0)) for node in network["nodes"]])
        scale = growth.max() if growth.size and growth.max() > 0 else 1.0
        sizes = 300.0 + 1500.0 * growth / scale

        fig, ax = plt.subplots(figsize=(6, 6))
        for name, size in zip(names, sizes):
            nodes = nx.draw_networkx_nodes(graph, pos, nodelist=[name], node_size=size,
                                           node_color="lightsteelblue", ax=ax)
            nodes.set_gid(f"node-{index[name]}")
        for source, target, data in graph.edges(data=True):
            color = "tab:green" if data["sign"] == "positive" else "tab:red"
            arrows = nx.draw_networkx_edges(graph, pos, edgelist=[(source, target)],
                                            edge_color=color, arrows=True, arrowsize=15,
                                            width=1.0 + 2.0 * min(abs(data["weight"]), 1.0),
                                            connectionstyle="arc3,rad=0.1", ax=ax)
            for patch in arrows:
                patch.set_gid(f"edge-{index[source]}-{index[target]}")
        nx.draw_networkx_labels(graph, pos, font_size=10, ax=ax)
        ax.set_title(f"significant interactions (level {network['level']})")
        ax.axis("off")
        fig.tight_layout()
        return self._save(fig, filename)
