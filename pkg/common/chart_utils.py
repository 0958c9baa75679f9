import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
from matplotlib.figure import Figure
from typing import Dict, Optional, Tuple

OUTLIER_COLOR = "#bbbbbb"


class ChartManager:
    def __init__(self, style: str = 'default'):
        """
        Initialize the ChartManager with a matplotlib style.

        Args:
            style (str): Any name accepted by plt.style.use ('default', 'ggplot', ...)
        """
        self.style = style
        self.default_figsize = (12, 8)
        self.current_fig = None

    def _new_figure(self, figsize: Optional[Tuple[int, int]] = None):
        plt.style.use(self.style)
        fig, ax = plt.subplots(figsize=figsize or self.default_figsize)
        ax.grid(True, linestyle='--', alpha=0.3, color='gray')
        self.current_fig = fig
        return fig, ax

    def _finish(self, fig: Figure, save_path: Optional[str], returnfig: bool):
        if save_path:
            fig.savefig(save_path, dpi=120, bbox_inches='tight')
        if returnfig:
            return fig
        plt.close(fig)
        return None

    def plot_clusters(self,
                      df: pd.DataFrame,
                      title: str = "Extension clusters",
                      highlight: Optional[set] = None,
                      save_path: Optional[str] = None,
                      figsize: Optional[Tuple[int, int]] = None,
                      returnfig: bool = False) -> Optional[Figure]:
        """
        Scatter plot of a 2D projection coloured by cluster label.

        Args:
            df (pd.DataFrame): columns id, x, y, label (label -1 = outlier)
            title (str): Chart title
            highlight (set): cluster labels drawn in red, the rest in gray
            save_path (str): Path to save the chart image
            figsize (Tuple[int, int]): Figure size (width, height)
            returnfig (bool): Return the figure instead of closing it

        Returns:
            Optional[Figure]: the figure when returnfig is True
        """
        fig, ax = self._new_figure(figsize)
        outliers = df[df['label'] < 0]
        clustered = df[df['label'] >= 0]
        ax.scatter(outliers['x'], outliers['y'], s=6, color=OUTLIER_COLOR, label='outlier')

        if highlight is not None:
            marked = clustered['label'].isin(highlight)
            ax.scatter(clustered.loc[~marked, 'x'], clustered.loc[~marked, 'y'], s=10, color='tab:gray',
                       label='cluster')
            ax.scatter(clustered.loc[marked, 'x'], clustered.loc[marked, 'y'], s=14, color='tab:red',
                       label='infringing cluster')
        elif not clustered.empty:
            labels = clustered['label'].to_numpy()
            cmap = plt.get_cmap('tab20')
            ax.scatter(clustered['x'], clustered['y'], s=10, c=[cmap(int(l) % 20) for l in labels])

        ax.set_title(title)
        ax.set_xlabel('component 1')
        ax.set_ylabel('component 2')
        if highlight is not None or not outliers.empty:
            ax.legend(loc='best')
        return self._finish(fig, save_path, returnfig)

    def plot_survival(self,
                      curves: Dict[str, pd.DataFrame],
                      title: str = "Time to removal",
                      save_path: Optional[str] = None,
                      figsize: Optional[Tuple[int, int]] = None,
                      returnfig: bool = False) -> Optional[Figure]:
        """
        Kaplan-Meier step curves with shaded confidence bands.

        Args:
            curves (Dict[str, pd.DataFrame]): group name -> frame with t, survival, ci_low, ci_high
            title (str): Chart title
            save_path (str): Path to save the chart image
        """
        fig, ax = self._new_figure(figsize)
        for name, frame in curves.items():
            t = np.concatenate([[0.0], frame['t'].to_numpy(dtype=float)])
            s = np.concatenate([[1.0], frame['survival'].to_numpy(dtype=float)])
            line, = ax.step(t, s, where='post', label=name)
            if 'ci_low' in frame and 'ci_high' in frame:
                low = np.concatenate([[1.0], frame['ci_low'].to_numpy(dtype=float)])
                high = np.concatenate([[1.0], frame['ci_high'].to_numpy(dtype=float)])
                ax.fill_between(t, low, high, step='post', alpha=0.15, color=line.get_color())
        ax.set_ylim(0, 1.02)
        ax.set_title(title)
        ax.set_xlabel('days since release')
        ax.set_ylabel('share still published')
        ax.legend(loc='best')
        return self._finish(fig, save_path, returnfig)
