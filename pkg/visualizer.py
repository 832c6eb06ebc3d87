import numpy as np
import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
from experiments import (
    BreakevenRecord,
    DistributionSample,
    FidelityPoint,
    SweepRecord,
    summarize_distribution,
)

# fixed ids in the SVG so identical records give identical files
matplotlib.rcParams['svg.hashsalt'] = 'qubit-distribution'
MAX_ERROR = {'geodesic': np.pi, 'infidelity': 1.0}
AXIS_LABELS = {'geodesic': 'mean geodesic error (rad)', 'infidelity': 'mean infidelity'}


class Visualizer:
    """Static SVG views of result records; never changes the records themselves."""

    def __init__(self, config):
        self.config = config
        self.metrics = list(config.metrics)

    def save(self, records, path, description=None):
        """Write one SVG; `description` (seed and config) goes into the SVG metadata."""
        record_type = type(records[0])
        if record_type is SweepRecord:
            fig = self._plot_sweep(records)
        elif record_type is BreakevenRecord:
            fig = self._plot_breakeven(records)
        elif record_type is DistributionSample:
            fig = self._plot_distribution(records)
        elif record_type is FidelityPoint:
            fig = self._plot_ideal_fidelity(records)
        else:
            fig = self._plot_oracle(records)
        metadata = {'Date': None}
        if description is not None:
            metadata['Description'] = description
        fig.savefig(path, format='svg', metadata=metadata)
        plt.close(fig)

    def _axes(self, ncols=None):
        ncols = ncols or len(self.metrics)
        fig, axes = plt.subplots(1, ncols, figsize=(5.5 * ncols, 4.2), squeeze=False)
        return fig, axes[0]

    def _max_error_line(self, ax, metric):
        ax.axhline(MAX_ERROR[metric], color='black', linestyle='--', linewidth=1.0, label='maximum error')

    def _plot_sweep(self, records):
        fig, axes = self._axes()
        by_m = self.config.experiment == 'converge-m'
        for ax, metric in zip(axes, self.metrics):
            if by_m:
                # one curve per shots value, error vs M
                for shots in sorted(set(r.shots_per_basis for r in records)):
                    curve = sorted((r for r in records if r.shots_per_basis == shots), key=lambda r: r.m_out)
                    ax.plot([r.m_out for r in curve], [r.mean(metric) for r in curve], marker='o', label=f'S = {shots}')
                ax.set_xlabel('number of clones M')
            else:
                for method, m_out in sorted(set((r.method, r.m_out) for r in records)):
                    curve = sorted((r for r in records if r.method == method and r.m_out == m_out), key=lambda r: r.shots_per_basis)
                    label = 'direct QST' if method == 'direct' else f'clone QST, M = {m_out}'
                    ax.plot([r.shots_per_basis for r in curve], [r.mean(metric) for r in curve], marker='o', markersize=3, label=label)
                ax.set_xlabel('shots per Pauli basis')
            self._max_error_line(ax, metric)
            ax.set_xscale('log')
            ax.set_yscale('log')
            ax.set_ylabel(AXIS_LABELS[metric])
            ax.legend(fontsize=7)
        fig.tight_layout()
        return fig

    def _plot_breakeven(self, records):
        fig, axes = self._axes()
        for ax, metric in zip(axes, self.metrics):
            rows = [r for r in records if r.metric == metric and r.reachable]
            ax.plot([r.target_error for r in rows], [r.breakeven_m for r in rows], marker='o')
            ax.set_xscale('log')
            ax.set_yscale('log')
            ax.set_xlabel(f'target error ({metric})')
            ax.set_ylabel('breakeven number of receivers M*')
        fig.tight_layout()
        return fig

    def _plot_distribution(self, records):
        fig, axes = self._axes()
        summary = summarize_distribution(records)
        for ax, metric in zip(axes, self.metrics):
            shots = np.array([d.shots_per_basis for d in records], dtype=np.float64)
            values = np.array([getattr(d.sample, metric) for d in records])
            ax.scatter(shots, values, s=2, alpha=0.2, color='tab:blue', label='individual errors')
            ax.plot([r.shots_per_basis for r in summary], [r.quantiles(metric)[2] for r in summary], color='tab:red', label='p95')
            ax.plot([r.shots_per_basis for r in summary], [r.mean(metric) for r in summary], color='tab:green', label='mean')
            self._max_error_line(ax, metric)
            ax.set_xscale('log')
            ax.set_yscale('log')
            ax.set_xlabel('shots per Pauli basis')
            ax.set_ylabel(AXIS_LABELS[metric].replace('mean ', ''))
            ax.set_title(f'M = {records[0].m_out}')
            ax.legend(fontsize=7)
        fig.tight_layout()
        return fig

    def _plot_ideal_fidelity(self, records):
        fig, axes = self._axes(ncols=1)
        ax = axes[0]
        ax.plot([p.m_out for p in records], [p.fidelity for p in records], label=f'optimal {records[0].n_in} -> M fidelity')
        ax.axhline(2 / 3, color='black', linestyle='--', linewidth=1.0, label='M -> infinity limit (N = 1)')
        ax.set_xscale('log')
        ax.set_xlabel('number of clones M')
        ax.set_ylabel('fidelity')
        ax.legend(fontsize=7)
        fig.tight_layout()
        return fig

    def _plot_oracle(self, records):
        fig, axes = self._axes(ncols=1)
        ax = axes[0]
        checks = [c for c in records if c.check == 'statistical']
        labels = [f'M={c.m_out}\nS={c.shots_per_basis}' for c in checks]
        colors = ['tab:green' if c.passed else 'tab:red' for c in checks]
        ax.bar(np.arange(len(checks)), [c.value for c in checks], color=colors)
        if len(checks) > 0:
            ax.axhline(checks[0].threshold, color='black', linestyle='--', linewidth=1.0)
        ax.set_xticks(np.arange(len(checks)))
        ax.set_xticklabels(labels, fontsize=7)
        ax.set_ylabel('|Welch statistic|, emulation vs marginal')
        fig.tight_layout()
        return fig
