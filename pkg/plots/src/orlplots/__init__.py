"""Figure renderer for orlkit's metrics and weight-report file formats."""

from .render import KINDS, render
from .series import (InputError, eval_curve, grouped_score_curves,
                     lambda_histograms, load_metrics, load_weight_report,
                     run_label, uncertainty_scatter)

__version__ = "0.1.0"
