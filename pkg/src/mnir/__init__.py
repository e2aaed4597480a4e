"""Multinomial inverse regression: collapsed MLE, MNIR-OLS, distributed
per-word Poisson regression and a Monte Carlo verification lab."""

__version__ = "0.1.0"

from .collapsed import (FisherInfo, MnirFit, fisher_information, fit_collapsed_mnir,
                        multinomial_probs, project)
from .corpus import (CollapsedCounts, FreqMatrix, SparseCorpus, collapse, load_corpus,
                     mean_shift_frequencies)
from .dmr import (CovariateBlock, DmrFit, LatentScores, dmr_fit, dmr_projection,
                  fit_poisson_word, shard_by_word, tfidf_pca)
from .errors import (CorpusFormatError, DegenerateDataError, InputError, MnirError,
                     NumericalError)
from .forward import ForwardFit, fit_forward_ols, predict, predictive_variance

__all__ = [
    "SparseCorpus", "CollapsedCounts", "FreqMatrix", "load_corpus", "collapse",
    "mean_shift_frequencies",
    "MnirFit", "FisherInfo", "multinomial_probs", "fisher_information",
    "fit_collapsed_mnir", "project",
    "ForwardFit", "fit_forward_ols", "predict", "predictive_variance",
    "CovariateBlock", "DmrFit", "LatentScores", "shard_by_word", "fit_poisson_word",
    "dmr_fit", "dmr_projection", "tfidf_pca",
    "MnirError", "InputError", "CorpusFormatError", "DegenerateDataError", "NumericalError",
]
