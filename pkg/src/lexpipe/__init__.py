"""Tooling for statute-law article retrieval experiments.

Submodules: corpus (parsing/normalization/stats), vocab (domain-term
injection), labeling (unsupervised training sets), querygen (six query
types), baseline (TF-IDF centroid classifier and prediction CSVs),
clustering (bisecting spherical k-means), attributes (division-heading
bits), metrics (retrieval scoring), cli (subcommand front end).
"""

__version__ = "0.1.0"
