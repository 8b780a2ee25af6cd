"""Toolkit for attribute-directed question-quality alignment pipelines.

Submodules: corpus (ingestion, decomposition, splits), gateway (endpoint
access, caching, mocks), synthesis (counterfactual variants and pairs),
judging (order-permuted verification and retention), fusion (dataset export
and weight averaging), simulator (interactive diagnostic episodes), stats
(win-rate and agreement statistics), annotation (ranking/MCQ annotation
service), cli (stage orchestration).
"""

__version__ = "0.1.0"
