"""News-sentiment vs sovereign-bond-price analysis toolkit.

Submodules: market_data (trade ingestion, daily bars), news_corpus
(cleaning, dedup, splits), sentiment (scores, daily series, shocks),
event_study (correlations, directional accuracy), stats (Pearson,
percentiles, HAC variance, forecast-comparison test), lstm/forecaster
(from-scratch recurrent forecaster), hyperopt (seeded search), synthetic
(fixture generator), figures (SVG), cli (pipeline commands).
"""

__version__ = "0.1.0"
