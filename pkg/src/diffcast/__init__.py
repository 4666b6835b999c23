"""diffcast: market growth forecasting from content-diffusion data.

Graph-attention encoding of influence networks, a temporal self-attention
forecaster over fused feature windows, and propensity-weighted causal
estimation of marketing interventions, served through a CLI and HTTP API.
"""

__version__ = "0.1.0"
