"""Scanner for sensitive-data collection, storage, and transmission in
WeChat Mini Program source projects.

Rule-based source/sink taint tracking plus an optional LLM detector, fused
into deterministic text/JSON/SARIF reports and scored against labeled
ground truth.
"""

__version__ = "0.1.0"
