"""Graphy: property-graph document investigation toolkit.

An offline scrapper turns raw documents into a graph of fact and
dimension nodes via a configurable extraction DAG; an online surveyor
exposes session-based exploration and report generation over that graph.
"""

__version__ = "0.1.0"
