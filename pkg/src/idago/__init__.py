"""Information-aware placement and routing of DAG services over cloud-augmented networks."""

__version__ = "0.1.0"
