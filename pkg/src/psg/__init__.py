"""psg: multi-task tag and difficulty prediction for algorithm problems."""

__version__ = "0.1.0"
