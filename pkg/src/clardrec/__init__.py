"""Search-enhanced recommendation with counterfactual disentanglement of
query-independent item features."""

__version__ = "0.1.0"

__all__ = ["ClardRec", "__version__"]


def __getattr__(name):
    if name == "ClardRec":
        from .model import ClardRec

        return ClardRec
    raise AttributeError(name)
