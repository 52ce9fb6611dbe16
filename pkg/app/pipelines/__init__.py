from .experiment import ExperimentPipeline, build_model

__all__ = ["ExperimentPipeline", "build_model"]
