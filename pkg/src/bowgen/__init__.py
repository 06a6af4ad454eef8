"""Music-to-violinist skeleton motion generation."""
from .estimators import AudioFeatureExtractor, FeatureScaler, MotionGenerator, SkeletonCleaner
from .exceptions import InvalidInput, NonFiniteGradient, NotFittedError, ShapeError
from .model import ModelConfig, ModelWeights
from .training import TrainConfig

__version__ = "0.1.0"

__all__ = [
    "AudioFeatureExtractor", "FeatureScaler", "MotionGenerator", "SkeletonCleaner",
    "InvalidInput", "NonFiniteGradient", "NotFittedError", "ShapeError",
    "ModelConfig", "ModelWeights", "TrainConfig",
]
