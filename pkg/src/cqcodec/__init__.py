"""Neural speech codec with trainable LPC quantization and a residual autoencoder cascade."""

from .codec import BitrateControlError, CQCodec
from .config import CodecConfig

__all__ = ["CQCodec", "CodecConfig", "BitrateControlError"]
__version__ = "0.1.0"
