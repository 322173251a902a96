"""Reference mqag/1 wire-protocol service backed by pretrained models."""

from .bundles import LexicalBundle, ModelBundle, StartupError, load_bundle
from .config import BackendConfig, GeneratorMode
from .parsing import ParsedQuestion, parse_mcq_block
from .service import create_app, serve

__version__ = "0.1.0"

__all__ = [
    "BackendConfig",
    "GeneratorMode",
    "LexicalBundle",
    "ModelBundle",
    "ParsedQuestion",
    "StartupError",
    "create_app",
    "load_bundle",
    "parse_mcq_block",
    "serve",
]
