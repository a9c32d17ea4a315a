from .core import RELATION_COUNT, BoundExample, build_example, load_rasm

__all__ = ["RELATION_COUNT", "BoundExample", "build_example", "load_rasm"]
__version__ = "0.1.0"
