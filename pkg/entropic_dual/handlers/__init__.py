from .solve import register as register_solve
from .transport import register as register_transport
from .generate import register as register_generate
from .oracle import register as register_oracle
from .history import register as register_history

__all__ = [
    "register_solve",
    "register_transport",
    "register_generate",
    "register_oracle",
    "register_history",
]
