"""Wire pasted Java snippets to the variables, fields and member calls around them."""

from __future__ import annotations

from codewire.completer import Recommendation
from codewire.errors import CodewireError
from codewire.pipeline import WireOptions, WireResult, prepare, wire

__all__ = ["CodewireError", "Recommendation", "WireOptions", "WireResult", "prepare", "wire"]
__version__ = "0.1.0"
