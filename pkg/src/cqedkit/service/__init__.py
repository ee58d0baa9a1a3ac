"""HTTP service layer: FastAPI app and its request/response schemas."""

from .app import app, create_app

__all__ = ["app", "create_app"]
