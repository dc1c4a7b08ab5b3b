"""Client-facing service: streaming session endpoint, REST surface, storage."""

from sds.gateway.app import create_app, catalog, GatewayConfig
from sds.gateway.feedback import (
    FeedbackRating,
    FeedbackScales,
    InvalidLevel,
    UnknownTurn,
    aggregate_feedback,
    record_feedback,
)
from sds.gateway.storage import StorageConfig, StorageDisabled, persist_session

__all__ = [
    "create_app",
    "catalog",
    "GatewayConfig",
    "FeedbackRating",
    "FeedbackScales",
    "InvalidLevel",
    "UnknownTurn",
    "aggregate_feedback",
    "record_feedback",
    "StorageConfig",
    "StorageDisabled",
    "persist_session",
]
