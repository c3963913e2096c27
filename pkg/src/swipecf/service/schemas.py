"""Request and response bodies of the HTTP API."""
from typing import Literal, Optional

from pydantic import BaseModel


class RecommendationResponse(BaseModel):
    target: str
    products: list[str]
    similarity: Optional[float] = None
    neighbor: Optional[str] = None
    source: Literal["recommender", "fallback"]
    reason: Optional[Literal["ColdUser", "NoQualifiedNeighbor", "NoFreshProducts"]] = None


class Rejection(BaseModel):
    index: int
    reason: str


class IngestResponse(BaseModel):
    accepted: int
    rejected: int
    positions: list[int] = []
    rejections: list[Rejection] = []


class RefreshResponse(BaseModel):
    users: int
    products: int
    raids: int
    dislikes: int
    as_of: int


class Health(BaseModel):
    status: str = "ok"


class ErrorBody(BaseModel):
    error: str
    message: str
