# Core types
from .types import (
    GenerateRequest,
    GenerateResponse,
    EndpointConfig,
    LLMError,
    APIError
)

# Clients
from .client import LLMClient, HttpLLMClient

__all__ = [
    # Types
    'GenerateRequest',
    'GenerateResponse',
    'EndpointConfig',
    'LLMError',
    'APIError',

    # Clients
    'LLMClient',
    'HttpLLMClient',
]
