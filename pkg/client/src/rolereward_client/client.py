"""Synchronous HTTP client for the scoring service.

Mirrors the service's JSON contracts field for field; reward values pass
through exactly as parsed from the wire (IEEE doubles, no rounding or
coercion). Retries apply only to idempotent calls: GETs and batch scoring
with update_stats=False. One client per thread of use, or external
synchronization; the underlying connection pool is safe for concurrent
calls.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Sequence

import requests

from .errors import (
    HTTPStatusError,
    InvalidRequestError,
    SchemaValidationError,
    TimeoutError,
    TransportError,
)

__all__ = ["ClientConfig", "ScoringClient"]

_ITEM_REQUIRED_FIELDS = ("request_id", "character_id", "raw_output", "gold")
_GOLD_REQUIRED_FIELDS = ("gold_foci", "reference_response")
_RAW_FIELDS = ("focus", "focus_attr", "ref")


@dataclass(frozen=True)
class ClientConfig:
    """Connection settings. retries counts additional attempts after the
    first, and is honored only on idempotent calls."""

    base_url: str
    timeout_seconds: float = 10.0
    retries: int = 2

    def __post_init__(self) -> None:
        if not self.base_url:
            raise ValueError("base_url must be non-empty")
        if not self.timeout_seconds > 0:
            raise ValueError("timeout_seconds must be > 0")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")


class ScoringClient:
    def __init__(self, config: ClientConfig) -> None:
        self.config = config
        self._base = config.base_url.rstrip("/")
        self._session = requests.Session()

    def close(self) -> None:
        self._session.close()

    def __enter__(self) -> "ScoringClient":
        return self

    def __exit__(self, *_exc) -> None:
        self.close()

    # -- transport ---------------------------------------------------------

    def _request(self, method: str, path: str, json_body: Any, idempotent: bool) -> Any:
        attempts = 1 + (self.config.retries if idempotent else 0)
        last_error: Exception | None = None
        for attempt in range(attempts):
            try:
                response = self._session.request(
                    method,
                    f"{self._base}{path}",
                    json=json_body,
                    timeout=self.config.timeout_seconds,
                )
            except requests.Timeout as exc:
                last_error = TimeoutError(str(exc))
            except requests.ConnectionError as exc:
                last_error = TransportError(str(exc))
            except requests.RequestException as exc:
                last_error = TransportError(str(exc))
            else:
                if response.status_code >= 500:
                    last_error = HTTPStatusError(response.status_code, response.text)
                elif response.status_code >= 400:
                    raise HTTPStatusError(response.status_code, response.text)
                else:
                    try:
                        return response.json()
                    except ValueError as exc:
                        raise SchemaValidationError("$", f"body is not JSON: {exc}")
            if attempt + 1 < attempts:
                continue
        assert last_error is not None
        raise last_error

    # -- endpoint mirrors ----------------------------------------------------

    def score_batch(
        self, items: Sequence[dict], update_stats: bool = False
    ) -> list[dict]:
        """POST /v1/score. Returns the scored items in request order.

        update_stats=True mutates service-side statistics and is therefore
        never retried automatically.
        """
        self._validate_items(items)
        body = self._request(
            "POST",
            "/v1/score",
            {"items": list(items), "update_stats": update_stats},
            idempotent=not update_stats,
        )
        return self._validate_score_response(body)

    def fit_groups(
        self,
        profiles: Sequence[dict] | None = None,
        G: int | None = None,
        seed: int = 0,
        profiles_path: str | None = None,
    ) -> dict:
        """POST /v1/groups/fit. Replaces the installed group model."""
        if (profiles is None) == (profiles_path is None):
            raise InvalidRequestError("provide exactly one of profiles or profiles_path")
        request: dict[str, Any] = {"seed": seed}
        if profiles is not None:
            if not profiles:
                raise InvalidRequestError("profiles: must be non-empty")
            request["profiles"] = list(profiles)
        else:
            request["profiles_path"] = profiles_path
        if G is not None:
            request["G"] = G
        body = self._request("POST", "/v1/groups/fit", request, idempotent=False)
        for field in ("G", "inertia", "silhouette"):
            if not isinstance(body, dict) or field not in body:
                raise SchemaValidationError(field, "missing in fit summary")
        return body

    def get_stats(self) -> dict:
        """GET /v1/stats: the normalizer snapshot document, verbatim."""
        body = self._request("GET", "/v1/stats", None, idempotent=True)
        for field in ("version", "epsilon", "decay", "stats"):
            if not isinstance(body, dict) or field not in body:
                raise SchemaValidationError(field, "missing in snapshot document")
        return body

    def restore_stats(self, document: dict) -> None:
        """POST /v1/stats/restore: replace service statistics atomically."""
        if not isinstance(document, dict):
            raise InvalidRequestError("document: must be a JSON object")
        body = self._request("POST", "/v1/stats/restore", document, idempotent=False)
        if not isinstance(body, dict) or body.get("ok") is not True:
            raise SchemaValidationError("ok", "restore did not acknowledge")

    def health(self) -> dict:
        """GET /healthz."""
        body = self._request("GET", "/healthz", None, idempotent=True)
        for field in ("status", "model_fitted", "stats_version"):
            if not isinstance(body, dict) or field not in body:
                raise SchemaValidationError(field, "missing in health response")
        return body

    # -- validation ----------------------------------------------------------

    @staticmethod
    def _validate_items(items: Sequence[dict]) -> None:
        if not items:
            raise InvalidRequestError("items: must be non-empty")
        seen = set()
        for index, item in enumerate(items):
            path = f"items[{index}]"
            if not isinstance(item, dict):
                raise InvalidRequestError(f"{path}: must be an object")
            for field in _ITEM_REQUIRED_FIELDS:
                if field not in item:
                    raise InvalidRequestError(f"{path}.{field}: missing")
            gold = item["gold"]
            if not isinstance(gold, dict):
                raise InvalidRequestError(f"{path}.gold: must be an object")
            for field in _GOLD_REQUIRED_FIELDS:
                if field not in gold:
                    raise InvalidRequestError(f"{path}.gold.{field}: missing")
            request_id = item["request_id"]
            if request_id in seen:
                raise InvalidRequestError(f"{path}.request_id: duplicate {request_id!r}")
            seen.add(request_id)

    @staticmethod
    def _validate_score_response(body: Any) -> list[dict]:
        if not isinstance(body, dict):
            raise SchemaValidationError("$", "response must be an object")
        if "items" not in body:
            raise SchemaValidationError("items", "missing")
        if "stats_version" not in body:
            raise SchemaValidationError("stats_version", "missing")
        items = body["items"]
        if not isinstance(items, list):
            raise SchemaValidationError("items", "must be a list")
        for index, item in enumerate(items):
            path = f"items[{index}]"
            if not isinstance(item, dict):
                raise SchemaValidationError(path, "must be an object")
            for field in ("request_id", "group", "raw", "normalized", "scalar", "diagnostics"):
                if field not in item:
                    raise SchemaValidationError(f"{path}.{field}", "missing")
            raw = item["raw"]
            if not isinstance(raw, dict):
                raise SchemaValidationError(f"{path}.raw", "must be an object")
            for field in _RAW_FIELDS:
                if field not in raw or not isinstance(raw[field], (int, float)):
                    raise SchemaValidationError(f"{path}.raw.{field}", "missing or non-numeric")
            if "format_valid" not in raw or not isinstance(raw["format_valid"], bool):
                raise SchemaValidationError(f"{path}.raw.format_valid", "missing or non-boolean")
            normalized = item["normalized"]
            if not isinstance(normalized, list) or len(normalized) != 3:
                raise SchemaValidationError(f"{path}.normalized", "must be a list of 3 numbers")
            for position, value in enumerate(normalized):
                if not isinstance(value, (int, float)):
                    raise SchemaValidationError(
                        f"{path}.normalized[{position}]", "non-numeric"
                    )
            if not isinstance(item["scalar"], (int, float)):
                raise SchemaValidationError(f"{path}.scalar", "non-numeric")
            if not isinstance(item["diagnostics"], list):
                raise SchemaValidationError(f"{path}.diagnostics", "must be a list")
        return items
