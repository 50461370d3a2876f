"""Chat-completion client for LLM-based similarity ranking.

Targets any OpenAI-compatible endpoint; a scripted offline client stands in
for it in tests and CI. The HTTP client is the only component in this
package allowed to block on the network.
"""

from __future__ import annotations

import json
import os
import time

import httpx

from .errors import RateLimitedError, TransportError

RETRYABLE_STATUS = {500, 502, 503, 504}


class ScriptedChatClient:
    """Deterministic offline stand-in: replies come from a callable or a list."""

    def __init__(self, script):
        self._script = script
        self._queue_pos = 0
        self.calls = 0

    def complete(self, prompt: str, temperature: float = 0.0) -> str:
        self.calls += 1
        if callable(self._script):
            return self._script(prompt)
        reply = self._script[min(self._queue_pos, len(self._script) - 1)]
        self._queue_pos += 1
        return reply


class HttpChatClient:
    """Synchronous chat-completion client with bounded retry and audit logging."""

    def __init__(self, endpoint: str, model: str, api_key_env: str = "SAFEALT_LLM_API_KEY",
                 timeout: float = 30.0, max_retries: int = 3, audit_log_path=None):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.api_key = os.environ.get(api_key_env, "")
        self.timeout = timeout
        self.max_retries = max_retries
        self.audit_log_path = audit_log_path
        self._client = httpx.Client(timeout=timeout)

    def complete(self, prompt: str, temperature: float = 0.0) -> str:
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        url = f"{self.endpoint}/chat/completions"
        last_error: Exception | None = None
        for attempt in range(self.max_retries):
            try:
                resp = self._client.post(url, headers=headers, json=body)
            except httpx.HTTPError as e:
                last_error = e
                time.sleep(min(2.0 ** attempt, 8.0))
                continue
            if resp.status_code == 429:
                retry_after = _parse_retry_after(resp.headers.get("retry-after"))
                if attempt + 1 >= self.max_retries:
                    raise RateLimitedError(retry_after)
                time.sleep(retry_after if retry_after is not None else 2.0 ** attempt)
                continue
            if resp.status_code in RETRYABLE_STATUS:
                last_error = TransportError(f"server returned {resp.status_code}")
                time.sleep(min(2.0 ** attempt, 8.0))
                continue
            if resp.status_code != 200:
                raise TransportError(f"chat endpoint returned {resp.status_code}: {resp.text[:200]}")
            data = resp.json()
            text = data["choices"][0]["message"]["content"]
            self._audit(body, text)
            return text
        raise TransportError(f"chat endpoint unreachable after {self.max_retries} attempts: {last_error}")

    def _audit(self, request_body: dict, reply: str) -> None:
        if not self.audit_log_path:
            return
        with open(self.audit_log_path, "a") as f:
            f.write(json.dumps({"request": request_body, "reply": reply}) + "\n")

    def close(self) -> None:
        self._client.close()


def _parse_retry_after(value) -> float | None:
    try:
        return float(value)
    except (TypeError, ValueError):
        return None
