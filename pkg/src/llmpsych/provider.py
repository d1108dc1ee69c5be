"""Elicitation campaigns against chat-completion endpoints or local stand-ins.

Every provider exposes ``complete(prompt, config, *, repetition, attempt, item)``.
The extra keywords identify the slot being filled so that deterministic
providers (mock, synthetic respondent, cache replay) can answer the same
slot the same way regardless of scheduling.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
import zlib
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, wait
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Sequence

import httpx
import numpy as np

from .errors import AuthError, CampaignAborted, DataError, ProviderError, TransientProviderError
from .prompts import (
    BASIC_COLOR_TERMS,
    Language,
    parse_color_name,
    parse_rating,
    render_naming_prompt,
    render_similarity_prompt,
    shuffle_terms,
)
from .records import ERROR_TERM, NamingRecord, RatingRecord, sort_naming, sort_ratings
from .stimuli import Modality, StimulusSet

logger = logging.getLogger(__name__)


@dataclass
class ProviderConfig:
    base_url: str = "https://api.openai.com/v1"
    model: str = "gpt-4"
    temperature: float = 0.7
    repetitions: int = 10
    # queries per slot before it is marked invalid ("error" for naming)
    max_attempts: int = 10
    max_in_flight: int = 1
    seed: int = 0
    api_key_env: str = "OPENAI_API_KEY"
    include_diagonal: bool = False
    timeout: float = 60.0
    # transport-level retry policy for rate limits / 5xx / network errors
    http_attempts: int = 6
    backoff_initial: float = 1.0
    backoff_factor: float = 2.0
    backoff_cap: float = 32.0

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.http_attempts < 1:
            raise ValueError("http_attempts must be >= 1")

    def backoff_delays(self) -> list[float]:
        """Sleeps between consecutive transport attempts."""
        return [
            min(self.backoff_cap, self.backoff_initial * self.backoff_factor**k) for k in range(self.http_attempts - 1)
        ]


# --- response cache --------------------------------------------------------

def cache_key(prompt: str, model: str, temperature: float, repetition: int, attempt: int = 0) -> str:
    digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
    return f"{digest}|{model}|{float(temperature)!r}|{repetition}|{attempt}"


class ResponseCache:
    """Append-only JSON-lines log of prompt/response pairs.

    With ``path=None`` the cache lives in memory only.
    """

    def __init__(self, path=None):
        self.path = Path(path) if path is not None else None
        self._entries: dict[str, dict] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        entry = json.loads(line)
                        self._entries[entry["key"]] = entry

    def __len__(self):
        return len(self._entries)

    def __contains__(self, key):
        return key in self._entries

    def get(self, key: str) -> str | None:
        entry = self._entries.get(key)
        return None if entry is None else entry["response"]

    def put(self, key, prompt, model, temperature, repetition, response) -> None:
        entry = {
            "key": key,
            "prompt": prompt,
            "model": model,
            "temperature": temperature,
            "repetition": repetition,
            "response": response,
            "timestamp": datetime.now(timezone.utc).isoformat(),
        }
        with self._lock:
            if key in self._entries:
                return
            self._entries[key] = entry
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(entry, ensure_ascii=False) + "\n")


# --- providers -------------------------------------------------------------

class Provider:
    name = "provider"

    def complete(self, prompt: str, config: ProviderConfig, *, repetition=0, attempt=0, item=None) -> str:
        raise NotImplementedError


class MockProvider(Provider):
    """Answers from a constant string or a ``fn(prompt, repetition, attempt, item)`` callable."""

    name = "mock"

    def __init__(self, response: str | Callable = "0.5"):
        self.response = response
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, prompt, config, *, repetition=0, attempt=0, item=None):
        with self._lock:
            self.calls += 1
        if callable(self.response):
            return self.response(prompt, repetition, attempt, item)
        return self.response


class SyntheticRespondent(Provider):
    """Ground truth plus Gaussian noise, clamped to [0, 1].

    The noise draw depends only on (seed, pair, repetition, attempt).
    """

    name = "synthetic"

    def __init__(self, ground_truth, noise_sd: float = 0.0, seed: int = 0):
        self.ground_truth = np.asarray(ground_truth, dtype=float)
        if noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")
        self.noise_sd = float(noise_sd)
        self.seed = int(seed)

    def complete(self, prompt, config, *, repetition=0, attempt=0, item=None):
        if item is None:
            raise ValueError("synthetic respondent needs the (a, b) pair as item")
        a, b = sorted(item)
        value = self.ground_truth[a, b]
        if self.noise_sd > 0:
            rng = np.random.default_rng([self.seed, a, b, repetition, attempt])
            value = value + rng.normal(0.0, self.noise_sd)
        return repr(float(min(1.0, max(0.0, value))))


def synthetic_respondent(ground_truth, noise_sd: float, seed: int) -> SyntheticRespondent:
    return SyntheticRespondent(ground_truth, noise_sd, seed)


class ReplayProvider(Provider):
    """Serves responses from a cache; a miss is a terminal error."""

    name = "replay"

    def __init__(self, cache: ResponseCache):
        self.cache = cache

    def complete(self, prompt, config, *, repetition=0, attempt=0, item=None):
        key = cache_key(prompt, config.model, config.temperature, repetition, attempt)
        hit = self.cache.get(key)
        if hit is None:
            raise ProviderError(f"replay cache miss for repetition {repetition}, attempt {attempt}")
        return hit


class CachingProvider(Provider):
    """Looks responses up in ``cache`` before delegating to ``inner``; records new ones."""

    def __init__(self, inner: Provider, cache: ResponseCache):
        self.inner = inner
        self.cache = cache
        self.name = inner.name

    def complete(self, prompt, config, *, repetition=0, attempt=0, item=None):
        key = cache_key(prompt, config.model, config.temperature, repetition, attempt)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        text = self.inner.complete(prompt, config, repetition=repetition, attempt=attempt, item=item)
        self.cache.put(key, prompt, config.model, config.temperature, repetition, text)
        return text


class HttpProvider(Provider):
    """Chat-completion client with exponential backoff on transient failures."""

    name = "http"

    def __init__(self, client: httpx.Client | None = None, sleep: Callable[[float], None] = time.sleep):
        self.client = client
        self.sleep = sleep
        self.requests = 0
        self.retries = 0
        self._lock = threading.Lock()

    def _client(self, config):
        if self.client is None:
            self.client = httpx.Client(timeout=config.timeout)
        return self.client

    def complete(self, prompt, config, *, repetition=0, attempt=0, item=None):
        api_key = os.environ.get(config.api_key_env)
        if not api_key:
            raise AuthError(f"no credential in environment variable {config.api_key_env}")
        url = config.base_url.rstrip("/") + "/chat/completions"
        payload = {
            "model": config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": config.temperature,
        }
        headers = {"Authorization": f"Bearer {api_key}"}
        delays = config.backoff_delays()
        last = None
        for k in range(config.http_attempts):
            if k:
                with self._lock:
                    self.retries += 1
                logger.warning("transient provider failure (%s); retrying in %.1fs", last, delays[k - 1])
                self.sleep(delays[k - 1])
            with self._lock:
                self.requests += 1
            try:
                resp = self._client(config).post(url, json=payload, headers=headers)
            except httpx.TransportError as exc:
                last = f"{type(exc).__name__}: {exc}"
                continue
            if resp.status_code in (401, 403):
                raise AuthError(f"authentication failed (HTTP {resp.status_code})")
            if resp.status_code == 429 or resp.status_code >= 500:
                last = f"HTTP {resp.status_code}"
                continue
            if resp.status_code >= 400:
                raise ProviderError(f"request rejected (HTTP {resp.status_code}): {resp.text[:500]}")
            return _message_text(resp)
        raise TransientProviderError(f"giving up after {config.http_attempts} attempts: {last}")


def _message_text(resp: httpx.Response) -> str:
    try:
        body = resp.json()
        text = body["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError):
        logger.error("malformed completion payload: %s", resp.text[:2000])
        raise ProviderError("malformed completion response body") from None
    if not isinstance(text, str):
        logger.error("malformed completion payload: %s", resp.text[:2000])
        raise ProviderError("completion content is not text")
    return text


def complete(prompt: str, config: ProviderConfig, provider: Provider | None = None, **slot) -> str:
    """Single completion through ``provider`` (HTTP by default)."""
    return (provider or HttpProvider()).complete(prompt, config, **slot)


# --- campaigns -------------------------------------------------------------

class _Checkpoint:
    """JSON-lines file of finished slots, used to resume an interrupted campaign.

    The first line fingerprints the campaign; resuming a different campaign
    from the same file is refused.
    """

    def __init__(self, path, decode, meta: dict):
        self.path = Path(path) if path is not None else None
        self.meta = json.loads(json.dumps(meta, ensure_ascii=False))
        self.done = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                lines = [json.loads(line) for line in fh if line.strip()]
            if lines and lines[0].get("meta") != self.meta:
                raise DataError(f"checkpoint {self.path} belongs to a different campaign")
            for entry in lines[1:]:
                slot, rec = decode(entry)
                self.done[slot] = rec

    def add(self, slot, record, encoded: dict):
        with self._lock:
            self.done[slot] = record
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                fresh = not self.path.exists() or self.path.stat().st_size == 0
                with open(self.path, "a", encoding="utf-8") as fh:
                    if fresh:
                        fh.write(json.dumps({"meta": self.meta}, ensure_ascii=False) + "\n")
                    fh.write(json.dumps(encoded, ensure_ascii=False) + "\n")


def _campaign_meta(kind, config: ProviderConfig, source, items) -> dict:
    return {
        "kind": kind,
        "model": config.model,
        "temperature": config.temperature,
        "repetitions": config.repetitions,
        "max_attempts": config.max_attempts,
        "seed": config.seed,
        "include_diagonal": config.include_diagonal,
        "source": source,
        "items": hashlib.sha256(json.dumps(items, ensure_ascii=False).encode("utf-8")).hexdigest(),
    }


def _run_slots(slots, fill, checkpoint: _Checkpoint, encode, max_in_flight: int):
    todo = [s for s in slots if s not in checkpoint.done]

    def work(slot):
        rec = fill(slot)
        checkpoint.add(slot, rec, encode(rec))

    try:
        if max_in_flight == 1:
            for slot in todo:
                work(slot)
        else:
            with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
                futures = [pool.submit(work, s) for s in todo]
                done, _ = wait(futures, return_when=FIRST_EXCEPTION)
                for f in futures:
                    f.cancel()
                for f in done:
                    f.result()
    except ProviderError as exc:
        raise CampaignAborted(
            f"campaign aborted after {len(checkpoint.done)}/{len(slots)} slots: {exc}",
            checkpoint=checkpoint.path,
        ) from exc
    return [checkpoint.done[s] for s in slots]


def _rating_to_json(r: RatingRecord) -> dict:
    d = asdict(r)
    d["modality"] = r.modality.value
    return d


def _rating_from_json(d: dict):
    rec = RatingRecord(**{**d, "modality": Modality(d["modality"])})
    return (rec.a, rec.b, rec.repetition), rec


def similarity_slots(n: int, repetitions: int, include_diagonal: bool = False) -> list[tuple[int, int, int]]:
    return [
        (a, b, rep)
        for a in range(n)
        for b in range(a if include_diagonal else a + 1, n)
        for rep in range(repetitions)
    ]


def elicit_similarity(
    stimuli: StimulusSet,
    provider: Provider,
    config: ProviderConfig,
    source: str | None = None,
    checkpoint=None,
) -> list[RatingRecord]:
    """Collect ``config.repetitions`` ratings for every unordered pair of ``stimuli``.

    A slot whose responses never parse within ``config.max_attempts`` queries
    is kept as a record with ``rating=None``.
    """
    source = source or config.model
    meta = _campaign_meta(stimuli.modality.value, config, source, stimuli.keys)
    ckpt = _Checkpoint(checkpoint, _rating_from_json, meta)

    def fill(slot):
        a, b, rep = slot
        prompt = render_similarity_prompt(stimuli.modality, (stimuli[a], stimuli[b]))
        text = ""
        for attempt in range(config.max_attempts):
            text = provider.complete(prompt, config, repetition=rep, attempt=attempt, item=(a, b))
            rating = parse_rating(text)
            if rating is not None:
                return RatingRecord(stimuli.modality, a, b, source, rep, rating, 1.0, text)
        logger.info("no valid rating for pair (%d, %d) rep %d after %d queries", a, b, rep, config.max_attempts)
        return RatingRecord(stimuli.modality, a, b, source, rep, None, 1.0, text)

    slots = similarity_slots(len(stimuli), config.repetitions, config.include_diagonal)
    records = _run_slots(slots, fill, ckpt, _rating_to_json, config.max_in_flight)
    return sort_ratings(records)


def _naming_from_json(d: dict):
    rec = NamingRecord(**d)
    return (rec.chip_id, rec.repetition), rec


def naming_shuffle_seed(seed: int, chip_id: str, repetition: int) -> list[int]:
    return [int(seed), zlib.crc32(chip_id.encode("utf-8")), int(repetition)]


def elicit_naming(
    chips: dict[str, str] | Iterable[tuple[str, str]],
    language,
    provider: Provider,
    config: ProviderConfig,
    terms: Sequence[str] | None = None,
    source: str | None = None,
    checkpoint=None,
) -> list[NamingRecord]:
    """Forced-choice naming of each chip hex, re-shuffling the term list per repetition.

    Out-of-vocabulary answers are re-queried with the same prompt; after
    ``config.max_attempts`` failures the slot's term is ``"error"``.
    """
    language = Language(language)
    terms = tuple(terms) if terms is not None else BASIC_COLOR_TERMS[language]
    chips = list(chips.items()) if isinstance(chips, dict) else list(chips)
    source = source or config.model
    hexes = dict(chips)
    meta = _campaign_meta(f"naming-{language.value}", config, source, [chips, list(terms)])
    ckpt = _Checkpoint(checkpoint, _naming_from_json, meta)

    def fill(slot):
        chip, rep = slot
        order = shuffle_terms(naming_shuffle_seed(config.seed, chip, rep), terms)
        prompt = render_naming_prompt(language, order, hexes[chip])
        text = ""
        for attempt in range(config.max_attempts):
            text = provider.complete(prompt, config, repetition=rep, attempt=attempt, item=chip)
            term = parse_color_name(text, terms)
            if term is not None:
                return NamingRecord(chip, language.value, source, rep, term, text)
        return NamingRecord(chip, language.value, source, rep, ERROR_TERM, text)

    slots = [(chip, rep) for chip, _ in chips for rep in range(config.repetitions)]
    records = _run_slots(slots, fill, ckpt, asdict, config.max_in_flight)
    return sort_naming(records)
