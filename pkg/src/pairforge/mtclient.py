"""Providers of "good" sentences: gold references, an HTTP translation
service, or the locally trained decoder at full weights."""

from __future__ import annotations

import json
import logging
import os
import socket
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from .decode import Translator
from .errors import AlignmentError, EmptyInput, ServiceTimeout, ServiceUnreachable
from .textcore import ParallelCorpus, Sentence, detokenize, tokenize

log = logging.getLogger(__name__)

ENDPOINT_ENV = "PAIRFORGE_MT_ENDPOINT"
MAX_RETRIES = 3


@dataclass(frozen=True)
class GoldReference:
    corpus: ParallelCorpus
    tag = "SMT_GOLD"

    def good(self, sources: Sequence[Sentence], ids: Sequence[int] | None = None) -> list:
        pairs = self.corpus.pairs
        if ids is None:
            if len(sources) != len(pairs):
                raise AlignmentError(f"{len(sources)} sources but the reference corpus has {len(pairs)} pairs")
            ids = range(len(pairs))
        elif len(ids) != len(sources):
            raise AlignmentError(f"{len(sources)} sources but {len(ids)} ids")
        out = []
        for sid, src in zip(ids, sources):
            if not 0 <= sid < len(pairs) or tuple(src) != pairs[sid][0]:
                raise AlignmentError(f"source {sid} does not match the reference corpus")
            out.append(pairs[sid][1])
        return out


class ExternalService:
    """Client for ``POST {endpoint}/translate``.

    Request body ``{"texts": [...]}``, response ``{"translations": [...]}``.
    Any non-200 status, connection error or timeout counts as transient and
    is retried up to ``MAX_RETRIES`` times with exponential backoff.
    """

    tag = "SMT_NMT"

    def __init__(self, endpoint: str | None = None, timeout: float = 30.0, batch_size: int = 32,
                 max_in_flight: int = 4, token: str | None = None, backoff: float = 0.5):
        endpoint = endpoint or os.environ.get(ENDPOINT_ENV)
        if not endpoint:
            raise ValueError(f"no endpoint given and {ENDPOINT_ENV} is unset")
        if batch_size < 1 or max_in_flight < 1:
            raise ValueError("batch_size and max_in_flight must be >= 1")
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.batch_size = batch_size
        self.max_in_flight = max_in_flight
        self.token = token
        self.backoff = backoff

    def __repr__(self):
        return f"ExternalService({self.endpoint!r}, timeout={self.timeout}, batch_size={self.batch_size})"

    def _post(self, texts: list) -> list:
        body = json.dumps({"texts": texts}).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        req = urllib.request.Request(self.endpoint + "/translate", data=body, headers=headers, method="POST")
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            if resp.status != 200:
                raise urllib.error.HTTPError(req.full_url, resp.status, "non-200", resp.headers, None)
            payload = json.loads(resp.read().decode("utf-8"))
        out = payload.get("translations") if isinstance(payload, dict) else None
        if not isinstance(out, list) or len(out) != len(texts):
            raise AlignmentError(f"service returned {len(out) if isinstance(out, list) else 'no'} "
                                 f"translations for {len(texts)} texts")
        return out

    def _batch(self, texts: list) -> list:
        last = None
        for attempt in range(MAX_RETRIES + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                return self._post(texts)
            except (socket.timeout, TimeoutError) as exc:
                last = ServiceTimeout(f"{self.endpoint}: timed out after {self.timeout}s")
                last.__cause__ = exc
            except urllib.error.HTTPError as exc:
                last = ServiceUnreachable(f"{self.endpoint}: HTTP {exc.code}")
                last.__cause__ = exc
            except urllib.error.URLError as exc:
                if isinstance(exc.reason, (socket.timeout, TimeoutError)):
                    last = ServiceTimeout(f"{self.endpoint}: timed out after {self.timeout}s")
                else:
                    last = ServiceUnreachable(f"{self.endpoint}: {exc.reason}")
                last.__cause__ = exc
            except (ConnectionError, json.JSONDecodeError) as exc:
                last = ServiceUnreachable(f"{self.endpoint}: {exc}")
                last.__cause__ = exc
            log.warning("translation request failed (attempt %d): %s", attempt + 1, last)
        raise last

    def good(self, sources: Sequence[Sentence], ids=None) -> list:
        texts = [detokenize(s) for s in sources]
        batches = [texts[i:i + self.batch_size] for i in range(0, len(texts), self.batch_size)]
        if len(batches) == 1 or self.max_in_flight == 1:
            results = [self._batch(b) for b in batches]
        else:
            with ThreadPoolExecutor(max_workers=min(self.max_in_flight, len(batches))) as ex:
                # map yields in submission order whatever the completion order
                results = list(ex.map(self._batch, batches))
        return [tokenize(t) for batch in results for t in batch]


@dataclass
class LocalTuned:
    translator: Translator
    tag = "SMT_NMT"

    def good(self, sources: Sequence[Sentence], ids=None) -> list:
        return self.translator.translate_all(sources)


def good_sentences(provider, sources: Sequence[Sentence], ids: Sequence[int] | None = None) -> list:
    """One good sentence per source, in input order."""
    sources = [tuple(s) for s in sources]
    if not sources:
        raise EmptyInput("no source sentences")
    out = provider.good(sources, ids)
    if len(out) != len(sources):
        raise AlignmentError(f"provider returned {len(out)} sentences for {len(sources)} sources")
    return out
