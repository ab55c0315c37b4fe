"""Contrastive description pools.

Classname-only predictions tell us which classes get mistaken for which:
for every test record the best-ranked wrong class is counted as a rival
of the true class. Each class keeps its top-k rivals, every mined pair
is prompted in both directions ("describe c against a" and "describe a
against c"), and the answers become a classname-free pool with
origin_class metadata. Descriptions that mention either classname are
dropped; a pair whose answer yields nothing usable falls back to one
neutral description so no prompted class ends up silently empty.

The upstream prompt wording is unpublished. DEFAULT_PROMPT_TEMPLATE is
a reconstruction; swap it wholesale via prompt_template / --prompt-file.

All prompts and raw responses are archived next to the pool in
transcript.json for audit.
"""
from __future__ import annotations

import json
import os
import re
import time
from pathlib import Path

from . import storeio
from .errors import ConfigError, DataError, LLMError
from .export import require_template_fields

DEFAULT_PROMPT_TEMPLATE = (
    "What visual features distinguish a {cls} from a {rival} in a photo? "
    "List short phrases, one per line, describing only the {cls}. "
    'Do not use the words "{cls}" or "{rival}" in the phrases.'
)
DEFAULT_NEUTRAL = "a typical example of its kind"
API_KEY_VAR = "DESCSEL_LLM_API_KEY"
BASE_URL_VAR = "DESCSEL_LLM_BASE_URL"
DEFAULT_BASE_URL = "https://api.openai.com/v1"

_BULLET = re.compile(r"^(?:(?:[-*•]+|\d+[.)])\s*)+")


class HttpChatClient:
    """OpenAI-style chat-completions client.

    Credentials come from the environment (DESCSEL_LLM_API_KEY, and
    optionally DESCSEL_LLM_BASE_URL), never from flags or files.
    """

    def __init__(self, model: str, timeout: float = 60.0):
        key = os.environ.get(API_KEY_VAR)
        if not key:
            raise ConfigError(f"set {API_KEY_VAR} to use the http LLM client")
        self.model = model
        self._key = key
        self.base_url = os.environ.get(BASE_URL_VAR, DEFAULT_BASE_URL).rstrip("/")
        self.timeout = timeout
        self.id = f"http/{model}"

    def complete(self, prompt: str) -> str:
        try:
            import requests
        except ImportError as exc:  # pragma: no cover - env dependent
            raise ConfigError(
                "http LLM client needs requests; install the [llm] extra"
            ) from exc
        resp = requests.post(
            f"{self.base_url}/chat/completions",
            headers={"Authorization": f"Bearer {self._key}"},
            json={
                "model": self.model,
                "temperature": 0,
                "messages": [{"role": "user", "content": prompt}],
            },
            timeout=self.timeout,
        )
        if resp.status_code != 200:
            raise LLMError(
                f"chat endpoint returned {resp.status_code}: {resp.text[:200]}"
            )
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise LLMError(f"malformed chat response: {exc}") from exc


class RateLimitedClient:
    """Wrap any client with a minimum call interval and retry loop.

    Retries cover LLMError and OSError (network stacks raise OSError
    subclasses); delays grow as base_delay * 2**attempt. The number of
    attempts the last call took is exposed for the transcript.
    """

    def __init__(
        self,
        inner,
        min_interval: float = 1.0,
        max_attempts: int = 3,
        base_delay: float = 1.0,
        sleep=time.sleep,
        clock=time.monotonic,
    ):
        if max_attempts < 1:
            raise ConfigError(f"max_attempts must be >= 1, got {max_attempts}")
        self.inner = inner
        self.min_interval = float(min_interval)
        self.max_attempts = int(max_attempts)
        self.base_delay = float(base_delay)
        self._sleep = sleep
        self._clock = clock
        self._last_call: float | None = None
        self.last_attempts = 0
        self.id = getattr(inner, "id", type(inner).__name__)

    def _pace(self) -> None:
        if self._last_call is not None:
            wait = self.min_interval - (self._clock() - self._last_call)
            if wait > 0:
                self._sleep(wait)
        self._last_call = self._clock()

    def complete(self, prompt: str) -> str:
        for attempt in range(1, self.max_attempts + 1):
            self._pace()
            try:
                text = self.inner.complete(prompt)
            except (LLMError, OSError):
                self.last_attempts = attempt
                if attempt == self.max_attempts:
                    raise
                self._sleep(self.base_delay * 2 ** (attempt - 1))
                continue
            self.last_attempts = attempt
            return text
        raise AssertionError("unreachable")


# ---------------------------------------------------------------------------
# confusion mining

def mine_confused_pairs(
    records: list[dict], n_classes: int, top_k: int
) -> list[tuple[int, int]]:
    """Ordered (class, rival) pairs to prompt, both directions, sorted.

    For each record the best-ranked class other than the true label
    counts one confusion; each class keeps its top_k rivals by count
    (ties broken by class id). Classes that are never confused with
    anything contribute no pairs of their own.
    """
    if top_k < 1:
        raise ConfigError(f"confusion top-k must be >= 1, got {top_k}")
    weight = [[0] * n_classes for _ in range(n_classes)]
    for record in records:
        label = int(record["label"])
        if not 0 <= label < n_classes:
            raise DataError(f"record label {label} out of range for this store")
        for entry in record.get("top", []):
            rival = int(entry[0])
            if rival == label:
                continue
            if not 0 <= rival < n_classes:
                raise DataError(f"record rival {rival} out of range for this store")
            weight[label][rival] += 1
            break

    pairs: set[tuple[int, int]] = set()
    for c in range(n_classes):
        rivals = sorted(
            (a for a in range(n_classes) if weight[c][a] > 0),
            key=lambda a: (-weight[c][a], a),
        )[:top_k]
        for a in rivals:
            pairs.add((c, a))
            pairs.add((a, c))
    return sorted(pairs)


# ---------------------------------------------------------------------------
# response parsing

def _clean_line(line: str) -> str:
    line = _BULLET.sub("", line.strip())
    line = line.strip().strip('"\'')
    if line.endswith("."):
        line = line[:-1]
    return " ".join(line.split())


def parse_descriptors(raw: str, banned: tuple[str, ...]) -> list[str]:
    """Split an LLM answer into descriptor phrases, order preserved.

    Lines containing any banned name (case-insensitive substring) are
    dropped; that keeps the pool classname-free by construction.
    """
    lowered = [b.lower() for b in banned]
    out = []
    for line in raw.splitlines():
        text = _clean_line(line)
        if not text:
            continue
        if any(b in text.lower() for b in lowered):
            continue
        out.append(text)
    return out


# ---------------------------------------------------------------------------
# pool assembly

def build_contrastive_pool(
    store_dir: str | Path,
    results_path: str | Path,
    client,
    out_dir: str | Path,
    *,
    top_k: int = 3,
    cap: int = 40,
    prompt_template: str = DEFAULT_PROMPT_TEMPLATE,
    neutral: str = DEFAULT_NEUTRAL,
) -> tuple[list[str], list[int]]:
    """Mine, prompt, filter and write pool.json plus transcript.json.

    Returns (texts, origin_class). cap bounds the number of pool
    entries per origin class; duplicates per class are collapsed.
    """
    require_template_fields(prompt_template, ("cls", "rival"), "contrastive prompt")
    if cap < 1:
        raise ConfigError(f"per-class cap must be >= 1, got {cap}")
    classnames = storeio.read_classnames(store_dir)

    results_path = Path(results_path)
    if not results_path.is_file():
        raise DataError(f"results file not found: {results_path}")
    results = json.loads(results_path.read_text())
    records = results.get("records") if isinstance(results, dict) else None
    if not isinstance(records, list):
        raise DataError(f"results file {results_path} has no records")
    setup = (results.get("config") or {}).get("setup")
    if setup not in (None, "cls_only"):
        raise DataError(
            f"confusion mining needs classname-only results, got setup {setup!r}"
        )

    pairs = mine_confused_pairs(records, len(classnames), top_k)
    texts: list[str] = []
    origins: list[int] = []
    seen: set[tuple[int, str]] = set()
    per_class = [0] * len(classnames)
    calls = []
    for c, a in pairs:
        prompt = prompt_template.format(cls=classnames[c], rival=classnames[a])
        raw = client.complete(prompt)
        kept = parse_descriptors(raw, (classnames[c], classnames[a]))
        if not kept:
            if classnames[c].lower() in neutral.lower():
                raise ConfigError(
                    f"neutral description contains classname {classnames[c]!r}; "
                    "pick a different --neutral"
                )
            kept = [neutral]
        for text in kept:
            if (c, text) in seen or per_class[c] >= cap:
                continue
            seen.add((c, text))
            per_class[c] += 1
            texts.append(text)
            origins.append(c)
        calls.append(
            {
                "class": c,
                "rival": a,
                "classname": classnames[c],
                "rival_name": classnames[a],
                "prompt": prompt,
                "response": raw,
                "attempts": getattr(client, "last_attempts", 1),
                "kept": kept,
            }
        )

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    storeio.write_json(out / "pool.json", {"texts": texts, "origin_class": origins})
    storeio.write_json(
        out / "transcript.json",
        {
            "model": getattr(client, "id", type(client).__name__),
            "prompt_template": prompt_template,
            "neutral": neutral,
            "top_k": top_k,
            "cap": cap,
            "pairs": [[c, a] for c, a in pairs],
            "calls": calls,
        },
    )
    return texts, origins
